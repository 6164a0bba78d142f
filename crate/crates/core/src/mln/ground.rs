use std::collections::HashMap;

use super::formula::{Formula, Term};
use super::model::{GroundAtom, Model};
use super::MlnError;

/// Dense numbering of every ground atom of a model: predicates in declaration
/// order, arguments in row-major order over the domain.
#[derive(Debug, Clone)]
pub struct AtomIndex {
    preds: Vec<(String, usize, usize)>,
    by_name: HashMap<String, usize>,
    domain: Vec<String>,
    total: usize,
}

impl AtomIndex {
    pub fn new(model: &Model) -> AtomIndex {
        let m = model.domain().len();
        let mut preds = Vec::new();
        let mut by_name = HashMap::new();
        let mut offset = 0;
        for (i, (name, arity)) in model.predicates().enumerate() {
            preds.push((name.to_string(), arity, offset));
            by_name.insert(name.to_string(), i);
            offset += m.pow(arity as u32);
        }
        AtomIndex {
            preds,
            by_name,
            domain: model.domain().to_vec(),
            total: offset,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn domain_size(&self) -> usize {
        self.domain.len()
    }

    pub fn index_of_ids(&self, pred: usize, args: &[usize]) -> usize {
        let (_, arity, offset) = &self.preds[pred];
        debug_assert_eq!(*arity, args.len());
        let m = self.domain.len();
        offset + args.iter().fold(0, |acc, &a| acc * m + a)
    }

    pub fn index_of(&self, atom: &GroundAtom) -> Option<usize> {
        let &p = self.by_name.get(&atom.pred)?;
        if self.preds[p].1 != atom.args.len() {
            return None;
        }
        let ids: Option<Vec<usize>> = atom
            .args
            .iter()
            .map(|c| self.domain.iter().position(|d| d == c))
            .collect();
        Some(self.index_of_ids(p, &ids?))
    }

    /// Predicate number and constant ids of atom `idx`.
    pub fn decode(&self, idx: usize) -> (usize, Vec<usize>) {
        let p = self
            .preds
            .iter()
            .rposition(|&(_, _, off)| off <= idx)
            .expect("index in range");
        let (_, arity, offset) = &self.preds[p];
        let m = self.domain.len();
        let mut code = idx - offset;
        let mut args = vec![0; *arity];
        for slot in (0..*arity).rev() {
            args[slot] = code % m;
            code /= m;
        }
        (p, args)
    }

    pub fn atom(&self, idx: usize) -> GroundAtom {
        let (p, args) = self.decode(idx);
        GroundAtom {
            pred: self.preds[p].0.clone(),
            args: args.into_iter().map(|a| self.domain[a].clone()).collect(),
        }
    }

    pub fn predicate_id(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn predicate_name(&self, id: usize) -> &str {
        &self.preds[id].0
    }
}

/// Truth assignment readable by atom number.
pub trait Valuation {
    fn value(&self, atom: u32) -> bool;
}

impl Valuation for [bool] {
    #[inline]
    fn value(&self, atom: u32) -> bool {
        self[atom as usize]
    }
}

impl Valuation for Vec<bool> {
    #[inline]
    fn value(&self, atom: u32) -> bool {
        self[atom as usize]
    }
}

/// Bit `i` of the word is atom `i`.
impl Valuation for u64 {
    #[inline]
    fn value(&self, atom: u32) -> bool {
        (self >> atom) & 1 == 1
    }
}

/// A quantifier-free formula over numbered ground atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundFormula {
    Const(bool),
    Atom(u32),
    Not(Box<GroundFormula>),
    And(Vec<GroundFormula>),
    Or(Vec<GroundFormula>),
    Implies(Box<GroundFormula>, Box<GroundFormula>),
    Iff(Box<GroundFormula>, Box<GroundFormula>),
}

impl GroundFormula {
    pub fn eval<V: Valuation + ?Sized>(&self, v: &V) -> bool {
        match self {
            GroundFormula::Const(b) => *b,
            GroundFormula::Atom(a) => v.value(*a),
            GroundFormula::Not(x) => !x.eval(v),
            GroundFormula::And(xs) => xs.iter().all(|x| x.eval(v)),
            GroundFormula::Or(xs) => xs.iter().any(|x| x.eval(v)),
            GroundFormula::Implies(a, b) => !a.eval(v) || b.eval(v),
            GroundFormula::Iff(a, b) => a.eval(v) == b.eval(v),
        }
    }

    /// Three-valued evaluation under a partial assignment.
    pub fn eval_partial(&self, v: &dyn Fn(u32) -> Option<bool>) -> Option<bool> {
        match self {
            GroundFormula::Const(b) => Some(*b),
            GroundFormula::Atom(a) => v(*a),
            GroundFormula::Not(x) => x.eval_partial(v).map(|b| !b),
            GroundFormula::And(xs) => {
                let mut unknown = false;
                for x in xs {
                    match x.eval_partial(v) {
                        Some(false) => return Some(false),
                        None => unknown = true,
                        Some(true) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            GroundFormula::Or(xs) => {
                let mut unknown = false;
                for x in xs {
                    match x.eval_partial(v) {
                        Some(true) => return Some(true),
                        None => unknown = true,
                        Some(false) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(false)
                }
            }
            GroundFormula::Implies(a, b) => match (a.eval_partial(v), b.eval_partial(v)) {
                (Some(false), _) | (_, Some(true)) => Some(true),
                (Some(true), Some(false)) => Some(false),
                _ => None,
            },
            GroundFormula::Iff(a, b) => match (a.eval_partial(v), b.eval_partial(v)) {
                (Some(x), Some(y)) => Some(x == y),
                _ => None,
            },
        }
    }

    /// Substitutes known atom values and folds constants.
    pub fn simplify(&self, known: &dyn Fn(u32) -> Option<bool>) -> GroundFormula {
        use GroundFormula as G;
        match self {
            G::Const(b) => G::Const(*b),
            G::Atom(a) => match known(*a) {
                Some(b) => G::Const(b),
                None => G::Atom(*a),
            },
            G::Not(x) => negate(x.simplify(known)),
            G::And(xs) => {
                let mut out = Vec::with_capacity(xs.len());
                for x in xs {
                    match x.simplify(known) {
                        G::Const(false) => return G::Const(false),
                        G::Const(true) => {}
                        G::And(inner) => push_unique(&mut out, inner),
                        other => push_unique(&mut out, vec![other]),
                    }
                }
                match out.len() {
                    0 => G::Const(true),
                    1 => out.pop().unwrap(),
                    _ => G::And(out),
                }
            }
            G::Or(xs) => {
                let mut out = Vec::with_capacity(xs.len());
                for x in xs {
                    match x.simplify(known) {
                        G::Const(true) => return G::Const(true),
                        G::Const(false) => {}
                        G::Or(inner) => push_unique(&mut out, inner),
                        other => push_unique(&mut out, vec![other]),
                    }
                }
                match out.len() {
                    0 => G::Const(false),
                    1 => out.pop().unwrap(),
                    _ => G::Or(out),
                }
            }
            G::Implies(a, b) => match (a.simplify(known), b.simplify(known)) {
                (G::Const(false), _) | (_, G::Const(true)) => G::Const(true),
                (G::Const(true), b) => b,
                (a, G::Const(false)) => negate(a),
                (a, b) => G::Implies(Box::new(a), Box::new(b)),
            },
            G::Iff(a, b) => match (a.simplify(known), b.simplify(known)) {
                (G::Const(x), other) | (other, G::Const(x)) => {
                    if x {
                        other
                    } else {
                        negate(other)
                    }
                }
                (a, b) => G::Iff(Box::new(a), Box::new(b)),
            },
        }
    }

    /// `Some((atom, value))` when the formula is a single literal.
    pub fn as_literal(&self) -> Option<(u32, bool)> {
        match self {
            GroundFormula::Atom(a) => Some((*a, true)),
            GroundFormula::Not(x) => match **x {
                GroundFormula::Atom(a) => Some((a, false)),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn collect_atoms(&self, out: &mut Vec<u32>) {
        match self {
            GroundFormula::Const(_) => {}
            GroundFormula::Atom(a) => {
                if !out.contains(a) {
                    out.push(*a)
                }
            }
            GroundFormula::Not(x) => x.collect_atoms(out),
            GroundFormula::And(xs) | GroundFormula::Or(xs) => xs.iter().for_each(|x| x.collect_atoms(out)),
            GroundFormula::Implies(a, b) | GroundFormula::Iff(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    pub fn remap(&self, map: &dyn Fn(u32) -> u32) -> GroundFormula {
        use GroundFormula as G;
        match self {
            G::Const(b) => G::Const(*b),
            G::Atom(a) => G::Atom(map(*a)),
            G::Not(x) => G::Not(Box::new(x.remap(map))),
            G::And(xs) => G::And(xs.iter().map(|x| x.remap(map)).collect()),
            G::Or(xs) => G::Or(xs.iter().map(|x| x.remap(map)).collect()),
            G::Implies(a, b) => G::Implies(Box::new(a.remap(map)), Box::new(b.remap(map))),
            G::Iff(a, b) => G::Iff(Box::new(a.remap(map)), Box::new(b.remap(map))),
        }
    }
}

fn push_unique(out: &mut Vec<GroundFormula>, items: Vec<GroundFormula>) {
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
}

fn negate(f: GroundFormula) -> GroundFormula {
    match f {
        GroundFormula::Const(b) => GroundFormula::Const(!b),
        GroundFormula::Not(x) => *x,
        other => GroundFormula::Not(Box::new(other)),
    }
}

/// Number of groundings of `f` over a domain of size `m`.
pub(crate) fn grounding_count(f: &Formula, m: usize) -> usize {
    m.saturating_pow(f.variables().len() as u32)
}

/// Calls `emit` with every grounding of `f`, substituting each assignment of
/// constants to its variables.
pub(crate) fn for_each_grounding(f: &Formula, model: &Model, index: &AtomIndex, mut emit: impl FnMut(GroundFormula)) {
    let vars = f.variables();
    let m = model.domain().len();
    let count = m.pow(vars.len() as u32);
    let mut binding = vec![0usize; vars.len()];
    for code in 0..count {
        let mut c = code;
        for slot in (0..vars.len()).rev() {
            binding[slot] = c % m;
            c /= m;
        }
        emit(instantiate(f, &vars, &binding, model, index));
    }
}

fn instantiate(f: &Formula, vars: &[String], binding: &[usize], model: &Model, index: &AtomIndex) -> GroundFormula {
    use GroundFormula as G;
    let rec = |x: &Formula| instantiate(x, vars, binding, model, index);
    match f {
        Formula::Atom(a) => {
            let p = index.predicate_id(&a.pred).expect("validated predicate");
            let ids: Vec<usize> = a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => binding[vars.iter().position(|x| x == v).expect("collected variable")],
                    Term::Const(c) => model.constant_index(c).expect("validated constant"),
                })
                .collect();
            G::Atom(index.index_of_ids(p, &ids) as u32)
        }
        Formula::Not(x) => G::Not(Box::new(rec(x))),
        Formula::And(xs) => G::And(xs.iter().map(rec).collect()),
        Formula::Or(xs) => G::Or(xs.iter().map(rec).collect()),
        Formula::Implies(a, b) => G::Implies(Box::new(rec(a)), Box::new(rec(b))),
        Formula::Iff(a, b) => G::Iff(Box::new(rec(a)), Box::new(rec(b))),
    }
}

/// All groundings of a model, before any evidence is applied.
#[derive(Debug, Clone)]
pub struct Grounding {
    pub index: AtomIndex,
    /// `(weight, groundings)` per weighted formula, in model order.
    pub weighted: Vec<(f64, Vec<GroundFormula>)>,
    /// Groundings per hard formula, in model order.
    pub hard: Vec<Vec<GroundFormula>>,
}

impl Grounding {
    pub fn len(&self) -> usize {
        self.weighted.iter().map(|(_, g)| g.len()).sum::<usize>() + self.hard.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Log-weight of a complete assignment to every ground atom: the sum over
    /// weighted formulas of `weight * (satisfied groundings)`, or `None` when
    /// some hard grounding is violated.
    pub fn log_weight<V: Valuation + ?Sized>(&self, world: &V) -> Option<f64> {
        if self.hard.iter().flatten().any(|g| !g.eval(world)) {
            return None;
        }
        Some(
            self.weighted
                .iter()
                .map(|(w, gs)| w * gs.iter().filter(|g| g.eval(world)).count() as f64)
                .sum(),
        )
    }
}

/// Grounds every formula of `model`: one grounding per assignment of domain
/// constants to the formula's variables.
pub fn ground(model: &Model, cap: usize) -> Result<Grounding, MlnError> {
    let m = model.domain().len();
    if m == 0 {
        return Err(MlnError::EmptyDomain);
    }
    let count = model
        .weighted()
        .iter()
        .map(|w| &w.formula)
        .chain(model.hard())
        .map(|f| grounding_count(f, m))
        .fold(0usize, usize::saturating_add);
    if count > cap {
        return Err(MlnError::GroundingCap { count, cap });
    }
    let index = AtomIndex::new(model);
    let collect = |f: &Formula| {
        let mut out = Vec::new();
        for_each_grounding(f, model, &index, |g| out.push(g));
        out
    };
    let weighted = model.weighted().iter().map(|w| (w.weight, collect(&w.formula))).collect();
    let hard = model.hard().iter().map(collect).collect();
    Ok(Grounding { index, weighted, hard })
}
