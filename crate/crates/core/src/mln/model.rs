use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;

use super::formula::{Formula, Term};
use super::MlnError;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFormula {
    pub weight: f64,
    pub formula: Formula,
}

/// A Markov logic network: a finite domain, predicate signatures, weighted
/// formulas and hard formulas. Free variables are universally quantified
/// over the whole domain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Model {
    domain: Vec<String>,
    predicates: IndexMap<String, usize>,
    weighted: Vec<WeightedFormula>,
    hard: Vec<Formula>,
}

fn valid_constant(c: &str) -> bool {
    !c.is_empty()
        && c != "v"
        && !c.starts_with(|ch: char| ch.is_ascii_uppercase())
        && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

fn valid_predicate(p: &str) -> bool {
    p != "v"
        && p.starts_with(|ch: char| ch.is_ascii_lowercase())
        && p.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

impl Model {
    pub fn new<S: AsRef<str>>(domain: &[S]) -> Result<Model, MlnError> {
        let mut m = Model::default();
        m.set_domain(domain.iter().map(|s| s.as_ref().to_string()).collect())?;
        Ok(m)
    }

    fn set_domain(&mut self, domain: Vec<String>) -> Result<(), MlnError> {
        for (i, c) in domain.iter().enumerate() {
            if !valid_constant(c) {
                return Err(MlnError::invalid(format!("`{c}` is not a valid constant name")));
            }
            if domain[..i].contains(c) {
                return Err(MlnError::invalid(format!("constant `{c}` listed twice")));
            }
        }
        self.domain = domain;
        Ok(())
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn constant_index(&self, c: &str) -> Option<usize> {
        self.domain.iter().position(|d| d == c)
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, usize)> + '_ {
        self.predicates.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn arity(&self, pred: &str) -> Option<usize> {
        self.predicates.get(pred).copied()
    }

    pub fn weighted(&self) -> &[WeightedFormula] {
        &self.weighted
    }

    pub fn hard(&self) -> &[Formula] {
        &self.hard
    }

    pub fn declare(&mut self, name: &str, arity: usize) -> Result<(), MlnError> {
        if !valid_predicate(name) {
            return Err(MlnError::invalid(format!("`{name}` is not a valid predicate name")));
        }
        match self.predicates.get(name) {
            Some(&a) if a == arity => Ok(()),
            Some(&a) => Err(MlnError::invalid(format!(
                "predicate `{name}` already declared with arity {a}"
            ))),
            None => {
                self.predicates.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }

    pub fn add_weighted(&mut self, weight: f64, formula: Formula) -> Result<(), MlnError> {
        if !weight.is_finite() {
            return Err(MlnError::invalid(format!("weight {weight} is not finite")));
        }
        self.check_formula(&formula)?;
        self.weighted.push(WeightedFormula { weight, formula });
        Ok(())
    }

    pub fn add_hard(&mut self, formula: Formula) -> Result<(), MlnError> {
        self.check_formula(&formula)?;
        self.hard.push(formula);
        Ok(())
    }

    fn check_formula(&self, f: &Formula) -> Result<(), MlnError> {
        let mut err = None;
        f.visit_atoms(&mut |a| {
            if err.is_some() {
                return;
            }
            match self.predicates.get(&a.pred) {
                None => err = Some(MlnError::UnknownPredicate { name: a.pred.clone() }),
                Some(&ar) if ar != a.args.len() => {
                    err = Some(MlnError::ArityMismatch {
                        name: a.pred.clone(),
                        expected: ar,
                        found: a.args.len(),
                    })
                }
                Some(_) => {
                    for t in &a.args {
                        if let Term::Const(c) = t {
                            if self.constant_index(c).is_none() {
                                err = Some(MlnError::UnknownConstant { name: c.clone() });
                                return;
                            }
                        }
                    }
                }
            }
        });
        err.map_or(Ok(()), Err)
    }

    /// Checks a ground atom against the signature and domain.
    pub fn check_atom(&self, atom: &GroundAtom) -> Result<(), MlnError> {
        match self.predicates.get(&atom.pred) {
            None => Err(MlnError::UnknownPredicate { name: atom.pred.clone() }),
            Some(&ar) if ar != atom.args.len() => Err(MlnError::ArityMismatch {
                name: atom.pred.clone(),
                expected: ar,
                found: atom.args.len(),
            }),
            Some(_) => match atom.args.iter().find(|c| self.constant_index(c).is_none()) {
                Some(c) => Err(MlnError::UnknownConstant { name: c.clone() }),
                None => Ok(()),
            },
        }
    }

    /// Every ground atom of `pred`, in row-major argument order.
    pub fn ground_atoms_of(&self, pred: &str) -> Vec<GroundAtom> {
        let Some(arity) = self.arity(pred) else {
            return Vec::new();
        };
        let m = self.domain.len();
        let count = m.pow(arity as u32);
        (0..count)
            .map(|mut code| {
                let mut args = vec![String::new(); arity];
                for slot in (0..arity).rev() {
                    args[slot] = self.domain[code % m].clone();
                    code /= m;
                }
                GroundAtom {
                    pred: pred.to_string(),
                    args,
                }
            })
            .collect()
    }

    /// Parses the model text format.
    ///
    /// ```text
    /// domain = a, b, c
    /// pred linkto/2
    /// pred studentpage/1
    /// 1.5 studentpage(X) ^ linkto(X,Y) => studentpage(Y)
    /// hard linkto(X,X) => studentpage(X)
    /// ```
    ///
    /// Lines starting with `#` or `//` are comments. Formulas may refer to
    /// predicates declared later in the file.
    pub fn parse(text: &str) -> Result<Model, MlnError> {
        let mut model = Model::default();
        let mut domain_seen = false;
        let mut pending: Vec<(usize, Option<f64>, Formula)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("//") {
                continue;
            }
            let at = |e: MlnError| e.at_line(line_no);
            if let Some(rest) = line.strip_prefix("domain") {
                let Some(list) = rest.trim_start().strip_prefix('=') else {
                    return Err(MlnError::syntax(line_no, "expected `domain = c1, c2, ...`"));
                };
                if domain_seen {
                    return Err(MlnError::syntax(line_no, "domain declared twice"));
                }
                domain_seen = true;
                let consts: Vec<String> = list
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect();
                model.set_domain(consts).map_err(at)?;
            } else if let Some(rest) = line.strip_prefix("pred ") {
                let decl = rest.trim();
                let Some((name, arity)) = decl.split_once('/') else {
                    return Err(MlnError::syntax(line_no, "expected `pred name/arity`"));
                };
                let arity: usize = arity
                    .trim()
                    .parse()
                    .map_err(|_| MlnError::syntax(line_no, format!("bad arity `{}`", arity.trim())))?;
                model.declare(name.trim(), arity).map_err(at)?;
            } else if let Some(rest) = line.strip_prefix("hard ") {
                let f = Formula::parse(rest).map_err(|m| MlnError::syntax(line_no, m))?;
                pending.push((line_no, None, f));
            } else {
                let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
                let weight: f64 = head
                    .parse()
                    .map_err(|_| MlnError::syntax(line_no, format!("expected a weight or keyword, found `{head}`")))?;
                let f = Formula::parse(rest).map_err(|m| MlnError::syntax(line_no, m))?;
                pending.push((line_no, Some(weight), f));
            }
        }
        for (line_no, weight, f) in pending {
            match weight {
                Some(w) => model.add_weighted(w, f),
                None => model.add_hard(f),
            }
            .map_err(|e| e.at_line(line_no))?;
        }
        Ok(model)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("domain = {}\n", self.domain.join(", "));
        for (p, a) in &self.predicates {
            out.push_str(&format!("pred {p}/{a}\n"));
        }
        for w in &self.weighted {
            out.push_str(&format!("{} {}\n", w.weight, w.formula));
        }
        for h in &self.hard {
            out.push_str(&format!("hard {h}\n"));
        }
        out
    }
}

/// A predicate applied to domain constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub pred: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new<S: AsRef<str>>(pred: &str, args: &[S]) -> GroundAtom {
        GroundAtom {
            pred: pred.to_string(),
            args: args.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for GroundAtom {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let f = Formula::parse(s)?;
        let Formula::Atom(a) = f else {
            return Err(format!("`{s}` is not an atom"));
        };
        let mut args = Vec::with_capacity(a.args.len());
        for t in a.args {
            match t {
                Term::Const(c) => args.push(c),
                Term::Var(v) => return Err(format!("ground atom contains variable `{v}`")),
            }
        }
        Ok(GroundAtom { pred: a.pred, args })
    }
}

/// A ground atom or its negation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: GroundAtom,
    pub positive: bool,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("!")?;
        }
        write!(f, "{}", self.atom)
    }
}

impl FromStr for Literal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (positive, rest) = match s.strip_prefix('!') {
            Some(r) => (false, r.trim_start()),
            None => (true, s),
        };
        Ok(Literal {
            atom: rest.parse()?,
            positive,
        })
    }
}

/// Truth values for a set of ground atoms, kept in insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvidenceSet {
    assignments: IndexMap<GroundAtom, bool>,
}

impl EvidenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an assignment; assigning an atom twice is an error.
    pub fn insert(&mut self, atom: GroundAtom, value: bool) -> Result<(), MlnError> {
        if self.assignments.contains_key(&atom) {
            return Err(MlnError::DuplicateEvidence { atom: atom.to_string() });
        }
        self.assignments.insert(atom, value);
        Ok(())
    }

    pub fn get(&self, atom: &GroundAtom) -> Option<bool> {
        self.assignments.get(atom).copied()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroundAtom, bool)> + '_ {
        self.assignments.iter().map(|(a, &v)| (a, v))
    }

    pub fn literals(&self) -> impl Iterator<Item = Literal> + '_ {
        self.iter().map(|(a, v)| Literal {
            atom: a.clone(),
            positive: v,
        })
    }

    /// Removes every assignment to `pred` and returns them.
    pub fn remove_predicate(&mut self, pred: &str) -> Vec<(GroundAtom, bool)> {
        let removed: Vec<(GroundAtom, bool)> = self
            .assignments
            .iter()
            .filter(|(a, _)| a.pred == pred)
            .map(|(a, &v)| (a.clone(), v))
            .collect();
        self.assignments.retain(|a, _| a.pred != pred);
        removed
    }

    /// Adds all assignments of `other`; overlapping atoms are an error.
    pub fn extend(&mut self, other: &EvidenceSet) -> Result<(), MlnError> {
        for (a, v) in other.iter() {
            self.insert(a.clone(), v)?;
        }
        Ok(())
    }

    /// Parses one literal per line (`atom` or `!atom`), checked against `model`.
    pub fn parse(text: &str, model: &Model) -> Result<EvidenceSet, MlnError> {
        let mut ev = EvidenceSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("//") {
                continue;
            }
            let lit: Literal = line.parse().map_err(|m: String| MlnError::syntax(line_no, m))?;
            model.check_atom(&lit.atom).map_err(|e| e.at_line(line_no))?;
            ev.insert(lit.atom, lit.positive).map_err(|e| e.at_line(line_no))?;
        }
        Ok(ev)
    }

    pub fn to_text(&self) -> String {
        self.literals().map(|l| format!("{l}\n")).collect()
    }
}

impl FromIterator<(GroundAtom, bool)> for EvidenceSet {
    /// Later duplicates are ignored.
    fn from_iter<T: IntoIterator<Item = (GroundAtom, bool)>>(iter: T) -> Self {
        let mut ev = EvidenceSet::new();
        for (a, v) in iter {
            ev.assignments.entry(a).or_insert(v);
        }
        ev
    }
}
