//! Rewriting binary evidence as unary evidence on fresh predicates.
//!
//! Given a factorization `P ~ Q R^T` of the evidence on `p/2`, the model is
//! extended with the hard formula
//!
//! ```text
//! p(X,Y) <=> (p__q1(X) ^ p__r1(Y)) v ... v (p__qn(X) ^ p__rn(Y))
//! ```
//!
//! and the binary literals of `p` are replaced by full unary evidence on the
//! `2n` fresh predicates: `p__qi(c)` is true iff `Q[c][i] = 1` and
//! `p__ri(c)` is true iff `R[c][i] = 1`. Conditioning on that unary evidence
//! is the same as conditioning on the reconstruction `Q R^T`.

use std::collections::HashSet;

use thiserror::Error;

use crate::boolmat::{BoolMatError, BoolMatrix};
use crate::factorize::Factorization;
use crate::mln::{EvidenceSet, Formula, GroundAtom, MlnError, Model};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("factorization has no row/column labels; constants are needed to emit evidence")]
    MissingLabels,
    #[error("predicate name `{0}` already exists")]
    NameCollision(String),
    #[error("`{0}` is not a valid constant name")]
    InvalidConstant(String),
    #[error("predicate `{0}` must be declared with arity 2")]
    NotBinary(String),
    #[error("factorization labels must list exactly the model domain on each axis")]
    DomainMismatch,
    #[error("evidence on `{pred}` is incomplete: {missing} of {total} atoms unassigned")]
    IncompleteEvidence { pred: String, missing: usize, total: usize },
    #[error("{0} is both known true and known false")]
    Overlap(String),
    #[error(transparent)]
    Mln(#[from] MlnError),
    #[error(transparent)]
    Matrix(#[from] BoolMatError),
}

pub fn q_name(pred: &str, i: usize) -> String {
    format!("{pred}__q{i}")
}

pub fn r_name(pred: &str, i: usize) -> String {
    format!("{pred}__r{i}")
}

/// The hard formula tying `pred` to `n` pairs of unary predicates.
/// For `n = 0` it is `!pred(X,Y)`.
pub fn product_formula(pred: &str, n: usize) -> Formula {
    let p = Formula::atom(pred, &["X", "Y"]);
    if n == 0 {
        return Formula::not(p);
    }
    let terms: Vec<Formula> = (1..=n)
        .map(|i| Formula::And(vec![Formula::atom(&q_name(pred, i), &["X"]), Formula::atom(&r_name(pred, i), &["Y"])]))
        .collect();
    let rhs = if terms.len() == 1 {
        terms.into_iter().next().unwrap()
    } else {
        Formula::Or(terms)
    };
    Formula::iff(p, rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub predicate: String,
    pub added_formulas: Vec<Formula>,
    pub unary_evidence: EvidenceSet,
    pub fresh_predicates: Vec<(String, usize)>,
    pub rank_used: usize,
    pub row_constants: Vec<String>,
    pub col_constants: Vec<String>,
}

fn valid_constant(c: &str) -> bool {
    !c.is_empty()
        && c != "v"
        && !c.starts_with(|ch: char| ch.is_ascii_uppercase())
        && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

/// Encodes the evidence represented by `f` as a hard formula plus unary
/// literals. When `model` is given, fresh names are checked against its
/// predicates.
pub fn encode_evidence(pred: &str, f: &Factorization, model: Option<&Model>) -> Result<ReductionResult, ReductionError> {
    let (Some(rows), Some(cols)) = (f.row_labels(), f.col_labels()) else {
        return Err(ReductionError::MissingLabels);
    };
    if let Some(bad) = rows.iter().chain(cols).find(|c| !valid_constant(c)) {
        return Err(ReductionError::InvalidConstant(bad.clone()));
    }
    let n = f.rank();
    let mut fresh = Vec::with_capacity(2 * n);
    for i in 1..=n {
        fresh.push((q_name(pred, i), 1));
        fresh.push((r_name(pred, i), 1));
    }
    if let Some(m) = model {
        if m.arity(pred) != Some(2) {
            return Err(ReductionError::NotBinary(pred.to_string()));
        }
        if let Some((name, _)) = fresh.iter().find(|(name, _)| m.arity(name).is_some()) {
            return Err(ReductionError::NameCollision(name.clone()));
        }
    }
    let mut evidence = EvidenceSet::new();
    for (i, pair) in f.pairs().iter().enumerate() {
        let qn = q_name(pred, i + 1);
        for (c, name) in rows.iter().enumerate() {
            evidence.insert(GroundAtom::new(&qn, &[name]), pair.q.get(c))?;
        }
        let rn = r_name(pred, i + 1);
        for (c, name) in cols.iter().enumerate() {
            evidence.insert(GroundAtom::new(&rn, &[name]), pair.r.get(c))?;
        }
    }
    Ok(ReductionResult {
        predicate: pred.to_string(),
        added_formulas: vec![product_formula(pred, n)],
        unary_evidence: evidence,
        fresh_predicates: fresh,
        rank_used: n,
        row_constants: rows.to_vec(),
        col_constants: cols.to_vec(),
    })
}

impl ReductionResult {
    /// Predicate declarations and hard formulas, in the model text format,
    /// ready to append to an existing model file.
    pub fn model_fragment(&self) -> String {
        let mut out = String::new();
        for (name, arity) in &self.fresh_predicates {
            out.push_str(&format!("pred {name}/{arity}\n"));
        }
        for f in &self.added_formulas {
            out.push_str(&format!("hard {f}\n"));
        }
        out
    }

    pub fn evidence_text(&self) -> String {
        self.unary_evidence.to_text()
    }

    /// The model extended with the fresh predicates and hard formulas.
    pub fn extend_model(&self, model: &Model) -> Result<Model, ReductionError> {
        if model.arity(&self.predicate) != Some(2) {
            return Err(ReductionError::NotBinary(self.predicate.clone()));
        }
        let mut out = model.clone();
        for (name, arity) in &self.fresh_predicates {
            if model.arity(name).is_some() {
                return Err(ReductionError::NameCollision(name.clone()));
            }
            out.declare(name, *arity)?;
        }
        for f in &self.added_formulas {
            out.add_hard(f.clone())?;
        }
        Ok(out)
    }

    /// The `p` relation implied by the unary evidence: entry `(x, y)` is the
    /// right-hand side of the product formula evaluated on the evidence.
    pub fn implied_relation(&self) -> BoolMatrix {
        let lookup = |name: String, c: &str| {
            self.unary_evidence
                .get(&GroundAtom::new(&name, &[c]))
                .expect("full unary evidence")
        };
        let m = BoolMatrix::from_fn(self.row_constants.len(), self.col_constants.len(), |x, y| {
            (1..=self.rank_used).any(|i| {
                lookup(q_name(&self.predicate, i), &self.row_constants[x])
                    && lookup(r_name(&self.predicate, i), &self.col_constants[y])
            })
        });
        m.with_labels(self.row_constants.clone(), self.col_constants.clone())
            .expect("labels came from a valid factorization")
    }
}

/// Number of distinct unary-evidence signatures `(q1(c), ..., qn(c))` over
/// row constants and `(r1(c), ..., rn(c))` over column constants. Constants
/// sharing a signature are interchangeable as far as this evidence goes.
pub fn symmetry_signature_classes(result: &ReductionResult) -> (usize, usize) {
    let count = |consts: &[String], name: fn(&str, usize) -> String| {
        consts
            .iter()
            .map(|c| {
                (1..=result.rank_used)
                    .map(|i| {
                        result
                            .unary_evidence
                            .get(&GroundAtom::new(&name(&result.predicate, i), &[c]))
                            .expect("full unary evidence")
                    })
                    .collect::<Vec<bool>>()
            })
            .collect::<HashSet<_>>()
            .len()
    };
    (count(&result.row_constants, q_name), count(&result.col_constants, r_name))
}

/// The full evidence on binary predicate `pred` as a matrix labelled with the
/// model domain.
pub fn evidence_matrix(model: &Model, evidence: &EvidenceSet, pred: &str) -> Result<BoolMatrix, ReductionError> {
    if model.arity(pred) != Some(2) {
        return Err(ReductionError::NotBinary(pred.to_string()));
    }
    let dom = model.domain();
    let m = dom.len();
    let mut missing = 0;
    let mat = BoolMatrix::from_fn(m, m, |i, j| match evidence.get(&GroundAtom::new(pred, &[&dom[i], &dom[j]])) {
        Some(v) => v,
        None => {
            missing += 1;
            false
        }
    });
    if missing > 0 {
        return Err(ReductionError::IncompleteEvidence {
            pred: pred.to_string(),
            missing,
            total: m * m,
        });
    }
    Ok(mat.with_labels(dom.to_vec(), dom.to_vec())?)
}

/// Replaces the full binary evidence on `pred` by the unary encoding of `f`.
/// Returns the extended model and the new evidence; other evidence is kept.
pub fn reduce(
    model: &Model,
    evidence: &EvidenceSet,
    pred: &str,
    f: &Factorization,
) -> Result<(Model, EvidenceSet, ReductionResult), ReductionError> {
    let result = encode_evidence(pred, f, Some(model))?;
    let dom: HashSet<&String> = model.domain().iter().collect();
    let same = |labels: &[String]| labels.len() == dom.len() && labels.iter().all(|l| dom.contains(l));
    if !same(&result.row_constants) || !same(&result.col_constants) {
        return Err(ReductionError::DomainMismatch);
    }
    let extended = result.extend_model(model)?;
    let mut ev = evidence.clone();
    ev.remove_predicate(pred);
    ev.extend(&result.unary_evidence)?;
    Ok((extended, ev, result))
}

/// Partial evidence on a binary predicate split into two fully observed
/// relations `p__1` (known true) and `p__0` (known false).
#[derive(Debug, Clone, PartialEq)]
pub struct PartialEncoding {
    pub true_predicate: String,
    pub false_predicate: String,
    pub formulas: Vec<Formula>,
    pub known_true: BoolMatrix,
    pub known_false: BoolMatrix,
}

/// Encodes partial evidence on `pred` over `domain`: atoms in `known_true`
/// become 1s of `known_true`, atoms in `known_false` 1s of `known_false`.
/// The two matrices can then be factorized independently.
pub fn encode_partial_evidence(
    pred: &str,
    domain: &[String],
    known_true: &[GroundAtom],
    known_false: &[GroundAtom],
) -> Result<PartialEncoding, ReductionError> {
    let pos = |a: &GroundAtom| -> Result<(usize, usize), ReductionError> {
        if a.pred != pred || a.args.len() != 2 {
            return Err(MlnError::ArityMismatch {
                name: a.pred.clone(),
                expected: 2,
                found: a.args.len(),
            }
            .into());
        }
        let find = |c: &String| {
            domain
                .iter()
                .position(|d| d == c)
                .ok_or_else(|| ReductionError::from(MlnError::UnknownConstant { name: c.clone() }))
        };
        Ok((find(&a.args[0])?, find(&a.args[1])?))
    };
    let m = domain.len();
    let mut t = BoolMatrix::zeros(m, m);
    let mut fl = BoolMatrix::zeros(m, m);
    for a in known_true {
        let (i, j) = pos(a)?;
        t.set(i, j, true);
    }
    for a in known_false {
        let (i, j) = pos(a)?;
        if t.get(i, j) {
            return Err(ReductionError::Overlap(a.to_string()));
        }
        fl.set(i, j, true);
    }
    let true_predicate = format!("{pred}__1");
    let false_predicate = format!("{pred}__0");
    let p = Formula::atom(pred, &["X", "Y"]);
    let formulas = vec![
        Formula::implies(Formula::atom(&true_predicate, &["X", "Y"]), p.clone()),
        Formula::implies(Formula::atom(&false_predicate, &["X", "Y"]), Formula::not(p)),
    ];
    Ok(PartialEncoding {
        true_predicate,
        false_predicate,
        formulas,
        known_true: t.with_labels(domain.to_vec(), domain.to_vec())?,
        known_false: fl.with_labels(domain.to_vec(), domain.to_vec())?,
    })
}
