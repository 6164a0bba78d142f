use rayon::prelude::*;

use super::model::{EvidenceSet, GroundAtom, Literal, Model};
use super::network::{InferenceOptions, Network};
use super::MlnError;

/// Streaming `log(sum(exp(x_i)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        } else {
            self.sum += other.sum * (other.max - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

#[derive(Clone)]
struct Masses {
    total: LogSumExp,
    when_true: Vec<LogSumExp>,
}

impl Network {
    /// Exact marginals `Pr(atom = true | evidence)` for free atoms given by
    /// local number, by enumerating every assignment of the free atoms.
    pub fn enumerate_marginals(&self, locals: &[usize], max_free_atoms: usize) -> Result<Vec<f64>, MlnError> {
        let n = self.num_free();
        if n > max_free_atoms || n >= 63 {
            return Err(MlnError::EnumerationCap {
                atoms: n,
                cap: max_free_atoms,
            });
        }
        let worlds: u64 = 1 << n;
        let chunk_bits = n.saturating_sub(8).max(n.min(10));
        let chunk = 1u64 << chunk_bits;
        let chunks = worlds.div_ceil(chunk);
        let base = self.constant_log_weight();
        let empty = Masses {
            total: LogSumExp::default(),
            when_true: vec![LogSumExp::default(); locals.len()],
        };
        let parts: Vec<Masses> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = empty.clone();
                for w in c * chunk..((c + 1) * chunk).min(worlds) {
                    if !self.satisfies_hard(&w) {
                        continue;
                    }
                    let lw = base + self.factor_log_weight(&w);
                    acc.total.add(lw);
                    for (slot, &q) in locals.iter().enumerate() {
                        if (w >> q) & 1 == 1 {
                            acc.when_true[slot].add(lw);
                        }
                    }
                }
                acc
            })
            .collect();
        let mut all = empty;
        for p in &parts {
            all.total.merge(&p.total);
            for (a, b) in all.when_true.iter_mut().zip(&p.when_true) {
                a.merge(b);
            }
        }
        let log_z = all.total.value();
        if log_z == f64::NEG_INFINITY {
            return Err(MlnError::Inconsistent("no world satisfies the hard formulas".into()));
        }
        Ok(all.when_true.iter().map(|t| (t.value() - log_z).exp()).collect())
    }

    /// Log partition function over the free atoms.
    pub fn log_partition(&self, max_free_atoms: usize) -> Result<f64, MlnError> {
        let n = self.num_free();
        if n > max_free_atoms || n >= 63 {
            return Err(MlnError::EnumerationCap {
                atoms: n,
                cap: max_free_atoms,
            });
        }
        let base = self.constant_log_weight();
        let mut acc = LogSumExp::default();
        for w in 0..(1u64 << n) {
            if self.satisfies_hard(&w) {
                acc.add(base + self.factor_log_weight(&w));
            }
        }
        if acc.value() == f64::NEG_INFINITY {
            return Err(MlnError::Inconsistent("no world satisfies the hard formulas".into()));
        }
        Ok(acc.value())
    }
}

/// `Pr(atom = true | evidence)` for each atom. Atoms fixed by evidence (or by
/// hard formulas) get 0 or 1.
pub fn exact_marginals(
    model: &Model,
    evidence: &EvidenceSet,
    atoms: &[GroundAtom],
    opts: &InferenceOptions,
) -> Result<Vec<f64>, MlnError> {
    let net = Network::new(model, evidence, opts)?;
    let mut locals = Vec::new();
    let mut plan = Vec::with_capacity(atoms.len());
    for a in atoms {
        model.check_atom(a)?;
        let g = net.index().index_of(a).expect("checked atom");
        match net.local_of(g) {
            Some(l) => {
                plan.push(Err(locals.len()));
                locals.push(l);
            }
            None => plan.push(Ok(if net.fixed_value(g) == Some(true) { 1.0 } else { 0.0 })),
        }
    }
    // still checks consistency when every query is fixed
    let probs = net.enumerate_marginals(&locals, opts.max_free_atoms)?;
    Ok(plan
        .into_iter()
        .map(|p| match p {
            Ok(v) => v,
            Err(slot) => probs[slot],
        })
        .collect())
}

/// `Pr(query | evidence)` by enumeration.
pub fn exact_query(model: &Model, evidence: &EvidenceSet, query: &Literal, opts: &InferenceOptions) -> Result<f64, MlnError> {
    let p = exact_marginals(model, evidence, std::slice::from_ref(&query.atom), opts)?[0];
    Ok(if query.positive { p } else { 1.0 - p })
}
