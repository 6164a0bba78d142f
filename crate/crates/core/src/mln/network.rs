use super::ground::{for_each_grounding, grounding_count, AtomIndex, GroundFormula, Valuation};
use super::model::{EvidenceSet, GroundAtom, Model};
use super::{MlnError, DEFAULT_GROUNDING_CAP, DEFAULT_MAX_FREE_ATOMS};

#[derive(Debug, Clone, Copy)]
pub struct InferenceOptions {
    pub grounding_cap: usize,
    pub max_free_atoms: usize,
    /// Fix atoms forced by hard formulas that reduce to a single literal.
    pub propagate_units: bool,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions {
            grounding_cap: DEFAULT_GROUNDING_CAP,
            max_free_atoms: DEFAULT_MAX_FREE_ATOMS,
            propagate_units: true,
        }
    }
}

#[derive(Debug, Clone)]
struct Factor {
    formula: usize,
    weight: f64,
    body: GroundFormula,
}

/// One assignment to the free (non-evidence) atoms of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub values: Vec<bool>,
    pub log_weight: f64,
}

/// A ground model conditioned on evidence.
///
/// Evidence atoms (and, with unit propagation, atoms forced by hard
/// formulas) are substituted out. The remaining free atoms are renumbered
/// `0..num_free()` and every factor and hard constraint refers to those local
/// numbers only.
#[derive(Debug, Clone)]
pub struct Network {
    index: AtomIndex,
    fixed: Vec<Option<bool>>,
    free: Vec<usize>,
    local: Vec<Option<usize>>,
    weights: Vec<f64>,
    /// Groundings per weighted formula that are satisfied regardless of the free atoms.
    constant_sat: Vec<usize>,
    factors: Vec<Factor>,
    hard: Vec<GroundFormula>,
    atom_factors: Vec<Vec<usize>>,
    atom_hard: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(model: &Model, evidence: &EvidenceSet, opts: &InferenceOptions) -> Result<Network, MlnError> {
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
        if count > opts.grounding_cap {
            return Err(MlnError::GroundingCap {
                count,
                cap: opts.grounding_cap,
            });
        }
        let index = AtomIndex::new(model);
        let mut fixed = vec![None; index.len()];
        for (atom, value) in evidence.iter() {
            model.check_atom(atom)?;
            let i = index.index_of(atom).expect("checked atom");
            fixed[i] = Some(value);
        }

        let mut weighted: Vec<(usize, f64, GroundFormula)> = Vec::new();
        let mut constant_sat = vec![0usize; model.weighted().len()];
        let mut hard: Vec<GroundFormula> = Vec::new();
        {
            let known = |a: u32| fixed[a as usize];
            for (fi, wf) in model.weighted().iter().enumerate() {
                for_each_grounding(&wf.formula, model, &index, |g| match g.simplify(&known) {
                    GroundFormula::Const(true) => constant_sat[fi] += 1,
                    GroundFormula::Const(false) => {}
                    body => weighted.push((fi, wf.weight, body)),
                });
            }
            let mut violated = None;
            for h in model.hard() {
                for_each_grounding(h, model, &index, |g| match g.simplify(&known) {
                    GroundFormula::Const(true) => {}
                    GroundFormula::Const(false) => violated = Some(h.to_string()),
                    body => hard.push(body),
                });
            }
            if let Some(h) = violated {
                return Err(MlnError::Inconsistent(format!("a grounding of `{h}` is violated")));
            }
        }

        if opts.propagate_units {
            loop {
                let mut changed = false;
                for h in &hard {
                    if let Some((a, v)) = h.as_literal() {
                        match fixed[a as usize] {
                            None => {
                                fixed[a as usize] = Some(v);
                                changed = true;
                            }
                            Some(x) if x != v => {
                                return Err(MlnError::Inconsistent(format!(
                                    "{} is forced both ways",
                                    index.atom(a as usize)
                                )))
                            }
                            Some(_) => {}
                        }
                    }
                }
                if !changed {
                    break;
                }
                let known = |a: u32| fixed[a as usize];
                let mut next = Vec::with_capacity(hard.len());
                for h in &hard {
                    match h.simplify(&known) {
                        GroundFormula::Const(true) => {}
                        GroundFormula::Const(false) => {
                            return Err(MlnError::Inconsistent("hard formulas contradict each other".into()))
                        }
                        body => next.push(body),
                    }
                }
                hard = next;
                let mut keep = Vec::with_capacity(weighted.len());
                for (fi, w, g) in weighted {
                    match g.simplify(&known) {
                        GroundFormula::Const(true) => constant_sat[fi] += 1,
                        GroundFormula::Const(false) => {}
                        body => keep.push((fi, w, body)),
                    }
                }
                weighted = keep;
            }
        }

        let free: Vec<usize> = (0..index.len()).filter(|&i| fixed[i].is_none()).collect();
        let mut local = vec![None; index.len()];
        for (l, &g) in free.iter().enumerate() {
            local[g] = Some(l);
        }
        let to_local = |a: u32| local[a as usize].expect("free atom") as u32;
        let factors: Vec<Factor> = weighted
            .into_iter()
            .map(|(formula, weight, g)| Factor {
                formula,
                weight,
                body: g.remap(&to_local),
            })
            .collect();
        let hard: Vec<GroundFormula> = hard.iter().map(|h| h.remap(&to_local)).collect();

        let mut atom_factors = vec![Vec::new(); free.len()];
        let mut scratch = Vec::new();
        for (fi, f) in factors.iter().enumerate() {
            scratch.clear();
            f.body.collect_atoms(&mut scratch);
            for &a in &scratch {
                atom_factors[a as usize].push(fi);
            }
        }
        let mut atom_hard = vec![Vec::new(); free.len()];
        for (hi, h) in hard.iter().enumerate() {
            scratch.clear();
            h.collect_atoms(&mut scratch);
            for &a in &scratch {
                atom_hard[a as usize].push(hi);
            }
        }

        Ok(Network {
            index,
            fixed,
            free,
            local,
            weights: model.weighted().iter().map(|w| w.weight).collect(),
            constant_sat,
            factors,
            hard,
            atom_factors,
            atom_hard,
        })
    }

    pub fn index(&self) -> &AtomIndex {
        &self.index
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Global atom number of free atom `local`.
    pub fn free_atom(&self, local: usize) -> usize {
        self.free[local]
    }

    pub fn free_atoms(&self) -> &[usize] {
        &self.free
    }

    pub fn local_of(&self, global: usize) -> Option<usize> {
        self.local[global]
    }

    /// Value of an atom fixed by evidence or propagation.
    pub fn fixed_value(&self, global: usize) -> Option<bool> {
        self.fixed[global]
    }

    pub fn atom_name(&self, global: usize) -> GroundAtom {
        self.index.atom(global)
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn num_hard(&self) -> usize {
        self.hard.len()
    }

    /// Log-weight contributed by groundings that no free atom can change.
    pub fn constant_log_weight(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.constant_sat)
            .map(|(w, &n)| w * n as f64)
            .sum()
    }

    pub fn satisfies_hard<V: Valuation + ?Sized>(&self, values: &V) -> bool {
        self.hard.iter().all(|h| h.eval(values))
    }

    /// Sum of weights of the free-atom factors satisfied by `values`.
    pub fn factor_log_weight<V: Valuation + ?Sized>(&self, values: &V) -> f64 {
        self.factors
            .iter()
            .filter(|f| f.body.eval(values))
            .map(|f| f.weight)
            .sum()
    }

    /// Satisfied groundings per weighted formula, including constant ones.
    pub fn satisfied_counts<V: Valuation + ?Sized>(&self, values: &V) -> Vec<usize> {
        let mut counts = self.constant_sat.clone();
        for f in &self.factors {
            if f.body.eval(values) {
                counts[f.formula] += 1;
            }
        }
        counts
    }

    /// `sum_f weight_f * satisfied_f`, summed in formula order, or `None` if a
    /// hard constraint is violated.
    pub fn log_weight<V: Valuation + ?Sized>(&self, values: &V) -> Option<f64> {
        if !self.satisfies_hard(values) {
            return None;
        }
        Some(
            self.weights
                .iter()
                .zip(self.satisfied_counts(values))
                .map(|(w, n)| w * n as f64)
                .sum(),
        )
    }

    pub fn world(&self, values: Vec<bool>) -> Option<World> {
        assert_eq!(values.len(), self.free.len());
        let log_weight = self.log_weight(values.as_slice())?;
        Some(World { values, log_weight })
    }

    /// Complete assignment to every ground atom: fixed values plus `values`
    /// for the free atoms.
    pub fn full_assignment(&self, values: &[bool]) -> Vec<bool> {
        self.fixed
            .iter()
            .enumerate()
            .map(|(g, f)| f.unwrap_or_else(|| values[self.local[g].expect("free")]))
            .collect()
    }

    /// Log-weights of the two settings of free atom `atom` with every other
    /// atom held at `values`; `None` for a setting violating a hard constraint.
    /// `values[atom]` is restored before returning.
    pub fn local_log_weights(&self, values: &mut [bool], atom: usize) -> [Option<f64>; 2] {
        let saved = values[atom];
        let mut out = [None, None];
        for (slot, setting) in [false, true].into_iter().enumerate() {
            values[atom] = setting;
            let ok = self.atom_hard[atom].iter().all(|&h| self.hard[h].eval(&*values));
            if ok {
                out[slot] = Some(
                    self.atom_factors[atom]
                        .iter()
                        .filter(|&&f| self.factors[f].body.eval(&*values))
                        .map(|&f| self.factors[f].weight)
                        .sum(),
                );
            }
        }
        values[atom] = saved;
        out
    }

    /// Searches for an assignment satisfying every hard constraint, trying
    /// `preferred` values first.
    pub fn find_consistent(&self, preferred: &[bool]) -> Option<Vec<bool>> {
        if self.satisfies_hard(preferred) {
            return Some(preferred.to_vec());
        }
        let n = self.free.len();
        let mut partial: Vec<Option<bool>> = vec![None; n];
        fn dfs(net: &Network, partial: &mut Vec<Option<bool>>, preferred: &[bool], i: usize) -> bool {
            if i == partial.len() {
                return true;
            }
            for v in [preferred[i], !preferred[i]] {
                partial[i] = Some(v);
                let ok = net.atom_hard[i].iter().all(|&h| {
                    let p = &*partial;
                    net.hard[h].eval_partial(&|a| p[a as usize]) != Some(false)
                });
                if ok && dfs(net, partial, preferred, i + 1) {
                    return true;
                }
            }
            partial[i] = None;
            false
        }
        if dfs(self, &mut partial, preferred, 0) {
            Some(partial.into_iter().map(|v| v.expect("assigned")).collect())
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evidence_is_substituted_out() {
        let m = Model::parse("domain = a, b\npred s/1\npred l/2\n1.0 s(X) ^ l(X,Y) => s(Y)\n").unwrap();
        let ev = EvidenceSet::parse("l(a,a)\n!l(a,b)\nl(b,a)\n!l(b,b)\n", &m).unwrap();
        let net = Network::new(&m, &ev, &InferenceOptions::default()).unwrap();
        assert_eq!(net.num_free(), 2);
        // s(a)^l(a,b)=>s(b) and s(b)^l(b,b)=>s(b) are always satisfied
        assert_eq!(net.constant_log_weight(), 2.0);
        assert_eq!(net.num_factors(), 2);
    }

    #[test]
    fn unit_propagation_fixes_forced_atoms() {
        let m = Model::parse("domain = a, b\npred p/2\npred q/1\npred r/1\nhard p(X,Y) <=> q(X) ^ r(Y)\n").unwrap();
        let ev = EvidenceSet::parse("q(a)\n!q(b)\nr(a)\nr(b)\n", &m).unwrap();
        let net = Network::new(&m, &ev, &InferenceOptions::default()).unwrap();
        assert_eq!(net.num_free(), 0);
        let idx = net.index();
        assert_eq!(net.fixed_value(idx.index_of(&GroundAtom::new("p", &["a", "b"])).unwrap()), Some(true));
        assert_eq!(net.fixed_value(idx.index_of(&GroundAtom::new("p", &["b", "a"])).unwrap()), Some(false));

        let no_prop = InferenceOptions {
            propagate_units: false,
            ..Default::default()
        };
        let net = Network::new(&m, &ev, &no_prop).unwrap();
        assert_eq!(net.num_free(), 4);
        assert_eq!(net.num_hard(), 4);
    }

    #[test]
    fn contradictions_are_reported() {
        let m = Model::parse("domain = a\npred q/1\nhard q(a)\nhard !q(a)\n").unwrap();
        let err = Network::new(&m, &EvidenceSet::new(), &InferenceOptions::default()).unwrap_err();
        assert!(matches!(err, MlnError::Inconsistent(_)));
        let m = Model::parse("domain = a\npred q/1\nhard q(a)\n").unwrap();
        let ev = EvidenceSet::parse("!q(a)\n", &m).unwrap();
        assert!(matches!(
            Network::new(&m, &ev, &InferenceOptions::default()),
            Err(MlnError::Inconsistent(_))
        ));
    }

    #[test]
    fn find_consistent_respects_constraints() {
        let m = Model::parse("domain = a, b, c\npred s/1\nhard s(a) v s(b) v s(c)\nhard !s(a) v !s(b)\nhard s(c) => s(a)\n").unwrap();
        let net = Network::new(&m, &EvidenceSet::new(), &InferenceOptions::default()).unwrap();
        let start = vec![false; net.num_free()];
        let found = net.find_consistent(&start).unwrap();
        assert!(net.satisfies_hard(found.as_slice()));
    }
}
