//! Gibbs sampling over the free atoms of a [`Network`], optionally
//! interleaved with orbital moves that rename interchangeable constants.
//!
//! Two constants are interchangeable when swapping them maps every fixed
//! atom to a fixed atom with the same value and neither appears in a
//! formula. Such swaps generate a group of renamings that leave the world
//! log-weight unchanged, so applying a uniformly drawn element of the group
//! is a valid move for the same stationary distribution.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mln::{EvidenceSet, GroundAtom, InferenceOptions, MlnError, Model, Network};

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha, seed_from_u64)";
pub const DEFAULT_ORBITAL_MOVE_PROBABILITY: f64 = 0.1;
pub const KLD_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid chain configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mln(#[from] MlnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Frequency,
    RaoBlackwell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub orbital_move_probability: f64,
    pub estimator: Estimator,
    /// Iteration counts at which running estimates are recorded.
    pub checkpoints: Vec<usize>,
}

impl ChainConfig {
    /// Plain Gibbs with 10% burn-in and the Rao-Blackwellized estimator.
    pub fn new(iterations: usize, seed: u64) -> ChainConfig {
        ChainConfig {
            iterations,
            burn_in: iterations / 10,
            seed,
            orbital_move_probability: 0.0,
            estimator: Estimator::RaoBlackwell,
            checkpoints: Vec::new(),
        }
    }

    pub fn orbital(mut self, probability: f64) -> ChainConfig {
        self.orbital_move_probability = probability;
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.iterations == 0 {
            return Err(SamplerError::Config("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(SamplerError::Config(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if !(0.0..=1.0).contains(&self.orbital_move_probability) {
            return Err(SamplerError::Config("orbital move probability must lie in [0, 1]".into()));
        }
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.iterations) {
            return Err(SamplerError::Config(format!("checkpoint {c} outside 1..={}", self.iterations)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    pub atoms: Vec<GroundAtom>,
    pub estimates: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub rng_algorithm: &'static str,
}

/// Outcome of one Gibbs update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsUpdate {
    pub atom: usize,
    pub p_true: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Full conditional `Pr(atom = true | rest)`.
pub fn conditional(net: &Network, values: &mut [bool], atom: usize) -> Result<f64, MlnError> {
    match net.local_log_weights(values, atom) {
        [Some(w0), Some(w1)] => Ok(sigmoid(w1 - w0)),
        [None, Some(_)] => Ok(1.0),
        [Some(_), None] => Ok(0.0),
        [None, None] => Err(MlnError::Inconsistent(format!(
            "both values of {} violate a hard formula",
            net.atom_name(net.free_atom(atom))
        ))),
    }
}

/// Resamples one uniformly chosen free atom from its full conditional.
/// Returns `None` when there are no free atoms.
pub fn gibbs_step(net: &Network, values: &mut [bool], rng: &mut impl Rng) -> Result<Option<GibbsUpdate>, MlnError> {
    if values.is_empty() {
        return Ok(None);
    }
    let atom = rng.random_range(0..values.len());
    let p_true = conditional(net, values, atom)?;
    values[atom] = rng.random::<f64>() < p_true;
    Ok(Some(GibbsUpdate { atom, p_true }))
}

/// Classes of interchangeable constants for a conditioned network, and the
/// atom bookkeeping needed to apply renamings to worlds.
#[derive(Debug, Clone)]
pub struct Symmetries {
    classes: Vec<Vec<usize>>,
    /// `(predicate, argument ids)` of each free atom.
    free_atoms: Vec<(usize, Vec<usize>)>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

impl Symmetries {
    pub fn new(model: &Model, net: &Network) -> Symmetries {
        let index = net.index();
        let m = model.domain().len();
        let mut in_formula = vec![false; m];
        for f in model.weighted().iter().map(|w| &w.formula).chain(model.hard()) {
            for c in f.constants() {
                if let Some(i) = model.constant_index(&c) {
                    in_formula[i] = true;
                }
            }
        }
        let decoded: Vec<(usize, Vec<usize>)> = (0..index.len()).map(|g| index.decode(g)).collect();
        let fixed: Vec<Option<bool>> = (0..index.len()).map(|g| net.fixed_value(g)).collect();
        let swap_invariant = |c: usize, d: usize| {
            decoded.iter().enumerate().all(|(g, (pred, args))| {
                if !args.iter().any(|&a| a == c || a == d) {
                    return true;
                }
                let image: Vec<usize> = args.iter().map(|&a| if a == c { d } else if a == d { c } else { a }).collect();
                fixed[index.index_of_ids(*pred, &image)] == fixed[g]
            })
        };
        let mut parent: Vec<usize> = (0..m).collect();
        for c in 0..m {
            for d in c + 1..m {
                if in_formula[c] || in_formula[d] || find(&mut parent, c) == find(&mut parent, d) {
                    continue;
                }
                if swap_invariant(c, d) {
                    let (rc, rd) = (find(&mut parent, c), find(&mut parent, d));
                    parent[rd] = rc;
                }
            }
        }
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); m];
        for c in 0..m {
            let r = find(&mut parent, c);
            by_root[r].push(c);
        }
        let mut classes: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
        classes.sort_unstable_by_key(|c| c[0]);
        let free_atoms = net.free_atoms().iter().map(|&g| decoded[g].clone()).collect();
        Symmetries { classes, free_atoms }
    }

    /// Classes of constant ids, each sorted, ordered by smallest member.
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn is_trivial(&self) -> bool {
        self.classes.iter().all(|c| c.len() == 1)
    }

    /// A uniformly random renaming within each class, as a map over constant ids.
    pub fn random_permutation(&self, rng: &mut impl Rng) -> Vec<usize> {
        let m: usize = self.classes.iter().map(Vec::len).sum();
        let mut perm: Vec<usize> = (0..m).collect();
        for class in &self.classes {
            if class.len() > 1 {
                let mut image = class.clone();
                image.shuffle(rng);
                for (&c, &d) in class.iter().zip(&image) {
                    perm[c] = d;
                }
            }
        }
        perm
    }

    /// The world obtained by renaming constants with `perm`: the atom
    /// `pred(perm(args))` takes the value `pred(args)` had. `perm` must map
    /// each class onto itself.
    pub fn apply(&self, net: &Network, perm: &[usize], values: &[bool]) -> Vec<bool> {
        let index = net.index();
        let mut out = vec![false; values.len()];
        for (local, (pred, args)) in self.free_atoms.iter().enumerate() {
            let image: Vec<usize> = args.iter().map(|&a| perm[a]).collect();
            let target = net
                .local_of(index.index_of_ids(*pred, &image))
                .expect("renaming within a class maps free atoms to free atoms");
            out[target] = values[local];
        }
        out
    }
}

/// Applies a uniformly random within-class renaming to `values`.
pub fn orbital_step(net: &Network, symmetries: &Symmetries, values: &mut Vec<bool>, rng: &mut impl Rng) {
    if symmetries.is_trivial() {
        return;
    }
    let perm = symmetries.random_permutation(rng);
    *values = symmetries.apply(net, &perm, values);
}

enum Query {
    Fixed(f64),
    Free(usize),
}

/// Runs one chain over `net` and estimates the marginals of `atoms`.
/// `symmetries` is needed only when the orbital move probability is positive.
pub fn sample_network(
    net: &Network,
    symmetries: Option<&Symmetries>,
    atoms: &[GroundAtom],
    config: &ChainConfig,
) -> Result<MarginalEstimate, SamplerError> {
    config.validate()?;
    if config.orbital_move_probability > 0.0 && symmetries.is_none() {
        return Err(SamplerError::Config("orbital moves need symmetry classes".into()));
    }
    let queries: Vec<Query> = atoms
        .iter()
        .map(|a| {
            let g = net.index().index_of(a).ok_or_else(|| MlnError::invalid(format!("unknown atom {a}")))?;
            Ok(match net.local_of(g) {
                Some(l) => Query::Free(l),
                None => Query::Fixed(if net.fixed_value(g) == Some(true) { 1.0 } else { 0.0 }),
            })
        })
        .collect::<Result<_, MlnError>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let preferred: Vec<bool> = (0..net.num_free()).map(|_| rng.random()).collect();
    let mut values = net
        .find_consistent(&preferred)
        .ok_or_else(|| MlnError::Inconsistent("no world satisfies the hard formulas".into()))?;

    let mut sums = vec![0.0; atoms.len()];
    let mut samples = 0usize;
    let mut checkpoints = config.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let mut next_checkpoint = checkpoints.iter().peekable();
    let mut snapshots = Vec::with_capacity(checkpoints.len());

    let current = |sums: &[f64], samples: usize, values: &[bool]| -> Vec<f64> {
        queries
            .iter()
            .zip(sums)
            .map(|(q, s)| match *q {
                Query::Fixed(v) => v,
                Query::Free(l) if samples == 0 => f64::from(u8::from(values[l])),
                Query::Free(_) => s / samples as f64,
            })
            .collect()
    };

    for it in 1..=config.iterations {
        if let Some(sym) = symmetries {
            if config.orbital_move_probability > 0.0 && rng.random_bool(config.orbital_move_probability) {
                orbital_step(net, sym, &mut values, &mut rng);
            }
        }
        let update = gibbs_step(net, &mut values, &mut rng)?;
        if it > config.burn_in {
            samples += 1;
            for (q, s) in queries.iter().zip(sums.iter_mut()) {
                if let Query::Free(l) = *q {
                    *s += match (config.estimator, update) {
                        (Estimator::RaoBlackwell, Some(u)) if u.atom == l => u.p_true,
                        _ => f64::from(u8::from(values[l])),
                    };
                }
            }
        }
        while next_checkpoint.peek().is_some_and(|&&c| c == it) {
            next_checkpoint.next();
            snapshots.push(Snapshot {
                iteration: it,
                estimates: current(&sums, samples, &values),
            });
        }
    }
    Ok(MarginalEstimate {
        atoms: atoms.to_vec(),
        estimates: current(&sums, samples, &values),
        snapshots,
        rng_algorithm: RNG_ALGORITHM,
    })
}

/// Grounds `model` under `evidence` and estimates the marginals of `atoms`.
pub fn estimate_marginals(
    model: &Model,
    evidence: &EvidenceSet,
    atoms: &[GroundAtom],
    config: &ChainConfig,
    opts: &InferenceOptions,
) -> Result<MarginalEstimate, SamplerError> {
    for a in atoms {
        model.check_atom(a)?;
    }
    let net = Network::new(model, evidence, opts)?;
    let sym = (config.orbital_move_probability > 0.0).then(|| Symmetries::new(model, &net));
    sample_network(&net, sym.as_ref(), atoms, config)
}

/// Mean Bernoulli KL divergence `KL(p || q)` over atoms. Both `p` and `q`
/// are clamped to `[KLD_EPSILON, 1 - KLD_EPSILON]`, so identical inputs give 0.
pub fn kld(reference: &[f64], estimate: &[f64]) -> f64 {
    assert_eq!(reference.len(), estimate.len(), "query sets differ");
    if reference.is_empty() {
        return 0.0;
    }
    let clamp = |x: f64| x.clamp(KLD_EPSILON, 1.0 - KLD_EPSILON);
    reference
        .iter()
        .zip(estimate)
        .map(|(&p, &q)| {
            let (p, q) = (clamp(p), clamp(q));
            p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
        })
        .sum::<f64>()
        / reference.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mln::exact_marginals;

    fn atoms(names: &[&str]) -> Vec<GroundAtom> {
        names.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn kld_values() {
        let expect = 0.8 * 1.6f64.ln() + 0.2 * 0.4f64.ln();
        assert!((kld(&[0.8], &[0.5]) - expect).abs() < 1e-12);
        assert!((kld(&[0.8], &[0.5]) - 0.19274).abs() < 1e-5);
        assert_eq!(kld(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_eq!(kld(&[0.3, 1.0], &[0.3, 1.0]), 0.0);
        assert!(kld(&[1.0], &[0.0]).is_finite());
    }

    #[test]
    fn conditional_examples() {
        let m = Model::parse("domain = a\npred s/1\n").unwrap();
        let net = Network::new(&m, &EvidenceSet::new(), &InferenceOptions::default()).unwrap();
        for v in [false, true] {
            assert_eq!(conditional(&net, &mut [v], 0).unwrap(), 0.5);
        }

        let m = Model::parse("domain = a\npred q/1\nhard q(a)\n").unwrap();
        let opts = InferenceOptions {
            propagate_units: false,
            ..Default::default()
        };
        let net = Network::new(&m, &EvidenceSet::new(), &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut values = vec![true];
        for _ in 0..20 {
            gibbs_step(&net, &mut values, &mut rng).unwrap();
            assert!(values[0]);
        }

        let w = 1.7;
        let m = Model::parse(&format!("domain = a\npred s/1\npred t/1\n{w} s(a) <=> t(a)\n")).unwrap();
        let net = Network::new(&m, &EvidenceSet::new(), &InferenceOptions::default()).unwrap();
        let s = net.local_of(net.index().index_of(&"s(a)".parse().unwrap()).unwrap()).unwrap();
        let mut values = vec![true, true];
        assert!((conditional(&net, &mut values, s).unwrap() - sigmoid(w)).abs() < 1e-12);
        let mut values = vec![false, false];
        assert!((conditional(&net, &mut values, s).unwrap() - sigmoid(-w)).abs() < 1e-12);
    }

    #[test]
    fn forced_atom_estimates_one() {
        let m = Model::parse("domain = a, b\npred q/1\nhard q(a)\n0.4 q(X)\n").unwrap();
        for propagate_units in [true, false] {
            let opts = InferenceOptions {
                propagate_units,
                ..Default::default()
            };
            for estimator in [Estimator::Frequency, Estimator::RaoBlackwell] {
                let cfg = ChainConfig {
                    estimator,
                    ..ChainConfig::new(2000, 3)
                };
                let est = estimate_marginals(&m, &EvidenceSet::new(), &atoms(&["q(a)"]), &cfg, &opts).unwrap();
                assert_eq!(est.estimates, [1.0]);
            }
        }
    }

    #[test]
    fn uniform_model_estimates_half() {
        let m = Model::parse("domain = a, b\npred s/1\n").unwrap();
        let q = atoms(&["s(a)", "s(b)"]);
        for estimator in [Estimator::Frequency, Estimator::RaoBlackwell] {
            let cfg = ChainConfig {
                estimator,
                ..ChainConfig::new(10_000, 11)
            };
            let est = estimate_marginals(&m, &EvidenceSet::new(), &q, &cfg, &InferenceOptions::default()).unwrap();
            for p in est.estimates {
                assert!((p - 0.5).abs() < 0.03, "{p}");
            }
        }
    }

    #[test]
    fn weighted_model_matches_exact() {
        let m = Model::parse(
            "domain = a, b\npred s/1\npred l/2\n1.2 s(X) ^ l(X,Y) => s(Y)\n-0.7 s(X)\n0.5 l(X,Y) => l(Y,X)\n",
        )
        .unwrap();
        let ev = EvidenceSet::parse("l(a,b)\n", &m).unwrap();
        let q = atoms(&["s(a)", "s(b)", "l(b,a)", "l(a,a)"]);
        let opts = InferenceOptions::default();
        let exact = exact_marginals(&m, &ev, &q, &opts).unwrap();
        for (seed, orbital) in [(5, 0.0), (6, 0.2)] {
            let cfg = ChainConfig::new(50_000, seed).orbital(orbital);
            let est = estimate_marginals(&m, &ev, &q, &cfg, &opts).unwrap();
            for (e, x) in est.estimates.iter().zip(&exact) {
                assert!((e - x).abs() < 0.02, "{e} vs {x}");
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let m = Model::parse("domain = a, b, c\npred s/1\n0.3 s(X)\n").unwrap();
        let q = atoms(&["s(a)", "s(c)"]);
        let cfg = ChainConfig {
            checkpoints: vec![10, 100, 500],
            ..ChainConfig::new(500, 42).orbital(0.5)
        };
        let opts = InferenceOptions::default();
        let a = estimate_marginals(&m, &EvidenceSet::new(), &q, &cfg, &opts).unwrap();
        let b = estimate_marginals(&m, &EvidenceSet::new(), &q, &cfg, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.snapshots.len(), 3);
        assert_eq!(a.snapshots[2].estimates, a.estimates);
        let c = estimate_marginals(&m, &EvidenceSet::new(), &q, &ChainConfig { seed: 43, ..cfg }, &opts).unwrap();
        assert_ne!(a.estimates, c.estimates);
    }

    #[test]
    fn config_validation() {
        let bad = ChainConfig {
            burn_in: 10,
            ..ChainConfig::new(10, 0)
        };
        assert!(bad.validate().is_err());
        assert!(ChainConfig::new(10, 0).orbital(1.5).validate().is_err());
        let cp = ChainConfig {
            checkpoints: vec![11],
            ..ChainConfig::new(10, 0)
        };
        assert!(cp.validate().is_err());
        assert!(ChainConfig::new(10, 0).validate().is_ok());
    }

    #[test]
    fn symmetry_classes_follow_evidence() {
        let m = Model::parse("domain = a, b, c, d, e\npred s/1\npred l/2\npred t/1\n1.0 s(X) ^ l(X,Y) => s(Y)\n0.5 t(X)\n").unwrap();
        let ev = EvidenceSet::parse("s(a)\ns(b)\n!s(c)\n!s(d)\n!s(e)\nl(a,a)\nl(b,b)\n", &m).unwrap();
        let net = Network::new(&m, &ev, &InferenceOptions::default()).unwrap();
        let sym = Symmetries::new(&m, &net);
        assert_eq!(sym.classes(), [vec![0, 1], vec![2, 3, 4]]);

        let m2 = Model::parse("domain = a, b, c\npred s/1\n1.0 s(a) => s(X)\n").unwrap();
        let net2 = Network::new(&m2, &EvidenceSet::new(), &InferenceOptions::default()).unwrap();
        assert_eq!(Symmetries::new(&m2, &net2).classes(), [vec![0], vec![1, 2]]);

        let m3 = Model::parse("domain = a, b\npred l/2\n").unwrap();
        let ev3 = EvidenceSet::parse("l(a,b)\n!l(b,a)\n", &m3).unwrap();
        let net3 = Network::new(&m3, &ev3, &InferenceOptions::default()).unwrap();
        let sym3 = Symmetries::new(&m3, &net3);
        assert!(sym3.is_trivial());
        let mut values = vec![true, false];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        orbital_step(&net3, &sym3, &mut values, &mut rng);
        assert_eq!(values, [true, false]);
    }

    #[test]
    fn orbital_moves_preserve_weight() {
        let m = Model::parse(
            "domain = a, b, c, d\npred s/1\npred l/2\npred t/1\n1.1 s(X) ^ l(X,Y) => s(Y)\n-0.6 t(X) v s(X)\n0.9 l(X,Y) => l(Y,X)\n",
        )
        .unwrap();
        let ev = EvidenceSet::parse("t(a)\nt(b)\nt(c)\n!t(d)\n", &m).unwrap();
        let net = Network::new(&m, &ev, &InferenceOptions::default()).unwrap();
        let sym = Symmetries::new(&m, &net);
        assert_eq!(sym.classes(), [vec![0, 1, 2], vec![3]]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let identity: Vec<usize> = (0..4).collect();
        for _ in 0..200 {
            let values: Vec<bool> = (0..net.num_free()).map(|_| rng.random()).collect();
            assert_eq!(sym.apply(&net, &identity, &values), values);
            let perm = sym.random_permutation(&mut rng);
            let moved = sym.apply(&net, &perm, &values);
            assert_eq!(net.log_weight(moved.as_slice()), net.log_weight(values.as_slice()));
        }
    }
}
