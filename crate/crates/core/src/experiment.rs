//! Synthetic data and the sweeps behind the error, KLD and equivalence
//! curves. Every function here is deterministic given its seeds; sweeps run
//! their jobs in parallel and return rows in a fixed order.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::boolmat::{boolean_product, BoolMatError, BoolMatrix};
use crate::factorize::{
    asso_factorize, exact_boolean_rank, optimal_factorization, refine, truncate, AssoParams, ExactOptions, Factorization,
    FactorizeError,
};
use crate::mln::{exact_marginals, EvidenceSet, GroundAtom, InferenceOptions, MlnError, Model, Network};
use crate::reduction::{evidence_matrix, reduce, ReductionError};
use crate::sampler::{kld, sample_network, ChainConfig, SamplerError, Symmetries, RNG_ALGORITHM};

/// Expected fraction of ones in a noise-free synthetic matrix.
pub const SYNTHETIC_FILL: f64 = 0.35;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Matrix(#[from] BoolMatError),
    #[error(transparent)]
    Factorize(#[from] FactorizeError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Mln(#[from] MlnError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMatrix {
    pub matrix: BoolMatrix,
    /// Factors of the matrix before noise was applied.
    pub planted: Factorization,
    pub flips: usize,
    pub header: Vec<String>,
}

impl SyntheticMatrix {
    pub fn to_text(&self) -> String {
        self.matrix.to_text_with_header(&self.header)
    }
}

/// Per-entry density of the planted factors such that `Q R^T` has expected
/// fill [`SYNTHETIC_FILL`].
pub fn factor_density(planted_rank: usize) -> f64 {
    if planted_rank == 0 {
        return 0.0;
    }
    (1.0 - (1.0 - SYNTHETIC_FILL).powf(1.0 / planted_rank as f64)).sqrt()
}

/// An `m x m` matrix `Q R^T` of planted rank at most `planted_rank` with
/// each entry then flipped independently with probability `noise`.
/// Constants are labelled `c1..cm`.
pub fn gen_synthetic(m: usize, planted_rank: usize, noise: f64, seed: u64) -> Result<SyntheticMatrix, ExperimentError> {
    if !(0.0..0.5).contains(&noise) {
        return Err(ExperimentError::Invalid(format!("noise must lie in [0, 0.5), got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = factor_density(planted_rank);
    let mut draw = |rows: usize| BoolMatrix::from_fn(rows, planted_rank, |_, _| rng.random_bool(d));
    let q = draw(m);
    let r = draw(m);
    let clean = boolean_product(&q, &r)?;
    let mut matrix = clean.clone();
    let mut flips = 0;
    for i in 0..m {
        for j in 0..m {
            if rng.random_bool(noise) {
                matrix.set(i, j, !matrix.get(i, j));
                flips += 1;
            }
        }
    }
    let labels: Vec<String> = (1..=m).map(|i| format!("c{i}")).collect();
    let matrix = matrix.with_labels(labels.clone(), labels.clone())?;
    let mut planted = Factorization::from_factors(&q, &r)?;
    planted.set_labels(labels.clone(), labels)?;
    planted.attach_target(&clean)?;
    let header = vec![
        format!("synthetic m={m} planted_rank={planted_rank} noise={noise} seed={seed}"),
        format!("factor_density={d:.6} target_fill={SYNTHETIC_FILL} flips={flips}"),
        format!("rng={RNG_ALGORITHM}"),
    ];
    Ok(SyntheticMatrix {
        matrix,
        planted,
        flips,
        header,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveMethod {
    /// One greedy run at the largest rank, truncated to each smaller rank.
    Asso(AssoParams),
    /// A greedy run at each rank followed by alternating refinement.
    AssoRefined { params: AssoParams, sweeps: usize },
    /// Exhaustive optimum at each rank; small matrices only.
    Optimal { cap: u128 },
}

fn check_ranks(ranks: &[usize]) -> Result<(), ExperimentError> {
    if ranks.is_empty() {
        return Err(ExperimentError::Invalid("at least one rank is required".into()));
    }
    if ranks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Invalid("ranks must be strictly increasing".into()));
    }
    Ok(())
}

/// Reconstruction error of a rank-`n` factorization of `p` for each rank.
pub fn error_curve(p: &BoolMatrix, ranks: &[usize], method: CurveMethod) -> Result<Vec<(usize, usize)>, ExperimentError> {
    check_ranks(ranks)?;
    match method {
        CurveMethod::Asso(params) => {
            let top = *ranks.last().expect("nonempty");
            let f = asso_factorize(p, AssoParams { max_rank: top, ..params })?;
            ranks
                .iter()
                .map(|&n| {
                    let t = truncate(&f, n.min(f.rank()))?;
                    Ok((n, t.error_count().expect("target attached")))
                })
                .collect()
        }
        CurveMethod::AssoRefined { params, sweeps } => ranks
            .par_iter()
            .map(|&n| {
                let f = asso_factorize(p, AssoParams { max_rank: n, ..params })?;
                let f = refine(p, &f, sweeps)?;
                Ok((n, f.error_count().expect("target attached")))
            })
            .collect(),
        CurveMethod::Optimal { cap } => ranks
            .par_iter()
            .map(|&n| {
                let f = optimal_factorization(p, n, cap)?;
                Ok((n, f.error_count().expect("target attached")))
            })
            .collect(),
    }
}

/// The evidence approximation used for a rank-`n` sweep point: the exact
/// minimum factorization when the Boolean rank is at most `n` and the exact
/// solver succeeds, otherwise the greedy factorization of rank at most `n`.
pub fn approximate_evidence(p: &BoolMatrix, n: usize, asso: AssoParams) -> Result<Factorization, ExperimentError> {
    let mut f = match exact_boolean_rank(p, ExactOptions::default()) {
        Ok((rank, witness)) if rank <= n => witness,
        _ => asso_factorize(p, AssoParams { max_rank: n, ..asso })?,
    };
    if let (Some(r), Some(c)) = (p.row_labels(), p.col_labels()) {
        f.set_labels(r.to_vec(), c.to_vec())?;
    }
    Ok(f)
}

/// The model and evidence after replacing the evidence on `pred` by its
/// rank-`n` approximation.
pub fn approximate_model(
    model: &Model,
    evidence: &EvidenceSet,
    pred: &str,
    n: usize,
    asso: AssoParams,
) -> Result<(Model, EvidenceSet, Factorization), ExperimentError> {
    let p = evidence_matrix(model, evidence, pred)?;
    let f = approximate_evidence(&p, n, asso)?;
    let (m2, e2, _) = reduce(model, evidence, pred, &f)?;
    Ok((m2, e2, f))
}

/// The atoms left free by `evidence` (and hard unit formulas) in `model`.
pub fn free_query_atoms(model: &Model, evidence: &EvidenceSet, opts: &InferenceOptions) -> Result<Vec<GroundAtom>, MlnError> {
    let net = Network::new(model, evidence, opts)?;
    Ok(net.free_atoms().iter().map(|&g| net.atom_name(g)).collect())
}

/// Exact KLD between the marginals under the original evidence and under
/// each rank-`n` approximation, over every atom free in the original.
pub fn exact_rank_kld(
    model: &Model,
    evidence: &EvidenceSet,
    pred: &str,
    ranks: &[usize],
    asso: AssoParams,
    opts: &InferenceOptions,
) -> Result<Vec<(usize, f64)>, ExperimentError> {
    check_ranks(ranks)?;
    let queries = free_query_atoms(model, evidence, opts)?;
    let reference = exact_marginals(model, evidence, &queries, opts)?;
    ranks
        .par_iter()
        .map(|&n| {
            let (m2, e2, _) = approximate_model(model, evidence, pred, n, asso)?;
            let approx = exact_marginals(&m2, &e2, &queries, opts)?;
            Ok((n, kld(&reference, &approx)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChainMethod {
    Gibbs,
    OrbitalGibbs,
}

impl ChainMethod {
    pub fn name(self) -> &'static str {
        match self {
            ChainMethod::Gibbs => "gibbs",
            ChainMethod::OrbitalGibbs => "orbital-gibbs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KldCurveSpec {
    pub predicate: String,
    /// Approximation ranks; the original evidence is always included.
    pub ranks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub checkpoints: Vec<usize>,
    pub methods: Vec<ChainMethod>,
    pub orbital_move_probability: f64,
    pub asso: AssoParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KldRow {
    pub iteration: usize,
    pub method: ChainMethod,
    /// `None` for the original evidence.
    pub rank: Option<usize>,
    /// Mean over seeds.
    pub kld: f64,
}

/// Sampled KLD against exact marginals of the original model, at each
/// checkpoint, for each method and evidence variant. Rows are ordered by
/// method, then evidence (original first, then increasing rank), then
/// iteration.
pub fn kld_curve(
    model: &Model,
    evidence: &EvidenceSet,
    spec: &KldCurveSpec,
    opts: &InferenceOptions,
) -> Result<Vec<KldRow>, ExperimentError> {
    if !spec.ranks.is_empty() {
        check_ranks(&spec.ranks)?;
    }
    if spec.seeds.is_empty() {
        return Err(ExperimentError::Invalid("at least one seed is required".into()));
    }
    if spec.checkpoints.is_empty() {
        return Err(ExperimentError::Invalid("at least one checkpoint is required".into()));
    }
    let queries = free_query_atoms(model, evidence, opts)?;
    let reference = exact_marginals(model, evidence, &queries, opts)?;

    let mut variants: Vec<(Option<usize>, Network, Symmetries)> = Vec::new();
    let mut push = |rank, m: &Model, e: &EvidenceSet| -> Result<(), ExperimentError> {
        let net = Network::new(m, e, opts)?;
        let sym = Symmetries::new(m, &net);
        variants.push((rank, net, sym));
        Ok(())
    };
    push(None, model, evidence)?;
    for &n in &spec.ranks {
        let (m2, e2, _) = approximate_model(model, evidence, &spec.predicate, n, spec.asso)?;
        push(Some(n), &m2, &e2)?;
    }

    let mut checkpoints = spec.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let mut methods = spec.methods.clone();
    methods.sort_unstable();
    methods.dedup();

    let jobs: Vec<(ChainMethod, usize, u64)> = methods
        .iter()
        .flat_map(|&m| (0..variants.len()).flat_map(move |v| spec.seeds.iter().map(move |&s| (m, v, s))))
        .collect();
    let curves: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(method, v, seed)| {
            let (_, net, sym) = &variants[v];
            let config = ChainConfig {
                iterations: spec.iterations,
                burn_in: spec.burn_in,
                seed,
                orbital_move_probability: match method {
                    ChainMethod::Gibbs => 0.0,
                    ChainMethod::OrbitalGibbs => spec.orbital_move_probability,
                },
                estimator: crate::sampler::Estimator::RaoBlackwell,
                checkpoints: checkpoints.clone(),
            };
            let est = sample_network(net, Some(sym), &queries, &config)?;
            Ok(est.snapshots.iter().map(|s| kld(&reference, &s.estimates)).collect())
        })
        .collect::<Result<_, ExperimentError>>()?;

    let per_seed = spec.seeds.len();
    let mut rows = Vec::new();
    for (block, chunk) in curves.chunks(per_seed).enumerate() {
        let (method, v, _) = jobs[block * per_seed];
        for (c, &iteration) in checkpoints.iter().enumerate() {
            let mean = chunk.iter().map(|k| k[c]).sum::<f64>() / per_seed as f64;
            rows.push(KldRow {
                iteration,
                method,
                rank: variants[v].0,
                kld: mean,
            });
        }
    }
    Ok(rows)
}

/// One random instance for the reduction equivalence check.
#[derive(Debug, Clone)]
pub struct EquivalenceInstance {
    pub model: Model,
    pub evidence: EvidenceSet,
    pub predicate: String,
}

const FORMULA_TEMPLATES: &[&str] = &[
    "s(X) ^ p(X,Y) => s(Y)",
    "p(X,Y) => t(X)",
    "s(X) v t(X)",
    "p(X,Y) ^ p(Y,X)",
    "t(X) <=> s(X)",
    "p(X,Y) ^ s(X) => t(Y)",
    "!p(X,X) v s(X)",
    "p(X,Y) ^ t(Y)",
];

/// A random model over `m <= 3` constants with full evidence on `p/2` of
/// Boolean rank at most 2, one or two weighted formulas with weights in
/// `[-2, 2]`, and random partial evidence on `s/1`.
pub fn random_instance(rng: &mut impl Rng) -> EquivalenceInstance {
    let m = rng.random_range(1..=3usize);
    let domain: Vec<String> = ["a", "b", "c"][..m].iter().map(|s| s.to_string()).collect();
    let mut model = Model::new(&domain).expect("nonempty domain");
    for (name, arity) in [("p", 2), ("s", 1), ("t", 1)] {
        model.declare(name, arity).expect("fresh names");
    }
    let count = rng.random_range(1..=2usize);
    for text in FORMULA_TEMPLATES.choose_multiple(rng, count) {
        let w = rng.random_range(-2.0..=2.0);
        model
            .add_weighted(w, crate::mln::Formula::parse(text).expect("template parses"))
            .expect("template uses declared predicates");
    }
    let rank = rng.random_range(0..=2usize);
    let q = BoolMatrix::from_fn(m, rank, |_, _| rng.random_bool(0.5));
    let r = BoolMatrix::from_fn(m, rank, |_, _| rng.random_bool(0.5));
    let p = boolean_product(&q, &r).expect("matching ranks");
    let mut evidence = EvidenceSet::new();
    for (i, x) in domain.iter().enumerate() {
        for (j, y) in domain.iter().enumerate() {
            evidence.insert(GroundAtom::new("p", &[x, y]), p.get(i, j)).expect("distinct atoms");
        }
    }
    for x in &domain {
        if rng.random_bool(0.3) {
            evidence.insert(GroundAtom::new("s", &[x]), rng.random_bool(0.5)).expect("distinct atoms");
        }
    }
    EquivalenceInstance {
        model,
        evidence,
        predicate: "p".into(),
    }
}

/// Largest `|Pr(q | e) - Pr'(q | e')|` over every atom free in the original
/// model, where the primed side is the reduction through the exact minimum
/// factorization. The reduced model is solved without unit propagation so
/// both sides are plain enumeration over their own ground atoms.
pub fn equivalence_gap(inst: &EquivalenceInstance) -> Result<f64, ExperimentError> {
    let opts = InferenceOptions::default();
    let p = evidence_matrix(&inst.model, &inst.evidence, &inst.predicate)?;
    let (_, f) = exact_boolean_rank(&p, ExactOptions::default())?;
    let (m2, e2, _) = reduce(&inst.model, &inst.evidence, &inst.predicate, &f)?;
    let queries = free_query_atoms(&inst.model, &inst.evidence, &opts)?;
    let a = exact_marginals(&inst.model, &inst.evidence, &queries, &opts)?;
    let plain = InferenceOptions {
        propagate_units: false,
        ..opts
    };
    let b = exact_marginals(&m2, &e2, &queries, &plain)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceRow {
    pub instance: usize,
    pub max_abs_diff: f64,
    pub pass: bool,
}

pub const EQUIVALENCE_TOLERANCE: f64 = 1e-9;

/// Runs `instances` random equivalence checks per seed. Instance numbers
/// run consecutively across seeds.
pub fn equivalence_check(instances: usize, seeds: &[u64]) -> Result<Vec<EquivalenceRow>, ExperimentError> {
    if seeds.is_empty() {
        return Err(ExperimentError::Invalid("at least one seed is required".into()));
    }
    let jobs: Vec<EquivalenceInstance> = seeds
        .iter()
        .flat_map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..instances).map(move |_| random_instance(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    jobs.par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let gap = equivalence_gap(inst)?;
            Ok(EquivalenceRow {
                instance: i,
                max_abs_diff: gap,
                pass: gap <= EQUIVALENCE_TOLERANCE,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolmat::fixtures::evidence_p;
    use crate::factorize::DEFAULT_EXHAUSTIVE_CAP;

    #[test]
    fn synthetic_generator() {
        let a = gen_synthetic(20, 3, 0.01, 7).unwrap();
        let b = gen_synthetic(20, 3, 0.01, 7).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_ne!(a.to_text(), gen_synthetic(20, 3, 0.01, 8).unwrap().to_text());
        assert!(a.to_text().starts_with("20 20\n# synthetic m=20 planted_rank=3 noise=0.01 seed=7\n"));
        assert!(a.to_text().contains("\n#rows c1,c2,"));
        assert_eq!(BoolMatrix::parse(&a.to_text()).unwrap(), a.matrix);
        assert!(a.header.iter().any(|h| h.contains("ChaCha8")));
        let clean = gen_synthetic(8, 2, 0.0, 3).unwrap();
        assert_eq!(clean.flips, 0);
        let (rank, _) = exact_boolean_rank(&clean.matrix, ExactOptions::default()).unwrap();
        assert!(rank <= 2);
        assert!(gen_synthetic(5, 1, 0.5, 0).is_err());
        assert!(gen_synthetic(5, 1, 0.49, 0).is_ok());
    }

    #[test]
    fn synthetic_fill_is_calibrated() {
        let fill: f64 = (0..40)
            .map(|s| gen_synthetic(30, 3, 0.0, s).unwrap().matrix.count_ones() as f64 / 900.0)
            .sum::<f64>()
            / 40.0;
        assert!((0.2..=0.5).contains(&fill), "{fill}");
    }

    #[test]
    fn error_curves() {
        let p = evidence_p();
        let opt = error_curve(&p, &[1, 2, 3], CurveMethod::Optimal { cap: DEFAULT_EXHAUSTIVE_CAP }).unwrap();
        assert_eq!(opt, [(1, 3), (2, 1), (3, 0)]);
        let asso = error_curve(&p, &[1, 2, 3, 4], CurveMethod::Asso(AssoParams::default())).unwrap();
        assert!(asso.windows(2).all(|w| w[0].1 >= w[1].1));
        let refined = error_curve(&p, &[1, 2, 3, 4], CurveMethod::AssoRefined { params: AssoParams::default(), sweeps: 10 }).unwrap();
        for ((_, a), (_, r)) in asso.iter().zip(&refined) {
            assert!(r <= a);
        }
        for ((_, o), (_, r)) in opt.iter().zip(&refined) {
            assert!(r >= o);
        }
        assert!(error_curve(&p, &[2, 1], CurveMethod::Asso(AssoParams::default())).is_err());
        assert!(error_curve(&p, &[], CurveMethod::Asso(AssoParams::default())).is_err());
    }

    #[test]
    fn equivalence_holds_on_random_instances() {
        let rows = equivalence_check(20, &[1, 2]).unwrap();
        assert_eq!(rows.len(), 40);
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
        assert_eq!(rows[39].instance, 39);
    }

    #[test]
    fn full_rank_approximation_has_zero_kld() {
        let model = Model::parse("domain = a, b, c\npred p/2\npred s/1\n1.3 s(X) ^ p(X,Y) => s(Y)\n-0.5 s(X)\n").unwrap();
        let p = evidence_p();
        let mut ev = EvidenceSet::new();
        let dom = ["a", "b", "c"];
        for (i, x) in dom.iter().enumerate() {
            for (j, y) in dom.iter().enumerate() {
                ev.insert(GroundAtom::new("p", &[x, y]), p.get(i, j)).unwrap();
            }
        }
        let curve = exact_rank_kld(&model, &ev, "p", &[0, 1, 2, 3], AssoParams::default(), &InferenceOptions::default()).unwrap();
        let full = curve.last().unwrap().1;
        assert!(full <= 1e-9);
        assert!(curve.iter().all(|&(_, k)| k >= full));
    }

    #[test]
    fn kld_curve_rows_are_ordered() {
        let model = Model::parse("domain = a, b\npred p/2\npred s/1\n1.0 s(X) ^ p(X,Y) => s(Y)\n").unwrap();
        let ev = EvidenceSet::parse("p(a,b)\n!p(a,a)\n!p(b,a)\np(b,b)\n", &model).unwrap();
        let spec = KldCurveSpec {
            predicate: "p".into(),
            ranks: vec![1],
            seeds: vec![1, 2],
            iterations: 400,
            burn_in: 0,
            checkpoints: vec![100, 400],
            methods: vec![ChainMethod::OrbitalGibbs, ChainMethod::Gibbs],
            orbital_move_probability: 0.1,
            asso: AssoParams::default(),
        };
        let opts = InferenceOptions::default();
        let rows = kld_curve(&model, &ev, &spec, &opts).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].method, ChainMethod::Gibbs);
        assert_eq!(rows[0].rank, None);
        assert_eq!(rows[2].rank, Some(1));
        assert_eq!(rows[4].method, ChainMethod::OrbitalGibbs);
        assert_eq!(rows, kld_curve(&model, &ev, &spec, &opts).unwrap());
    }
}
