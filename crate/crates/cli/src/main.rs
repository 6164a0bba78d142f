//! `liftbmf`: Boolean rank, factorization, evidence reduction, inference and
//! experiment sweeps from the command line.
//!
//! Exit codes: 0 success, 1 input error, 2 refused by a size or search cap,
//! 3 evidence inconsistent with the hard formulas.

mod error;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use liftbmf::boolmat::BoolMatrix;
use liftbmf::experiment::{
    equivalence_check, error_curve, gen_synthetic, kld_curve, ChainMethod, CurveMethod, KldCurveSpec,
};
use liftbmf::factorize::{
    asso_factorize, exact_boolean_rank, optimal_factorization, refine, truncate, AssoParams, ExactOptions,
    Factorization, DEFAULT_EXACT_CELL_CAP, DEFAULT_EXHAUSTIVE_CAP, DEFAULT_MAX_SEARCH,
};
use liftbmf::mln::{
    exact_marginals, EvidenceSet, GroundAtom, InferenceOptions, Literal, Model, Network, DEFAULT_GROUNDING_CAP,
    DEFAULT_MAX_FREE_ATOMS,
};
use liftbmf::reduction::{encode_evidence, symmetry_signature_classes};
use liftbmf::sampler::{estimate_marginals, ChainConfig, Estimator, DEFAULT_ORBITAL_MOVE_PROBABILITY};

use error::CliError;

#[derive(Parser)]
#[command(name = "liftbmf", version, about = "Boolean matrix factorization of binary evidence for Markov logic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact Boolean rank of a matrix file.
    Rank(RankArgs),
    /// Factorize a matrix file and write a factorization file.
    Factorize(FactorizeArgs),
    /// Turn a factorization into a model fragment plus unary evidence.
    Reduce(ReduceArgs),
    /// Print marginal probabilities of query atoms.
    Infer(InferArgs),
    /// Generate a synthetic low-rank matrix with flip noise.
    Gen(GenArgs),
    /// Run a sweep and write its CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args, Clone, Copy)]
struct ExactCaps {
    /// Largest rows*cols accepted by the exact solver.
    #[arg(long, env = "LIFTBMF_CELL_CAP", default_value_t = DEFAULT_EXACT_CELL_CAP)]
    cell_cap: usize,
    /// Search-node budget of the exact solver.
    #[arg(long, env = "LIFTBMF_MAX_SEARCH", default_value_t = DEFAULT_MAX_SEARCH)]
    max_search: usize,
}

impl ExactCaps {
    fn options(self) -> ExactOptions {
        ExactOptions {
            cell_cap: self.cell_cap,
            max_search: self.max_search,
        }
    }
}

#[derive(Args, Clone, Copy)]
struct AssoArgs {
    /// Association threshold.
    #[arg(long, env = "LIFTBMF_TAU", default_value_t = 0.7)]
    tau: f64,
    /// Reward for covering a 1.
    #[arg(long, env = "LIFTBMF_W_PLUS", default_value_t = 1.0)]
    w_plus: f64,
    /// Penalty for covering a 0.
    #[arg(long, env = "LIFTBMF_W_MINUS", default_value_t = 1.0)]
    w_minus: f64,
}

impl AssoArgs {
    fn params(self, max_rank: usize) -> AssoParams {
        AssoParams {
            tau: self.tau,
            w_plus: self.w_plus,
            w_minus: self.w_minus,
            max_rank,
        }
    }
}

#[derive(Args, Clone, Copy)]
struct MlnCaps {
    /// Largest number of ground formulas.
    #[arg(long, env = "LIFTBMF_GROUNDING_CAP", default_value_t = DEFAULT_GROUNDING_CAP)]
    grounding_cap: usize,
    /// Largest number of free atoms for exact enumeration.
    #[arg(long, env = "LIFTBMF_MAX_FREE_ATOMS", default_value_t = DEFAULT_MAX_FREE_ATOMS)]
    max_free_atoms: usize,
}

impl MlnCaps {
    fn options(self) -> InferenceOptions {
        InferenceOptions {
            grounding_cap: self.grounding_cap,
            max_free_atoms: self.max_free_atoms,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct RankArgs {
    matrix: PathBuf,
    /// Write the minimum factorization here.
    #[arg(long)]
    witness: Option<PathBuf>,
    #[command(flatten)]
    caps: ExactCaps,
}

#[derive(Clone, Copy, ValueEnum)]
enum FactorMethod {
    Asso,
    Exact,
    Optimal,
}

#[derive(Args)]
struct FactorizeArgs {
    matrix: PathBuf,
    /// Target rank; required for asso and optimal, truncates the exact witness.
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, value_enum, default_value = "asso")]
    method: FactorMethod,
    /// Alternating refinement sweeps applied afterwards.
    #[arg(long, env = "LIFTBMF_REFINE", default_value_t = 0)]
    refine: usize,
    #[arg(long, short)]
    output: PathBuf,
    #[command(flatten)]
    asso: AssoArgs,
    #[command(flatten)]
    caps: ExactCaps,
    /// Largest number of candidate factor sets for the optimal method.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    exhaustive_cap: u128,
}

#[derive(Args)]
struct ReduceArgs {
    factorization: PathBuf,
    /// Binary predicate whose evidence the factorization represents.
    #[arg(long)]
    predicate: String,
    /// Model to extend; the output is then the full extended model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Evidence to rewrite; requires --model.
    #[arg(long, requires = "model")]
    evidence: Option<PathBuf>,
    /// Where to write the model fragment (or extended model).
    #[arg(long)]
    model_out: PathBuf,
    /// Where to write the unary evidence (merged with --evidence if given).
    #[arg(long)]
    evidence_out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InferMethod {
    Exact,
    Gibbs,
    OrbitalGibbs,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Frequency,
    RaoBlackwell,
}

#[derive(Args, Clone)]
struct ChainArgs {
    #[arg(long, env = "LIFTBMF_ITERS", default_value_t = 10_000)]
    iters: usize,
    /// Defaults to 10% of --iters.
    #[arg(long, env = "LIFTBMF_BURNIN")]
    burnin: Option<usize>,
    #[arg(long, env = "LIFTBMF_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "LIFTBMF_ORBITAL_PROB", default_value_t = DEFAULT_ORBITAL_MOVE_PROBABILITY)]
    orbital_prob: f64,
    #[arg(long, value_enum, default_value = "rao-blackwell")]
    estimator: EstimatorArg,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Query literal such as `s(a)` or `!l(a,b)`; repeatable. Defaults to
    /// every atom not fixed by evidence.
    #[arg(long = "query")]
    queries: Vec<String>,
    #[arg(long, value_enum, default_value = "exact")]
    method: InferMethod,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    caps: MlnCaps,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, env = "LIFTBMF_SEED", default_value_t = 0)]
    seed: u64,
    /// Defaults to stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentKind {
    ErrorCurve,
    KldCurve,
    EquivalenceCheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveMethodArg {
    Asso,
    AssoRefined,
    Optimal,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    kind: ExperimentKind,
    /// Matrix files for error-curve; without any, synthetic matrices are generated per seed.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    ranks: Vec<usize>,
    #[arg(long, value_delimiter = ',', env = "LIFTBMF_SEEDS", default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, short)]
    output: PathBuf,

    #[arg(long, value_enum, default_value = "asso")]
    method: CurveMethodArg,
    #[arg(long, default_value_t = 50)]
    refine_sweeps: usize,
    #[command(flatten)]
    asso: AssoArgs,
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    planted_rank: usize,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,

    /// Model for kld-curve.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Evidence for kld-curve.
    #[arg(long)]
    evidence: Option<PathBuf>,
    #[arg(long)]
    predicate: Option<String>,
    #[arg(long, env = "LIFTBMF_ITERS", default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    burnin: usize,
    #[arg(long, default_value_t = 500)]
    checkpoint_every: usize,
    #[arg(long, env = "LIFTBMF_ORBITAL_PROB", default_value_t = DEFAULT_ORBITAL_MOVE_PROBABILITY)]
    orbital_prob: f64,
    #[command(flatten)]
    caps: MlnCaps,

    /// Random instances per seed for equivalence-check.
    #[arg(long, default_value_t = 200)]
    instances: usize,
}

/// What an experiment run sweeps over, checked before any work starts.
#[derive(Debug, Clone, PartialEq)]
struct ExperimentSpec {
    inputs: Vec<PathBuf>,
    ranks: Vec<usize>,
    seeds: Vec<u64>,
    output: PathBuf,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<(), CliError> {
        if self.ranks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Input("--ranks must be strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Input("at least one seed is required".into()));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<BoolMatrix, CliError> {
    BoolMatrix::parse(&read(path)?).map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

fn read_model(path: &Path) -> Result<Model, CliError> {
    Model::parse(&read(path)?).map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

fn read_evidence(path: Option<&Path>, model: &Model) -> Result<EvidenceSet, CliError> {
    match path {
        None => Ok(EvidenceSet::new()),
        Some(p) => EvidenceSet::parse(&read(p)?, model).map_err(|e| CliError::from(e).context(&p.display().to_string())),
    }
}

fn cmd_rank(args: RankArgs) -> Result<(), CliError> {
    let p = read_matrix(&args.matrix)?;
    let (rank, witness) = exact_boolean_rank(&p, args.caps.options())?;
    if let Some(path) = &args.witness {
        write(path, &witness.to_text())?;
    }
    println!("{rank}");
    Ok(())
}

fn cmd_factorize(args: FactorizeArgs) -> Result<(), CliError> {
    let p = read_matrix(&args.matrix)?;
    let need_rank = || args.rank.ok_or_else(|| CliError::Input("--rank is required for this method".into()));
    let mut f = match args.method {
        FactorMethod::Asso => asso_factorize(&p, args.asso.params(need_rank()?))?,
        FactorMethod::Optimal => optimal_factorization(&p, need_rank()?, args.exhaustive_cap)?,
        FactorMethod::Exact => {
            let (rank, witness) = exact_boolean_rank(&p, args.caps.options())?;
            truncate(&witness, args.rank.unwrap_or(rank).min(rank))?
        }
    };
    if args.refine > 0 {
        f = refine(&p, &f, args.refine)?;
    }
    write(&args.output, &f.to_text())?;
    let err = f.error().expect("target attached");
    println!("{} {} {} {}", f.rank(), err.total(), err.ones_to_zero, err.zeros_to_one);
    Ok(())
}

fn cmd_reduce(args: ReduceArgs) -> Result<(), CliError> {
    let f = Factorization::parse(&read(&args.factorization)?)
        .map_err(|e| CliError::from(e).context(&args.factorization.display().to_string()))?;
    let (model_text, evidence_text, result) = match &args.model {
        None => {
            let r = encode_evidence(&args.predicate, &f, None)?;
            let mut domain = r.row_constants.clone();
            for c in &r.col_constants {
                if !domain.contains(c) {
                    domain.push(c.clone());
                }
            }
            let base = Model::parse(&format!("domain = {}\npred {}/2\n", domain.join(", "), args.predicate))?;
            (r.extend_model(&base)?.to_text(), r.evidence_text(), r)
        }
        Some(path) => {
            let model = read_model(path)?;
            let evidence = read_evidence(args.evidence.as_deref(), &model)?;
            let (m2, e2, r) = liftbmf::reduction::reduce(&model, &evidence, &args.predicate, &f)?;
            (m2.to_text(), e2.to_text(), r)
        }
    };
    write(&args.model_out, &model_text)?;
    write(&args.evidence_out, &evidence_text)?;
    let (rows, cols) = symmetry_signature_classes(&result);
    println!(
        "rank {} fresh_predicates {} unary_literals {} row_classes {rows} col_classes {cols}",
        result.rank_used,
        result.fresh_predicates.len(),
        result.unary_evidence.len()
    );
    Ok(())
}

fn chain_config(chain: &ChainArgs, orbital: bool) -> ChainConfig {
    ChainConfig {
        iterations: chain.iters,
        burn_in: chain.burnin.unwrap_or(chain.iters / 10),
        seed: chain.seed,
        orbital_move_probability: if orbital { chain.orbital_prob } else { 0.0 },
        estimator: match chain.estimator {
            EstimatorArg::Frequency => Estimator::Frequency,
            EstimatorArg::RaoBlackwell => Estimator::RaoBlackwell,
        },
        checkpoints: Vec::new(),
    }
}

fn cmd_infer(args: InferArgs) -> Result<(), CliError> {
    let model = read_model(&args.model)?;
    let evidence = read_evidence(args.evidence.as_deref(), &model)?;
    let opts = args.caps.options();
    let queries: Vec<Literal> = if args.queries.is_empty() {
        let net = Network::new(&model, &evidence, &opts)?;
        net.free_atoms()
            .iter()
            .map(|&g| Literal {
                atom: net.atom_name(g),
                positive: true,
            })
            .collect()
    } else {
        args.queries
            .iter()
            .map(|q| q.parse::<Literal>().map_err(|e| CliError::Input(format!("query `{q}`: {e}"))))
            .collect::<Result<_, _>>()?
    };
    for q in &queries {
        model.check_atom(&q.atom)?;
    }
    let atoms: Vec<GroundAtom> = queries.iter().map(|q| q.atom.clone()).collect();
    let probs = match args.method {
        InferMethod::Exact => exact_marginals(&model, &evidence, &atoms, &opts)?,
        method => {
            let config = chain_config(&args.chain, method == InferMethod::OrbitalGibbs);
            estimate_marginals(&model, &evidence, &atoms, &config, &opts)?.estimates
        }
    };
    let mut out = std::io::stdout().lock();
    for (q, p) in queries.iter().zip(probs) {
        writeln!(out, "{q} {}", if q.positive { p } else { 1.0 - p })?;
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let syn = gen_synthetic(args.m, args.rank, args.noise, args.seed)?;
    match &args.output {
        Some(path) => write(path, &syn.to_text()),
        None => {
            print!("{}", syn.to_text());
            Ok(())
        }
    }
}

fn invocation() -> String {
    let args: Vec<String> = std::env::args().collect();
    let mut parts = vec!["liftbmf".to_string()];
    parts.extend(args.into_iter().skip(1));
    parts.join(" ")
}

fn write_csv(path: &Path, comments: &[String], header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let mut file = fs::File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    for c in comments {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let spec = ExperimentSpec {
        inputs: args.inputs.clone(),
        ranks: args.ranks.clone(),
        seeds: args.seeds.clone(),
        output: args.output.clone(),
    };
    spec.validate()?;
    let mut comments = vec![invocation()];
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match args.kind {
        ExperimentKind::ErrorCurve => {
            if spec.ranks.is_empty() {
                return Err(CliError::Input("--ranks is required".into()));
            }
            let method = match args.method {
                CurveMethodArg::Asso => CurveMethod::Asso(args.asso.params(1)),
                CurveMethodArg::AssoRefined => CurveMethod::AssoRefined {
                    params: args.asso.params(1),
                    sweeps: args.refine_sweeps,
                },
                CurveMethodArg::Optimal => CurveMethod::Optimal { cap: DEFAULT_EXHAUSTIVE_CAP },
            };
            let mut sources = Vec::new();
            if spec.inputs.is_empty() {
                for &seed in &spec.seeds {
                    let syn = gen_synthetic(args.m, args.planted_rank, args.noise, seed)?;
                    comments.push(format!("source seed {seed}: {} noise flips", syn.flips));
                    sources.push(syn.matrix);
                }
            } else {
                for path in &spec.inputs {
                    comments.push(format!("source {}", path.display()));
                    sources.push(read_matrix(path)?);
                }
            }
            let curves = sources
                .iter()
                .map(|p| error_curve(p, &spec.ranks, method))
                .collect::<Result<Vec<_>, _>>()?;
            if curves.len() > 1 {
                comments.push(format!("error is the mean over {} sources", curves.len()));
            }
            let rows = spec
                .ranks
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let mean = curves.iter().map(|c| c[i].1 as f64).sum::<f64>() / curves.len() as f64;
                    vec![n.to_string(), mean.to_string()]
                })
                .collect();
            (vec!["rank", "error"], rows)
        }
        ExperimentKind::KldCurve => {
            let model_path = args.model.as_deref().ok_or_else(|| CliError::Input("--model is required".into()))?;
            let model = read_model(model_path)?;
            let evidence = read_evidence(args.evidence.as_deref(), &model)?;
            if !spec.ranks.is_empty() && args.predicate.is_none() {
                return Err(CliError::Input("--predicate is required with --ranks".into()));
            }
            if args.checkpoint_every == 0 {
                return Err(CliError::Input("--checkpoint-every must be positive".into()));
            }
            let kspec = KldCurveSpec {
                predicate: args.predicate.clone().unwrap_or_default(),
                ranks: spec.ranks.clone(),
                seeds: spec.seeds.clone(),
                iterations: args.iters,
                burn_in: args.burnin,
                checkpoints: (1..=args.iters / args.checkpoint_every).map(|i| i * args.checkpoint_every).collect(),
                methods: vec![ChainMethod::Gibbs, ChainMethod::OrbitalGibbs],
                orbital_move_probability: args.orbital_prob,
                asso: args.asso.params(1),
            };
            comments.push(format!("kld is the mean over {} seeds; rank `exact` is the original evidence", spec.seeds.len()));
            let rows = kld_curve(&model, &evidence, &kspec, &args.caps.options())?
                .into_iter()
                .map(|r| {
                    vec![
                        r.iteration.to_string(),
                        r.method.name().to_string(),
                        r.rank.map_or("exact".to_string(), |n| n.to_string()),
                        r.kld.to_string(),
                    ]
                })
                .collect();
            (vec!["iteration", "method", "rank", "kld"], rows)
        }
        ExperimentKind::EquivalenceCheck => {
            let rows = equivalence_check(args.instances, &spec.seeds)?
                .into_iter()
                .map(|r| vec![r.instance.to_string(), r.max_abs_diff.to_string(), r.pass.to_string()])
                .collect();
            (vec!["instance", "max_abs_diff", "pass"], rows)
        }
    };
    write_csv(&spec.output, &comments, &header, rows)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Rank(a) => cmd_rank(a),
        Command::Factorize(a) => cmd_factorize(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn experiment_spec_validation() {
        let spec = ExperimentSpec {
            inputs: vec![],
            ranks: vec![1, 2, 5],
            seeds: vec![0],
            output: "out.csv".into(),
        };
        assert!(spec.validate().is_ok());
        assert!(ExperimentSpec { ranks: vec![1, 1], ..spec.clone() }.validate().is_err());
        assert!(ExperimentSpec { ranks: vec![3, 2], ..spec.clone() }.validate().is_err());
        assert!(ExperimentSpec { seeds: vec![], ..spec }.validate().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input(String::new()).exit_code(), 1);
        let cap: CliError = liftbmf::mln::MlnError::EnumerationCap { atoms: 30, cap: 24 }.into();
        assert_eq!(cap.exit_code(), 2);
        let inc: CliError = liftbmf::mln::MlnError::Inconsistent("x".into()).into();
        assert_eq!(inc.exit_code(), 3);
    }
}
