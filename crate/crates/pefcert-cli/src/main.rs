//! Command-line front end for PEF-based randomness certification.
//!
//! Subcommands mirror the library workflow: build models, generate family
//! distributions, optimize PEFs, sweep rate curves, plan trial counts,
//! simulate trial logs and certify them. Every run is reproducible from its
//! flags, input files and the explicit `--seed`; all emitted documents use
//! canonical formatting so repeated runs are byte-identical.

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pefcert::bellmodel::{ns_model, tsirelson_model, InputDistribution, TrialDistribution, TrialModel};
use pefcert::distributions::{
    chsh_expectation, family_eberhard, family_unbalanced, family_werner,
};
use pefcert::doc;
use pefcert::planner::improvement_factors;
use pefcert::protocol::{
    read_trial_log, simulate_trials, write_trial_log, AccumulatorState, CertificationParams,
};
use pefcert::rates::{rate_curve, statistical_strength};
use pefcert::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Parser)]
#[command(name = "pefcert", version, about = "Certify Bell-test randomness by probability estimation")]
struct Cli {
    /// Worker threads for sweeps (env: PEFCERT_JOBS).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// On failure, print a machine-readable error document to stderr.
    #[arg(long, global = true)]
    error_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a trial model with its vertex list.
    Model(ModelArgs),
    /// Emit a family distribution document.
    Family(DistArgs),
    /// Optimize a PEF and emit its document.
    PefOpt(PefOptArgs),
    /// Emit a rate-curve CSV over a beta grid.
    Rates(RatesArgs),
    /// Print the statistical strength of a distribution.
    Strength(StrengthArgs),
    /// Plan trial counts and improvement factors.
    Plan(PlanArgs),
    /// Simulate a seeded trial log from a distribution.
    Simulate(SimulateArgs),
    /// Certify a trial log and emit the entropy certificate.
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKindArg {
    Ns,
    Tsirelson,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Unbalanced,
    Werner,
    Eberhard,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    kind: ModelKindArg,
    /// Input distribution as four comma-separated probabilities (default uniform).
    #[arg(long)]
    input_dist: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Source of a trial distribution: a document file or a named family point.
#[derive(Args)]
struct DistArgs {
    /// Distribution document path.
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// State angle for the unbalanced family, radians.
    #[arg(long)]
    theta: Option<f64>,
    /// Werner mixing parameter.
    #[arg(long)]
    p: Option<f64>,
    /// Detector efficiency for the detection-loophole family.
    #[arg(long)]
    eta: Option<f64>,
    /// CHSH expectation; converted to the family parameter where possible.
    #[arg(long = "I")]
    i_hat: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PefOptArgs {
    #[arg(long, value_enum, default_value = "ns")]
    model: ModelKindArg,
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long)]
    beta: f64,
    /// Planned number of trials in the protocol objective.
    #[arg(long, default_value_t = 1)]
    n: u64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long, value_enum, default_value = "ns")]
    model: ModelKindArg,
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long, default_value_t = 0.005)]
    beta_min: f64,
    #[arg(long, default_value_t = 2.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 20)]
    points: usize,
}

#[derive(Args)]
struct StrengthArgs {
    #[command(flatten)]
    dist: DistArgs,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    /// Sweep the CHSH expectation as `start:stop:count`, emitting CSV.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct CertifyArgs {
    /// Trial-log CSV (`trial,x,y,a,b`).
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum, default_value = "ns")]
    model: ModelKindArg,
    /// Planning distribution for the initial PEF.
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Target bits to certify.
    #[arg(long)]
    b: f64,
    /// Maximum trials (defaults to the log length).
    #[arg(long)]
    n_max: Option<u64>,
    /// Re-optimize the PEF every this many trials from smoothed counts.
    #[arg(long, default_value_t = 10_000)]
    replan_every: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own help/version exits are not errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let jobs = cli.jobs.or_else(|| {
        std::env::var("PEFCERT_JOBS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(jobs) = jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.is_validation() { "validation" } else { "numerical" };
            if cli.error_json {
                let doc = serde_json::json!({ "error": e.to_string(), "kind": kind });
                eprintln!(
                    "{}",
                    doc::to_canonical_json(&doc).unwrap_or_else(|_| doc.to_string()).trim_end()
                );
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Model(args) => {
            let input = parse_input_dist(args.input_dist.as_deref())?;
            let model = build_model(args.kind, &input)?;
            emit(args.out.as_deref(), &doc::to_canonical_json(&doc::model_to_doc(&model))?)
        }
        Command::Family(args) => {
            let dist = resolve_dist(&args)?;
            let out = args.out.clone();
            emit(out.as_deref(), &doc::to_canonical_json(&doc::distribution_to_doc(&dist))?)
        }
        Command::PefOpt(args) => {
            let dist = resolve_dist(&args.dist)?;
            let model = build_model_for(&args.model, &dist)?;
            let (pef, report) =
                pefcert::pefopt::optimize_pef(&model, &dist, args.beta, args.n, args.epsilon)?;
            emit(
                args.dist.out.as_deref(),
                &doc::to_canonical_json(&doc::pef_to_doc(&pef, &report))?,
            )
        }
        Command::Rates(args) => {
            let dist = resolve_dist(&args.dist)?;
            let model = build_model_for(&args.model, &dist)?;
            if args.points < 2 || !(args.beta_min > 0.0) || args.beta_max <= args.beta_min {
                return Err(Error::InvalidParameter(
                    "rates needs beta_max > beta_min > 0 and at least 2 points".into(),
                ));
            }
            let betas: Vec<f64> = (0..args.points)
                .map(|i| {
                    args.beta_min
                        * (args.beta_max / args.beta_min)
                            .powf(i as f64 / (args.points - 1) as f64)
                })
                .collect();
            let curve = rate_curve(&model, &dist, &betas)?;
            emit(args.dist.out.as_deref(), &doc::rate_curve_csv(&curve))
        }
        Command::Strength(args) => {
            let dist = resolve_dist(&args.dist)?;
            let s = statistical_strength(&dist)?;
            let text = format!("{s}\n");
            emit(args.dist.out.as_deref(), &text)
        }
        Command::Plan(args) => {
            if let Some(grid) = &args.grid {
                let (start, stop, count) = parse_grid(grid)?;
                let family = args.dist.family.ok_or_else(|| {
                    Error::InvalidParameter("plan --grid requires --family".into())
                })?;
                let mut rows = Vec::with_capacity(count);
                for i in 0..count {
                    let i_hat = start + (stop - start) * i as f64 / (count.max(2) - 1) as f64;
                    let dist = family_point_from_i(family, i_hat)?;
                    let plan = improvement_factors(&dist, args.b, args.epsilon, args.kappa)?;
                    rows.push((i_hat, plan));
                }
                emit(args.dist.out.as_deref(), &doc::plan_csv(&rows))
            } else {
                let dist = resolve_dist(&args.dist)?;
                let i_hat = chsh_expectation(&dist)?;
                let plan = improvement_factors(&dist, args.b, args.epsilon, args.kappa)?;
                let plan_doc = doc::plan_to_doc(&plan, i_hat, args.b, args.epsilon, args.kappa);
                emit(args.dist.out.as_deref(), &doc::to_canonical_json(&plan_doc)?)
            }
        }
        Command::Simulate(args) => {
            let dist = resolve_dist(&args.dist)?;
            let records = simulate_trials(&dist, args.n, args.seed);
            let mut buf = Vec::new();
            write_trial_log(&mut buf, &records)?;
            let text = String::from_utf8(buf)
                .map_err(|e| Error::Format(format!("trial log encoding: {e}")))?;
            emit(args.dist.out.as_deref(), &text)
        }
        Command::Certify(args) => {
            let records = {
                let file = fs::File::open(&args.log)
                    .map_err(|e| Error::Format(format!("{}: {e}", args.log.display())))?;
                read_trial_log(std::io::BufReader::new(file))?
            };
            if records.is_empty() {
                return Err(Error::Format("trial log has no records".into()));
            }
            let nu0 = resolve_dist(&args.dist)?;
            let model = build_model_for(&args.model, &nu0)?;
            let n_max = args.n_max.unwrap_or(records.len() as u64);
            let params =
                CertificationParams::new(args.beta, args.epsilon, args.kappa, args.b, n_max)?;
            let mut state = AccumulatorState::new_run(params, &model, &nu0)?;
            for record in &records {
                if state.ended() {
                    break;
                }
                match state.update(*record) {
                    Ok(()) => {}
                    Err(Error::ZeroPefCell { .. }) => break, // aborted run; certify failure
                    Err(e) => return Err(e),
                }
                if args.replan_every > 0
                    && !state.ended()
                    && state.trials_used() % args.replan_every == 0
                {
                    state.replan_from_counts(&model)?;
                }
            }
            let cert = state.certify()?;
            emit(
                args.dist.out.as_deref(),
                &doc::to_canonical_json(&doc::certificate_to_doc(&cert))?,
            )
        }
    }
}

fn build_model(kind: ModelKindArg, input: &InputDistribution) -> Result<TrialModel> {
    match kind {
        ModelKindArg::Ns => ns_model(input),
        ModelKindArg::Tsirelson => tsirelson_model(input),
    }
}

fn build_model_for(kind: &ModelKindArg, dist: &TrialDistribution) -> Result<TrialModel> {
    let mut marginals = [0.0; 4];
    for x in 0..2 {
        for y in 0..2 {
            marginals[2 * x + y] = dist.input_marginal(x, y);
        }
    }
    build_model(*kind, &InputDistribution::new(marginals)?)
}

fn parse_input_dist(text: Option<&str>) -> Result<InputDistribution> {
    match text {
        None => Ok(InputDistribution::uniform()),
        Some(text) => {
            let parts: Vec<&str> = text.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::InvalidParameter(
                    "--input-dist needs four comma-separated probabilities".into(),
                ));
            }
            let mut probs = [0.0; 4];
            for (slot, part) in probs.iter_mut().zip(&parts) {
                *slot = part.trim().parse::<f64>().map_err(|e| {
                    Error::InvalidParameter(format!("bad probability {part:?}: {e}"))
                })?;
            }
            InputDistribution::new(probs)
        }
    }
}

fn family_point_from_i(family: FamilyArg, i_hat: f64) -> Result<TrialDistribution> {
    match family {
        FamilyArg::Werner => family_werner(i_hat / (2.0 * SQRT2)),
        FamilyArg::Unbalanced => {
            if !(i_hat > 2.0 && i_hat <= 2.0 * SQRT2) {
                return Err(Error::InvalidParameter(format!(
                    "unbalanced family needs I in (2, 2*sqrt(2)], got {i_hat}"
                )));
            }
            // I = 2 sqrt(1 + sin^2(2 theta))
            let sin_2t = (i_hat * i_hat / 4.0 - 1.0).sqrt();
            family_unbalanced(0.5 * sin_2t.asin())
        }
        FamilyArg::Eberhard => Err(Error::InvalidParameter(
            "the detection-loophole family is parametrized by --eta, not --I".into(),
        )),
    }
}

fn resolve_dist(args: &DistArgs) -> Result<TrialDistribution> {
    if let Some(path) = &args.dist {
        let mut text = String::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let parsed: doc::DistributionDoc = doc::from_json(&text)?;
        return doc::distribution_from_doc(&parsed);
    }
    let family = args.family.ok_or_else(|| {
        Error::InvalidParameter("specify --dist FILE or --family with its parameter".into())
    })?;
    if let Some(i_hat) = args.i_hat {
        return family_point_from_i(family, i_hat);
    }
    match family {
        FamilyArg::Unbalanced => {
            let theta = args.theta.ok_or_else(|| {
                Error::InvalidParameter("the unbalanced family needs --theta (or --I)".into())
            })?;
            family_unbalanced(theta)
        }
        FamilyArg::Werner => {
            let p = args.p.ok_or_else(|| {
                Error::InvalidParameter("the Werner family needs --p (or --I)".into())
            })?;
            family_werner(p)
        }
        FamilyArg::Eberhard => {
            let eta = args.eta.ok_or_else(|| {
                Error::InvalidParameter("the detection-loophole family needs --eta".into())
            })?;
            family_eberhard(eta)
        }
    }
}

fn parse_grid(text: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidParameter("--grid expects start:stop:count".into()));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("bad grid start: {e}")))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("bad grid stop: {e}")))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("bad grid count: {e}")))?;
    if count < 2 || stop <= start {
        return Err(Error::InvalidParameter("--grid needs stop > start and count >= 2".into()));
    }
    Ok((start, stop, count))
}

fn emit(path: Option<&std::path::Path>, text: &str) -> Result<()> {
    match path {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

