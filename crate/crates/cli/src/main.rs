//! `batchbald` command-line tool.
//!
//! Exit codes: 0 success, 1 property violation, 2 format error, 3 validation
//! error, 4 domain error.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use batchbald::acquisition::{
    self, meanstd_scores, varratios_scores, AcquisitionError, AcquisitionRequest, Strategy,
};
use batchbald::bench::{bench_csv, run_bench, BenchConfig};
use batchbald::estimators::{bald_scores, DEFAULT_EXACT_LIMIT, DEFAULT_SAMPLES};
use batchbald::io::{self, write_atomic, IoError, TRACE_CSV_HEADER};
use batchbald::sim::{self, LoopConfig, Scenario, SimError};
use batchbald::tensor::{validate_tensor, PosteriorTensor};
use batchbald::verify::{self, ExactScorer, FaultyScorer, Scorer, VerifyConfig};

#[derive(Debug, Parser)]
#[command(name = "batchbald", version, about = "Batch acquisition for Bayesian active learning")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-point scores of a tensor as `index,score` CSV.
    Score(ScoreArgs),
    /// Select a batch and write the results document.
    Acquire(AcquireArgs),
    /// Run active-learning loops on the synthetic exact-Bayes model.
    Simulate(SimulateArgs),
    /// Run the randomized property suite.
    Verify(VerifyArgs),
    /// Time acquisition over a sweep of pool sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    tensor: PathBuf,
    /// bald, batchbald (size-1 batches), varratios or meanstd.
    #[arg(long, default_value = "bald")]
    strategy: Strategy,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AcquireArgs {
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long, default_value = "batchbald")]
    strategy: Strategy,
    #[arg(long)]
    b: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Comma-separated strategies.
    #[arg(long, alias = "strategy", value_delimiter = ',', default_value = "batchbald,bald,random")]
    strategies: Vec<Strategy>,
    #[arg(long, default_value_t = 32)]
    hypotheses: usize,
    #[arg(long, default_value_t = 16)]
    features: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    /// Prototypes per feature bucket.
    #[arg(long, default_value_t = 10)]
    prototypes: usize,
    /// Extra copies of every prototype in the pool.
    #[arg(long, default_value_t = 2)]
    repetitions: usize,
    /// Dirichlet concentration of the hypothesis tables.
    #[arg(long, default_value_t = 0.3)]
    concentration: f64,
    #[arg(long, default_value_t = 1000)]
    test_size: usize,
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 4)]
    b: usize,
    #[arg(long, default_value_t = 64)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `trace_<strategy>.csv` and `summary.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Trials per property (default: each property's own count).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where counterexamples are written (default: next to the report).
    #[arg(long)]
    counterexample_dir: Option<PathBuf>,
    /// Replace the estimator with a deliberately broken one.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "2000,4000,8000")]
    sizes: Vec<usize>,
    #[arg(long, default_value = "batchbald")]
    strategy: Strategy,
    #[arg(long, default_value_t = 4)]
    b: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 32)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
    /// Timed runs per size; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Property(String),
    Format(String),
    Validation(String),
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Property(_) => 1,
            CliError::Format(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Domain(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Property(m) => write!(f, "property violation: {m}"),
            CliError::Format(m) => write!(f, "format error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Domain(m) => write!(f, "domain error: {m}"),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Format(e.to_string())
    }
}

impl From<AcquisitionError> for CliError {
    fn from(e: AcquisitionError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Domain(e.to_string())
    }
}

fn load_tensor(path: &Path) -> Result<PosteriorTensor, CliError> {
    let t = io::read_tensor(path)?;
    let report = validate_tensor(&t);
    if let Some(failed) = report.failures().next() {
        return Err(CliError::Validation(format!(
            "{} invariant violated: {}",
            failed.invariant.name(),
            failed.detail
        )));
    }
    Ok(t)
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, contents.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .map_err(|e| CliError::Format(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<(), CliError> {
    let t = load_tensor(&args.tensor)?;
    let scores = match args.strategy {
        Strategy::Bald | Strategy::BatchBald => bald_scores(&t),
        Strategy::VarRatios => varratios_scores(&t),
        Strategy::MeanStd => meanstd_scores(&t),
        other => {
            return Err(CliError::Domain(format!(
                "strategy {other} has no per-point score"
            )))
        }
    };
    let mut csv = String::from("index,score\n");
    for (i, s) in scores.scores.iter().enumerate() {
        csv.push_str(&format!("{i},{s:.12}\n"));
    }
    emit(args.out.as_deref(), &csv)
}

fn cmd_acquire(args: &AcquireArgs) -> Result<(), CliError> {
    let t = load_tensor(&args.tensor)?;
    let req = AcquisitionRequest {
        strategy: args.strategy,
        b: args.b,
        m: args.m,
        exact_limit: args.exact_limit,
        seed: args.seed,
    };
    let result = acquisition::acquire(&t, &req)?;
    let doc = result.to_document(&req, t.k());
    emit(args.out.as_deref(), &doc.to_json()?)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    if !(args.concentration > 0.0 && args.concentration.is_finite()) {
        return Err(CliError::Domain(format!(
            "concentration must be positive, got {}",
            args.concentration
        )));
    }
    let scenario = Scenario {
        hypotheses: args.hypotheses,
        features: args.features,
        classes: args.classes,
        prototypes_per_feature: args.prototypes,
        repetitions: args.repetitions,
        concentration: args.concentration,
        test_size: args.test_size,
    };
    let template = LoopConfig {
        strategy: Strategy::Random,
        rounds: args.rounds,
        b: args.b,
        k: args.k,
        m: args.m,
        exact_limit: args.exact_limit,
        seed: args.seed,
    };
    let mut strategies = args.strategies.clone();
    strategies.dedup();
    let run = sim::run_trials(&scenario, &template, &strategies, args.trials, args.seed)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Format(format!("{}: {e}", args.out.display())))?;
    let mut summary = serde_json::Map::new();
    for (strategy, traces) in &run.traces {
        let mut csv = String::from(TRACE_CSV_HEADER);
        csv.push('\n');
        for trace in traces {
            io::trace_csv_rows(trace, &mut csv);
        }
        write_atomic(
            &args.out.join(format!("trace_{}.csv", strategy.name())),
            csv.as_bytes(),
        )?;
        let finals: Vec<f64> = traces.iter().filter_map(|t| t.final_accuracy()).collect();
        summary.insert(
            strategy.name().to_owned(),
            serde_json::json!({
                "median_final_accuracy": run.median_final_accuracy(*strategy),
                "final_accuracies": finals,
                "median_label_entropy": run.median_label_entropy(*strategy),
            }),
        );
    }
    let doc = serde_json::json!({
        "seed": args.seed,
        "trials": args.trials,
        "rounds": args.rounds,
        "b": args.b,
        "k": args.k,
        "m": args.m,
        "exact_limit": args.exact_limit,
        "scenario": run.scenario,
        "strategies": summary,
    });
    let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
    write_atomic(&args.out.join("summary.json"), text.as_bytes())?;
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let cfg = VerifyConfig {
        seed: args.seed,
        trials: args.trials,
    };
    let faulty = FaultyScorer { bias: 0.1 };
    let scorer: &dyn Scorer = if args.inject_fault {
        &faulty
    } else {
        &ExactScorer
    };
    let report = verify::run_suite(&cfg, scorer);
    for p in &report.properties {
        eprintln!(
            "[{}] {} ({} trials, {} failures)",
            if p.passed { "PASS" } else { "FAIL" },
            p.property,
            p.trials,
            p.failures
        );
    }
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    emit(args.out.as_deref(), &text)?;
    if report.all_passed {
        return Ok(());
    }
    let dir = args
        .counterexample_dir
        .clone()
        .or_else(|| {
            args.out
                .as_ref()
                .and_then(|p| p.parent().map(Path::to_path_buf))
        })
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Format(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for p in &report.properties {
        if let Some(cx) = &p.counterexample {
            let path = dir.join(format!("counterexample_{}.json", p.property));
            let text = serde_json::to_string_pretty(cx).expect("serializable") + "\n";
            write_atomic(&path, text.as_bytes())?;
            written.push(path.display().to_string());
        }
    }
    let failed: Vec<&str> = report
        .properties
        .iter()
        .filter(|p| !p.passed)
        .map(|p| p.property.as_str())
        .collect();
    Err(CliError::Property(format!(
        "{} failed; counterexamples: {}",
        failed.join(", "),
        written.join(", ")
    )))
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let cfg = BenchConfig {
        sizes: args.sizes.clone(),
        strategy: args.strategy,
        b: args.b,
        c: args.classes,
        k: args.k,
        m: args.m,
        exact_limit: args.exact_limit,
        repeats: args.repeats,
        seed: args.seed,
    };
    if cfg.c < 2 || cfg.k == 0 {
        return Err(CliError::Domain("need classes >= 2 and k >= 1".into()));
    }
    let rows = run_bench(&cfg)?;
    emit(args.out.as_deref(), &bench_csv(&rows))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let command = cli.command;
    let body = move || match &command {
        Command::Score(a) => cmd_score(a),
        Command::Acquire(a) => cmd_acquire(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match cli.jobs {
        Some(0) => Err(CliError::Domain("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Domain(e.to_string()))?
            .install(body),
        None => body(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("batchbald: {e}");
            ExitCode::from(e.code())
        }
    }
}
