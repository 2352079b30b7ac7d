//! Command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::bench::{report_json, run_bench, write_report_csv, BenchError, BenchReport, BenchSpec, ExecutorKind};
use crate::bounds::bounds_row;
use crate::config::{ConfigError, RunConfig};
use crate::execution::{brute_force_optimum, BruteForceError, Executor, HttpExecutor, SimWorld};
use crate::search::{write_records_csv, write_records_jsonl, Search, SearchError};
use crate::similarity::{Evaluator, Metric, MetricConfig, MetricKind};
use crate::space::{load_dataset, ObservationPair, PrimitiveSpace};

const EXIT_CODES: &str = "Exit codes:
  0  success
  2  usage error
  3  file could not be read or written
  4  invalid configuration, world, space or dataset
  5  execution failed (transport or authentication)";

#[derive(Debug, Parser)]
#[command(name = "wfrecon", version, about = "Reconstruct agent workflows from input/output pairs", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one search and report the best workflow.
    Search(SearchArgs),
    /// Run every (variant, seed) cell of a bench spec.
    Bench(BenchArgs),
    /// Exhaustively find the best workflow of a small simulated world.
    Bruteforce(BruteforceArgs),
    /// Print search-volume bounds as CSV.
    Bounds(BoundsArgs),
    /// Score one output against one target.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Simulated world file; supplies space, tasks and executor.
    #[arg(long, conflicts_with = "dataset")]
    pub world: Option<PathBuf>,
    /// JSONL dataset of {"task", "output"} lines.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExecutorKind::Sim)]
    pub executor: ExecutorKind,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured iteration budget.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Plain UCT with unbounded width.
    #[arg(long)]
    pub unpruned: bool,
    /// Output prefix; writes PREFIX.records.csv, PREFIX.records.jsonl and
    /// PREFIX.summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Output prefix; writes PREFIX.csv, PREFIX.json and PREFIX.curves.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BruteforceArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub l_max: usize,
    /// Run configuration supplying the evaluator.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Branching factors, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub b: Vec<u64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub l_max: Vec<u32>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub beta: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, default_value = "sfe")]
    pub metric: MetricKind,
    #[arg(long, default_value_t = 4)]
    pub n_max: usize,
    /// File holding the candidate output.
    pub output: PathBuf,
    /// File holding the target output.
    pub target: PathBuf,
}

/// Error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    fn io(msg: impl ToString) -> Self {
        Self {
            code: 3,
            msg: msg.to_string(),
        }
    }

    fn invalid(msg: impl ToString) -> Self {
        Self {
            code: 4,
            msg: msg.to_string(),
        }
    }

    fn exec(msg: impl ToString) -> Self {
        Self {
            code: 5,
            msg: msg.to_string(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Self::io(e),
            ConfigError::Invalid { .. } => Self::invalid(e),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Exec(_) => Self::exec(e),
            _ => Self::invalid(e),
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Search(a) => cmd_search(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Bruteforce(a) => cmd_bruteforce(a, out),
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn load_world(path: &Path) -> Result<SimWorld, CliError> {
    use crate::execution::WorldError;
    SimWorld::load(path).map_err(|e| match e {
        WorldError::Io { .. } => CliError::io(e),
        _ => CliError::invalid(format!("{}: {e}", path.display())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_search(a: SearchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.search.seed = seed;
    }
    if let Some(budget) = a.budget {
        cfg.search.budget = budget;
    }
    cfg.search.validate().map_err(CliError::invalid)?;
    let evaluator = cfg.evaluator();

    let world = a.world.as_deref().map(load_world).transpose()?;
    let space: PrimitiveSpace = match &world {
        Some(w) => w.space().clone(),
        None => cfg
            .primitive_space()
            .map_err(CliError::invalid)?
            .ok_or_else(|| CliError::invalid("no primitive space: pass --world or set `space` in --config"))?,
    };
    let dataset: Vec<ObservationPair> = match (&a.dataset, &world) {
        (Some(path), _) => load_dataset(path).map_err(|e| match e {
            crate::space::DatasetError::Io { .. } => CliError::io(format!("{}: {e}", path.display())),
            _ => CliError::invalid(format!("{}: {e}", path.display())),
        })?,
        (None, Some(w)) => w.tasks().to_vec(),
        (None, None) => return Err(CliError::invalid("pass --world or --dataset")),
    };
    let executor: Box<dyn Executor> = match a.executor {
        ExecutorKind::Sim => Box::new(world.ok_or_else(|| CliError::invalid("the sim executor needs --world"))?),
        ExecutorKind::Http => {
            let http = cfg
                .http
                .clone()
                .ok_or_else(|| CliError::invalid("the http executor needs an [http] table in --config"))?;
            Box::new(HttpExecutor::new(http).map_err(CliError::invalid)?)
        }
    };

    let outcome = Search::new(
        &space,
        cfg.search.clone(),
        executor.as_ref(),
        &evaluator,
        &dataset,
        !a.unpruned,
    )?
    .run()?;
    if let Some(prefix) = &a.out {
        write_records_csv(&outcome.records, create(&with_suffix(prefix, ".records.csv"))?).map_err(CliError::io)?;
        let mut jsonl = create(&with_suffix(prefix, ".records.jsonl"))?;
        write_records_jsonl(&outcome.records, &mut jsonl).map_err(CliError::io)?;
        jsonl.flush().map_err(CliError::io)?;
        let mut summary = create(&with_suffix(prefix, ".summary.json"))?;
        serde_json::to_writer_pretty(&mut summary, &outcome.summary).map_err(CliError::io)?;
        summary.flush().map_err(CliError::io)?;
    }
    let best = outcome.best.as_ref().map(ToString::to_string).unwrap_or_default();
    writeln!(out, "best {best}").map_err(CliError::io)?;
    writeln!(out, "score {:.6}", outcome.best_score).map_err(CliError::io)?;
    writeln!(out, "iterations {}", outcome.records.len()).map_err(CliError::io)?;
    writeln!(
        out,
        "tokens {}",
        outcome.records.last().map_or(0, |r| r.cumulative_tokens)
    )
    .map_err(CliError::io)?;
    writeln!(out, "nodes {}", outcome.summary.node_count).map_err(CliError::io)?;
    if outcome.exhausted {
        writeln!(out, "exhausted").map_err(CliError::io)?;
    }
    Ok(())
}

fn write_bench_outputs(report: &BenchReport, prefix: &Path) -> Result<(), CliError> {
    write_report_csv(report, create(&with_suffix(prefix, ".csv"))?).map_err(CliError::io)?;
    let json = report_json(report).map_err(CliError::io)?;
    std::fs::write(with_suffix(prefix, ".json"), json).map_err(CliError::io)?;
    let mut w = csv::Writer::from_writer(create(&with_suffix(prefix, ".curves.csv"))?);
    w.write_record([
        "variant",
        "seed",
        "iteration",
        "cumulative_tokens",
        "best_similarity",
        "reward",
        "red_fraction",
    ])
    .map_err(CliError::io)?;
    for row in &report.rows {
        for r in &row.records {
            w.write_record([
                row.variant.name().to_string(),
                row.seed.to_string(),
                r.iteration.to_string(),
                r.cumulative_tokens.to_string(),
                r.best_similarity.to_string(),
                r.reward.to_string(),
                r.red_fraction.to_string(),
            ])
            .map_err(CliError::io)?;
        }
    }
    w.flush().map_err(CliError::io)
}

fn print_aggregates(report: &BenchReport, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "variant,runs,sim_mean,sim_min,sim_max,tokens_mean,depth_mean,red_mean"
    )?;
    for a in &report.aggregates {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.1},{:.2},{:.4}",
            a.variant,
            a.runs,
            a.final_similarity.mean,
            a.final_similarity.min,
            a.final_similarity.max,
            a.total_tokens.mean,
            a.max_depth.mean,
            a.red_fraction.mean
        )?;
    }
    for c in &report.comparisons {
        match &c.paired {
            Some(p) => writeln!(
                out,
                "{} vs {}: mean diff {:.6}, t {:.4}",
                c.variant, c.baseline, p.mean, p.t
            )?,
            None => writeln!(out, "{} vs {}: too few pairs for a t statistic", c.variant, c.baseline)?,
        }
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = BenchSpec::load(&a.spec)?;
    let (report, failure) = match run_bench(&spec) {
        Ok(r) => (r, None),
        Err(BenchError::Cell {
            variant,
            seed,
            source,
            partial,
        }) => {
            let err = CliError::from(source);
            let msg = format!("variant {variant} seed {seed}: {}; partial results kept", err.msg);
            (*partial, Some(CliError { code: err.code, msg }))
        }
        Err(BenchError::Config(e)) => return Err(e.into()),
        Err(e @ BenchError::Spec(_)) => return Err(CliError::invalid(e)),
    };
    if let Some(prefix) = &a.out {
        write_bench_outputs(&report, prefix)?;
    }
    print_aggregates(&report, out).map_err(CliError::io)?;
    failure.map_or(Ok(()), Err)
}

fn cmd_bruteforce(a: BruteforceArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let world = load_world(&a.world)?;
    let evaluator = cfg.evaluator();
    let (best, score) = brute_force_optimum(&world, &evaluator, a.l_max).map_err(|e| match e {
        BruteForceError::Exec(_) => CliError::exec(e),
        _ => CliError::invalid(e),
    })?;
    writeln!(out, "{best} {score:.6}").map_err(CliError::io)
}

fn cmd_bounds(a: BoundsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for &b in &a.b {
        for &l in &a.l_max {
            for &p in &a.p {
                for &beta in &a.beta {
                    let row = bounds_row(b, l, p, beta).map_err(CliError::invalid)?;
                    w.serialize(&row).map_err(CliError::io)?;
                }
            }
        }
    }
    w.flush().map_err(CliError::io)
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let metric = Metric::new(a.metric, MetricConfig::default().with_n_max(a.n_max)).map_err(CliError::invalid)?;
    let read =
        |p: &Path| std::fs::read_to_string(p).map_err(|e| CliError::io(format!("cannot read {}: {e}", p.display())));
    let (output, target) = (read(&a.output)?, read(&a.target)?);
    writeln!(out, "{:.6}", metric.similarity(&output, &target)).map_err(CliError::io)
}
