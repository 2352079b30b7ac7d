//! Multi-seed benchmark harness: every (variant, seed) cell gets the same
//! iteration budget and the same dataset.
//!
//! Bench spec file:
//!
//! ```toml
//! seeds = [0, 1, 2, 3, 4]
//! variants = ["pruned", "unpruned"]
//! threshold = 0.45            # optional, for tokens-to-threshold
//! world = "world.toml"        # or a [generate] table, or dataset + executor = "http"
//!
//! [search]
//! l_max = 6
//! budget = 60
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::config::{base_dir, read_file, ConfigError, RunConfig};
use crate::execution::{mean_similarity, Executor, HttpExecutor, SimWorld, WorldGen};
use crate::search::{RunRecord, Search, SearchConfig, SearchError};
use crate::similarity::{Evaluator, Metric};
use crate::space::{load_dataset, ObservationPair, PrimitiveSpace, Workflow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Pruned,
    Unpruned,
    /// Pruned search with every toolset emptied.
    NoTools,
    /// Pruned search with every primitive holding every tool in the space.
    AllTools,
    /// Pruned search with toolsets restricted to the configured subset.
    SelectedTools,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pruned => "pruned",
            Self::Unpruned => "unpruned",
            Self::NoTools => "no_tools",
            Self::AllTools => "all_tools",
            Self::SelectedTools => "selected_tools",
        }
    }

    pub fn is_pruned(self) -> bool {
        self != Self::Unpruned
    }

    /// Space this variant searches over.
    pub fn apply(self, space: &PrimitiveSpace, selected: &BTreeSet<String>) -> PrimitiveSpace {
        match self {
            Self::Pruned | Self::Unpruned => space.clone(),
            Self::NoTools => space.map_tools(|_| BTreeSet::new()),
            Self::AllTools => {
                let all = space.all_tools();
                space.map_tools(|_| all.clone())
            }
            Self::SelectedTools => space.map_tools(|p| p.tools.intersection(selected).cloned().collect()),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorKind {
    #[default]
    Sim,
    Http,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Pruned, Variant::Unpruned]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSpec {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub selected_tools: BTreeSet<String>,
    #[serde(default)]
    pub executor: ExecutorKind,
    #[serde(default)]
    pub world: Option<PathBuf>,
    #[serde(default)]
    pub generate: Option<WorldGen>,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(flatten)]
    pub run: RunConfig,
}

// `flatten` hides unknown keys from serde, so they are checked by name.
const SPEC_KEYS: &[&str] = &[
    "seeds",
    "variants",
    "threshold",
    "selected_tools",
    "executor",
    "world",
    "generate",
    "dataset",
    "space",
    "primitive",
    "evaluator",
    "search",
    "metric",
    "http",
];

impl BenchSpec {
    pub fn new(run: RunConfig) -> Self {
        Self {
            seeds: default_seeds(),
            variants: default_variants(),
            threshold: None,
            selected_tools: BTreeSet::new(),
            executor: ExecutorKind::Sim,
            world: None,
            generate: None,
            dataset: None,
            run,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        if let Some(key) = table.keys().find(|k| !SPEC_KEYS.contains(&k.as_str())) {
            return Err(format!("unknown key `{key}`"));
        }
        let spec: Self = table.try_into().map_err(|e: toml::de::Error| e.to_string())?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read_file(path)?;
        let mut spec = Self::from_toml_str(&text).map_err(|e| ConfigError::invalid(path, e))?;
        let base = base_dir(path);
        for p in [&mut spec.world, &mut spec.dataset, &mut spec.run.space]
            .into_iter()
            .flatten()
        {
            *p = base.join(&*p);
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.seeds.is_empty() {
            return Err("at least one seed is required".into());
        }
        if self.variants.is_empty() {
            return Err("at least one variant is required".into());
        }
        let unique: BTreeSet<_> = self.variants.iter().collect();
        if unique.len() != self.variants.len() {
            return Err("variants must be distinct".into());
        }
        let seeds: BTreeSet<_> = self.seeds.iter().collect();
        if seeds.len() != self.seeds.len() {
            return Err("seeds must be distinct".into());
        }
        self.run.search.validate().map_err(|e| e.to_string())?;
        self.run.metric.validate().map_err(|e| e.to_string())?;
        match self.executor {
            ExecutorKind::Sim if self.world.is_some() == self.generate.is_some() => {
                Err("the sim executor needs exactly one of `world` or [generate]".into())
            }
            ExecutorKind::Http if self.run.http.is_none() => Err("the http executor needs an [http] table".into()),
            ExecutorKind::Http if self.dataset.is_none() && self.world.is_none() => {
                Err("the http executor needs a `dataset` or a `world`".into())
            }
            _ => Ok(()),
        }
    }
}

/// One finished (variant, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub variant: Variant,
    pub seed: u64,
    /// Returned workflow re-evaluated on every dataset task.
    pub final_similarity: f64,
    /// Mean observed reward of the returned workflow during search.
    pub search_score: f64,
    pub total_tokens: u64,
    pub best_length: usize,
    pub max_depth: usize,
    pub red_fraction: f64,
    pub node_count: usize,
    pub iterations: usize,
    pub tokens_to_threshold: Option<u64>,
    pub best_workflow: String,
    #[serde(skip)]
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        Self {
            mean: values.iter().sum::<f64>() / n,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantAggregate {
    pub variant: Variant,
    pub runs: usize,
    pub final_similarity: Summary,
    pub total_tokens: Summary,
    pub max_depth: Summary,
    pub best_length: Summary,
    pub red_fraction: Summary,
    pub reached_threshold: usize,
}

fn ser_stat<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn de_stat<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(s) if s == "inf" => Ok(f64::INFINITY),
        Raw::Text(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        Raw::Text(s) => Err(serde::de::Error::custom(format!("bad statistic {s:?}"))),
    }
}

/// Paired t statistic over per-seed differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    #[serde(serialize_with = "ser_stat", deserialize_with = "de_stat")]
    pub t: f64,
}

#[derive(Debug, Error, PartialEq)]
#[error("paired t needs at least 2 differences, got {0}")]
pub struct TooFewDifferences(pub usize);

/// Mean, sample standard deviation and `t = mean / (sd / sqrt(n))`. A zero
/// spread gives `t = ±inf` for a non-zero mean and 0 otherwise.
pub fn paired_t(diffs: &[f64]) -> Result<PairedT, TooFewDifferences> {
    let n = diffs.len();
    if n < 2 {
        return Err(TooFewDifferences(n));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let t = if sd == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(mean)
        }
    } else {
        mean / (sd / (n as f64).sqrt())
    };
    Ok(PairedT { n, mean, sd, t })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub variant: Variant,
    pub baseline: Variant,
    /// Per-seed `final_similarity(variant) - final_similarity(baseline)`.
    pub differences: Vec<f64>,
    pub paired: Option<PairedT>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub threshold: Option<f64>,
    pub search: SearchConfig,
    pub metric: Metric,
    pub rows: Vec<CellResult>,
    pub aggregates: Vec<VariantAggregate>,
    pub comparisons: Vec<Comparison>,
    /// Set when a cell failed and the report only holds finished cells.
    pub partial: bool,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("variant {variant} seed {seed}: {source}")]
    Cell {
        variant: Variant,
        seed: u64,
        source: SearchError,
        partial: Box<BenchReport>,
    },
}

/// First cumulative token count at which `best_similarity` reaches the
/// threshold.
pub fn tokens_to_threshold(records: &[RunRecord], threshold: f64) -> Option<u64> {
    records
        .iter()
        .find(|r| r.best_similarity >= threshold)
        .map(|r| r.cumulative_tokens)
}

/// Everything a bench needs besides the spec.
pub struct BenchEnv<'a> {
    pub space: PrimitiveSpace,
    pub dataset: Vec<ObservationPair>,
    pub executor: Box<dyn Executor + 'a>,
}

impl BenchEnv<'static> {
    /// Resolves the world, dataset and executor a spec names.
    pub fn from_spec(spec: &BenchSpec) -> Result<Self, BenchError> {
        let world = match (&spec.world, &spec.generate) {
            (Some(path), _) => Some(SimWorld::load(path).map_err(|e| ConfigError::invalid(path, e))?),
            (None, Some(gen)) => Some(gen.build().map_err(|e| BenchError::Spec(e.to_string()))?),
            (None, None) => None,
        };
        let space = match (&world, spec.run.primitive_space()) {
            (Some(w), _) => w.space().clone(),
            (None, Ok(Some(space))) => space,
            (None, Ok(None)) => return Err(BenchError::Spec("no primitive space configured".into())),
            (None, Err(e)) => return Err(BenchError::Spec(e.to_string())),
        };
        let dataset = match (&spec.dataset, &world) {
            (Some(path), _) => load_dataset(path).map_err(|e| ConfigError::invalid(path, e))?,
            (None, Some(w)) => w.tasks().to_vec(),
            (None, None) => return Err(BenchError::Spec("no dataset configured".into())),
        };
        let executor: Box<dyn Executor> = match spec.executor {
            ExecutorKind::Sim => Box::new(world.ok_or_else(|| BenchError::Spec("sim executor needs a world".into()))?),
            ExecutorKind::Http => {
                let cfg = spec
                    .run
                    .http
                    .clone()
                    .ok_or_else(|| BenchError::Spec("missing [http]".into()))?;
                Box::new(HttpExecutor::new(cfg).map_err(|e| BenchError::Spec(e.to_string()))?)
            }
        };
        Ok(Self {
            space,
            dataset,
            executor,
        })
    }
}

fn run_cell(
    env: &BenchEnv<'_>,
    spec: &BenchSpec,
    evaluator: &Metric,
    variant: Variant,
    seed: u64,
) -> Result<CellResult, SearchError> {
    let space = variant.apply(&env.space, &spec.selected_tools);
    let cfg = SearchConfig {
        seed,
        ..spec.run.search.clone()
    };
    let executor: &dyn Executor = env.executor.as_ref();
    let out = Search::new(&space, cfg, executor, evaluator, &env.dataset, variant.is_pruned())?.run()?;
    let (final_similarity, best_workflow) = match &out.best {
        Some(w) => {
            let steps = space.resolve(w).expect("search returns workflows over its own space");
            (
                mean_similarity(executor, evaluator as &dyn Evaluator, &space, &steps, &env.dataset)?,
                w.to_string(),
            )
        }
        None => (0.0, String::new()),
    };
    let last = out.records.last();
    Ok(CellResult {
        variant,
        seed,
        final_similarity,
        search_score: out.best_score,
        total_tokens: last.map_or(0, |r| r.cumulative_tokens),
        best_length: out.best.as_ref().map_or(0, Workflow::len),
        max_depth: out.summary.max_depth,
        red_fraction: out.summary.red_fraction,
        node_count: out.summary.node_count,
        iterations: out.records.len(),
        tokens_to_threshold: spec.threshold.and_then(|t| tokens_to_threshold(&out.records, t)),
        best_workflow,
        records: out.records,
    })
}

fn aggregate(variant: Variant, rows: &[&CellResult]) -> VariantAggregate {
    let col = |f: fn(&CellResult) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
    VariantAggregate {
        variant,
        runs: rows.len(),
        final_similarity: Summary::of(&col(|r| r.final_similarity)),
        total_tokens: Summary::of(&col(|r| r.total_tokens as f64)),
        max_depth: Summary::of(&col(|r| r.max_depth as f64)),
        best_length: Summary::of(&col(|r| r.best_length as f64)),
        red_fraction: Summary::of(&col(|r| r.red_fraction)),
        reached_threshold: rows.iter().filter(|r| r.tokens_to_threshold.is_some()).count(),
    }
}

/// Builds aggregates and paired comparisons from finished rows.
pub fn assemble(spec: &BenchSpec, rows: Vec<CellResult>, partial: bool) -> BenchReport {
    let aggregates = spec
        .variants
        .iter()
        .map(|&v| {
            let mine: Vec<&CellResult> = rows.iter().filter(|r| r.variant == v).collect();
            aggregate(v, &mine)
        })
        .collect();
    let baseline = if spec.variants.contains(&Variant::Unpruned) {
        Variant::Unpruned
    } else {
        spec.variants[0]
    };
    let lookup = |v: Variant, seed: u64| rows.iter().find(|r| r.variant == v && r.seed == seed);
    let comparisons = spec
        .variants
        .iter()
        .filter(|&&v| v != baseline)
        .map(|&v| {
            let differences: Vec<f64> = spec
                .seeds
                .iter()
                .filter_map(|&s| Some(lookup(v, s)?.final_similarity - lookup(baseline, s)?.final_similarity))
                .collect();
            Comparison {
                variant: v,
                baseline,
                paired: paired_t(&differences).ok(),
                differences,
            }
        })
        .collect();
    BenchReport {
        seeds: spec.seeds.clone(),
        variants: spec.variants.clone(),
        threshold: spec.threshold,
        search: spec.run.search.clone(),
        metric: spec.run.evaluator(),
        rows,
        aggregates,
        comparisons,
        partial,
    }
}

/// Runs every (variant, seed) cell. Cells run in parallel; rows come back
/// in (variant, seed) spec order.
pub fn run_bench_with(spec: &BenchSpec, env: &BenchEnv<'_>) -> Result<BenchReport, BenchError> {
    spec.validate().map_err(BenchError::Spec)?;
    let evaluator = spec.run.evaluator();
    let cells: Vec<(Variant, u64)> = spec
        .variants
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<Result<CellResult, SearchError>> = cells
        .par_iter()
        .map(|&(v, s)| run_cell(env, spec, &evaluator, v, s))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut failure = None;
    for ((v, s), res) in cells.into_iter().zip(results) {
        match res {
            Ok(row) => rows.push(row),
            Err(e) if failure.is_none() => failure = Some((v, s, e)),
            Err(_) => {}
        }
    }
    match failure {
        None => Ok(assemble(spec, rows, false)),
        Some((variant, seed, source)) => Err(BenchError::Cell {
            variant,
            seed,
            source,
            partial: Box::new(assemble(spec, rows, true)),
        }),
    }
}

pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport, BenchError> {
    let env = BenchEnv::from_spec(spec)?;
    run_bench_with(spec, &env)
}

pub const REPORT_HEADER: &str = "variant,seed,final_similarity,search_score,total_tokens,best_length,max_depth,red_fraction,node_count,iterations,tokens_to_threshold,best_workflow";

pub fn write_report_csv<W: std::io::Write>(report: &BenchReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER.split(','))?;
    for r in &report.rows {
        w.write_record([
            r.variant.name().to_string(),
            r.seed.to_string(),
            r.final_similarity.to_string(),
            r.search_score.to_string(),
            r.total_tokens.to_string(),
            r.best_length.to_string(),
            r.max_depth.to_string(),
            r.red_fraction.to_string(),
            r.node_count.to_string(),
            r.iterations.to_string(),
            r.tokens_to_threshold.map(|t| t.to_string()).unwrap_or_default(),
            r.best_workflow.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Lossless JSON encoding shared by the CLI and tests.
pub fn report_json(report: &BenchReport) -> serde_json::Result<String> {
    serde_json::to_string_pretty(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paired_t_examples() {
        let r = paired_t(&[0.1, 0.2, 0.3]).unwrap();
        assert!((r.mean - 0.2).abs() < 1e-12);
        assert!((r.sd - 0.1).abs() < 1e-12);
        assert!((r.t - 0.2 / (0.1 / 3f64.sqrt())).abs() < 1e-9);
        assert!((r.t - 3.4641).abs() < 1e-4);

        assert_eq!(paired_t(&[0.0, 0.0, 0.0]).unwrap().t, 0.0);
        assert_eq!(paired_t(&[0.05, 0.05]).unwrap().t, f64::INFINITY);
        assert_eq!(paired_t(&[-0.05, -0.05]).unwrap().t, f64::NEG_INFINITY);
        assert_eq!(paired_t(&[0.3]), Err(TooFewDifferences(1)));
    }

    #[test]
    fn infinite_t_round_trips_through_json() {
        let p = paired_t(&[0.05, 0.05]).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"inf\""));
        let back: PairedT = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn spec_validation() {
        let ok = BenchSpec::from_toml_str("seeds=[1]\nvariants=[\"pruned\"]\n[generate]\nprimitives=3\n").unwrap();
        assert_eq!(ok.generate.as_ref().unwrap().primitives, 3);
        assert!(BenchSpec::from_toml_str("seeds=[]\n[generate]\n").is_err());
        assert!(BenchSpec::from_toml_str("variants=[]\n[generate]\n").is_err());
        assert!(BenchSpec::from_toml_str("seeds=[1,1]\n[generate]\n").is_err());
        assert!(BenchSpec::from_toml_str("seeds=[1]\n").is_err());
        assert!(BenchSpec::from_toml_str("variants=[\"fast\"]\n[generate]\n").is_err());
        assert!(BenchSpec::from_toml_str("executor=\"http\"\ndataset=\"d.jsonl\"\n").is_err());
        assert!(BenchSpec::from_toml_str("seedz=[1]\n[generate]\n").is_err());
        assert!(BenchSpec::from_toml_str("[generate]\n[search]\nbudgett=3\n").is_err());
    }

    #[test]
    fn tool_variants_rewrite_toolsets() {
        use crate::space::Primitive;
        let space = PrimitiveSpace::new(vec![
            Primitive::new("a", "coder", "m", "p").with_tools(["python"]),
            Primitive::new("b", "searcher", "m", "p").with_tools(["web", "python"]),
            Primitive::new("c", "writer", "m", "p"),
        ])
        .unwrap();
        let none = Variant::NoTools.apply(&space, &BTreeSet::new());
        assert!(none.primitives().iter().all(|p| p.tools.is_empty()));
        let all = Variant::AllTools.apply(&space, &BTreeSet::new());
        assert!(all.primitives().iter().all(|p| p.tools.len() == 2));
        let sel = Variant::SelectedTools.apply(&space, &BTreeSet::from(["web".to_string()]));
        assert_eq!(sel.get(0).tools.len(), 0);
        assert_eq!(sel.get(1).tools, BTreeSet::from(["web".to_string()]));
        assert_eq!(Variant::Pruned.apply(&space, &BTreeSet::new()), space);
    }

    fn small_spec(variants: Vec<Variant>, seeds: Vec<u64>) -> BenchSpec {
        let mut spec = BenchSpec::new(RunConfig {
            search: SearchConfig {
                l_max: 3,
                budget: 25,
                ..SearchConfig::default()
            },
            ..RunConfig::default()
        });
        spec.variants = variants;
        spec.seeds = seeds;
        spec.threshold = Some(0.5);
        spec.generate = Some(WorldGen {
            primitives: 4,
            target_len: 3,
            forbidden: 2,
            tasks: 3,
            max_cost: 4,
            seed: 5,
            ..WorldGen::default()
        });
        spec
    }

    #[test]
    fn single_cell_report() {
        let spec = small_spec(vec![Variant::Pruned], vec![3]);
        let report = run_bench(&spec).unwrap();
        assert_eq!(report.rows.len(), 1);
        let agg = &report.aggregates[0];
        assert_eq!(agg.runs, 1);
        assert_eq!(agg.final_similarity.min, agg.final_similarity.max);
        assert_eq!(agg.final_similarity.mean, report.rows[0].final_similarity);
        assert!(report.comparisons.is_empty());
        assert!(!report.partial);
    }

    #[test]
    fn budget_parity_and_aggregates() {
        let spec = small_spec(
            vec![Variant::Pruned, Variant::Unpruned, Variant::NoTools],
            vec![1, 2, 3],
        );
        let report = run_bench(&spec).unwrap();
        assert_eq!(report.rows.len(), 9);
        for row in &report.rows {
            assert_eq!(row.iterations, 25);
            assert_eq!(row.records.len(), 25);
        }
        for agg in &report.aggregates {
            let mine: Vec<&CellResult> = report.rows.iter().filter(|r| r.variant == agg.variant).collect();
            assert_eq!(*agg, aggregate(agg.variant, &mine));
        }
        assert_eq!(report.comparisons.len(), 2);
        assert!(report
            .comparisons
            .iter()
            .all(|c| c.baseline == Variant::Unpruned && c.differences.len() == 3));
        let again = run_bench(&spec).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn threshold_lookup() {
        let rec = |i, t, b| RunRecord {
            iteration: i,
            reward: 0.0,
            cumulative_tokens: t,
            best_similarity: b,
            best_length: 1,
            red_fraction: 0.0,
            max_tree_depth: 1,
        };
        let recs = vec![rec(1, 5, 0.1), rec(2, 9, 0.4), rec(3, 14, 0.6)];
        assert_eq!(tokens_to_threshold(&recs, 0.4), Some(9));
        assert_eq!(tokens_to_threshold(&recs, 0.7), None);
    }
}
