//! Color-guided MCTS over workflow prefixes.
//!
//! Every iteration recolors the tree, walks from the root to a node to
//! simulate (creating it when the walk asks for width), completes that
//! node's prefix with random primitives, executes it on a minibatch of
//! tasks and backs the mean similarity up the path.

mod tree;

pub use tree::{nearest_rank_quantile, score, ucb_value, ChildCap, Color, Node, NodeId, SearchTree, TreeError};

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::execution::{ExecError, Executor};
use crate::similarity::Evaluator;
use crate::space::{ObservationPair, PrimitiveSpace, Workflow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub l_max: usize,
    /// Branching cap M.
    pub max_children: usize,
    /// Quantile for the Red threshold.
    pub beta: f64,
    /// UCB exploration constant.
    pub exploration: f64,
    /// Iterations per run.
    pub budget: usize,
    /// Tasks averaged per rollout.
    pub minibatch: usize,
    pub seed: u64,
    /// Adds a stop action that ends a workflow before `l_max`.
    pub terminator: bool,
    /// Also mark a node terminal when the failure happens in the random
    /// suffix rather than inside its prefix.
    pub terminal_on_suffix_failure: bool,
    /// Rollouts a complete workflow receives before its node is retired.
    pub leaf_rollouts: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            l_max: 6,
            max_children: 5,
            beta: 0.5,
            exploration: std::f64::consts::SQRT_2,
            budget: 20,
            minibatch: 1,
            seed: 0,
            terminator: false,
            terminal_on_suffix_failure: false,
            leaf_rollouts: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |msg: &str| Err(SearchError::InvalidConfig(msg.to_string()));
        if self.l_max < 1 {
            return bad("l_max must be at least 1");
        }
        if self.max_children < 1 {
            return bad("max_children must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1)");
        }
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return bad("exploration must be a finite non-negative number");
        }
        if self.budget < 1 {
            return bad("budget must be at least 1");
        }
        if self.minibatch < 1 {
            return bad("minibatch must be at least 1");
        }
        if self.leaf_rollouts < 1 {
            return bad("leaf_rollouts must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// One row per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: usize,
    pub reward: f64,
    pub cumulative_tokens: u64,
    pub best_similarity: f64,
    pub best_length: usize,
    pub red_fraction: f64,
    pub max_tree_depth: usize,
}

pub const RUN_RECORD_HEADER: &str =
    "iteration,reward,cumulative_tokens,best_similarity,best_length,red_fraction,max_tree_depth";

/// Result of a single rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutcome {
    pub workflow: Vec<usize>,
    pub reward: f64,
    pub tokens: u64,
    /// Earliest failing position over the minibatch, 1-based.
    pub failed_at: Option<usize>,
    /// Whether the node was marked terminal by this rollout.
    pub marked_terminal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeSummary {
    pub node_count: usize,
    /// Node counts indexed by depth.
    pub depth_histogram: Vec<usize>,
    pub red_fraction: f64,
    pub terminal_count: usize,
    pub max_depth: usize,
    pub best_workflow: Option<Workflow>,
    pub best_similarity: f64,
    pub iterations: usize,
    pub skipped_iterations: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Option<Workflow>,
    /// Mean observed reward of `best` over its evaluations.
    pub best_score: f64,
    pub records: Vec<RunRecord>,
    pub summary: TreeSummary,
    /// Every node became unreachable before the budget ran out.
    pub exhausted: bool,
    pub tree: SearchTree,
}

#[derive(Debug, Clone, Copy)]
struct Evaluation {
    sum: f64,
    count: u64,
    first_seen: usize,
}

impl Evaluation {
    fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }
}

/// Where an iteration's walk ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Simulate(NodeId),
    /// Nothing to expand and nowhere to descend below this node.
    Stuck(NodeId),
}

/// Stepwise search driver. [`run_search`] and [`run_search_unpruned`] wrap
/// it; tests step it directly to inspect the tree between iterations.
pub struct Search<'a, X: ?Sized, E: ?Sized> {
    space: &'a PrimitiveSpace,
    cfg: SearchConfig,
    executor: &'a X,
    evaluator: &'a E,
    dataset: &'a [ObservationPair],
    pruned: bool,
    tree: SearchTree,
    rng: ChaCha8Rng,
    evaluations: HashMap<Vec<usize>, Evaluation>,
    iteration: usize,
    tokens: u64,
    best_so_far: f64,
    skipped: usize,
    exhausted: bool,
    records: Vec<RunRecord>,
}

impl<'a, X, E> Search<'a, X, E>
where
    X: Executor + ?Sized,
    E: Evaluator + ?Sized,
{
    pub fn new(
        space: &'a PrimitiveSpace,
        cfg: SearchConfig,
        executor: &'a X,
        evaluator: &'a E,
        dataset: &'a [ObservationPair],
        pruned: bool,
    ) -> Result<Self, SearchError> {
        cfg.validate()?;
        if dataset.is_empty() {
            return Err(SearchError::EmptyDataset);
        }
        let b = space.branching();
        let (actions, stop) = if cfg.terminator { (b + 1, Some(b)) } else { (b, None) };
        let cap = if pruned {
            ChildCap::Fixed(cfg.max_children)
        } else {
            ChildCap::Unbounded
        };
        Ok(Self {
            space,
            tree: SearchTree::new(actions, stop, cfg.l_max, cap),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            executor,
            evaluator,
            dataset,
            pruned,
            evaluations: HashMap::new(),
            iteration: 0,
            tokens: 0,
            best_so_far: 0.0,
            skipped: 0,
            exhausted: false,
            records: Vec::new(),
        })
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn is_done(&self) -> bool {
        self.exhausted || self.iteration >= self.cfg.budget
    }

    /// Walks from the root to the node to simulate, expanding on the way
    /// when the coloring (or classic UCT, when unpruned) asks for width.
    pub fn select_and_expand(&mut self) -> Selection {
        let mut v = SearchTree::ROOT;
        loop {
            let node = self.tree.node(v);
            if node.is_terminal() || node.depth >= self.cfg.l_max {
                return Selection::Simulate(v);
            }
            let can_expand = self.tree.can_expand(v);
            let has_live = node.children.iter().any(|&c| !self.tree.node(c).dead);
            let expand_first = if self.pruned {
                node.color == Color::Black || node.children.is_empty()
            } else {
                true
            };
            if can_expand && (expand_first || !has_live) {
                let child = self
                    .tree
                    .expand_random(v, &mut self.rng)
                    .expect("expandable node yields a child");
                return Selection::Simulate(child);
            }
            match self.tree.ucb_select(v, self.cfg.exploration) {
                Ok(c) => v = c,
                Err(_) => return Selection::Stuck(v),
            }
        }
    }

    /// Completes `node`'s prefix, runs it on a minibatch and scores it.
    pub fn rollout(&mut self, node: NodeId) -> Result<RolloutOutcome, SearchError> {
        let prefix = self.tree.prefix(node);
        let mut workflow = prefix.clone();
        if !self.tree.node(node).complete {
            let b = self.space.branching();
            let choices = if self.cfg.terminator { b + 1 } else { b };
            while workflow.len() < self.cfg.l_max {
                let a = self.rng.random_range(0..choices);
                if a == b {
                    break;
                }
                workflow.push(a);
            }
        }
        let picks: Vec<usize> = (0..self.cfg.minibatch)
            .map(|_| self.rng.random_range(0..self.dataset.len()))
            .collect();
        let mut total = 0.0;
        let mut tokens = 0u64;
        let mut failed_at: Option<usize> = None;
        for i in picks {
            let pair = &self.dataset[i];
            let res = self.executor.execute(self.space, &workflow, &pair.task)?;
            tokens += res.tokens;
            match res.failed_at {
                Some(at) => failed_at = Some(failed_at.map_or(at, |f| f.min(at))),
                None => total += self.evaluator.similarity(&res.output, &pair.target),
            }
        }
        let reward = (total / self.cfg.minibatch as f64).clamp(0.0, 1.0);
        let marked_terminal = match failed_at {
            Some(at) => at <= prefix.len() || self.cfg.terminal_on_suffix_failure,
            None => false,
        };
        if marked_terminal && node != SearchTree::ROOT {
            self.tree.mark_failed(node);
        }
        Ok(RolloutOutcome {
            workflow,
            reward,
            tokens,
            failed_at,
            marked_terminal,
        })
    }

    fn best(&self) -> Option<(&Vec<usize>, Evaluation)> {
        let mut best: Option<(&Vec<usize>, Evaluation)> = None;
        for (w, &e) in &self.evaluations {
            let better = match &best {
                None => true,
                Some((bw, be)) => {
                    let (m, bm) = (e.mean(), be.mean());
                    m > bm
                        || (m == bm
                            && (e.first_seen < be.first_seen
                                || (e.first_seen == be.first_seen && self.ids(w) < self.ids(bw))))
                }
            };
            if better {
                best = Some((w, e));
            }
        }
        best
    }

    fn ids(&self, steps: &[usize]) -> Vec<&str> {
        steps.iter().map(|&s| self.space.id(s)).collect()
    }

    /// Runs one full iteration and returns its record.
    pub fn step(&mut self) -> Result<RunRecord, SearchError> {
        let red_fraction = if self.pruned {
            self.tree.recolor(self.cfg.beta, self.cfg.max_children);
            self.tree.red_fraction()
        } else {
            0.0
        };
        self.iteration += 1;
        let reward = match self.select_and_expand() {
            Selection::Simulate(node) => {
                let out = self.rollout(node)?;
                let path = self.tree.path(node);
                self.tree.backup(&path, out.reward);
                let n = self.tree.node(node);
                if n.complete && !n.dead && n.own_rollouts >= self.cfg.leaf_rollouts {
                    self.tree.mark_dead(node);
                }
                self.tokens += out.tokens;
                let e = self.evaluations.entry(out.workflow).or_insert(Evaluation {
                    sum: 0.0,
                    count: 0,
                    first_seen: self.iteration,
                });
                e.sum += out.reward;
                e.count += 1;
                out.reward
            }
            Selection::Stuck(node) => {
                self.skipped += 1;
                self.tree.mark_dead(node);
                0.0
            }
        };
        if self.tree.node(SearchTree::ROOT).dead {
            self.exhausted = true;
        }
        let (best_score, best_length) = self.best().map_or((0.0, 0), |(w, e)| (e.mean(), w.len()));
        self.best_so_far = self.best_so_far.max(best_score);
        let record = RunRecord {
            iteration: self.iteration,
            reward,
            cumulative_tokens: self.tokens,
            best_similarity: self.best_so_far,
            best_length,
            red_fraction,
            max_tree_depth: self.tree.max_depth(),
        };
        self.records.push(record.clone());
        Ok(record)
    }

    pub fn finish(mut self) -> SearchOutcome {
        if self.pruned {
            self.tree.recolor(self.cfg.beta, self.cfg.max_children);
        } else {
            self.tree.clear_colors();
        }
        let (best, best_score) = match self.best() {
            Some((w, e)) => (Some(self.space.workflow(w)), e.mean()),
            None => (None, 0.0),
        };
        let mut depth_histogram = vec![0usize; self.tree.max_depth() + 1];
        for (_, n) in self.tree.nodes() {
            depth_histogram[n.depth] += 1;
        }
        let summary = TreeSummary {
            node_count: self.tree.len(),
            depth_histogram,
            red_fraction: self.tree.red_fraction(),
            terminal_count: self.tree.nodes().filter(|(_, n)| n.is_terminal()).count(),
            max_depth: self.tree.max_depth(),
            best_workflow: best.clone(),
            best_similarity: best_score,
            iterations: self.iteration,
            skipped_iterations: self.skipped,
            exhausted: self.exhausted,
        };
        SearchOutcome {
            best,
            best_score,
            records: self.records,
            summary,
            exhausted: self.exhausted,
            tree: self.tree,
        }
    }

    pub fn run(mut self) -> Result<SearchOutcome, SearchError> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.finish())
    }
}

/// Quantile-pruned search.
pub fn run_search<X, E>(
    space: &PrimitiveSpace,
    cfg: &SearchConfig,
    executor: &X,
    evaluator: &E,
    dataset: &[ObservationPair],
) -> Result<SearchOutcome, SearchError>
where
    X: Executor + ?Sized,
    E: Evaluator + ?Sized,
{
    Search::new(space, cfg.clone(), executor, evaluator, dataset, true)?.run()
}

/// Classic UCT control: no coloring, every untried primitive is expanded
/// before descending.
pub fn run_search_unpruned<X, E>(
    space: &PrimitiveSpace,
    cfg: &SearchConfig,
    executor: &X,
    evaluator: &E,
    dataset: &[ObservationPair],
) -> Result<SearchOutcome, SearchError>
where
    X: Executor + ?Sized,
    E: Evaluator + ?Sized,
{
    Search::new(space, cfg.clone(), executor, evaluator, dataset, false)?.run()
}

/// Writes run records as CSV with [`RUN_RECORD_HEADER`].
pub fn write_records_csv<W: std::io::Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(RUN_RECORD_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_jsonl<W: std::io::Write>(records: &[RunRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Per-depth node counts.
pub fn depth_counts(tree: &SearchTree) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for (_, n) in tree.nodes() {
        *counts.entry(n.depth).or_insert(0) += 1;
    }
    counts
}
