use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{mean_similarity, ExecError, ExecutionResult, Executor};
use crate::similarity::Evaluator;
use crate::space::{load_dataset, sequences, ObservationPair, Primitive, PrimitiveSpace, Workflow};

/// Replaces a role token when output noise fires.
pub const NOISE_TOKEN: &str = "~";

/// Token a primitive contributes to a simulated trace: its role, suffixed
/// with `+tool` for each attached tool.
pub fn emit_token(p: &Primitive) -> String {
    let mut token = p.role.clone();
    for tool in &p.tools {
        token.push('+');
        token.push_str(tool);
    }
    token
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("hidden target: {0}")]
    Target(String),
    #[error("hidden target contains forbidden transition {0} -> {1}")]
    ForbiddenInTarget(String, String),
    #[error("forbidden pair references unknown primitive {0:?}")]
    UnknownForbidden(String),
    #[error("noise must lie in [0, 1), got {0}")]
    Noise(f64),
    #[error("world has no tasks")]
    NoTasks,
    #[error("empty task string")]
    EmptyTask,
    #[error("invalid world file: {0}")]
    Parse(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

/// Deterministic black-box stand-in.
///
/// Running a workflow on task `t` yields `t|tok_1|...|tok_L`, where each
/// `tok_i` is [`emit_token`] of step `i`. A forbidden consecutive pair makes
/// the second primitive of the pair fail.
#[derive(Debug, Clone)]
pub struct SimWorld {
    space: PrimitiveSpace,
    hidden_target: Vec<usize>,
    forbidden: HashSet<(String, String)>,
    tasks: Vec<ObservationPair>,
    noise: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    space: Option<PathBuf>,
    #[serde(rename = "primitive", default)]
    primitives: Vec<Primitive>,
    hidden_target: Vec<String>,
    #[serde(default)]
    forbidden: Vec<(String, String)>,
    #[serde(default)]
    noise: f64,
    tasks: Option<Vec<String>>,
    dataset: Option<PathBuf>,
}

impl SimWorld {
    pub fn new(
        space: PrimitiveSpace,
        hidden_target: &Workflow,
        forbidden: Vec<(String, String)>,
        tasks: Vec<String>,
        noise: f64,
    ) -> Result<Self, WorldError> {
        if hidden_target.is_empty() {
            return Err(WorldError::Target("length < 1".into()));
        }
        let target = space
            .resolve(hidden_target)
            .map_err(|v| WorldError::Target(v.to_string()))?;
        for (a, b) in &forbidden {
            for id in [a, b] {
                if space.index_of(id).is_none() {
                    return Err(WorldError::UnknownForbidden(id.clone()));
                }
            }
        }
        let forbidden: HashSet<(String, String)> = forbidden.into_iter().collect();
        for pair in hidden_target.steps.windows(2) {
            if forbidden.contains(&(pair[0].clone(), pair[1].clone())) {
                return Err(WorldError::ForbiddenInTarget(pair[0].clone(), pair[1].clone()));
            }
        }
        if !(0.0..1.0).contains(&noise) {
            return Err(WorldError::Noise(noise));
        }
        if tasks.is_empty() {
            return Err(WorldError::NoTasks);
        }
        if tasks.iter().any(String::is_empty) {
            return Err(WorldError::EmptyTask);
        }
        let mut world = Self {
            space,
            hidden_target: target,
            forbidden,
            tasks: Vec::new(),
            noise,
        };
        world.tasks = tasks
            .into_iter()
            .map(|task| {
                let target = world.run(&world.space, &world.hidden_target, &task).output;
                ObservationPair { task, target }
            })
            .collect();
        Ok(world)
    }

    /// Parses a world file. Relative `space` and `dataset` paths resolve
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, WorldError> {
        let file: WorldFile = toml::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
        let space = match (file.space, file.primitives.is_empty()) {
            (Some(_), false) => {
                return Err(WorldError::Parse(
                    "give either `space` or inline [[primitive]] tables, not both".into(),
                ))
            }
            (Some(path), true) => {
                PrimitiveSpace::load(&base_dir.join(path)).map_err(|e| WorldError::Parse(e.to_string()))?
            }
            (None, _) => PrimitiveSpace::new(file.primitives).map_err(|e| WorldError::Parse(e.to_string()))?,
        };
        let tasks = match (file.tasks, file.dataset) {
            (Some(tasks), None) => tasks,
            (None, Some(path)) => load_dataset(&base_dir.join(path))
                .map_err(|e| WorldError::Parse(e.to_string()))?
                .into_iter()
                .map(|p| p.task)
                .collect(),
            _ => return Err(WorldError::Parse("give exactly one of `tasks` or `dataset`".into())),
        };
        Self::new(
            space,
            &Workflow::new(file.hidden_target),
            file.forbidden,
            tasks,
            file.noise,
        )
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path).map_err(|e| WorldError::Io {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn space(&self) -> &PrimitiveSpace {
        &self.space
    }

    pub fn hidden_target(&self) -> Workflow {
        self.space.workflow(&self.hidden_target)
    }

    pub fn hidden_steps(&self) -> &[usize] {
        &self.hidden_target
    }

    /// Observation pairs: each target is the world's own trace of the hidden
    /// workflow.
    pub fn tasks(&self) -> &[ObservationPair] {
        &self.tasks
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn is_forbidden(&self, from: &str, to: &str) -> bool {
        self.forbidden.contains(&(from.to_string(), to.to_string()))
    }

    /// Runs a workflow given by IDs.
    pub fn execute_workflow(&self, w: &Workflow, task: &str) -> Result<ExecutionResult, WorldError> {
        let steps = self.space.resolve(w).map_err(|v| WorldError::Target(v.to_string()))?;
        Ok(self.run(&self.space, &steps, task))
    }

    fn run(&self, space: &PrimitiveSpace, steps: &[usize], task: &str) -> ExecutionResult {
        let mut tokens = 0u64;
        for (pos, &step) in steps.iter().enumerate() {
            tokens += space.get(step).cost;
            if pos > 0
                && self
                    .forbidden
                    .contains(&(space.id(steps[pos - 1]).to_string(), space.id(step).to_string()))
            {
                return ExecutionResult::failure(pos + 1, tokens);
            }
        }
        let mut rng = (self.noise > 0.0).then(|| ChaCha8Rng::seed_from_u64(noise_seed(space, steps, task)));
        let mut output = String::from(task);
        for &step in steps {
            output.push('|');
            let noisy = rng.as_mut().is_some_and(|r| r.random::<f64>() < self.noise);
            if noisy {
                output.push_str(NOISE_TOKEN);
            } else {
                output.push_str(&emit_token(space.get(step)));
            }
        }
        ExecutionResult::success(output, tokens)
    }
}

impl Executor for SimWorld {
    fn execute(&self, space: &PrimitiveSpace, steps: &[usize], task: &str) -> Result<ExecutionResult, ExecError> {
        Ok(self.run(space, steps, task))
    }
}

// FNV-1a over the task and the step IDs.
fn noise_seed(space: &PrimitiveSpace, steps: &[usize], task: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(task.as_bytes());
    for &s in steps {
        feed(&[0xff]);
        feed(space.id(s).as_bytes());
    }
    h
}

/// Parameters of a randomly generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldGen {
    pub primitives: usize,
    pub target_len: usize,
    pub forbidden: usize,
    pub tasks: usize,
    pub min_cost: u64,
    pub max_cost: u64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for WorldGen {
    fn default() -> Self {
        Self {
            primitives: 4,
            target_len: 3,
            forbidden: 0,
            tasks: 3,
            min_cost: 1,
            max_cost: 1,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl WorldGen {
    /// Builds the world. IDs are `p00, p01, ..`, roles `role00, ..`; the
    /// hidden target is drawn uniformly and forbidden pairs never touch its
    /// transitions.
    pub fn build(&self) -> Result<SimWorld, WorldError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let b = self.primitives;
        let (lo, hi) = (self.min_cost.min(self.max_cost), self.min_cost.max(self.max_cost));
        let prims: Vec<Primitive> = (0..b)
            .map(|i| {
                Primitive::new(&format!("p{i:02}"), &format!("role{i:02}"), "sim", "direct")
                    .with_cost(rng.random_range(lo..=hi))
            })
            .collect();
        let space = PrimitiveSpace::new(prims).map_err(|e| WorldError::Parse(e.to_string()))?;
        let target: Vec<usize> = (0..self.target_len).map(|_| rng.random_range(0..b.max(1))).collect();
        let used: HashSet<(usize, usize)> = target.windows(2).map(|w| (w[0], w[1])).collect();
        let candidates: Vec<(usize, usize)> = (0..b)
            .flat_map(|a| (0..b).map(move |c| (a, c)))
            .filter(|pair| !used.contains(pair))
            .collect();
        let forbidden = candidates
            .choose_multiple(&mut rng, self.forbidden.min(candidates.len()))
            .map(|&(a, c)| (space.id(a).to_string(), space.id(c).to_string()))
            .collect();
        let tasks = (0..self.tasks).map(|i| format!("task{i}")).collect();
        let hidden = space.workflow(&target);
        SimWorld::new(space, &hidden, forbidden, tasks, self.noise)
    }
}

#[derive(Debug, Error)]
pub enum BruteForceError {
    #[error("search space of {0} workflows exceeds the 1000000 limit")]
    TooLarge(u128),
    #[error("l_max must be at least 1")]
    ZeroLength,
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Exhaustive argmax of task-averaged similarity over every workflow of
/// length `1..=l_max`. Ties go to the shorter workflow, then to the
/// lexicographically smaller ID sequence.
pub fn brute_force_optimum<E: Evaluator + ?Sized>(
    world: &SimWorld,
    evaluator: &E,
    l_max: usize,
) -> Result<(Workflow, f64), BruteForceError> {
    if l_max == 0 {
        return Err(BruteForceError::ZeroLength);
    }
    let b = world.space.branching() as u128;
    let mut volume = 0u128;
    let mut layer = 1u128;
    for _ in 0..l_max {
        layer = layer.saturating_mul(b);
        volume = volume.saturating_add(layer);
        if volume > 1_000_000 {
            return Err(BruteForceError::TooLarge(volume));
        }
    }
    let mut best: Option<(Workflow, f64)> = None;
    for len in 1..=l_max {
        for steps in sequences(world.space.branching(), len) {
            let score = mean_similarity(world, evaluator, &world.space, &steps, &world.tasks)?;
            let w = world.space.workflow(&steps);
            let better = match &best {
                None => true,
                Some((bw, bs)) => score > *bs || (score == *bs && w.len() == bw.len() && w.steps < bw.steps),
            };
            if better {
                best = Some((w, score));
            }
        }
    }
    Ok(best.expect("at least one candidate"))
}
