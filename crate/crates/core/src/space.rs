//! Primitive space, workflows and observation datasets.
//!
//! A primitive is the atomic unit the search composes: a role, a backing
//! model, a thought pattern and a (possibly empty) toolset. The search only
//! ever sees primitive IDs; the labels are interpreted by executors.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

fn default_cost() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Primitive {
    pub id: String,
    pub role: String,
    pub model: String,
    pub pattern: String,
    #[serde(default)]
    pub tools: BTreeSet<String>,
    /// Simulated tokens consumed per invocation.
    #[serde(default = "default_cost")]
    pub cost: u64,
}

impl Primitive {
    /// Primitive with an empty toolset and unit cost.
    pub fn new(id: &str, role: &str, model: &str, pattern: &str) -> Self {
        Self {
            id: id.to_string(),
            role: role.to_string(),
            model: model.to_string(),
            pattern: pattern.to_string(),
            tools: BTreeSet::new(),
            cost: 1,
        }
    }

    pub fn with_cost(mut self, cost: u64) -> Self {
        self.cost = cost;
        self
    }

    pub fn with_tools<I, S>(mut self, tools: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tools = tools.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpaceError {
    #[error("primitive space is empty")]
    Empty,
    #[error("duplicate primitive id {0:?}")]
    DuplicateId(String),
    #[error("primitive {0:?} has an empty {1}")]
    EmptyField(String, &'static str),
    #[error("invalid primitive space file: {0}")]
    Parse(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

/// The ordered set of primitives available to the search.
///
/// Ordering is stable and is used for deterministic tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSpace {
    primitives: Vec<Primitive>,
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    #[serde(rename = "primitive", default)]
    primitives: Vec<Primitive>,
}

impl PrimitiveSpace {
    pub fn new(primitives: Vec<Primitive>) -> Result<Self, SpaceError> {
        if primitives.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut index = HashMap::with_capacity(primitives.len());
        for (i, p) in primitives.iter().enumerate() {
            for (name, value) in [
                ("id", &p.id),
                ("role", &p.role),
                ("model", &p.model),
                ("pattern", &p.pattern),
            ] {
                if value.is_empty() {
                    return Err(SpaceError::EmptyField(p.id.clone(), name));
                }
            }
            if index.insert(p.id.clone(), i).is_some() {
                return Err(SpaceError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Self { primitives, index })
    }

    /// Parses a TOML document made of `[[primitive]]` tables.
    pub fn from_toml_str(text: &str) -> Result<Self, SpaceError> {
        let file: SpaceFile = toml::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))?;
        Self::new(file.primitives)
    }

    pub fn load(path: &Path) -> Result<Self, SpaceError> {
        let text = std::fs::read_to_string(path).map_err(|e| SpaceError::Io {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// Branching factor, the number of primitives.
    pub fn branching(&self) -> usize {
        self.primitives.len()
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn get(&self, idx: usize) -> &Primitive {
        &self.primitives[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.primitives[idx].id
    }

    /// Resolves a workflow's IDs to positions in this space.
    pub fn resolve(&self, w: &Workflow) -> Result<Vec<usize>, Violation> {
        w.steps
            .iter()
            .map(|id| self.index_of(id).ok_or_else(|| Violation::UnknownPrimitive(id.clone())))
            .collect()
    }

    pub fn workflow(&self, steps: &[usize]) -> Workflow {
        Workflow::new(steps.iter().map(|&i| self.id(i).to_string()).collect())
    }

    /// Returns a copy with every toolset rewritten by `f`.
    pub fn map_tools<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&Primitive) -> BTreeSet<String>,
    {
        let primitives = self
            .primitives
            .iter()
            .map(|p| Primitive {
                tools: f(p),
                ..p.clone()
            })
            .collect();
        Self {
            primitives,
            index: self.index.clone(),
        }
    }

    pub fn all_tools(&self) -> BTreeSet<String> {
        self.primitives.iter().flat_map(|p| p.tools.iter().cloned()).collect()
    }
}

/// An ordered chain of primitive IDs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Workflow {
    pub steps: Vec<String>,
}

impl Workflow {
    pub fn new(steps: Vec<String>) -> Self {
        Self { steps }
    }

    pub fn from_ids(ids: &[&str]) -> Self {
        Self::new(ids.iter().map(|s| s.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for Workflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.steps.join(","))
    }
}

/// First invariant a workflow breaks.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("length < 1")]
    Empty,
    #[error("length {len} > l_max {l_max}")]
    TooLong { len: usize, l_max: usize },
    #[error("unknown primitive {0}")]
    UnknownPrimitive(String),
}

pub fn validate_workflow(w: &Workflow, space: &PrimitiveSpace, l_max: usize) -> Result<(), Violation> {
    if w.is_empty() {
        return Err(Violation::Empty);
    }
    if w.len() > l_max {
        return Err(Violation::TooLong { len: w.len(), l_max });
    }
    space.resolve(w).map(|_| ())
}

/// Iterates every index sequence of length `len` over `b` symbols in
/// lexicographic order.
pub fn sequences(b: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next = if b == 0 && len > 0 { None } else { Some(vec![0; len]) };
    std::iter::from_fn(move || {
        let cur = next.take()?;
        let mut succ = cur.clone();
        let mut pos = len;
        while pos > 0 {
            pos -= 1;
            succ[pos] += 1;
            if succ[pos] < b {
                next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(cur)
    })
}

/// One observed input/output pair of the black-box system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationPair {
    pub task: String,
    #[serde(rename = "output")]
    pub target: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset {path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("dataset line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Deserialize)]
struct RawRecord {
    task: String,
    output: String,
}

/// Parses JSONL text with one `{"task": .., "output": ..}` object per line.
pub fn parse_dataset(text: &str) -> Result<Vec<ObservationPair>, DatasetError> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let line_no = i + 1;
            let raw: RawRecord = serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
                line: line_no,
                msg: e.to_string(),
            })?;
            if raw.task.is_empty() {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    msg: "empty task".into(),
                });
            }
            if raw.output.is_empty() {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    msg: "empty output".into(),
                });
            }
            Ok(ObservationPair {
                task: raw.task,
                target: raw.output,
            })
        })
        .collect()
}

pub fn load_dataset(path: &Path) -> Result<Vec<ObservationPair>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    parse_dataset(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> PrimitiveSpace {
        PrimitiveSpace::new(vec![
            Primitive::new("A", "alpha", "m", "cot"),
            Primitive::new("B", "beta", "m", "cot"),
        ])
        .unwrap()
    }

    #[test]
    fn validate_examples() {
        let space = ab();
        assert_eq!(validate_workflow(&Workflow::from_ids(&["A"]), &space, 3), Ok(()));
        let err = validate_workflow(&Workflow::from_ids(&[]), &space, 3).unwrap_err();
        assert_eq!(err.to_string(), "length < 1");
        let err = validate_workflow(&Workflow::from_ids(&["A", "Z"]), &space, 3).unwrap_err();
        assert_eq!(err.to_string(), "unknown primitive Z");
        let err = validate_workflow(&Workflow::from_ids(&["A", "A", "B", "B"]), &space, 3).unwrap_err();
        assert!(matches!(err, Violation::TooLong { len: 4, l_max: 3 }));
    }

    #[test]
    fn space_rejects_duplicates_and_empty() {
        assert_eq!(PrimitiveSpace::new(vec![]).unwrap_err(), SpaceError::Empty);
        let dup = PrimitiveSpace::new(vec![
            Primitive::new("A", "r", "m", "p"),
            Primitive::new("A", "r2", "m", "p"),
        ]);
        assert_eq!(dup.unwrap_err(), SpaceError::DuplicateId("A".into()));
    }

    #[test]
    fn toml_space_defaults_cost_to_one() {
        let space = PrimitiveSpace::from_toml_str(
            r#"
            [[primitive]]
            id = "coder"
            role = "programmer"
            model = "gpt-4o-mini"
            pattern = "react"
            tools = ["python"]

            [[primitive]]
            id = "rev"
            role = "reviewer"
            model = "gpt-4o-mini"
            pattern = "cot"
            cost = 7
            "#,
        )
        .unwrap();
        assert_eq!(space.branching(), 2);
        assert_eq!(space.get(0).cost, 1);
        assert_eq!(space.get(1).cost, 7);
        assert!(space.get(1).tools.is_empty());
        assert_eq!(space.index_of("rev"), Some(1));
    }

    #[test]
    fn enumeration_counts() {
        for b in 1..=5usize {
            for d in 0..=4u32 {
                assert_eq!(sequences(b, d as usize).count(), b.pow(d));
            }
        }
    }

    #[test]
    fn validate_accepts_exactly_enumerated() {
        let space = PrimitiveSpace::new(
            ["A", "B", "C"]
                .iter()
                .map(|id| Primitive::new(id, id, "m", "p"))
                .collect(),
        )
        .unwrap();
        let l_max = 3;
        for d in 1..=l_max {
            for seq in sequences(3, d) {
                assert_eq!(validate_workflow(&space.workflow(&seq), &space, l_max), Ok(()));
            }
        }
        assert!(validate_workflow(&space.workflow(&[0, 1, 2, 0]), &space, l_max).is_err());
    }

    #[test]
    fn dataset_examples() {
        let ok = parse_dataset("{\"task\":\"t1\",\"output\":\"o1\"}\n{\"task\":\"t2\",\"output\":\"o2\"}\n").unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok[0].task, "t1");
        assert_eq!(ok[1].target, "o2");

        let bad = "{\"task\":\"a\",\"output\":\"b\"}\n{\"task\":\"a\",\"output\":\"b\"}\n{\"task\":\"c\"}\n";
        match parse_dataset(bad) {
            Err(DatasetError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }

        assert!(parse_dataset("").unwrap().is_empty());

        match parse_dataset("{\"task\":\"\",\"output\":\"b\"}") {
            Err(DatasetError::Malformed { line: 1, msg }) => assert_eq!(msg, "empty task"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_dataset_file() {
        let err = load_dataset(Path::new("/definitely/not/here.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.jsonl"));
    }
}
