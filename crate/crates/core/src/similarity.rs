//! Output similarity metrics, all valued in `[0, 1]`.
//!
//! `sfe` is a text-level structural-equivalence proxy: a weighted blend of a
//! BLEU-style clipped n-gram precision (order sensitive) and token-set Jaccard
//! overlap (order insensitive).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Splits on whitespace and `|`, dropping empty pieces.
pub fn tokenize(s: &str) -> Vec<&str> {
    s.split(|c: char| c.is_whitespace() || c == '|')
        .filter(|t| !t.is_empty())
        .collect()
}

/// How an n-gram order with zero clipped matches is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// The k-th zero-match order contributes `1 / (2^k * total)`.
    #[default]
    Floor,
    /// Any zero-match order makes the score 0.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub n_max: usize,
    pub ngram_weight: f64,
    pub jaccard_weight: f64,
    pub smoothing: Smoothing,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            n_max: 4,
            ngram_weight: 0.5,
            jaccard_weight: 0.5,
            smoothing: Smoothing::Floor,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("n_max must be at least 1")]
    NMax,
    #[error("metric weights must be non-negative and sum to 1 (got {0} + {1})")]
    Weights(f64, f64),
    #[error("unknown metric {0:?} (expected ngram, jaccard or sfe)")]
    UnknownMetric(String),
}

impl MetricConfig {
    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_weights(mut self, ngram: f64, jaccard: f64) -> Self {
        self.ngram_weight = ngram;
        self.jaccard_weight = jaccard;
        self
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.n_max < 1 {
            return Err(MetricError::NMax);
        }
        let (a, b) = (self.ngram_weight, self.jaccard_weight);
        if !(a >= 0.0 && b >= 0.0) || (a + b - 1.0).abs() > 1e-9 {
            return Err(MetricError::Weights(a, b));
        }
        Ok(())
    }
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Smoothed geometric mean of clipped n-gram precisions times the brevity
/// penalty. `candidate` is scored against `reference`.
pub fn sim_ngram(candidate: &str, reference: &str, cfg: &MetricConfig) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let orders = cfg.n_max.min(cand.len());
    let mut log_sum = 0.0;
    let mut zero_orders = 0i32;
    for n in 1..=orders {
        let total = cand.len() - n + 1;
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts = ngram_counts(&refr, n);
        let matched: usize = cand_counts
            .iter()
            .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else {
            match cfg.smoothing {
                Smoothing::None => return 0.0,
                Smoothing::Floor => {
                    zero_orders += 1;
                    1.0 / (2f64.powi(zero_orders) * total as f64)
                }
            }
        };
        log_sum += p.ln();
    }
    let precision = (log_sum / orders as f64).exp();
    let bp = if cand.len() >= refr.len() {
        1.0
    } else {
        (1.0 - refr.len() as f64 / cand.len() as f64).exp()
    };
    (precision * bp).clamp(0.0, 1.0)
}

/// Token-set Jaccard overlap.
pub fn sim_jaccard(a: &str, b: &str) -> f64 {
    let sa: HashSet<&str> = tokenize(a).into_iter().collect();
    let sb: HashSet<&str> = tokenize(b).into_iter().collect();
    match (sa.is_empty(), sb.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let inter = sa.intersection(&sb).count();
            let union = sa.len() + sb.len() - inter;
            inter as f64 / union as f64
        }
    }
}

pub fn sfe(candidate: &str, reference: &str, cfg: &MetricConfig) -> f64 {
    let mut score = 0.0;
    if cfg.ngram_weight > 0.0 {
        score += cfg.ngram_weight * sim_ngram(candidate, reference, cfg);
    }
    if cfg.jaccard_weight > 0.0 {
        score += cfg.jaccard_weight * sim_jaccard(candidate, reference);
    }
    score.clamp(0.0, 1.0)
}

/// Scores an executed output against the observed target.
pub trait Evaluator: Send + Sync {
    fn similarity(&self, output: &str, target: &str) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ngram,
    Jaccard,
    #[default]
    Sfe,
}

impl FromStr for MetricKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ngram" => Ok(Self::Ngram),
            "jaccard" => Ok(Self::Jaccard),
            "sfe" => Ok(Self::Sfe),
            other => Err(MetricError::UnknownMetric(other.to_string())),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ngram => "ngram",
            Self::Jaccard => "jaccard",
            Self::Sfe => "sfe",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    #[serde(rename = "evaluator")]
    pub kind: MetricKind,
    #[serde(rename = "metric")]
    pub cfg: MetricConfig,
}

impl Metric {
    pub fn new(kind: MetricKind, cfg: MetricConfig) -> Result<Self, MetricError> {
        cfg.validate()?;
        Ok(Self { kind, cfg })
    }

    pub fn sfe_default() -> Self {
        Self {
            kind: MetricKind::Sfe,
            cfg: MetricConfig::default(),
        }
    }
}

impl Evaluator for Metric {
    fn similarity(&self, output: &str, target: &str) -> f64 {
        match self.kind {
            MetricKind::Ngram => sim_ngram(output, target, &self.cfg),
            MetricKind::Jaccard => sim_jaccard(output, target),
            MetricKind::Sfe => sfe(output, target, &self.cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n2() -> MetricConfig {
        MetricConfig::default().with_n_max(2)
    }

    #[test]
    fn tokenizer_splits_pipes_and_whitespace() {
        assert_eq!(
            tokenize("t1|alpha | beta\ngamma||"),
            vec!["t1", "alpha", "beta", "gamma"]
        );
    }

    #[test]
    fn ngram_identity() {
        assert_eq!(sim_ngram("a b c d", "a b c d", &MetricConfig::default()), 1.0);
    }

    #[test]
    fn ngram_hand_case() {
        // p1 = 2/3, p2 = 1/2, equal lengths
        let v = sim_ngram("a b c", "a b d", &n2());
        assert!((v - (1.0f64 / 3.0).sqrt()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn ngram_disjoint_is_floor_only() {
        let v = sim_ngram("x y z w v u t s", "a b c d e f g h", &MetricConfig::default());
        // floors 1/16, 1/28, 1/48, 1/80
        let expected = (1.0f64 / (16.0 * 28.0 * 48.0 * 80.0)).powf(0.25);
        assert!((v - expected).abs() < 1e-12);
        assert!(v < 0.05);
        let strict = MetricConfig {
            smoothing: Smoothing::None,
            ..MetricConfig::default()
        };
        assert_eq!(sim_ngram("x y z w v u t s", "a b c d e f g h", &strict), 0.0);
    }

    #[test]
    fn ngram_brevity_penalty() {
        // candidate is a strict prefix: every precision 1, BP = exp(1 - 4/2)
        let v = sim_ngram("a b", "a b c d", &MetricConfig::default());
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        // longer candidates carry no brevity penalty
        let v = sim_ngram("a b c d", "a b", &MetricConfig::default().with_n_max(1));
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        assert_eq!(sim_ngram("", "a", &MetricConfig::default()), 0.0);
        assert_eq!(sim_ngram("| ", "a", &MetricConfig::default()), 0.0);
    }

    #[test]
    fn jaccard_cases() {
        assert_eq!(sim_jaccard("a b", "a b"), 1.0);
        assert!((sim_jaccard("a b", "b c") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(sim_jaccard("", "a"), 0.0);
        assert_eq!(sim_jaccard("", ""), 1.0);
    }

    #[test]
    fn sfe_cases() {
        assert_eq!(sfe("q|r s", "q|r s", &MetricConfig::default()), 1.0);
        let cfg = MetricConfig::default().with_weights(1.0, 0.0);
        assert_eq!(sfe("a b c", "a b e f", &cfg), sim_ngram("a b c", "a b e f", &cfg));
        let v = sfe("a b c", "a b d", &n2());
        let expected = 0.5 * (1.0f64 / 3.0).sqrt() + 0.5 * 0.5;
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.5387).abs() < 1e-4);
    }

    #[test]
    fn config_validation() {
        assert_eq!(MetricConfig::default().validate(), Ok(()));
        assert_eq!(MetricConfig::default().with_n_max(0).validate(), Err(MetricError::NMax));
        assert!(MetricConfig::default().with_weights(0.6, 0.6).validate().is_err());
        assert!(MetricConfig::default().with_weights(-0.5, 1.5).validate().is_err());
        assert!("bleu".parse::<MetricKind>().is_err());
    }

    fn token_string() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "|", " ", "e"]), 0..16)
            .prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn metrics_stay_in_unit_interval(a in token_string(), b in token_string(), n in 1usize..6) {
            let cfg = MetricConfig::default().with_n_max(n);
            for v in [sim_ngram(&a, &b, &cfg), sim_jaccard(&a, &b), sfe(&a, &b, &cfg)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn jaccard_symmetric(a in token_string(), b in token_string()) {
            prop_assert_eq!(sim_jaccard(&a, &b), sim_jaccard(&b, &a));
        }

        #[test]
        fn identity_for_nonempty(a in token_string()) {
            prop_assume!(!tokenize(&a).is_empty());
            let cfg = MetricConfig::default();
            prop_assert_eq!(sim_ngram(&a, &a, &cfg), 1.0);
            prop_assert_eq!(sim_jaccard(&a, &a), 1.0);
            prop_assert_eq!(sfe(&a, &a, &cfg), 1.0);
        }
    }
}
