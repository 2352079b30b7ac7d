//! Search-volume calculators for quantile pruning and their empirical
//! counterparts measured on live trees.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::search::{depth_counts, SearchTree};

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("branching factor must be at least 2, got {0}")]
    Branching(u64),
    #[error("{0} must lie in [0, 1), got {1}")]
    Rate(&'static str, f64),
}

fn check_rate(name: &'static str, v: f64) -> Result<(), BoundsError> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(BoundsError::Rate(name, v))
    }
}

/// Total unpruned volume `sum_{d=0}^{l_max} b^d`, computed in closed form
/// `(b^{l_max+1} - 1) / (b - 1)` with exact integers.
pub fn v_full(b: u64, l_max: u32) -> Result<BigUint, BoundsError> {
    if b < 2 {
        return Err(BoundsError::Branching(b));
    }
    let base = BigUint::from(b);
    Ok((base.pow(l_max + 1) - BigUint::one()) / (base - BigUint::one()))
}

/// Effective frontier volume `sum_{d=0}^{l_max} (b(1-p))^d`.
pub fn v_eff(b: u64, p: f64, l_max: u32) -> Result<f64, BoundsError> {
    if b < 2 {
        return Err(BoundsError::Branching(b));
    }
    check_rate("p", p)?;
    let r = b as f64 * (1.0 - p);
    if r == 1.0 {
        return Ok(f64::from(l_max) + 1.0);
    }
    // an integral ratio goes through exact integers so that p = 0 agrees
    // with v_full to the last bit
    if r >= 2.0 && r.fract() == 0.0 && r < 9.0e15 {
        return Ok(to_f64(&v_full(r as u64, l_max)?));
    }
    Ok((r.powf(f64::from(l_max) + 1.0) - 1.0) / (r - 1.0))
}

/// Lower bound on the acceleration ratio, `(1/(1-p))^{l_max}`.
pub fn eta_lower(p: f64, l_max: u32) -> Result<f64, BoundsError> {
    check_rate("p", p)?;
    Ok((1.0 / (1.0 - p)).powf(f64::from(l_max)))
}

/// Upper bound on the acceleration ratio, `(1/(1-beta))^{l_max}`.
pub fn eta_upper(beta: f64, l_max: u32) -> Result<f64, BoundsError> {
    check_rate("beta", beta)?;
    Ok((1.0 / (1.0 - beta)).powf(f64::from(l_max)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRow {
    pub b: u64,
    pub l_max: u32,
    pub p: f64,
    pub beta: f64,
    /// Exact decimal string; the integer can exceed every machine width.
    pub v_full: String,
    pub v_eff: f64,
    pub eta_lower: f64,
    pub eta_upper: f64,
}

pub const BOUNDS_HEADER: &str = "b,l_max,p,beta,v_full,v_eff,eta_lower,eta_upper";

pub fn bounds_row(b: u64, l_max: u32, p: f64, beta: f64) -> Result<BoundsRow, BoundsError> {
    Ok(BoundsRow {
        b,
        l_max,
        p,
        beta,
        v_full: v_full(b, l_max)?.to_string(),
        v_eff: v_eff(b, p, l_max)?,
        eta_lower: eta_lower(p, l_max)?,
        eta_upper: eta_upper(beta, l_max)?,
    })
}

/// Empirical shape of a finished tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeMeasure {
    pub depth_counts: BTreeMap<usize, usize>,
    pub total_nodes: usize,
    pub red_fraction: f64,
    /// Realized pruning rate, taken as the final Red fraction: Red nodes are
    /// exactly the ones whose width growth is frozen.
    pub realized_p: f64,
}

/// Measures a tree as last colored.
pub fn measure_tree(tree: &SearchTree) -> TreeMeasure {
    let red_fraction = tree.red_fraction();
    TreeMeasure {
        depth_counts: depth_counts(tree),
        total_nodes: tree.len(),
        red_fraction,
        realized_p: red_fraction,
    }
}

/// Term-by-term sum, kept apart from the closed form so the two can be
/// cross-checked.
pub fn v_full_term_sum(b: u64, l_max: u32) -> BigUint {
    let base = BigUint::from(b);
    let mut term = BigUint::one();
    let mut sum = BigUint::zero();
    for _ in 0..=l_max {
        sum += &term;
        term *= &base;
    }
    sum
}

pub fn to_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}
