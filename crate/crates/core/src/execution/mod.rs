//! Workflow execution: the executor contract plus its simulated and HTTP
//! realizations.

mod http;
mod sim;

pub use http::{parse_chat_response, render_system_message, ChatReply, HttpConfig, HttpExecutor};
pub use sim::{brute_force_optimum, emit_token, BruteForceError, SimWorld, WorldError, WorldGen, NOISE_TOKEN};

use serde::Serialize;
use thiserror::Error;

use crate::similarity::Evaluator;
use crate::space::{ObservationPair, PrimitiveSpace};

/// Outcome of running one workflow on one task.
///
/// `failed_at` is the 1-based position of the step that failed, which is
/// also the number of steps that were invoked. `tokens` covers exactly those
/// steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionResult {
    pub output: String,
    pub failed_at: Option<usize>,
    pub tokens: u64,
}

impl ExecutionResult {
    pub fn success(output: String, tokens: u64) -> Self {
        Self {
            output,
            failed_at: None,
            tokens,
        }
    }

    pub fn failure(at: usize, tokens: u64) -> Self {
        Self {
            output: String::new(),
            failed_at: Some(at),
            tokens,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.failed_at.is_some()
    }
}

/// Infrastructure errors. Workflow failures are reported in-band through
/// [`ExecutionResult::failed_at`] instead.
#[derive(Debug, Error)]
pub enum ExecError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint rejected credentials (HTTP {0})")]
    Auth(u16),
    #[error("executor misconfigured: {0}")]
    Config(String),
}

/// Realizes a workflow on a task. Implementations must tolerate concurrent
/// calls.
pub trait Executor: Send + Sync {
    fn execute(&self, space: &PrimitiveSpace, steps: &[usize], task: &str) -> Result<ExecutionResult, ExecError>;
}

impl<E: Executor + ?Sized> Executor for &E {
    fn execute(&self, space: &PrimitiveSpace, steps: &[usize], task: &str) -> Result<ExecutionResult, ExecError> {
        (**self).execute(space, steps, task)
    }
}

/// Mean similarity of `steps` over `pairs`; failed runs contribute 0.
pub fn mean_similarity<X, E>(
    executor: &X,
    evaluator: &E,
    space: &PrimitiveSpace,
    steps: &[usize],
    pairs: &[ObservationPair],
) -> Result<f64, ExecError>
where
    X: Executor + ?Sized,
    E: Evaluator + ?Sized,
{
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for pair in pairs {
        let res = executor.execute(space, steps, &pair.task)?;
        if !res.is_failure() {
            total += evaluator.similarity(&res.output, &pair.target);
        }
    }
    Ok(total / pairs.len() as f64)
}
