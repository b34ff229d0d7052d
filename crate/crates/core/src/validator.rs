//! Out-of-sample evaluation of the greedy policy induced by a cut stack.

use rayon::prelude::*;

use crate::cuts::CutStack;
use crate::error::{Error, Result};
use crate::model::DPInstance;
use crate::rng::{EpochStream, StreamDomain};
use crate::trainer::{rollout_profit, DecisionContext, DecisionSearch};

/// Profits of `k` independent rollouts plus summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    /// Profits in stream-index order.
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (divisor `k - 1`).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Analytic lower end of the profit support.
    pub support_lo: f64,
    /// Analytic upper end of the profit support.
    pub support_hi: f64,
}

impl ValidationSummary {
    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn from_samples(samples: Vec<f64>, inst: &DPInstance) -> Result<Self> {
        Self::with_support(samples, profit_support(inst))
    }

    /// Summary of `samples` with known support endpoints `(lo, hi)`.
    pub fn with_support(samples: Vec<f64>, (support_lo, support_hi): (f64, f64)) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::precondition("validation needs at least two samples"));
        }
        let k = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / k;
        let ss: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum();
        let std = (ss / (k - 1.0)).sqrt();
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(ValidationSummary {
            samples,
            mean,
            std,
            min,
            max,
            support_lo,
            support_hi,
        })
    }
}

/// `[l_-, l_+]` with `l_- <= 0 <= l_+`: every order earns between
/// `r + price_lo` and `r + price_hi`, less the per-order cost.
pub fn profit_support(inst: &DPInstance) -> (f64, f64) {
    let cap = inst.total_capacity() as f64;
    let low = (cap * (inst.revenue + inst.price_lo - inst.cost_per_order)).min(0.0);
    let high = (cap * (inst.revenue + inst.price_hi - inst.cost_per_order)).max(0.0);
    (low, high)
}

/// Roll out the greedy policy on validation streams `1..=k`.
pub fn validate(
    inst: &DPInstance,
    cuts: &CutStack,
    k: usize,
    seed: u64,
    search: DecisionSearch,
) -> Result<ValidationSummary> {
    let indices: Vec<u64> = (1..=k as u64).collect();
    validate_streams(inst, cuts, &indices, seed, search)
}

/// Roll out the greedy policy on the given validation stream indices.
pub fn validate_streams(
    inst: &DPInstance,
    cuts: &CutStack,
    indices: &[u64],
    seed: u64,
    search: DecisionSearch,
) -> Result<ValidationSummary> {
    inst.validate()?;
    if cuts.n() != inst.n || cuts.horizon() != inst.horizon {
        return Err(Error::DimensionMismatch(format!(
            "cut stack is {}-dimensional with horizon {}, instance is {}-dimensional with horizon {}",
            cuts.n(),
            cuts.horizon(),
            inst.n,
            inst.horizon
        )));
    }
    if indices.len() < 2 {
        return Err(Error::precondition("validation needs at least two samples"));
    }
    let ctx = DecisionContext::new(inst, search)?;
    let samples = indices
        .par_iter()
        .map(|&j| {
            let mut stream = EpochStream::new(seed, StreamDomain::Validation, j);
            rollout_profit(&ctx, cuts, &mut stream)
        })
        .collect();
    ValidationSummary::from_samples(samples, inst)
}
