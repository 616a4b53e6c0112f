//! Decay-rate extraction on top of the solver.

use serde::Serialize;

use crate::analysis::{extract_rate, RateFit, WindowPolicy};
use crate::error::Result;
use crate::melonic::solver::{solve_until_decayed, Solution, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub delta: f64,
    pub fit: RateFit,
    /// Time the run actually reached.
    pub t_end: f64,
}

/// Runs `config` at momentum `k` until `|G|` has passed through the fit
/// window, then fits the exponential tail.
pub fn decay_rate(config: &SolverConfig, k: f64, policy: &WindowPolicy) -> Result<(RatePoint, Solution)> {
    let sol = solve_until_decayed(config.clone(), k, policy.lower, 0.5)?;
    let g: Vec<f64> = sol.greens(k)?.iter().map(|z| z.norm()).collect();
    let times = sol.times();
    let fit = extract_rate(&times, &g, None, policy)?;
    let t_end = *times.last().expect("solution has rows");
    Ok((RatePoint { delta: config.delta, fit, t_end }, sol))
}

/// [`decay_rate`] for each coupling, all other settings taken from `base`.
pub fn rate_sweep(base: &SolverConfig, k: f64, deltas: &[f64], policy: &WindowPolicy) -> Result<Vec<RatePoint>> {
    deltas
        .iter()
        .map(|&delta| Ok(decay_rate(&SolverConfig { delta, ..base.clone() }, k, policy)?.0))
        .collect()
}

/// Upper time bound generous enough for a full decay through the default
/// window: `5 tau` with `1/tau = D^2 log D^-2`, floored for large `D`.
pub fn suggested_t_max(delta: f64) -> f64 {
    let d2 = delta * delta;
    let inv_tau = d2 * (1.0 / d2).ln().max(1.0);
    (5.0 / inv_tau).clamp(20.0, 5000.0)
}
