//! Admissible control representations.
//!
//! Controls are restricted to piecewise-constant-in-time, Markovian-in-state
//! processes with values in [σ̲, σ̄]: a countable dense subfamily suffices
//! to attain the supremum, and the HJB maximizer is bang-bang Markovian, so
//! this class reaches the PDE value in the grid limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gheat::FeedbackPolicy;
use crate::types::{TimeGrid, VolatilityInterval};

/// A piecewise-constant control path: `values[k]` is held on [t_k, t_{k+1}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl ControlPath {
    /// One value per step, each inside the volatility interval.
    pub fn new(grid: TimeGrid, values: Vec<f64>, theta: &VolatilityInterval) -> Result<Self> {
        if values.len() != grid.n_steps() {
            return Err(Error::Validation(format!(
                "control path needs {} values (one per step), got {}",
                grid.n_steps(),
                values.len()
            )));
        }
        for (k, v) in values.iter().enumerate() {
            if !theta.contains(*v) {
                return Err(Error::Validation(format!(
                    "control value {v} at step {k} outside [{}, {}]",
                    theta.sigma_low(),
                    theta.sigma_high()
                )));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A family of admissible controls over which the Monte Carlo supremum runs.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlFamily {
    /// Constant controls at `n_levels` uniformly spaced volatilities.
    /// Level j is σ̲ + j·(σ̄−σ̲)/(n_levels−1); the end levels are pinned to
    /// exactly σ̲ and σ̄ so refined grids share members bitwise.
    ConstantGrid { interval: VolatilityInterval, n_levels: usize },
    /// The bang-bang feedback policy from a PDE solve; one member.
    Feedback(FeedbackPolicy),
    /// A single fixed control path; one member.
    Fixed(ControlPath),
}

impl ControlFamily {
    pub fn constant_grid(interval: VolatilityInterval, n_levels: usize) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::Validation(format!(
                "constant grid needs at least 2 levels, got {n_levels}"
            )));
        }
        Ok(ControlFamily::ConstantGrid { interval, n_levels })
    }

    /// Number of members the supremum ranges over.
    pub fn n_members(&self) -> usize {
        match self {
            ControlFamily::ConstantGrid { n_levels, .. } => *n_levels,
            ControlFamily::Feedback(_) | ControlFamily::Fixed(_) => 1,
        }
    }

    /// The constant level of member `j` of a constant grid.
    pub fn level(&self, j: usize) -> Option<f64> {
        match self {
            ControlFamily::ConstantGrid { interval, n_levels } if j < *n_levels => {
                Some(if j == 0 {
                    interval.sigma_low()
                } else if j == *n_levels - 1 {
                    interval.sigma_high()
                } else {
                    let step =
                        (interval.sigma_high() - interval.sigma_low()) / (*n_levels - 1) as f64;
                    interval.sigma_low() + j as f64 * step
                })
            }
            _ => None,
        }
    }

    /// Checks that this family can drive a simulation on `grid`. Constant
    /// grids are grid-free and feedback policies look up by time, but a
    /// fixed path stores one value per step of its own grid and must match.
    pub fn validate_for_grid(&self, grid: &TimeGrid) -> Result<()> {
        if let ControlFamily::Fixed(path) = self {
            if path.grid() != grid {
                return Err(Error::Validation(format!(
                    "fixed control path is defined on {} steps over T = {}, \
                     simulation uses {} steps over T = {}",
                    path.grid().n_steps(),
                    path.grid().horizon(),
                    grid.n_steps(),
                    grid.horizon()
                )));
            }
        }
        Ok(())
    }

    /// The control value member `member` applies on step `k`, where `time`
    /// is the node time t_k and `state` the current path value at t_k.
    ///
    /// Constant-grid members ignore the state; the feedback member looks up
    /// the policy at (t_k, nearest space node to `state`); a fixed path
    /// returns its stored step value. The result depends only on
    /// (k, state at t_k), so adaptedness holds by construction.
    pub fn control_at(&self, k: usize, time: f64, state: f64, member: usize) -> Result<f64> {
        if member >= self.n_members() {
            return Err(Error::Validation(format!(
                "member {member} out of range for a family of {}",
                self.n_members()
            )));
        }
        match self {
            ControlFamily::ConstantGrid { .. } => {
                Ok(self.level(member).expect("member index checked above"))
            }
            ControlFamily::Feedback(policy) => Ok(policy.theta_at(time, state)),
            ControlFamily::Fixed(path) => path.values.get(k).copied().ok_or_else(|| {
                Error::Validation(format!(
                    "step {k} out of range for a control path of {} steps",
                    path.values.len()
                ))
            }),
        }
    }
}

/// Expectation under the max-distribution: sup over μ in [λ_low, λ_high]
/// of φ(μ), the purely deterministic extreme of parameter uncertainty.
///
/// Evaluates φ on a uniform `n_grid` discretization and refines the best
/// bracket with a golden-section pass; no concavity is assumed, which is
/// why the global grid scan comes first.
pub fn max_distribution_expectation(
    payoff: &crate::types::PayoffSpec,
    lambda_low: f64,
    lambda_high: f64,
    n_grid: usize,
) -> Result<f64> {
    payoff.validate()?;
    if !(lambda_low.is_finite() && lambda_high.is_finite()) || lambda_low > lambda_high {
        return Err(Error::Validation(format!(
            "parameter interval [{lambda_low}, {lambda_high}] is not ordered"
        )));
    }
    if n_grid < 2 {
        return Err(Error::Validation(format!("n_grid must be at least 2, got {n_grid}")));
    }
    if lambda_low == lambda_high {
        return Ok(payoff.eval(lambda_low));
    }

    let step = (lambda_high - lambda_low) / (n_grid - 1) as f64;
    let node = |j: usize| {
        if j == n_grid - 1 {
            lambda_high
        } else {
            lambda_low + j as f64 * step
        }
    };
    let mut best_j = 0;
    let mut best = f64::NEG_INFINITY;
    for j in 0..n_grid {
        let v = payoff.eval(node(j));
        if v > best {
            best = v;
            best_j = j;
        }
    }

    // Golden-section refinement on the bracket around the best grid point.
    let mut a = node(best_j.saturating_sub(1));
    let mut b = node((best_j + 1).min(n_grid - 1));
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = payoff.eval(x1);
    let mut f2 = payoff.eval(x2);
    for _ in 0..64 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = payoff.eval(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = payoff.eval(x1);
        }
    }
    Ok(best.max(f1).max(f2))
}
