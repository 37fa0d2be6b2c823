//! Reproducible Monte Carlo engine.
//!
//! The G-expectation is estimated as the supremum over a control family of
//! classical expectations of payoffs of controlled paths B^θ = ∫θ dW. All
//! randomness comes from the counter-based generator in [`crate::rng`], so
//! every member of a family reuses identical (seed, path, step) increments —
//! common random numbers by construction. The sup over members is then a
//! maximum of positively correlated estimates, which sharpens member
//! comparison and mirrors the single-reference-measure picture.
//!
//! Determinism contract: per-path work is a pure function of
//! (config, member, path index) and may run on any number of threads;
//! reduction happens in fixed path order in fixed-size blocks, so results
//! are bitwise identical to a sequential run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde::ser::SerializeStruct;

use crate::controls::ControlFamily;
use crate::error::{Error, Result};
use crate::rng;
use crate::roughlift::RoughLift;
use crate::types::{Estimate, PayoffSpec, TimeGrid};

/// Simulation configuration: path count, time grid, seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    n_paths: usize,
    grid: TimeGrid,
    seed: u64,
}

/// Default path count: standard errors around 1e-2 on unit-scale payoffs.
pub const DEFAULT_N_PATHS: usize = 100_000;
/// Default step count for simulated paths.
pub const DEFAULT_N_STEPS: usize = 512;

/// Reduction block size; fixed so that results never depend on thread count.
const REDUCTION_BLOCK: usize = 4096;

impl SimConfig {
    pub fn new(n_paths: usize, grid: TimeGrid, seed: u64) -> Result<Self> {
        if n_paths < 2 {
            return Err(Error::Validation(format!(
                "n_paths must be at least 2 for a defined standard error, got {n_paths}"
            )));
        }
        Ok(Self { n_paths, grid, seed })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Result of a supremum over a control family.
#[derive(Debug, Clone, PartialEq)]
pub struct SupResult {
    /// The member estimate with the largest mean.
    pub best: Estimate,
    pub per_member: Vec<Estimate>,
    pub best_member: BestMember,
}

/// Which member attained the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BestMember {
    /// Index into the family's members (constant grid or fixed path).
    Index(usize),
    /// The single feedback-policy member.
    Feedback,
}

impl Serialize for BestMember {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BestMember::Index(i) => s.serialize_u64(*i as u64),
            BestMember::Feedback => s.serialize_str("feedback"),
        }
    }
}

impl Serialize for SupResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("SupResult", 3)?;
        st.serialize_field("best", &self.best)?;
        st.serialize_field("per_member", &self.per_member)?;
        st.serialize_field("best_member", &self.best_member)?;
        st.end()
    }
}

/// The n_steps Brownian increments ΔW_k ~ N(0, Δt) of one path.
///
/// Identical (seed, path_index) inputs give bitwise-identical sequences on
/// all platforms; see [`crate::rng`] for the pinned generator family.
pub fn brownian_increments(cfg: &SimConfig, path_index: u64) -> Vec<f64> {
    let sqrt_dt = cfg.grid.dt().sqrt();
    (0..cfg.grid.n_steps() as u64)
        .map(|step| sqrt_dt * rng::standard_normal(cfg.seed, path_index, step))
        .collect()
}

/// Simulates one controlled path and its quadratic variation:
/// B_{k+1} = B_k + θ_k ΔW_k, ⟨B⟩_{k+1} = ⟨B⟩_k + θ_k² Δt, both from 0.
pub fn simulate_controlled_path(
    family: &ControlFamily,
    member: usize,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<RoughLift> {
    family.validate_for_grid(&cfg.grid)?;
    let increments = brownian_increments(cfg, path_index);
    let dt = cfg.grid.dt();
    let n = cfg.grid.n_steps();
    let mut b = Vec::with_capacity(n + 1);
    let mut qv = Vec::with_capacity(n + 1);
    b.push(0.0);
    qv.push(0.0);
    for (k, dw) in increments.iter().enumerate() {
        let theta = family.control_at(k, cfg.grid.node(k), b[k], member)?;
        b.push(b[k] + theta * dw);
        qv.push(qv[k] + theta * theta * dt);
    }
    RoughLift::new(cfg.grid, b, qv)
}

/// Sums `values` in fixed-size blocks in index order. The reduction tree is
/// a function of the length alone, never of thread count.
pub(crate) fn block_sum(values: &[f64]) -> f64 {
    values.chunks(REDUCTION_BLOCK).map(|c| c.iter().sum::<f64>()).sum()
}

/// Mean and standard error (sample std / √n) under the fixed-block
/// reduction contract.
pub(crate) fn block_estimate(values: &[f64], seed: u64) -> Estimate {
    let n = values.len();
    let mean = block_sum(values) / n as f64;
    let ssq = values
        .chunks(REDUCTION_BLOCK)
        .map(|c| c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
        .sum::<f64>();
    let std_error = (ssq / (n - 1) as f64).sqrt() / (n as f64).sqrt();
    Estimate { mean, std_error, n_paths: n, seed }
}

/// Evaluates `eval(member, path_index, increments)` for every (member, path)
/// pair, generating each path's increments once so all members share them.
/// Parallel over paths; output is laid out member-major.
pub(crate) fn per_member_path_values<F>(
    cfg: &SimConfig,
    n_members: usize,
    eval: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize, u64, &[f64]) -> Result<f64> + Sync,
{
    let n_paths = cfg.n_paths;
    let mut flat = vec![0.0f64; n_paths * n_members];
    flat.par_chunks_mut(n_members).enumerate().try_for_each(|(p, out)| -> Result<()> {
        let increments = brownian_increments(cfg, p as u64);
        for (m, slot) in out.iter_mut().enumerate() {
            *slot = eval(m, p as u64, &increments)?;
        }
        Ok(())
    })?;
    let mut per_member = vec![Vec::with_capacity(n_paths); n_members];
    for p in 0..n_paths {
        for (m, member_values) in per_member.iter_mut().enumerate() {
            member_values.push(flat[p * n_members + m]);
        }
    }
    Ok(per_member)
}

fn terminal_payoff_value(
    payoff: &PayoffSpec,
    family: &ControlFamily,
    member: usize,
    cfg: &SimConfig,
    path_index: u64,
    increments: &[f64],
) -> Result<f64> {
    let mut b = 0.0f64;
    for (k, dw) in increments.iter().enumerate() {
        let theta = family.control_at(k, cfg.grid.node(k), b, member)?;
        b += theta * dw;
    }
    let v = payoff.eval(b);
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("payoff value on path {path_index}")));
    }
    Ok(v)
}

/// Mean and standard error of φ(B_T^θ) for one family member.
pub fn estimate_expectation(
    payoff: &PayoffSpec,
    family: &ControlFamily,
    member: usize,
    cfg: &SimConfig,
) -> Result<Estimate> {
    payoff.validate()?;
    family.validate_for_grid(&cfg.grid)?;
    if member >= family.n_members() {
        return Err(Error::Validation(format!(
            "member {member} out of range for a family of {}",
            family.n_members()
        )));
    }
    let values = per_member_path_values(cfg, 1, |_, p, incs| {
        terminal_payoff_value(payoff, family, member, cfg, p, incs)
    })?;
    Ok(block_estimate(&values[0], cfg.seed))
}

/// Picks the member with the largest mean (first index on ties).
pub(crate) fn assemble_sup(
    per_member: Vec<Estimate>,
    family: &ControlFamily,
) -> SupResult {
    let mut best_idx = 0;
    for (i, e) in per_member.iter().enumerate() {
        if e.mean > per_member[best_idx].mean {
            best_idx = i;
        }
    }
    let best = per_member[best_idx];
    let best_member = match family {
        ControlFamily::Feedback(_) => BestMember::Feedback,
        _ => BestMember::Index(best_idx),
    };
    SupResult { best, per_member, best_member }
}

/// The Monte Carlo G-expectation: sup over the family of per-member
/// estimates of E[φ(B_T^θ)], under common random numbers.
pub fn sup_over_controls(
    payoff: &PayoffSpec,
    family: &ControlFamily,
    cfg: &SimConfig,
) -> Result<SupResult> {
    payoff.validate()?;
    family.validate_for_grid(&cfg.grid)?;
    let n_members = family.n_members();
    let values = per_member_path_values(cfg, n_members, |m, p, incs| {
        terminal_payoff_value(payoff, family, m, cfg, p, incs)
    })?;
    let per_member: Vec<Estimate> =
        values.iter().map(|v| block_estimate(v, cfg.seed)).collect();
    Ok(assemble_sup(per_member, family))
}
