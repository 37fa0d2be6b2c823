//! Cylinder functions of G-Brownian increments and their (conditional)
//! G-expectation by backward PDE recursion.
//!
//! A cylinder function is φ(Δ_1, …, Δ_n) of the increments Δ_j between
//! consecutive cylinder times 0 < t_1 < … < t_n (Δ_1 = B_{t_1}). Its
//! G-expectation composes one G-heat solve per increment, innermost last:
//! each backward step replaces the last free increment with the value at
//! the origin of a solve over that leg's horizon, tabulated on a tensor
//! grid over the remaining arguments. Conditioning at time s pins every
//! increment completed by s to its observed value and shortens the first
//! remaining horizon to t_k − s.
//!
//! n is capped at 3: the k-th backward step costs (n_points)^{k−1} PDE
//! solves, and n = 3 already exercises the tower property nontrivially.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gheat::{solve_terminal_to_initial_row, SpaceGrid};
use crate::types::{PayoffSpec, VolatilityInterval};

/// Hard cap on the number of cylinder times.
pub const MAX_TIMES: usize = 3;

/// Composite payoff over n increment arguments: a sum or product of
/// per-increment payoffs. Closed under tensor-grid evaluation, which keeps
/// the backward recursion free of generic closures.
#[derive(Debug, Clone, PartialEq)]
pub enum CompositePayoff {
    Sum(Vec<PayoffSpec>),
    Product(Vec<PayoffSpec>),
}

impl CompositePayoff {
    /// A single-increment composite.
    pub fn single(p: PayoffSpec) -> Self {
        CompositePayoff::Sum(vec![p])
    }

    pub fn arity(&self) -> usize {
        match self {
            CompositePayoff::Sum(ps) | CompositePayoff::Product(ps) => ps.len(),
        }
    }

    pub fn parts(&self) -> &[PayoffSpec] {
        match self {
            CompositePayoff::Sum(ps) | CompositePayoff::Product(ps) => ps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arity() == 0 {
            return Err(Error::Validation("composite payoff needs at least one part".into()));
        }
        for p in self.parts() {
            p.validate()?;
        }
        Ok(())
    }

    /// Evaluates at a full vector of increments.
    pub fn eval(&self, increments: &[f64]) -> f64 {
        debug_assert_eq!(increments.len(), self.arity());
        match self {
            CompositePayoff::Sum(ps) => {
                ps.iter().zip(increments).map(|(p, x)| p.eval(*x)).sum()
            }
            CompositePayoff::Product(ps) => {
                ps.iter().zip(increments).map(|(p, x)| p.eval(*x)).fold(1.0, |a, v| a * v)
            }
        }
    }
}

/// A cylinder function: increment payoff φ plus its times 0 < t_1 < … < t_n.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFunction {
    times: Vec<f64>,
    phi: CompositePayoff,
}

impl CylinderFunction {
    pub fn new(times: Vec<f64>, phi: CompositePayoff) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Validation("cylinder function needs at least one time".into()));
        }
        if times.len() > MAX_TIMES {
            return Err(Error::Validation(format!(
                "at most {MAX_TIMES} cylinder times supported (tensor-grid cost grows as \
                 n_points^(n-1)), got {}",
                times.len()
            )));
        }
        let mut prev = 0.0;
        for t in &times {
            if !t.is_finite() || *t <= prev {
                return Err(Error::Validation(format!(
                    "cylinder times must be finite, positive and strictly increasing, got {times:?}"
                )));
            }
            prev = *t;
        }
        phi.validate()?;
        if phi.arity() != times.len() {
            return Err(Error::Validation(format!(
                "composite payoff has {} parts for {} cylinder times",
                phi.arity(),
                times.len()
            )));
        }
        Ok(Self { times, phi })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn phi(&self) -> &CompositePayoff {
        &self.phi
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }
}

/// One G-heat leg: value at the origin of the backward solve over `horizon`
/// with nodal terminal data, on a CFL-minimal time grid.
fn leg_value(
    terminal: &[f64],
    horizon: f64,
    theta: &VolatilityInterval,
    space: &SpaceGrid,
) -> Result<f64> {
    let time = space.cfl_time_grid(theta, horizon)?;
    let row0 = solve_terminal_to_initial_row(terminal, theta, &time, space)?;
    Ok(row0[space.mid_index()])
}

/// Backward recursion over the free increments.
///
/// `pinned` holds the already-determined leading increments; `first_offset`
/// shifts the first free increment (nonzero when conditioning lands strictly
/// inside a leg, where the observed part B_s − B_{t_{k−1}} is a constant);
/// `horizons` lists the integration horizon of each free increment. The
/// per-node solves within one backward step are independent and run in
/// parallel; each node's value is a pure function of its index, so the
/// result equals the sequential sweep bitwise.
fn backward_value(
    phi: &CompositePayoff,
    pinned: &[f64],
    first_offset: f64,
    horizons: &[f64],
    theta: &VolatilityInterval,
    space: &SpaceGrid,
) -> Result<f64> {
    let n_pts = space.n_points();
    let eval_full = |free: &[f64]| {
        let mut args = Vec::with_capacity(pinned.len() + free.len());
        args.extend_from_slice(pinned);
        args.extend_from_slice(free);
        phi.eval(&args)
    };
    match horizons.len() {
        1 => {
            let terminal: Vec<f64> =
                (0..n_pts).map(|j| eval_full(&[first_offset + space.node(j)])).collect();
            leg_value(&terminal, horizons[0], theta, space)
        }
        2 => {
            let psi: Vec<f64> = (0..n_pts)
                .into_par_iter()
                .map(|i| {
                    let a1 = first_offset + space.node(i);
                    let terminal: Vec<f64> =
                        (0..n_pts).map(|j| eval_full(&[a1, space.node(j)])).collect();
                    leg_value(&terminal, horizons[1], theta, space)
                })
                .collect::<Result<Vec<f64>>>()?;
            leg_value(&psi, horizons[0], theta, space)
        }
        3 => {
            // Innermost leg over all (first, second) node pairs.
            let psi2: Vec<f64> = (0..n_pts * n_pts)
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = (idx / n_pts, idx % n_pts);
                    let a1 = first_offset + space.node(i);
                    let a2 = space.node(j);
                    let terminal: Vec<f64> =
                        (0..n_pts).map(|l| eval_full(&[a1, a2, space.node(l)])).collect();
                    leg_value(&terminal, horizons[2], theta, space)
                })
                .collect::<Result<Vec<f64>>>()?;
            let psi1: Vec<f64> = (0..n_pts)
                .into_par_iter()
                .map(|i| leg_value(&psi2[i * n_pts..(i + 1) * n_pts], horizons[1], theta, space))
                .collect::<Result<Vec<f64>>>()?;
            leg_value(&psi1, horizons[0], theta, space)
        }
        m => Err(Error::Validation(format!("unsupported free increment count {m}"))),
    }
}

fn leg_horizons(times: &[f64], start: f64) -> Vec<f64> {
    let mut horizons = Vec::with_capacity(times.len());
    let mut prev = start;
    for t in times {
        horizons.push(t - prev);
        prev = *t;
    }
    horizons
}

/// The G-expectation Ê[φ(Δ_1, …, Δ_n)] by backward PDE recursion.
pub fn g_expectation_cylinder(
    c: &CylinderFunction,
    theta: &VolatilityInterval,
    space: &SpaceGrid,
) -> Result<f64> {
    backward_value(c.phi(), &[], 0.0, &leg_horizons(c.times(), 0.0), theta, space)
}

/// Gap above which [`g_expectation_cylinder_checked`] raises the
/// resolution warning: a fine-vs-half-resolution difference of 3e-2
/// corresponds to an extrapolated fine-grid error near 1e-2.
pub const RESOLUTION_WARN_GAP: f64 = 3e-2;

/// As [`g_expectation_cylinder`], plus a Richardson-style resolution check:
/// re-solves at half the spatial resolution and flags the result when the
/// two values disagree by more than [`RESOLUTION_WARN_GAP`].
pub fn g_expectation_cylinder_checked(
    c: &CylinderFunction,
    theta: &VolatilityInterval,
    space: &SpaceGrid,
) -> Result<(f64, bool)> {
    let fine = g_expectation_cylinder(c, theta, space)?;
    let mut coarse_points = (space.n_points() - 1) / 2 + 1;
    if coarse_points.is_multiple_of(2) {
        coarse_points += 1;
    }
    let coarse_space = SpaceGrid::new(space.half_width(), coarse_points.max(3))?;
    let coarse = g_expectation_cylinder(c, theta, &coarse_space)?;
    Ok((fine, (fine - coarse).abs() > RESOLUTION_WARN_GAP))
}

/// Splits the cylinder times at s: indices with t_i ≤ s are observed.
/// Returns (k−1, needs_bs): the count of fully observed times and whether a
/// trailing B_s observation is required, i.e. whether s sits strictly
/// inside the first unobserved leg (its start is the last observed time,
/// or 0).
fn split_at(c: &CylinderFunction, s: f64) -> (usize, bool) {
    let observed = c.times().iter().filter(|t| **t <= s).count();
    let leg_start = if observed == 0 { 0.0 } else { c.times()[observed - 1] };
    (observed, observed < c.n() && s > leg_start)
}

/// The conditional G-expectation Ê_s[φ(Δ_1, …, Δ_n)] given observations.
///
/// `observed` supplies the path values B_{t_i} for every cylinder time
/// t_i ≤ s, in order, followed by B_s itself when s falls strictly between
/// cylinder times (the completed part of the straddling increment is then
/// the constant B_s − B_{t_{k−1}}). With s ≥ t_n nothing is left to
/// integrate and φ is evaluated at the observed increments exactly; with
/// s = 0 and no observations this is the unconditional expectation.
pub fn conditional_g_expectation(
    c: &CylinderFunction,
    s: f64,
    observed: &[f64],
    theta: &VolatilityInterval,
    space: &SpaceGrid,
) -> Result<f64> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::Validation(format!("conditioning time must be >= 0, got {s}")));
    }
    let (n_observed, needs_bs) = split_at(c, s);
    let expected = n_observed + usize::from(needs_bs);
    if observed.len() != expected {
        return Err(Error::Validation(format!(
            "expected {expected} observed values at s = {s} (B at each cylinder time <= s{}), got {}",
            if needs_bs { ", then B_s" } else { "" },
            observed.len()
        )));
    }
    for v in observed {
        if !v.is_finite() {
            return Err(Error::Validation("observed values must be finite".into()));
        }
    }

    // Fully observed increments, as differences of consecutive B values.
    let mut pinned = Vec::with_capacity(n_observed);
    let mut prev = 0.0;
    for x in &observed[..n_observed] {
        pinned.push(x - prev);
        prev = *x;
    }

    if n_observed == c.n() {
        return Ok(c.phi().eval(&pinned));
    }

    // The straddled increment starts at the constant B_s − B_{t_{k−1}};
    // the first remaining horizon runs from s to the next cylinder time.
    let first_offset = if needs_bs { observed[n_observed] - prev } else { 0.0 };
    let horizons = leg_horizons(&c.times()[n_observed..], s);
    backward_value(c.phi(), &pinned, first_offset, &horizons, theta, space)
}

/// Tower-property check at an intermediate cylinder time s = t_m, m < n.
///
/// Returns (direct, composed): the direct G-expectation, and the value
/// obtained by tabulating the conditional expectation at s on the tensor
/// grid, then integrating it back to time 0 as a new terminal condition
/// (piecewise-linear grid interpolation where the composed arguments leave
/// the node set). The tower property says the two agree.
pub fn tower_check(
    c: &CylinderFunction,
    s: f64,
    theta: &VolatilityInterval,
    space: &SpaceGrid,
) -> Result<(f64, f64)> {
    let m = c
        .times()
        .iter()
        .position(|t| *t == s)
        .ok_or_else(|| Error::Validation(format!("s = {s} is not a cylinder time of {:?}", c.times())))?
        + 1;
    if m >= c.n() {
        return Err(Error::Validation(format!(
            "s = {s} must be an intermediate cylinder time (strictly before t_n)"
        )));
    }

    let direct = g_expectation_cylinder(c, theta, space)?;
    let n_pts = space.n_points();

    let composed: f64 = match m {
        1 => {
            // g(x) = Ê_s[φ | B_{t_1} = x], tabulated on the nodes; B_{t_1}
            // is itself the first increment, so re-integration is aligned.
            let g: Vec<f64> = (0..n_pts)
                .into_par_iter()
                .map(|i| conditional_g_expectation(c, s, &[space.node(i)], theta, space))
                .collect::<Result<Vec<f64>>>()?;
            leg_value(&g, c.times()[0], theta, space)?
        }
        2 => {
            // g(x1, x2) over absolute values at (t_1, t_2).
            let g: Vec<f64> = (0..n_pts * n_pts)
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = (idx / n_pts, idx % n_pts);
                    conditional_g_expectation(
                        c,
                        s,
                        &[space.node(i), space.node(j)],
                        theta,
                        space,
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            // Integrate Δ_2 out: terminal in y is g(x1, x1 + y), off-node in
            // the second axis, hence the interpolation.
            let h: Vec<f64> = (0..n_pts)
                .into_par_iter()
                .map(|i| {
                    let x1 = space.node(i);
                    let row = &g[i * n_pts..(i + 1) * n_pts];
                    let terminal: Vec<f64> = (0..n_pts)
                        .map(|j| space.interp_linear(row, x1 + space.node(j)))
                        .collect();
                    leg_value(&terminal, c.times()[1] - c.times()[0], theta, space)
                })
                .collect::<Result<Vec<f64>>>()?;
            leg_value(&h, c.times()[0], theta, space)?
        }
        _ => unreachable!("n <= 3 and m < n"),
    };
    Ok((direct, composed))
}
