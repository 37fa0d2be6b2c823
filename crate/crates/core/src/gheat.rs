//! Monotone explicit finite-difference solver for the nonlinear
//! G-heat/HJB equation
//!
//! ```text
//!   ∂_t u + G(∂_xx u) = 0  on [0, T) × ℝ,    u(T, x) = φ(x),
//!   G(α) = ½ (σ̄²·α⁺ − σ̲²·α⁻),
//! ```
//!
//! swept backward in time with central second differences. The scheme is
//! monotone under the CFL condition Δt ≤ Δx²/σ̄², which together with
//! consistency and stability gives convergence to the viscosity solution.
//! The CFL condition is a hard precondition: violating grids are rejected
//! with the minimal admissible step count, never silently sub-stepped.
//!
//! The G-expectation of φ(B_T) is the value u(0, 0); the maximizing
//! volatility is the bang-bang feedback policy read off the sign of the
//! second difference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PayoffSpec, TimeGrid, VolatilityInterval};

/// Symmetric spatial grid x_i = (i − mid)·Δx on [−L, L] with an odd number
/// of points, so x = 0 is a node (exactly, in floating point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    half_width: f64,
    n_points: usize,
}

impl SpaceGrid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::Validation(format!(
                "space grid half-width must be positive, got {half_width}"
            )));
        }
        if n_points < 3 || n_points.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "space grid needs an odd number of points >= 3, got {n_points}"
            )));
        }
        Ok(Self { half_width, n_points })
    }

    /// Default truncation: L = 6·σ̄·√T (diffusion mass beyond six standard
    /// deviations is below 1e-8 for the closed payoff set), 801 points.
    pub fn default_for(theta: &VolatilityInterval, horizon: f64) -> Result<Self> {
        Self::new(6.0 * theta.sigma_high() * horizon.sqrt(), 801)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    /// Index of the node at x = 0.
    pub fn mid_index(&self) -> usize {
        (self.n_points - 1) / 2
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_points);
        (i as f64 - self.mid_index() as f64) * self.dx()
    }

    /// Nearest node index to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = (x / self.dx()).round() + self.mid_index() as f64;
        if raw <= 0.0 {
            0
        } else if raw >= (self.n_points - 1) as f64 {
            self.n_points - 1
        } else {
            raw as usize
        }
    }

    /// Piecewise-linear interpolation of nodal `values` at `x`, clamped to
    /// the edge values outside [−L, L].
    pub fn interp_linear(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let pos = x / self.dx() + self.mid_index() as f64;
        if pos <= 0.0 {
            return values[0];
        }
        let last = (self.n_points - 1) as f64;
        if pos >= last {
            return values[self.n_points - 1];
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        values[i] + frac * (values[i + 1] - values[i])
    }

    /// Smallest `n_steps` such that T/n_steps ≤ Δx²/σ̄².
    pub fn min_cfl_steps(&self, theta: &VolatilityInterval, horizon: f64) -> usize {
        let dx2 = self.dx() * self.dx();
        let raw = horizon * theta.sigma_high() * theta.sigma_high() / dx2;
        (raw.ceil() as usize).max(1)
    }

    /// CFL-minimal time grid for this space grid.
    pub fn cfl_time_grid(&self, theta: &VolatilityInterval, horizon: f64) -> Result<TimeGrid> {
        TimeGrid::new(horizon, self.min_cfl_steps(theta, horizon))
    }
}

/// The G-operator G(α) = ½(σ̄²·α⁺ − σ̲²·α⁻): the generator of the
/// G-normal distribution, i.e. ½·sup over σ ∈ [σ̲, σ̄] of σ²α.
#[inline]
pub fn g_operator(alpha: f64, theta: &VolatilityInterval) -> f64 {
    let s = if alpha >= 0.0 { theta.sigma_high() } else { theta.sigma_low() };
    0.5 * s * s * alpha
}

/// Discrete value function u(t_k, x_i) on a space-time lattice, stored
/// row-major by time then space. The last row holds the terminal payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    space: SpaceGrid,
    time: TimeGrid,
    u: Vec<f64>,
}

impl ValueGrid {
    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    /// Value at time node k, space node i.
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.u[k * self.space.n_points + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.space.n_points;
        &self.u[k * n..(k + 1) * n]
    }

    /// Value at the origin (t = 0, x = 0): the G-expectation of the
    /// terminal payoff.
    pub fn value_at_origin(&self) -> f64 {
        self.value(0, self.space.mid_index())
    }

    /// Serializes as CSV with header `t,x,u`, row-major by time then space,
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,u\n");
        for k in 0..self.time.n_nodes() {
            let t = self.time.node(k);
            for i in 0..self.space.n_points {
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", t, self.space.node(i), self.value(k, i)));
            }
        }
        out
    }
}

/// Bang-bang feedback policy θ*(t_k, x_i) ∈ {σ̲, σ̄}: σ̄ exactly where the
/// discrete second difference of the value function is ≥ 0, σ̲ elsewhere.
/// Ties (including boundary cells, whose second difference is taken as 0)
/// resolve to σ̄; the value is unaffected since G(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPolicy {
    space: SpaceGrid,
    time: TimeGrid,
    theta_star: Vec<f64>,
}

impl FeedbackPolicy {
    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.theta_star[k * self.space.n_points + i]
    }

    /// Policy lookup at continuous coordinates: nearest time node, nearest
    /// space node, both clamped to the lattice.
    pub fn theta_at(&self, t: f64, x: f64) -> f64 {
        let rows = self.time.n_nodes();
        let raw = (t / self.time.dt()).round();
        let k = if raw <= 0.0 {
            0
        } else if raw >= (rows - 1) as f64 {
            rows - 1
        } else {
            raw as usize
        };
        let i = self.space.nearest_index(x);
        self.value(k, i)
    }
}

fn check_cfl(theta: &VolatilityInterval, time: &TimeGrid, space: &SpaceGrid) -> Result<()> {
    let dx2 = space.dx() * space.dx();
    let s2 = theta.sigma_high() * theta.sigma_high();
    // Tiny relative slack so an exactly-CFL-minimal grid is not rejected
    // for a rounding ulp.
    if time.dt() * s2 > dx2 * (1.0 + 1e-12) {
        return Err(Error::CflViolation {
            n_steps: time.n_steps(),
            min_steps: space.min_cfl_steps(theta, time.horizon()),
        });
    }
    Ok(())
}

/// One backward time step `out[i] = prev[i] + dt·G(D² prev_i)`.
///
/// Boundary cells use a zero second difference (linear extrapolation),
/// which copies the previous value since G(0) = 0. Each output cell reads
/// only the previous row, so the update is safe to parallelize across space
/// and bitwise independent of any such parallelism.
fn step_row(
    prev: &[f64],
    out: &mut [f64],
    theta: &VolatilityInterval,
    dt: f64,
    inv_dx2: f64,
    k: usize,
) -> Result<()> {
    let n = prev.len();
    out[0] = prev[0];
    out[n - 1] = prev[n - 1];
    for i in 1..n - 1 {
        let alpha = (prev[i - 1] - 2.0 * prev[i] + prev[i + 1]) * inv_dx2;
        let v = prev[i] + dt * g_operator(alpha, theta);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("value grid cell (k = {k}, i = {i})")));
        }
        out[i] = v;
    }
    Ok(())
}

/// Backward solve keeping only the final (t = 0 of the sub-horizon) row.
///
/// This is the lean path used by the cylinder recursion and the semigroup
/// composition, where thousands of solves run and only one row of each is
/// needed.
pub fn solve_terminal_to_initial_row(
    terminal: &[f64],
    theta: &VolatilityInterval,
    time: &TimeGrid,
    space: &SpaceGrid,
) -> Result<Vec<f64>> {
    if terminal.len() != space.n_points() {
        return Err(Error::Validation(format!(
            "terminal row has {} values, space grid has {} points",
            terminal.len(),
            space.n_points()
        )));
    }
    check_cfl(theta, time, space)?;
    for (i, v) in terminal.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("terminal row cell (i = {i})")));
        }
    }
    let dt = time.dt();
    let inv_dx2 = 1.0 / (space.dx() * space.dx());
    let mut prev = terminal.to_vec();
    let mut next = vec![0.0; prev.len()];
    for k in (0..time.n_steps()).rev() {
        step_row(&prev, &mut next, theta, dt, inv_dx2, k)?;
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(prev)
}

/// Backward solve from an arbitrary terminal row, retaining the full
/// space-time value grid.
pub fn solve_g_heat_terminal(
    terminal: &[f64],
    theta: &VolatilityInterval,
    time: &TimeGrid,
    space: &SpaceGrid,
) -> Result<ValueGrid> {
    if terminal.len() != space.n_points() {
        return Err(Error::Validation(format!(
            "terminal row has {} values, space grid has {} points",
            terminal.len(),
            space.n_points()
        )));
    }
    check_cfl(theta, time, space)?;
    let n = space.n_points();
    let rows = time.n_nodes();
    let mut u = vec![0.0; rows * n];
    for (i, v) in terminal.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("terminal row cell (i = {i})")));
        }
        u[(rows - 1) * n + i] = *v;
    }
    let dt = time.dt();
    let inv_dx2 = 1.0 / (space.dx() * space.dx());
    for k in (0..time.n_steps()).rev() {
        let (head, tail) = u.split_at_mut((k + 1) * n);
        let out = &mut head[k * n..];
        let prev = &tail[..n];
        step_row(prev, out, theta, dt, inv_dx2, k)?;
    }
    Ok(ValueGrid { space: *space, time: *time, u })
}

/// Solves the G-heat equation with terminal condition φ(x_i).
pub fn solve_g_heat(
    payoff: &PayoffSpec,
    theta: &VolatilityInterval,
    time: &TimeGrid,
    space: &SpaceGrid,
) -> Result<ValueGrid> {
    payoff.validate()?;
    let terminal: Vec<f64> = (0..space.n_points()).map(|i| payoff.eval(space.node(i))).collect();
    solve_g_heat_terminal(&terminal, theta, time, space)
}

/// The G-expectation Ê[φ(B_T)] = u(0, 0) by the PDE route.
pub fn g_expectation_pde(
    payoff: &PayoffSpec,
    theta: &VolatilityInterval,
    time: &TimeGrid,
    space: &SpaceGrid,
) -> Result<f64> {
    payoff.validate()?;
    let terminal: Vec<f64> = (0..space.n_points()).map(|i| payoff.eval(space.node(i))).collect();
    let row0 = solve_terminal_to_initial_row(&terminal, theta, time, space)?;
    Ok(row0[space.mid_index()])
}

/// Extracts the bang-bang maximizer from a solved value grid.
pub fn extract_policy(v: &ValueGrid, theta: &VolatilityInterval) -> FeedbackPolicy {
    let n = v.space.n_points();
    let rows = v.time.n_nodes();
    let inv_dx2 = 1.0 / (v.space.dx() * v.space.dx());
    let mut theta_star = vec![0.0; rows * n];
    for k in 0..rows {
        let row = v.row(k);
        for i in 0..n {
            let alpha = if i == 0 || i == n - 1 {
                0.0
            } else {
                (row[i - 1] - 2.0 * row[i] + row[i + 1]) * inv_dx2
            };
            theta_star[k * n + i] =
                if alpha >= 0.0 { theta.sigma_high() } else { theta.sigma_low() };
        }
    }
    FeedbackPolicy { space: v.space, time: v.time, theta_star }
}

/// Dynamic-programming composition: solves on [t_split, T], re-samples the
/// slice u(t_split, ·) as a new terminal condition (piecewise-linear
/// interpolation onto the same space grid), solves on [0, t_split], and
/// returns the composed u(0, 0). Agrees with the direct solve by the
/// dynamic programming principle.
pub fn semigroup_compose(
    payoff: &PayoffSpec,
    theta: &VolatilityInterval,
    t_split: f64,
    time: &TimeGrid,
    space: &SpaceGrid,
) -> Result<f64> {
    payoff.validate()?;
    let dt = time.dt();
    let k_float = t_split / dt;
    let k_split = k_float.round();
    if (k_float - k_split).abs() > 1e-9 * time.n_steps() as f64 {
        return Err(Error::Validation(format!(
            "split time {t_split} is not a node of the time grid (dt = {dt})"
        )));
    }
    let k_split = k_split as usize;
    if k_split == 0 || k_split >= time.n_steps() {
        return Err(Error::Validation(format!(
            "split time {t_split} must lie strictly inside (0, {})",
            time.horizon()
        )));
    }

    // Stage 1: [t_split, T].
    let terminal: Vec<f64> = (0..space.n_points()).map(|i| payoff.eval(space.node(i))).collect();
    let upper = TimeGrid::new(time.horizon() - t_split, time.n_steps() - k_split)?;
    let slice = solve_terminal_to_initial_row(&terminal, theta, &upper, space)?;

    // Re-sample the slice onto the (same) space grid.
    let resampled: Vec<f64> =
        (0..space.n_points()).map(|i| space.interp_linear(&slice, space.node(i))).collect();

    // Stage 2: [0, t_split].
    let lower = TimeGrid::new(t_split, k_split)?;
    let row0 = solve_terminal_to_initial_row(&resampled, theta, &lower, space)?;
    Ok(row0[space.mid_index()])
}

/// Compares the small-time difference quotient (Ê[φ(x + B_t)] − φ(x))/t
/// against the analytic generator value G(φ″(x)).
///
/// Returns `(difference quotient, analytic value)`. The quotient is
/// computed by a PDE solve on horizon `t_small` with the payoff shifted to
/// `x`, on an internal CFL-minimal grid sized to the short horizon.
pub fn generator_limit_check(
    payoff: &PayoffSpec,
    x: f64,
    theta: &VolatilityInterval,
    t_small: f64,
) -> Result<(f64, f64)> {
    payoff.validate()?;
    if !t_small.is_finite() || t_small <= 0.0 {
        return Err(Error::Validation(format!("t_small must be positive, got {t_small}")));
    }
    let analytic = g_operator(payoff.eval_d2(x)?, theta);

    let space = SpaceGrid::new(6.0 * theta.sigma_high() * t_small.sqrt(), 201)?;
    let time = space.cfl_time_grid(theta, t_small)?;
    let terminal: Vec<f64> =
        (0..space.n_points()).map(|i| payoff.eval(x + space.node(i))).collect();
    let row0 = solve_terminal_to_initial_row(&terminal, theta, &time, &space)?;
    let quotient = (row0[space.mid_index()] - payoff.eval(x)) / t_small;
    Ok((quotient, analytic))
}
