//! G-SDE solving via the parameterized family of classical SDEs.
//!
//! A G-SDE dX = b(X)dt + h(X)d⟨B⟩ + σ(X)dB is represented by the family of
//! controlled classical SDEs
//!
//! ```text
//!   dX^θ = b(X^θ)dt + h(X^θ)·θ²dt + σ(X^θ)·θ dW,
//! ```
//!
//! one per admissible control θ, all sharing one Brownian driver. Each
//! member integrates by Euler–Maruyama on exactly the increments that
//! [`crate::mc::simulate_controlled_path`] would use for the same
//! (seed, path index), so SDE states and lifts stay in lockstep.
//!
//! Coefficients come from a closed descriptor set (constant, linear,
//! affine), which guarantees the global Lipschitz and linear-growth
//! hypotheses by construction. All stochastic sums are left-point (Itô)
//! evaluations.

use serde::{Deserialize, Serialize};

use crate::controls::ControlFamily;
use crate::error::{Error, Result};
use crate::mc::{self, SimConfig, SupResult};
use crate::roughlift::RoughLift;
use crate::types::{PayoffSpec, SamplePath};

/// A coefficient x ↦ value from the closed Lipschitz set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    /// c
    Constant { c: f64 },
    /// a·x
    Linear { a: f64 },
    /// a·x + c
    Affine { a: f64, c: f64 },
}

impl Coefficient {
    pub fn validate(&self) -> Result<()> {
        let (a, c) = match self {
            Coefficient::Constant { c } => (0.0, *c),
            Coefficient::Linear { a } => (*a, 0.0),
            Coefficient::Affine { a, c } => (*a, *c),
        };
        if a.is_finite() && c.is_finite() {
            Ok(())
        } else {
            Err(Error::Validation(format!("coefficient parameters must be finite: {self:?}")))
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant { c } => *c,
            Coefficient::Linear { a } => a * x,
            Coefficient::Affine { a, c } => a * x + c,
        }
    }
}

/// Scalar G-SDE descriptor dX = b dt + h d⟨B⟩ + σ dB from X_0 = x0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GSdeSpec {
    pub drift: Coefficient,
    pub qv_drift: Coefficient,
    pub diffusion: Coefficient,
    pub x0: f64,
}

impl GSdeSpec {
    pub fn new(drift: Coefficient, qv_drift: Coefficient, diffusion: Coefficient, x0: f64) -> Result<Self> {
        drift.validate()?;
        qv_drift.validate()?;
        diffusion.validate()?;
        if !x0.is_finite() {
            return Err(Error::Validation(format!("x0 must be finite, got {x0}")));
        }
        Ok(Self { drift, qv_drift, diffusion, x0 })
    }
}

/// The geometric G-SDE dX = σX dB + γX d⟨B⟩, X_0 = x0 > 0, whose solution
/// is the explicit lift functional x0·exp(σB_t + (γ − ½σ²)⟨B⟩_t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricSpec {
    pub sigma: f64,
    pub gamma: f64,
    pub x0: f64,
}

impl GeometricSpec {
    pub fn new(sigma: f64, gamma: f64, x0: f64) -> Result<Self> {
        if !(sigma.is_finite() && gamma.is_finite() && x0.is_finite()) {
            return Err(Error::Validation("geometric parameters must be finite".into()));
        }
        if x0 <= 0.0 {
            return Err(Error::Validation(format!("geometric x0 must be positive, got {x0}")));
        }
        Ok(Self { sigma, gamma, x0 })
    }

    /// As a general G-SDE descriptor: b = 0, h = γx, σ-coefficient = σx.
    pub fn as_gsde(&self) -> GSdeSpec {
        GSdeSpec {
            drift: Coefficient::Constant { c: 0.0 },
            qv_drift: Coefficient::Linear { a: self.gamma },
            diffusion: Coefficient::Linear { a: self.sigma },
            x0: self.x0,
        }
    }

    /// The analytic supremum over constant controls of E[X_T^θ]:
    /// x0·exp(γσ̄²t) when γ > 0, x0·exp(γσ̲²t) when γ < 0, x0 when γ = 0.
    pub fn analytic_g_expectation(&self, theta: &crate::types::VolatilityInterval, t: f64) -> f64 {
        let s = if self.gamma > 0.0 {
            theta.sigma_high()
        } else {
            theta.sigma_low()
        };
        self.x0 * (self.gamma * s * s * t).exp()
    }
}

fn euler_path(
    spec: &GSdeSpec,
    family: &ControlFamily,
    member: usize,
    cfg: &SimConfig,
    path_index: u64,
    increments: &[f64],
) -> Result<Vec<f64>> {
    let dt = cfg.grid().dt();
    let n = cfg.grid().n_steps();
    let mut x = Vec::with_capacity(n + 1);
    x.push(spec.x0);
    // The driving G-Brownian state is tracked alongside X so feedback
    // controls see the same state they would in the plain path simulation.
    let mut b = 0.0f64;
    for (k, dw) in increments.iter().enumerate() {
        let theta = family.control_at(k, cfg.grid().node(k), b, member)?;
        let xk = x[k];
        let next = xk
            + spec.drift.eval(xk) * dt
            + spec.qv_drift.eval(xk) * theta * theta * dt
            + spec.diffusion.eval(xk) * theta * dw;
        if !next.is_finite() {
            return Err(Error::NonFinite(format!(
                "SDE state on path {path_index} at step {}",
                k + 1
            )));
        }
        x.push(next);
        b += theta * dw;
    }
    Ok(x)
}

/// Euler–Maruyama integration of one family member along one path:
/// X_{k+1} = X_k + b(X_k)Δt + h(X_k)θ_k²Δt + σ(X_k)θ_kΔW_k, sharing the
/// increments of [`mc::simulate_controlled_path`] for the same
/// (seed, path index).
pub fn euler_solve_family_member(
    spec: &GSdeSpec,
    family: &ControlFamily,
    member: usize,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<SamplePath> {
    family.validate_for_grid(cfg.grid())?;
    let increments = mc::brownian_increments(cfg, path_index);
    let x = euler_path(spec, family, member, cfg, path_index, &increments)?;
    SamplePath::new(*cfg.grid(), x)
}

/// Evaluates the geometric closed form pointwise on a lift:
/// X_k = x0·exp(σ·B_k + (γ − ½σ²)·⟨B⟩_k). A pure deterministic functional
/// of the lift.
pub fn closed_form_geometric(g: &GeometricSpec, lift: &RoughLift) -> Result<SamplePath> {
    GeometricSpec::new(g.sigma, g.gamma, g.x0)?;
    let drift = g.gamma - 0.5 * g.sigma * g.sigma;
    let values: Vec<f64> = lift
        .b()
        .iter()
        .zip(lift.qv())
        .map(|(b, qv)| g.x0 * (g.sigma * b + drift * qv).exp())
        .collect();
    SamplePath::new(*lift.grid(), values)
}

/// Monte Carlo G-expectation of the geometric terminal value: sup over the
/// family of mean terminal values of the Euler-integrated members.
pub fn g_expectation_geometric_mc(
    g: &GeometricSpec,
    family: &ControlFamily,
    cfg: &SimConfig,
) -> Result<SupResult> {
    let spec = GeometricSpec::new(g.sigma, g.gamma, g.x0)?.as_gsde();
    family.validate_for_grid(cfg.grid())?;
    let n_members = family.n_members();
    let values = mc::per_member_path_values(cfg, n_members, |m, p, incs| {
        let x = euler_path(&spec, family, m, cfg, p, incs)?;
        Ok(*x.last().expect("euler path has at least the initial node"))
    })?;
    let per_member: Vec<_> = values.iter().map(|v| mc::block_estimate(v, cfg.seed())).collect();
    Ok(mc::assemble_sup(per_member, family))
}

/// Discrete G-Itô residual of a smooth payoff f on a lift:
///
/// ```text
///   f(B_T) − f(B_0) − Σ f′(B_k)ΔB_k − ½ Σ f″(B_k)Δ⟨B⟩_k
/// ```
///
/// with left-point sums. Vanishes in the fine-grid limit by the G-Itô
/// formula; for f(x) = x² it equals Σ(ΔB_k)² − ⟨B⟩_T identically.
pub fn g_ito_residual(payoff: &PayoffSpec, lift: &RoughLift) -> Result<f64> {
    payoff.validate()?;
    let b = lift.b();
    let qv = lift.qv();
    let mut ito = 0.0;
    let mut qv_part = 0.0;
    for k in 0..b.len() - 1 {
        ito += payoff.eval_d1(b[k])? * (b[k + 1] - b[k]);
        qv_part += payoff.eval_d2(b[k])? * (qv[k + 1] - qv[k]);
    }
    Ok(payoff.eval(b[b.len() - 1]) - payoff.eval(b[0]) - ito - 0.5 * qv_part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::simulate_controlled_path;
    use crate::types::{TimeGrid, VolatilityInterval};
    use approx::assert_relative_eq;

    fn theta(lo: f64, hi: f64) -> VolatilityInterval {
        VolatilityInterval::new(lo, hi).unwrap()
    }

    fn cfg(n_paths: usize, n_steps: usize, seed: u64) -> SimConfig {
        SimConfig::new(n_paths, TimeGrid::new(1.0, n_steps).unwrap(), seed).unwrap()
    }

    #[test]
    fn degenerate_sde_reproduces_the_controlled_path() {
        // b = 0, h = 0, σ = 1: X − x0 is B^θ. Starting from x0 = 0 the two
        // recursions perform the identical float operations.
        let degenerate = |x0: f64| {
            GSdeSpec::new(
                Coefficient::Constant { c: 0.0 },
                Coefficient::Constant { c: 0.0 },
                Coefficient::Constant { c: 1.0 },
                x0,
            )
            .unwrap()
        };
        let th = theta(0.5, 1.0);
        let family = ControlFamily::constant_grid(th, 3).unwrap();
        let c = cfg(4, 64, 21);
        for p in 0..4 {
            let x = euler_solve_family_member(&degenerate(0.0), &family, 2, &c, p).unwrap();
            let lift = simulate_controlled_path(&family, 2, &c, p).unwrap();
            for (xv, bv) in x.values().iter().zip(lift.b()) {
                assert_eq!(xv.to_bits(), bv.to_bits(), "path {p}");
            }
            let shifted = euler_solve_family_member(&degenerate(2.0), &family, 2, &c, p).unwrap();
            for (xv, bv) in shifted.values().iter().zip(lift.b()) {
                assert_relative_eq!(*xv, 2.0 + bv, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_ode_is_exact() {
        // b = 1, h = 0, σ = 0: X_k = x0 + t_k.
        let spec = GSdeSpec::new(
            Coefficient::Constant { c: 1.0 },
            Coefficient::Constant { c: 0.0 },
            Coefficient::Constant { c: 0.0 },
            0.5,
        )
        .unwrap();
        let th = theta(0.5, 1.0);
        let family = ControlFamily::constant_grid(th, 2).unwrap();
        let c = cfg(2, 64, 1);
        let x = euler_solve_family_member(&spec, &family, 0, &c, 0).unwrap();
        let dt = c.grid().dt();
        let mut expected = 0.5;
        for k in 1..=c.grid().n_steps() {
            expected += dt;
            assert_relative_eq!(x.values()[k], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_cases() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        // σ = 1, γ = ½: exponent reduces to B_t.
        let lift =
            RoughLift::new(grid, vec![0.0, 0.5, -0.25, 1.0, 0.75], vec![0.0, 0.3, 0.5, 0.8, 1.0])
                .unwrap();
        let g = GeometricSpec::new(1.0, 0.5, 1.0).unwrap();
        let x = closed_form_geometric(&g, &lift).unwrap();
        for (xv, bv) in x.values().iter().zip(lift.b()) {
            assert_relative_eq!(*xv, bv.exp(), epsilon = 1e-14);
        }
        // Zero lift: X ≡ x0.
        let zero = RoughLift::new(grid, vec![0.0; 5], vec![0.0; 5]).unwrap();
        let g = GeometricSpec::new(0.7, -0.3, 2.5).unwrap();
        let x = closed_form_geometric(&g, &zero).unwrap();
        assert!(x.values().iter().all(|v| *v == 2.5));
    }

    #[test]
    fn geometric_spec_validation() {
        assert!(GeometricSpec::new(0.2, 0.1, 0.0).is_err());
        assert!(GeometricSpec::new(0.2, 0.1, -1.0).is_err());
        assert!(GeometricSpec::new(f64::NAN, 0.1, 1.0).is_err());
    }

    #[test]
    fn euler_tracks_closed_form_on_the_same_lift() {
        let th = theta(0.5, 1.0);
        let family = ControlFamily::constant_grid(th, 2).unwrap();
        let g = GeometricSpec::new(0.5, 0.2, 1.0).unwrap();
        let spec = g.as_gsde();
        let c = cfg(64, 512, 33);
        let mut sq_gap = 0.0;
        for p in 0..c.n_paths() as u64 {
            let x = euler_solve_family_member(&spec, &family, 1, &c, p).unwrap();
            let lift = simulate_controlled_path(&family, 1, &c, p).unwrap();
            let exact = closed_form_geometric(&g, &lift).unwrap();
            let gap = x.terminal() - exact.terminal();
            sq_gap += gap * gap;
        }
        let rms = (sq_gap / c.n_paths() as f64).sqrt();
        // Strong order ½: C·Δt^{1/2} with a modest constant for these
        // coefficients.
        assert!(rms < 0.05, "rms gap = {rms}");
    }

    #[test]
    fn geometric_mc_matches_case_formula() {
        let th = theta(0.5, 1.0);
        let family = ControlFamily::constant_grid(th, 9).unwrap();
        let c = cfg(20_000, 128, 4242);

        let g = GeometricSpec::new(0.2, 0.1, 1.0).unwrap();
        let sup = g_expectation_geometric_mc(&g, &family, &c).unwrap();
        let analytic = g.analytic_g_expectation(&th, 1.0);
        assert_relative_eq!(analytic, (0.1f64).exp(), epsilon = 1e-12);
        assert!(
            (sup.best.mean - analytic).abs() < 3.0 * sup.best.std_error + 2e-3,
            "mean {} vs analytic {analytic}",
            sup.best.mean
        );
        assert_eq!(sup.best_member, mc::BestMember::Index(8));

        let g = GeometricSpec::new(0.2, -0.1, 1.0).unwrap();
        let sup = g_expectation_geometric_mc(&g, &family, &c).unwrap();
        let analytic = g.analytic_g_expectation(&th, 1.0);
        assert_relative_eq!(analytic, (-0.025f64).exp(), epsilon = 1e-12);
        assert!(
            (sup.best.mean - analytic).abs() < 3.0 * sup.best.std_error + 2e-3,
            "mean {} vs analytic {analytic}",
            sup.best.mean
        );
        assert_eq!(sup.best_member, mc::BestMember::Index(0));
    }

    #[test]
    fn zero_gamma_is_a_martingale_for_every_member() {
        let th = theta(0.5, 1.0);
        let family = ControlFamily::constant_grid(th, 5).unwrap();
        let c = cfg(50_000, 128, 7);
        let g = GeometricSpec::new(0.2, 0.0, 1.0).unwrap();
        let sup = g_expectation_geometric_mc(&g, &family, &c).unwrap();
        for e in &sup.per_member {
            assert!((e.mean - 1.0).abs() < 3.0 * e.std_error + 2e-3, "{e:?}");
        }
    }

    #[test]
    fn ito_residual_identity_for_quadratic() {
        // For f(x) = x² the residual is Σ(ΔB)² − ⟨B⟩_T identically.
        let th = theta(0.5, 1.0);
        let family = ControlFamily::constant_grid(th, 3).unwrap();
        let c = cfg(16, 128, 55);
        for p in 0..c.n_paths() as u64 {
            let lift = simulate_controlled_path(&family, 1, &c, p).unwrap();
            let residual = g_ito_residual(&PayoffSpec::Quadratic, &lift).unwrap();
            let squares: f64 = lift.b().windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
            let expected = squares - lift.terminal_qv();
            assert_relative_eq!(residual, expected, epsilon = 1e-12, max_relative = 1e-9);
        }
    }

    #[test]
    fn ito_residual_vanishes_for_identity() {
        let th = theta(0.5, 1.0);
        let family = ControlFamily::constant_grid(th, 2).unwrap();
        let c = cfg(4, 64, 8);
        for p in 0..4 {
            let lift = simulate_controlled_path(&family, 1, &c, p).unwrap();
            let r = g_ito_residual(&PayoffSpec::Identity, &lift).unwrap();
            assert!(r.abs() < 1e-12, "residual {r}");
        }
    }

    #[test]
    fn ito_residual_rejects_kinked_payoffs() {
        let th = theta(0.5, 1.0);
        let family = ControlFamily::constant_grid(th, 2).unwrap();
        let c = cfg(2, 16, 3);
        let lift = simulate_controlled_path(&family, 0, &c, 0).unwrap();
        assert!(matches!(
            g_ito_residual(&PayoffSpec::Call { strike: 0.0 }, &lift),
            Err(Error::UnsupportedPayoff { .. })
        ));
    }

    #[test]
    fn pathwise_composition_commutes_with_squaring() {
        // Squaring the Euler states equals mapping the quadratic payoff
        // over the path: same floating-point operation, bitwise equal.
        let spec = GSdeSpec::new(
            Coefficient::Constant { c: 0.0 },
            Coefficient::Linear { a: 0.1 },
            Coefficient::Linear { a: 0.3 },
            1.0,
        )
        .unwrap();
        let th = theta(0.5, 1.0);
        let family = ControlFamily::constant_grid(th, 2).unwrap();
        let c = cfg(4, 64, 17);
        let x = euler_solve_family_member(&spec, &family, 1, &c, 2).unwrap();
        let squared: Vec<f64> = x.values().iter().map(|v| v * v).collect();
        let mapped: Vec<f64> = x.values().iter().map(|v| PayoffSpec::Quadratic.eval(*v)).collect();
        for (a, b) in squared.iter().zip(&mapped) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
