//! Numerical engine for sublinear (G-) expectations of payoffs of
//! G-Brownian motion and G-SDE solutions.
//!
//! A G-expectation is a supremum of classical expectations over a family of
//! volatility scenarios drawn from an interval [σ̲, σ̄]. This crate computes
//! it by three mutually cross-checking routes:
//!
//! * [`gheat`] — a monotone explicit finite-difference solver for the
//!   nonlinear G-heat/HJB equation, yielding the value function and the
//!   optimal bang-bang volatility policy;
//! * [`mc`] — a reproducible Monte Carlo engine taking the supremum of
//!   controlled-path estimates over a control family, with common random
//!   numbers across members;
//! * [`roughlift`] — deterministic evaluation of path functionals on the
//!   lift (B, ⟨B⟩) of a path and its quadratic variation.
//!
//! [`gsde`] solves controlled SDE families, [`cylinder`] handles functions
//! of finitely many increments via backward PDE recursion, and [`controls`]
//! houses the admissible control representations shared by all routes.

pub mod controls;
pub mod cylinder;
pub mod error;
pub mod gheat;
pub mod gsde;
pub mod mc;
pub mod rng;
pub mod roughlift;
pub mod types;

pub use error::{Error, Result};
pub use types::{Estimate, PayoffSpec, SamplePath, TimeGrid, VolatilityInterval};
