//! Shared domain types: volatility intervals, time grids, payoff
//! descriptors, sample paths and Monte Carlo estimates.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. All quantities are 64-bit floats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The volatility uncertainty set Θ = [σ̲, σ̄] with 0 < σ̲ ≤ σ̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolatilityInterval {
    sigma_low: f64,
    sigma_high: f64,
}

impl VolatilityInterval {
    pub fn new(sigma_low: f64, sigma_high: f64) -> Result<Self> {
        if !(sigma_low.is_finite() && sigma_high.is_finite()) || sigma_low <= 0.0 {
            return Err(Error::Validation(format!(
                "volatility interval requires 0 < sigma_low <= sigma_high, got [{sigma_low}, {sigma_high}]"
            )));
        }
        if sigma_low > sigma_high {
            return Err(Error::Validation(format!(
                "sigma_low = {sigma_low} exceeds sigma_high = {sigma_high}"
            )));
        }
        Ok(Self { sigma_low, sigma_high })
    }

    /// Degenerate interval σ̲ = σ̄ (the classical, single-measure limit).
    pub fn classical(sigma: f64) -> Result<Self> {
        Self::new(sigma, sigma)
    }

    pub fn sigma_low(&self) -> f64 {
        self.sigma_low
    }

    pub fn sigma_high(&self) -> f64 {
        self.sigma_high
    }

    /// True when the interval degenerates to a single volatility.
    pub fn is_classical(&self) -> bool {
        self.sigma_low == self.sigma_high
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.sigma_low, self.sigma_high)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.sigma_low <= v && v <= self.sigma_high
    }
}

/// Uniform partition of [0, T] into `n_steps` steps of width Δt = T/n_steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::Validation(format!(
                "time horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::Validation("time grid needs at least one step".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid nodes, n_steps + 1.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Node time t_k = k·Δt; t_0 = 0 and t_{n_steps} = T.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }
}

/// Terminal payoff descriptor φ.
///
/// A closed algebraic set of named functions rather than arbitrary closures,
/// so CLI configs, golden tests and both solver backends share one
/// definition. Growth is capped (polynomial degree ≤ 8, exponential rate
/// |a| ≤ 2) because the PDE domain is truncated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffSpec {
    /// x²
    Quadratic,
    /// −x²
    NegQuadratic,
    /// x
    Identity,
    /// c
    Constant { c: f64 },
    /// (x − K)⁺
    Call { strike: f64 },
    /// (K − x)⁺
    Put { strike: f64 },
    /// Hat function max(0, 1 − |x − K|/w), apex value 1 at K.
    Butterfly { strike: f64, width: f64 },
    /// e^{a·x} with |a| ≤ 2.
    Exponential { rate: f64 },
    /// `Σ coeffs[i]·x^i`, ascending order, degree ≤ 8.
    Polynomial { coeffs: Vec<f64> },
}

/// Maximum polynomial degree accepted by [`PayoffSpec::Polynomial`].
pub const MAX_POLY_DEGREE: usize = 8;
/// Maximum |rate| accepted by [`PayoffSpec::Exponential`].
pub const MAX_EXP_RATE: f64 = 2.0;

impl PayoffSpec {
    /// Checks the descriptor's parameter constraints.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("{what} must be finite, got {v}")))
            }
        };
        match self {
            PayoffSpec::Quadratic | PayoffSpec::NegQuadratic | PayoffSpec::Identity => Ok(()),
            PayoffSpec::Constant { c } => finite(*c, "constant payoff level"),
            PayoffSpec::Call { strike } | PayoffSpec::Put { strike } => finite(*strike, "strike"),
            PayoffSpec::Butterfly { strike, width } => {
                finite(*strike, "butterfly strike")?;
                if !width.is_finite() || *width <= 0.0 {
                    return Err(Error::Validation(format!(
                        "butterfly width must be positive, got {width}"
                    )));
                }
                Ok(())
            }
            PayoffSpec::Exponential { rate } => {
                finite(*rate, "exponential rate")?;
                if rate.abs() > MAX_EXP_RATE {
                    return Err(Error::Validation(format!(
                        "exponential rate |a| <= {MAX_EXP_RATE} required, got {rate}"
                    )));
                }
                Ok(())
            }
            PayoffSpec::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::Validation("polynomial needs at least one coefficient".into()));
                }
                if coeffs.len() > MAX_POLY_DEGREE + 1 {
                    return Err(Error::Validation(format!(
                        "polynomial degree <= {MAX_POLY_DEGREE} required, got degree {}",
                        coeffs.len() - 1
                    )));
                }
                for c in coeffs {
                    finite(*c, "polynomial coefficient")?;
                }
                Ok(())
            }
        }
    }

    /// Pure pointwise evaluation. Repeated calls with equal inputs yield
    /// bitwise-equal outputs.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PayoffSpec::Quadratic => x * x,
            PayoffSpec::NegQuadratic => -(x * x),
            PayoffSpec::Identity => x,
            PayoffSpec::Constant { c } => *c,
            PayoffSpec::Call { strike } => (x - strike).max(0.0),
            PayoffSpec::Put { strike } => (strike - x).max(0.0),
            PayoffSpec::Butterfly { strike, width } => (1.0 - (x - strike).abs() / width).max(0.0),
            PayoffSpec::Exponential { rate } => (rate * x).exp(),
            PayoffSpec::Polynomial { coeffs } => {
                // Horner, highest degree first.
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
        }
    }

    /// True for kinds with two classical derivatives everywhere.
    pub fn is_smooth(&self) -> bool {
        !matches!(
            self,
            PayoffSpec::Call { .. } | PayoffSpec::Put { .. } | PayoffSpec::Butterfly { .. }
        )
    }

    /// First derivative φ′(x); errors for kinked kinds.
    pub fn eval_d1(&self, x: f64) -> Result<f64> {
        match self {
            PayoffSpec::Quadratic => Ok(2.0 * x),
            PayoffSpec::NegQuadratic => Ok(-2.0 * x),
            PayoffSpec::Identity => Ok(1.0),
            PayoffSpec::Constant { .. } => Ok(0.0),
            PayoffSpec::Exponential { rate } => Ok(rate * (rate * x).exp()),
            PayoffSpec::Polynomial { coeffs } => Ok(coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * x + i as f64 * c)),
            other => Err(other.unsupported("first derivative")),
        }
    }

    /// Second derivative φ″(x); errors for kinked kinds.
    pub fn eval_d2(&self, x: f64) -> Result<f64> {
        match self {
            PayoffSpec::Quadratic => Ok(2.0),
            PayoffSpec::NegQuadratic => Ok(-2.0),
            PayoffSpec::Identity | PayoffSpec::Constant { .. } => Ok(0.0),
            PayoffSpec::Exponential { rate } => Ok(rate * rate * (rate * x).exp()),
            PayoffSpec::Polynomial { coeffs } => Ok(coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * x + (i * (i - 1)) as f64 * c)),
            other => Err(other.unsupported("second derivative")),
        }
    }

    /// Points where the payoff is not smooth (used to split quadrature
    /// panels and to seed policy-sensitive tests).
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            PayoffSpec::Call { strike } | PayoffSpec::Put { strike } => vec![*strike],
            PayoffSpec::Butterfly { strike, width } => {
                vec![strike - width, *strike, strike + width]
            }
            _ => Vec::new(),
        }
    }

    fn unsupported(&self, operation: &str) -> Error {
        Error::UnsupportedPayoff { kind: self.kind_name().into(), operation: operation.into() }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PayoffSpec::Quadratic => "quadratic",
            PayoffSpec::NegQuadratic => "neg_quadratic",
            PayoffSpec::Identity => "identity",
            PayoffSpec::Constant { .. } => "constant",
            PayoffSpec::Call { .. } => "call",
            PayoffSpec::Put { .. } => "put",
            PayoffSpec::Butterfly { .. } => "butterfly",
            PayoffSpec::Exponential { .. } => "exp",
            PayoffSpec::Polynomial { .. } => "poly",
        }
    }
}

/// Validates and evaluates a payoff in one call.
pub fn eval_payoff(p: &PayoffSpec, x: f64) -> Result<f64> {
    p.validate()?;
    Ok(p.eval(x))
}

impl fmt::Display for PayoffSpec {
    /// Canonical textual form, e.g. `quadratic`, `call:K=1`,
    /// `butterfly:K=0,w=1`, `poly:1,0,-2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffSpec::Quadratic => write!(f, "quadratic"),
            PayoffSpec::NegQuadratic => write!(f, "neg_quadratic"),
            PayoffSpec::Identity => write!(f, "identity"),
            PayoffSpec::Constant { c } => write!(f, "constant:{c}"),
            PayoffSpec::Call { strike } => write!(f, "call:K={strike}"),
            PayoffSpec::Put { strike } => write!(f, "put:K={strike}"),
            PayoffSpec::Butterfly { strike, width } => write!(f, "butterfly:K={strike},w={width}"),
            PayoffSpec::Exponential { rate } => write!(f, "exp:a={rate}"),
            PayoffSpec::Polynomial { coeffs } => {
                write!(f, "poly:")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Validation(format!("cannot parse {what} from `{s}`")))
}

/// Parses `key=value` where the key is fixed, or a bare value.
fn parse_param(s: &str, key: &str, what: &str) -> Result<f64> {
    let body = match s.split_once('=') {
        Some((k, v)) => {
            if !k.trim().eq_ignore_ascii_case(key) {
                return Err(Error::Validation(format!(
                    "expected parameter `{key}`, got `{}`",
                    k.trim()
                )));
            }
            v
        }
        None => s,
    };
    parse_f64(body, what)
}

impl FromStr for PayoffSpec {
    type Err = Error;

    /// Grammar: `quadratic | neg_quadratic | identity | constant:<c> |
    /// call:K=<k> | put:K=<k> | butterfly:K=<k>,w=<w> | exp:a=<a> |
    /// poly:<c0>,<c1>,...` (ascending coefficients).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        let no_args = |spec: PayoffSpec| match args {
            None | Some("") => Ok(spec),
            Some(a) => Err(Error::Validation(format!(
                "payoff `{kind}` takes no parameters, got `{a}`"
            ))),
        };
        let one_arg = || {
            args.filter(|a| !a.is_empty()).ok_or_else(|| {
                Error::Validation(format!("payoff `{kind}` requires parameters, e.g. `{kind}:...`"))
            })
        };
        let spec = match kind.to_ascii_lowercase().as_str() {
            "quadratic" => no_args(PayoffSpec::Quadratic)?,
            "neg_quadratic" => no_args(PayoffSpec::NegQuadratic)?,
            "identity" => no_args(PayoffSpec::Identity)?,
            "constant" => PayoffSpec::Constant { c: parse_param(one_arg()?, "c", "constant level")? },
            "call" => PayoffSpec::Call { strike: parse_param(one_arg()?, "k", "strike")? },
            "put" => PayoffSpec::Put { strike: parse_param(one_arg()?, "k", "strike")? },
            "butterfly" => {
                let body = one_arg()?;
                let mut strike = None;
                let mut width = None;
                for part in body.split(',') {
                    let (k, v) = part.split_once('=').ok_or_else(|| {
                        Error::Validation(format!("butterfly expects K=<k>,w=<w>, got `{body}`"))
                    })?;
                    match k.trim().to_ascii_lowercase().as_str() {
                        "k" => strike = Some(parse_f64(v, "butterfly strike")?),
                        "w" => width = Some(parse_f64(v, "butterfly width")?),
                        other => {
                            return Err(Error::Validation(format!(
                                "unknown butterfly parameter `{other}`"
                            )))
                        }
                    }
                }
                PayoffSpec::Butterfly {
                    strike: strike
                        .ok_or_else(|| Error::Validation("butterfly is missing K".into()))?,
                    width: width.ok_or_else(|| Error::Validation("butterfly is missing w".into()))?,
                }
            }
            "exp" | "exponential" => {
                PayoffSpec::Exponential { rate: parse_param(one_arg()?, "a", "exponential rate")? }
            }
            "poly" | "polynomial" => {
                let coeffs = one_arg()?
                    .split(',')
                    .map(|c| parse_f64(c, "polynomial coefficient"))
                    .collect::<Result<Vec<_>>>()?;
                PayoffSpec::Polynomial { coeffs }
            }
            other => {
                return Err(Error::Validation(format!("unknown payoff kind `{other}`")));
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A discrete path sampled on a time grid; `values[k]` sits at node t_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Validation(format!(
                "path needs {} values (one per node), got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths are non-empty by construction")
    }
}

/// A Monte Carlo estimate: sample mean with its standard error,
/// plus the provenance needed to reproduce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}
