//! The rough lift (B, ⟨B⟩) and deterministic path functionals.
//!
//! A simulated controlled path carries its quadratic variation alongside the
//! path itself; the pair determines every quantity this library evaluates on
//! paths. Functional evaluation is pure — no randomness, no reference to any
//! probability measure — so two lifts that agree pointwise produce identical
//! outputs no matter which control family generated them. Probability only
//! enters as the mechanism that generates lifts.
//!
//! `partition_qv` provides the independent estimator of quadratic variation
//! as a partition sum of squared increments; the lift's stored ⟨B⟩ (exact
//! sums of θ²Δt) is deliberately kept separate so the two can be compared
//! rather than conflated.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::gsde::GeometricSpec;
use crate::types::{PayoffSpec, SamplePath, TimeGrid};

/// A discrete path paired with its quadratic variation, `b[0] = qv[0] = 0`,
/// `qv` nondecreasing. Lifts produced by the simulator additionally satisfy
/// `σ̲²·t_k ≤ qv[k] ≤ σ̄²·t_k` exactly at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughLift {
    grid: TimeGrid,
    b: Vec<f64>,
    qv: Vec<f64>,
}

impl RoughLift {
    pub fn new(grid: TimeGrid, b: Vec<f64>, qv: Vec<f64>) -> Result<Self> {
        if b.len() != grid.n_nodes() || qv.len() != grid.n_nodes() {
            return Err(Error::Validation(format!(
                "lift needs {} nodes, got b: {}, qv: {}",
                grid.n_nodes(),
                b.len(),
                qv.len()
            )));
        }
        if b[0] != 0.0 {
            return Err(Error::Validation(format!("lift path must start at 0, got {}", b[0])));
        }
        if qv[0] != 0.0 {
            return Err(Error::Validation(format!(
                "quadratic variation must start at 0, got {}",
                qv[0]
            )));
        }
        if qv.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("quadratic variation must be nondecreasing".into()));
        }
        Ok(Self { grid, b, qv })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn qv(&self) -> &[f64] {
        &self.qv
    }

    pub fn terminal_b(&self) -> f64 {
        *self.b.last().expect("lift nodes are non-empty")
    }

    pub fn terminal_qv(&self) -> f64 {
        *self.qv.last().expect("lift nodes are non-empty")
    }

    pub fn path(&self) -> SamplePath {
        SamplePath::new(self.grid, self.b.clone()).expect("lift lengths validated")
    }

    /// Serializes as CSV with header `t,b,qv`, one row per node,
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,b,qv\n");
        for k in 0..self.grid.n_nodes() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.grid.node(k),
                self.b[k],
                self.qv[k]
            ));
        }
        out
    }
}

/// Quadratic variation estimated as a partition sum of squared increments
/// over blocks of `block` steps, linearly spread inside each block so the
/// result has one value per grid node.
pub fn partition_qv(path: &SamplePath, block: usize) -> Result<Vec<f64>> {
    let n_steps = path.grid().n_steps();
    if block == 0 || !n_steps.is_multiple_of(block) {
        return Err(Error::Validation(format!(
            "block size {block} does not divide n_steps = {n_steps}"
        )));
    }
    let values = path.values();
    let mut qv = Vec::with_capacity(n_steps + 1);
    qv.push(0.0);
    let mut acc = 0.0;
    for blk in 0..n_steps / block {
        let lo = values[blk * block];
        let hi = values[(blk + 1) * block];
        let inc2 = (hi - lo) * (hi - lo);
        for j in 1..=block {
            qv.push(acc + inc2 * j as f64 / block as f64);
        }
        acc += inc2;
    }
    Ok(qv)
}

/// A deterministic functional of a rough lift.
#[derive(Debug, Clone, PartialEq)]
pub enum PathFunctional {
    /// φ(B_T).
    TerminalPayoff(PayoffSpec),
    /// Terminal value of the geometric closed form on the lift.
    Geometric(GeometricSpec),
    /// The discrete Itô reconstruction Σ f′(B_k)ΔB_k + ½ Σ f″(B_k)Δ⟨B⟩_k
    /// for a smooth payoff f.
    ItoIntegral(PayoffSpec),
}

/// Evaluates a path functional on a lift. Pure: the output depends only on
/// the lift's (b, qv) values.
pub fn eval_functional(f: &PathFunctional, lift: &RoughLift) -> Result<f64> {
    match f {
        PathFunctional::TerminalPayoff(p) => {
            p.validate()?;
            Ok(p.eval(lift.terminal_b()))
        }
        PathFunctional::Geometric(g) => {
            let path = crate::gsde::closed_form_geometric(g, lift)?;
            Ok(path.terminal())
        }
        PathFunctional::ItoIntegral(p) => {
            p.validate()?;
            let b = lift.b();
            let qv = lift.qv();
            let mut ito = 0.0;
            let mut qv_part = 0.0;
            for k in 0..b.len() - 1 {
                ito += p.eval_d1(b[k])? * (b[k + 1] - b[k]);
                qv_part += p.eval_d2(b[k])? * (qv[k + 1] - qv[k]);
            }
            Ok(ito + 0.5 * qv_part)
        }
    }
}

/// Result of a measure-independence check over a set of lifts.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    pub n_lifts: usize,
    /// Number of distinct (b, qv) groups under exact equality.
    pub n_groups: usize,
    /// Largest output spread within any group; 0 when the functional is
    /// honestly a function of the lift alone.
    pub max_spread: f64,
}

/// Groups lifts by exact (bitwise) equality of (b, qv) and measures the
/// spread of functional outputs within each group. Lifts that agree as data
/// must evaluate identically regardless of which family produced them.
pub fn measure_independence_check(
    f: &PathFunctional,
    lifts: &[RoughLift],
) -> Result<IndependenceReport> {
    let mut groups: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
    for lift in lifts {
        let key: Vec<u64> = lift
            .b()
            .iter()
            .chain(lift.qv().iter())
            .map(|v| v.to_bits())
            .collect();
        let out = eval_functional(f, lift)?;
        groups
            .entry(key)
            .and_modify(|(lo, hi)| {
                *lo = lo.min(out);
                *hi = hi.max(out);
            })
            .or_insert((out, out));
    }
    let max_spread = groups.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    Ok(IndependenceReport { n_lifts: lifts.len(), n_groups: groups.len(), max_spread })
}
