//! Command handlers: parse the resolved configuration, dispatch into
//! gcalc-core, and shape the JSON results.

use serde::{Deserialize, Serialize};
use serde_json::json;

use gcalc_core::controls::{ControlFamily, ControlPath};
use gcalc_core::cylinder::{
    conditional_g_expectation, g_expectation_cylinder_checked, tower_check, CompositePayoff,
    CylinderFunction,
};
use gcalc_core::gheat::{
    extract_policy, g_expectation_pde, solve_g_heat, SpaceGrid,
};
use gcalc_core::gsde::{g_expectation_geometric_mc, GeometricSpec};
use gcalc_core::mc::{simulate_controlled_path, sup_over_controls, SimConfig, SupResult};
use gcalc_core::types::{PayoffSpec, TimeGrid, VolatilityInterval};
use gcalc_core::{Error, Result};

use crate::output::Envelope;
use crate::{
    io_error, CylinderArgs, GexpArgs, GheatArgs, GsdeGeometricArgs, LiftsExportArgs, PdeGridArgs,
    SimArgs, VolatilityArgs,
};

/// Scheme allowance added to the 3·SE band when comparing the Monte Carlo
/// supremum against the PDE value at default grids: the bang-bang policy
/// attains the value function only up to spatial truncation and the
/// discrete-time control lag.
pub const PDE_SCHEME_ALLOWANCE: f64 = 1e-2;

// ---------------------------------------------------------------------------
// Shared parsing helpers
// ---------------------------------------------------------------------------

impl VolatilityArgs {
    fn interval(&self) -> Result<VolatilityInterval> {
        VolatilityInterval::new(self.sigma_low, self.sigma_high)
    }
}

fn resolve_pde_grids(
    args: &PdeGridArgs,
    theta: &VolatilityInterval,
    horizon: f64,
) -> Result<(TimeGrid, SpaceGrid)> {
    let half_width = match args.half_width {
        Some(l) => l,
        None => 6.0 * theta.sigma_high() * horizon.sqrt(),
    };
    let space = SpaceGrid::new(half_width, args.points)?;
    let time = match args.pde_steps {
        Some(n) => TimeGrid::new(horizon, n)?,
        None => space.cfl_time_grid(theta, horizon)?,
    };
    Ok((time, space))
}

fn sim_config(args: &SimArgs, horizon: f64) -> Result<SimConfig> {
    SimConfig::new(args.paths, TimeGrid::new(horizon, args.steps)?, args.seed)
}

const PAYOFF_KINDS: [&str; 11] = [
    "quadratic",
    "neg_quadratic",
    "identity",
    "constant",
    "call",
    "put",
    "butterfly",
    "exp",
    "exponential",
    "poly",
    "polynomial",
];

/// Splits a comma-separated payoff list, gluing back commas that belong to
/// payoff parameters (`poly:1,0,-2`, `butterfly:K=0,w=1`). A token opens a
/// new payoff exactly when its leading word is a payoff kind. Semicolons
/// also separate unambiguously.
fn split_payoff_list(body: &str) -> Result<Vec<PayoffSpec>> {
    let mut chunks: Vec<String> = Vec::new();
    for semi in body.split(';') {
        for token in semi.split(',') {
            let head = token.trim().split(':').next().unwrap_or("").to_ascii_lowercase();
            if PAYOFF_KINDS.contains(&head.as_str()) {
                chunks.push(token.to_string());
            } else if let Some(last) = chunks.last_mut() {
                last.push(',');
                last.push_str(token);
            } else {
                return Err(Error::Validation(format!(
                    "cannot parse payoff list `{body}`: `{token}` does not start a payoff"
                )));
            }
        }
    }
    chunks.iter().map(|c| c.parse()).collect()
}

/// Composite grammar: `sum:<p,...>`, `product:<p,...>`, or a bare payoff.
fn parse_composite(text: &str) -> Result<CompositePayoff> {
    let trimmed = text.trim();
    if let Some(body) = trimmed.strip_prefix("sum:") {
        return Ok(CompositePayoff::Sum(split_payoff_list(body)?));
    }
    if let Some(body) = trimmed.strip_prefix("product:") {
        return Ok(CompositePayoff::Product(split_payoff_list(body)?));
    }
    Ok(CompositePayoff::single(trimmed.parse()?))
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("cannot parse {what} entry `{v}`")))
        })
        .collect()
}

/// Family grammar: `constant:<levels>`, `feedback`, `fixed:<csv-file>`.
/// The feedback family needs the payoff's PDE solve, supplied by the
/// caller via `policy_source`.
fn parse_family(
    text: &str,
    theta: &VolatilityInterval,
    sim_grid: &TimeGrid,
    policy_source: Option<(&PayoffSpec, &TimeGrid, &SpaceGrid)>,
) -> Result<ControlFamily> {
    let trimmed = text.trim();
    if let Some(levels) = trimmed.strip_prefix("constant:") {
        let n: usize = levels
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("bad level count in `{trimmed}`")))?;
        return ControlFamily::constant_grid(*theta, n);
    }
    if trimmed == "feedback" {
        let (payoff, time, space) = policy_source.ok_or_else(|| {
            Error::Validation(
                "family `feedback` requires a PDE solve in the same invocation".into(),
            )
        })?;
        let grid = solve_g_heat(payoff, theta, time, space)?;
        return Ok(ControlFamily::Feedback(extract_policy(&grid, theta)));
    }
    if let Some(path) = trimmed.strip_prefix("fixed:") {
        let content = std::fs::read_to_string(path.trim())
            .map_err(|e| io_error(e, &format!("reading control file `{path}`")))?;
        let values: Vec<f64> = content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|_| Error::Validation(format!("bad control value `{l}` in `{path}`")))
            })
            .collect::<Result<_>>()?;
        return Ok(ControlFamily::Fixed(ControlPath::new(*sim_grid, values, theta)?));
    }
    Err(Error::Validation(format!(
        "unknown family `{trimmed}` (expected constant:<levels>, feedback, or fixed:<file>)"
    )))
}

// ---------------------------------------------------------------------------
// gheat
// ---------------------------------------------------------------------------

/// Resolved configuration, echoed in the output. Round-trips losslessly
/// through its JSON form.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct GheatConfig {
    pub payoff: String,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub horizon: f64,
    pub points: usize,
    pub half_width: f64,
    pub pde_steps: usize,
    pub csv_out: Option<String>,
}

pub fn run_gheat(args: &GheatArgs) -> Result<Envelope> {
    let theta = args.vol.interval()?;
    let payoff: PayoffSpec = args.payoff.parse()?;
    let (time, space) = resolve_pde_grids(&args.grid, &theta, args.horizon)?;

    let config = GheatConfig {
        payoff: payoff.to_string(),
        sigma_low: theta.sigma_low(),
        sigma_high: theta.sigma_high(),
        horizon: args.horizon,
        points: space.n_points(),
        half_width: space.half_width(),
        pde_steps: time.n_steps(),
        csv_out: args.csv_out.clone(),
    };

    let grid = solve_g_heat(&payoff, &theta, &time, &space)?;
    if let Some(path) = &args.csv_out {
        std::fs::write(path, grid.to_csv())
            .map_err(|e| io_error(e, &format!("writing value grid CSV `{path}`")))?;
        eprintln!("gcalc: value grid written to {path}");
    }

    let s2 = theta.sigma_high() * theta.sigma_high();
    let result = json!({
        "value_at_origin": grid.value_at_origin(),
        "grid": {
            "n_points": space.n_points(),
            "half_width": space.half_width(),
            "dx": space.dx(),
            "n_steps": time.n_steps(),
            "dt": time.dt(),
        },
        "cfl_ratio": time.dt() * s2 / (space.dx() * space.dx()),
    });
    Ok(Envelope::new("gheat", serde_json::to_value(&config).unwrap(), result))
}

// ---------------------------------------------------------------------------
// gexp
// ---------------------------------------------------------------------------

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct GexpConfig {
    pub payoff: String,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub horizon: f64,
    pub method: String,
    pub family: String,
    pub points: usize,
    pub half_width: f64,
    pub pde_steps: usize,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

pub fn run_gexp(args: &GexpArgs) -> Result<Envelope> {
    let theta = args.vol.interval()?;
    let payoff: PayoffSpec = args.payoff.parse()?;
    let (time, space) = resolve_pde_grids(&args.grid, &theta, args.horizon)?;
    let method = args.method.to_ascii_lowercase();
    if !matches!(method.as_str(), "pde" | "mc" | "both") {
        return Err(Error::Validation(format!(
            "unknown method `{}` (expected pde, mc or both)",
            args.method
        )));
    }

    let config = GexpConfig {
        payoff: payoff.to_string(),
        sigma_low: theta.sigma_low(),
        sigma_high: theta.sigma_high(),
        horizon: args.horizon,
        method: method.clone(),
        family: args.family.trim().to_string(),
        points: space.n_points(),
        half_width: space.half_width(),
        pde_steps: time.n_steps(),
        paths: args.sim.paths,
        steps: args.sim.steps,
        seed: args.sim.seed,
    };

    let run_mc = || -> Result<SupResult> {
        let cfg = sim_config(&args.sim, args.horizon)?;
        let family = parse_family(
            &args.family,
            &theta,
            cfg.grid(),
            Some((&payoff, &time, &space)),
        )?;
        sup_over_controls(&payoff, &family, &cfg)
    };

    let result = match method.as_str() {
        "pde" => json!({ "pde": g_expectation_pde(&payoff, &theta, &time, &space)? }),
        "mc" => json!({ "mc": run_mc()? }),
        _ => {
            let pde = g_expectation_pde(&payoff, &theta, &time, &space)?;
            let mc = run_mc()?;
            let gap = pde - mc.best.mean;
            let within = gap.abs() <= 3.0 * mc.best.std_error + PDE_SCHEME_ALLOWANCE;
            json!({ "pde": pde, "mc": mc, "gap": gap, "within_3se": within })
        }
    };
    Ok(Envelope::new("gexp", serde_json::to_value(&config).unwrap(), result))
}

// ---------------------------------------------------------------------------
// gsde geometric
// ---------------------------------------------------------------------------

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct GsdeGeometricConfig {
    pub gamma: f64,
    pub sigma: f64,
    pub x0: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub horizon: f64,
    pub family: String,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

pub fn run_gsde_geometric(args: &GsdeGeometricArgs) -> Result<Envelope> {
    let theta = args.vol.interval()?;
    let spec = GeometricSpec::new(args.sigma, args.gamma, args.x0)?;
    let cfg = sim_config(&args.sim, args.horizon)?;
    // Feedback is not meaningful here: the geometric optimum over constant
    // controls is an extreme point, so reject it early instead of solving
    // an unrelated PDE.
    let family = parse_family(&args.family, &theta, cfg.grid(), None)?;

    let config = GsdeGeometricConfig {
        gamma: spec.gamma,
        sigma: spec.sigma,
        x0: spec.x0,
        sigma_low: theta.sigma_low(),
        sigma_high: theta.sigma_high(),
        horizon: args.horizon,
        family: args.family.trim().to_string(),
        paths: args.sim.paths,
        steps: args.sim.steps,
        seed: args.sim.seed,
    };

    let sup = g_expectation_geometric_mc(&spec, &family, &cfg)?;
    let analytic = spec.analytic_g_expectation(&theta, args.horizon);
    let within = (sup.best.mean - analytic).abs() <= 3.0 * sup.best.std_error;
    let result = json!({
        "mc": sup,
        "analytic": analytic,
        "within_3se": within,
    });
    Ok(Envelope::new("gsde-geometric", serde_json::to_value(&config).unwrap(), result))
}

// ---------------------------------------------------------------------------
// cylinder
// ---------------------------------------------------------------------------

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderConfig {
    pub times: Vec<f64>,
    pub phi: String,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub s: Option<f64>,
    pub observed: Option<Vec<f64>>,
    pub points: usize,
    pub half_width: f64,
}

pub fn run_cylinder(args: &CylinderArgs) -> Result<Envelope> {
    let theta = args.vol.interval()?;
    let times = parse_f64_list(&args.times, "cylinder time")?;
    let phi = parse_composite(&args.phi)?;
    let cyl = CylinderFunction::new(times.clone(), phi)?;
    let horizon = *times.last().expect("validated non-empty");
    let half_width = match args.half_width {
        Some(l) => l,
        None => 6.0 * theta.sigma_high() * horizon.sqrt(),
    };
    let space = SpaceGrid::new(half_width, args.points)?;
    let observed = args
        .observed
        .as_deref()
        .map(|o| parse_f64_list(o, "observed value"))
        .transpose()?;

    let config = CylinderConfig {
        times: times.clone(),
        phi: args.phi.trim().to_string(),
        sigma_low: theta.sigma_low(),
        sigma_high: theta.sigma_high(),
        s: args.s,
        observed: observed.clone(),
        points: space.n_points(),
        half_width: space.half_width(),
    };

    let (value, resolution_warning) = g_expectation_cylinder_checked(&cyl, &theta, &space)?;
    if resolution_warning {
        eprintln!(
            "gcalc: cylinder value changed by more than {} under grid coarsening; \
             consider more --points",
            gcalc_core::cylinder::RESOLUTION_WARN_GAP
        );
    }

    let conditional_value = match (args.s, &observed) {
        (Some(s), Some(obs)) => {
            Some(conditional_g_expectation(&cyl, s, obs, &theta, &space)?)
        }
        (Some(_), None) | (None, None) => None,
        (None, Some(_)) => {
            return Err(Error::Validation("--observed requires --s".into()));
        }
    };

    let tower_gap = match args.s {
        Some(s) if cyl.times()[..cyl.n() - 1].contains(&s) => {
            let (direct, composed) = tower_check(&cyl, s, &theta, &space)?;
            Some((direct - composed).abs())
        }
        _ => None,
    };

    let result = json!({
        "value": value,
        "resolution_warning": resolution_warning,
        "conditional_value": conditional_value,
        "tower_gap": tower_gap,
    });
    Ok(Envelope::new("cylinder", serde_json::to_value(&config).unwrap(), result))
}

// ---------------------------------------------------------------------------
// lifts export
// ---------------------------------------------------------------------------

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftsExportConfig {
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub horizon: f64,
    pub family: String,
    pub member: usize,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub out_dir: String,
}

pub fn run_lifts_export(args: &LiftsExportArgs) -> Result<Envelope> {
    let theta = args.vol.interval()?;
    let cfg = sim_config(&args.sim, args.horizon)?;
    let family = parse_family(&args.family, &theta, cfg.grid(), None)?;

    let config = LiftsExportConfig {
        sigma_low: theta.sigma_low(),
        sigma_high: theta.sigma_high(),
        horizon: args.horizon,
        family: args.family.trim().to_string(),
        member: args.member,
        paths: args.sim.paths,
        steps: args.sim.steps,
        seed: args.sim.seed,
        out_dir: args.out_dir.clone(),
    };

    let dir = std::path::Path::new(&args.out_dir);
    std::fs::create_dir_all(dir)
        .map_err(|e| io_error(e, &format!("creating output directory `{}`", args.out_dir)))?;
    let mut files = Vec::with_capacity(cfg.n_paths());
    for p in 0..cfg.n_paths() as u64 {
        let lift = simulate_controlled_path(&family, args.member, &cfg, p)?;
        let file = dir.join(format!("lift_{p}.csv"));
        std::fs::write(&file, lift.to_csv())
            .map_err(|e| io_error(e, &format!("writing `{}`", file.display())))?;
        files.push(file.to_string_lossy().into_owned());
    }

    let result = json!({ "n_paths": cfg.n_paths(), "files": files });
    Ok(Envelope::new("lifts-export", serde_json::to_value(&config).unwrap(), result))
}

// ---------------------------------------------------------------------------
