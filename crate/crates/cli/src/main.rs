//! `gcalc` — G-expectation calculator.
//!
//! Computes sublinear expectations of payoffs of G-Brownian motion and
//! G-SDE solutions by PDE, Monte Carlo and rough-lift routes. JSON results
//! go to stdout, diagnostics to stderr, CSV data to files.
//!
//! Exit codes: 0 ok, 2 validation error, 3 numeric error.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use gcalc_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "gcalc",
    version,
    about = "Sublinear (G-) expectation calculator: PDE, Monte Carlo and rough-lift routes",
    after_help = "Payoff grammar: quadratic | neg_quadratic | identity | constant:<c> | \
                  call:K=<k> | put:K=<k> | butterfly:K=<k>,w=<w> | exp:a=<a> | \
                  poly:<c0>,<c1>,...\n\
                  Family grammar:  constant:<levels> | feedback | fixed:<csv-file>\n\
                  Composite payoffs (cylinder): sum:<p1>,<p2>,... | product:<p1>,... | <p>"
)]
struct Cli {
    /// Worker thread cap (fallback: GCALC_THREADS). Results never depend
    /// on the thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress the timestamp field, making output byte-reproducible.
    #[arg(long, global = true)]
    no_timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the nonlinear G-heat equation and report u(0, 0).
    Gheat(GheatArgs),
    /// G-expectation of a terminal payoff by PDE and/or Monte Carlo.
    Gexp(GexpArgs),
    /// G-SDE drivers.
    #[command(subcommand)]
    Gsde(GsdeCommand),
    /// Cylinder-function (conditional) G-expectations.
    Cylinder(CylinderArgs),
    /// Rough-lift utilities.
    #[command(subcommand)]
    Lifts(LiftsCommand),
    /// Print the full flag reference for every command (plain text; used
    /// to generate docs/cli.md).
    Reference,
}

#[derive(Debug, Args)]
struct VolatilityArgs {
    /// Lower volatility bound σ̲ > 0.
    #[arg(long, value_name = "SIGMA")]
    sigma_low: f64,
    /// Upper volatility bound σ̄ ≥ σ̲.
    #[arg(long, value_name = "SIGMA")]
    sigma_high: f64,
}

#[derive(Debug, Args)]
struct PdeGridArgs {
    /// Spatial points of the PDE grid (odd).
    #[arg(long, default_value_t = 801)]
    points: usize,
    /// Half-width L of the PDE domain [-L, L]; default 6·σ̄·√T.
    #[arg(long)]
    half_width: Option<f64>,
    /// PDE time steps; default: smallest count satisfying the CFL bound
    /// Δt ≤ Δx²/σ̄².
    #[arg(long)]
    pde_steps: Option<usize>,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Monte Carlo path count.
    #[arg(long, default_value_t = gcalc_core::mc::DEFAULT_N_PATHS)]
    paths: usize,
    /// Simulation steps per path.
    #[arg(long, default_value_t = gcalc_core::mc::DEFAULT_N_STEPS)]
    steps: usize,
    /// Seed of the counter-based generator.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct GheatArgs {
    /// Terminal payoff φ.
    #[arg(long)]
    payoff: String,
    #[command(flatten)]
    vol: VolatilityArgs,
    /// Horizon T.
    #[arg(long = "T", value_name = "T")]
    horizon: f64,
    #[command(flatten)]
    grid: PdeGridArgs,
    /// Write the full value grid as CSV (t,x,u) to this path.
    #[arg(long, value_name = "PATH")]
    csv_out: Option<String>,
}

#[derive(Debug, Args)]
struct GexpArgs {
    /// Terminal payoff φ.
    #[arg(long)]
    payoff: String,
    #[command(flatten)]
    vol: VolatilityArgs,
    /// Horizon T.
    #[arg(long = "T", value_name = "T")]
    horizon: f64,
    /// pde | mc | both.
    #[arg(long, default_value = "both")]
    method: String,
    /// Control family for the Monte Carlo supremum.
    #[arg(long, default_value = "constant:9")]
    family: String,
    #[command(flatten)]
    grid: PdeGridArgs,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Debug, Subcommand)]
enum GsdeCommand {
    /// Geometric G-SDE dX = σX dB + γX d⟨B⟩: Monte Carlo supremum next to
    /// the analytic case formula.
    Geometric(GsdeGeometricArgs),
}

#[derive(Debug, Args)]
struct GsdeGeometricArgs {
    /// Quadratic-variation drift loading γ.
    #[arg(long, allow_negative_numbers = true)]
    gamma: f64,
    /// Diffusion loading σ.
    #[arg(long, allow_negative_numbers = true)]
    sigma: f64,
    /// Initial value x0 > 0.
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[command(flatten)]
    vol: VolatilityArgs,
    /// Horizon T.
    #[arg(long = "T", value_name = "T")]
    horizon: f64,
    /// Control family for the Monte Carlo supremum.
    #[arg(long, default_value = "constant:9")]
    family: String,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Debug, Args)]
struct CylinderArgs {
    /// Cylinder times, comma separated, e.g. 0.5,1.0.
    #[arg(long)]
    times: String,
    /// Composite payoff over the increments: sum:<p,...>, product:<p,...>
    /// or a single payoff.
    #[arg(long)]
    phi: String,
    #[command(flatten)]
    vol: VolatilityArgs,
    /// Conditioning time s; enables conditional_value (with --observed) and
    /// tower_gap (when s is an intermediate cylinder time).
    #[arg(long)]
    s: Option<f64>,
    /// Observed path values: B at each cylinder time ≤ s, then B_s when s
    /// sits strictly between cylinder times. Comma separated.
    #[arg(long, allow_hyphen_values = true)]
    observed: Option<String>,
    /// Spatial points of the tensor/PDE grid (odd). The backward recursion
    /// costs points^(n-1) solves, so the default is coarser than gheat's.
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Half-width of the spatial grid; default 6·σ̄·√t_n.
    #[arg(long)]
    half_width: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum LiftsCommand {
    /// Simulate lifts and write one CSV (t,b,qv) per path as `lift_<index>.csv`.
    Export(LiftsExportArgs),
}

#[derive(Debug, Args)]
struct LiftsExportArgs {
    #[command(flatten)]
    vol: VolatilityArgs,
    /// Horizon T.
    #[arg(long = "T", value_name = "T")]
    horizon: f64,
    /// Control family generating the lifts.
    #[arg(long, default_value = "constant:9")]
    family: String,
    /// Family member to simulate (ignored for single-member families).
    #[arg(long, default_value_t = 0)]
    member: usize,
    #[command(flatten)]
    sim: SimArgs,
    /// Output directory for the per-path lift CSV files.
    #[arg(long, default_value = ".")]
    out_dir: String,
}

fn main() {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("GCALC_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("gcalc: --threads must be positive");
            std::process::exit(2);
        }
        // Results are bitwise independent of the pool size; this only caps
        // resource usage.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let outcome = match &cli.command {
        Command::Gheat(args) => commands::run_gheat(args),
        Command::Gexp(args) => commands::run_gexp(args),
        Command::Gsde(GsdeCommand::Geometric(args)) => commands::run_gsde_geometric(args),
        Command::Cylinder(args) => commands::run_cylinder(args),
        Command::Lifts(LiftsCommand::Export(args)) => commands::run_lifts_export(args),
        Command::Reference => {
            print!("{}", render_reference());
            return;
        }
    };

    match outcome {
        Ok(envelope) => {
            println!("{}", envelope.render(!cli.no_timestamp));
        }
        Err(err) => {
            eprintln!("gcalc: {err}");
            std::process::exit(if err.is_numeric() { 3 } else { 2 });
        }
    }
}

pub(crate) fn io_error(err: std::io::Error, what: &str) -> Error {
    Error::Validation(format!("{what}: {err}"))
}

/// Renders the flag reference for every (sub)command as one text page.
fn render_reference() -> String {
    use clap::CommandFactory;
    let mut root = Cli::command();
    root.build();
    let mut out = String::from("# gcalc command reference\n");
    fn walk(cmd: &clap::Command, path: String, out: &mut String) {
        let has_args = cmd.get_arguments().any(|a| !a.is_global_set());
        if has_args || cmd.get_subcommands().next().is_none() {
            out.push_str(&format!("\n## {path}\n\n```\n"));
            out.push_str(&cmd.clone().render_long_help().to_string());
            out.push_str("```\n");
        }
        for sub in cmd.get_subcommands() {
            if sub.get_name() == "help" {
                continue;
            }
            walk(sub, format!("{path} {}", sub.get_name()), out);
        }
    }
    out.push_str("\n```\n");
    out.push_str(&root.clone().render_long_help().to_string());
    out.push_str("```\n");
    for sub in root.get_subcommands() {
        if sub.get_name() == "help" {
            continue;
        }
        walk(sub, format!("gcalc {}", sub.get_name()), &mut out);
    }
    out
}
