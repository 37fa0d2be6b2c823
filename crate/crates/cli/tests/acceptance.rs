//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers (visible under --nocapture; the
//! test name itself reports pass/fail in the summary).
//!
//! Tolerances are pinned here, not calibrated later. Oracles are
//! independent: quadrature from gcalc-testkit, closed forms evaluated
//! inline, self-consistency where no external number exists.

use std::process::Command;
use std::time::Instant;

use gcalc_core::controls::{ControlFamily, ControlPath};
use gcalc_core::cylinder::{tower_check, CompositePayoff, CylinderFunction};
use gcalc_core::gheat::{
    extract_policy, g_expectation_pde, semigroup_compose, solve_g_heat, SpaceGrid,
};
use gcalc_core::gsde::{g_expectation_geometric_mc, g_ito_residual, GeometricSpec};
use gcalc_core::mc::{simulate_controlled_path, sup_over_controls, SimConfig};
use gcalc_core::types::{PayoffSpec, TimeGrid, VolatilityInterval};

fn theta(lo: f64, hi: f64) -> VolatilityInterval {
    VolatilityInterval::new(lo, hi).unwrap()
}

fn default_grids(th: &VolatilityInterval, horizon: f64) -> (TimeGrid, SpaceGrid) {
    let space = SpaceGrid::default_for(th, horizon).unwrap();
    let time = space.cfl_time_grid(th, horizon).unwrap();
    (time, space)
}

fn mc_config(n_paths: usize, n_steps: usize) -> SimConfig {
    SimConfig::new(n_paths, TimeGrid::new(1.0, n_steps).unwrap(), 42).unwrap()
}

#[test]
fn criterion_1_classical_limit() {
    // σ̲ = σ̄ = 1, call(0), T = 1: the G-heat equation collapses to the
    // classical heat equation and u(0,0) = E[W₁⁺] = 1/√(2π).
    let started = Instant::now();
    let th = theta(1.0, 1.0);
    let (time, space) = default_grids(&th, 1.0);
    let payoff = PayoffSpec::Call { strike: 0.0 };
    let value = g_expectation_pde(&payoff, &th, &time, &space).unwrap();
    let elapsed = started.elapsed();

    let oracle = gcalc_testkit::normal_expectation(|x| x.max(0.0), 1.0, &[0.0]);
    assert!(
        (oracle - 0.398942).abs() < 1e-6,
        "quadrature oracle off: {oracle}"
    );
    let err = (value - 0.398942).abs();
    assert!(err <= 5e-3, "pde value {value}, error {err}");
    assert!(elapsed.as_secs_f64() < 5.0, "runtime {elapsed:?} exceeds 5 s");
    println!(
        "criterion 1 (classical limit): PASS  value = {value:.6}, |err| = {err:.2e}, \
         runtime = {:.2} s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_2_quadratic_pair() {
    // σ̲ = 0.5, σ̄ = 1: Ê[B₁²] = 1 and Ê[−B₁²] = −0.25 by the closed-form
    // solutions u = x² + σ̄²τ and u = −x² − σ̲²τ, by PDE (±5e-3) and by the
    // Monte Carlo supremum over constant_grid(9) (within 3·SE at 1e5 paths).
    let th = theta(0.5, 1.0);
    let (time, space) = default_grids(&th, 1.0);
    let cfg = mc_config(100_000, 512);
    let family = ControlFamily::constant_grid(th, 9).unwrap();

    let pde_pos = g_expectation_pde(&PayoffSpec::Quadratic, &th, &time, &space).unwrap();
    let pde_neg = g_expectation_pde(&PayoffSpec::NegQuadratic, &th, &time, &space).unwrap();
    assert!((pde_pos - 1.0).abs() <= 5e-3, "pde Ê[B²] = {pde_pos}");
    assert!((pde_neg + 0.25).abs() <= 5e-3, "pde Ê[−B²] = {pde_neg}");

    let sup_pos = sup_over_controls(&PayoffSpec::Quadratic, &family, &cfg).unwrap();
    let sup_neg = sup_over_controls(&PayoffSpec::NegQuadratic, &family, &cfg).unwrap();
    assert!(
        (sup_pos.best.mean - 1.0).abs() <= 3.0 * sup_pos.best.std_error,
        "mc Ê[B²] = {} (se {})",
        sup_pos.best.mean,
        sup_pos.best.std_error
    );
    assert!(
        (sup_neg.best.mean + 0.25).abs() <= 3.0 * sup_neg.best.std_error,
        "mc Ê[−B²] = {} (se {})",
        sup_neg.best.mean,
        sup_neg.best.std_error
    );
    println!(
        "criterion 2 (quadratic pair): PASS  pde = ({pde_pos:.5}, {pde_neg:.5}), \
         mc = ({:.5}, {:.5})",
        sup_pos.best.mean, sup_neg.best.mean
    );
}

#[test]
fn criterion_3_geometric_g_brownian_motion() {
    // γ = 0.1: sup attained at σ̄ with value e^{0.1}; γ = −0.1: attained at
    // σ̲ with value e^{−0.025}; each within 3·SE, SE ≤ 1%, under 30 s.
    let started = Instant::now();
    let th = theta(0.5, 1.0);
    let cfg = mc_config(100_000, 512);
    let family = ControlFamily::constant_grid(th, 9).unwrap();

    let pos = GeometricSpec::new(0.2, 0.1, 1.0).unwrap();
    let sup = g_expectation_geometric_mc(&pos, &family, &cfg).unwrap();
    let analytic_pos = pos.analytic_g_expectation(&th, 1.0);
    assert!((analytic_pos - (0.1f64).exp()).abs() < 1e-12);
    assert!(
        (sup.best.mean - analytic_pos).abs() <= 3.0 * sup.best.std_error,
        "γ>0: mc {} vs analytic {analytic_pos} (se {})",
        sup.best.mean,
        sup.best.std_error
    );
    assert!(sup.best.std_error <= 0.01 * analytic_pos, "se too large: {}", sup.best.std_error);
    assert_eq!(sup.best_member, gcalc_core::mc::BestMember::Index(8), "expected σ̄ member");
    let mean_pos = sup.best.mean;

    let neg = GeometricSpec::new(0.2, -0.1, 1.0).unwrap();
    let sup = g_expectation_geometric_mc(&neg, &family, &cfg).unwrap();
    let analytic_neg = neg.analytic_g_expectation(&th, 1.0);
    assert!((analytic_neg - (-0.025f64).exp()).abs() < 1e-12);
    assert!(
        (sup.best.mean - analytic_neg).abs() <= 3.0 * sup.best.std_error,
        "γ<0: mc {} vs analytic {analytic_neg} (se {})",
        sup.best.mean,
        sup.best.std_error
    );
    assert!(sup.best.std_error <= 0.01 * analytic_neg, "se too large: {}", sup.best.std_error);
    assert_eq!(sup.best_member, gcalc_core::mc::BestMember::Index(0), "expected σ̲ member");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?} exceeds 30 s");
    println!(
        "criterion 3 (geometric G-BM): PASS  e^0.1: {mean_pos:.5} vs {analytic_pos:.5}; \
         e^-0.025: {:.5} vs {analytic_neg:.5}; runtime = {:.1} s",
        sup.best.mean,
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_4_genuine_nonlinearity() {
    // Butterfly, σ̲ = 0.3, σ̄ = 1: no constant volatility explains the
    // G-expectation (gap > 5·SE), while the bang-bang feedback policy
    // reaches it (within 3·SE + 1e-2). No closed form exists for this
    // case, so the criterion is self-consistency between the two routes.
    let th = theta(0.3, 1.0);
    let (time, space) = default_grids(&th, 1.0);
    let payoff = PayoffSpec::Butterfly { strike: 0.0, width: 1.0 };
    let cfg = mc_config(100_000, 512);

    let pde = g_expectation_pde(&payoff, &th, &time, &space).unwrap();

    let constants = ControlFamily::constant_grid(th, 9).unwrap();
    let sup_const = sup_over_controls(&payoff, &constants, &cfg).unwrap();
    let margin = pde - sup_const.best.mean;
    assert!(
        margin > 5.0 * sup_const.best.std_error,
        "pde {pde} vs best constant {} (se {})",
        sup_const.best.mean,
        sup_const.best.std_error
    );

    let value_grid = solve_g_heat(&payoff, &th, &time, &space).unwrap();
    let feedback = ControlFamily::Feedback(extract_policy(&value_grid, &th));
    let sup_fb = sup_over_controls(&payoff, &feedback, &cfg).unwrap();
    let gap = (sup_fb.best.mean - pde).abs();
    assert!(
        gap <= 3.0 * sup_fb.best.std_error + 1e-2,
        "feedback {} vs pde {pde} (se {})",
        sup_fb.best.mean,
        sup_fb.best.std_error
    );
    println!(
        "criterion 4 (genuine nonlinearity): PASS  pde = {pde:.5}, best constant = {:.5} \
         ({:.1}·SE below), feedback = {:.5} (|gap| = {gap:.2e})",
        sup_const.best.mean,
        margin / sup_const.best.std_error,
        sup_fb.best.mean
    );
}

#[test]
fn criterion_5_qv_bounds() {
    // Zero violations of σ̲²t ≤ ⟨B⟩_t ≤ σ̄²t over 10⁴ lifts from mixed
    // families, at every node. The bounds accumulate with the same
    // summation as the lift, so the comparison is exact in floating point.
    let th = theta(0.5, 1.0);
    let cfg = mc_config(10_000, 128);
    let grid = *cfg.grid();

    let mut families: Vec<(ControlFamily, usize, usize)> = Vec::new(); // (family, member, n_lifts)
    let constants = ControlFamily::constant_grid(th, 5).unwrap();
    for m in 0..5 {
        families.push((constants.clone(), m, 1500));
    }
    let zigzag: Vec<f64> = (0..grid.n_steps())
        .map(|k| if k % 3 == 0 { th.sigma_low() } else { th.sigma_high() })
        .collect();
    families.push((
        ControlFamily::Fixed(ControlPath::new(grid, zigzag, &th).unwrap()),
        0,
        1250,
    ));
    let (time, space) = default_grids(&th, 1.0);
    let vg = solve_g_heat(&PayoffSpec::Butterfly { strike: 0.0, width: 1.0 }, &th, &time, &space)
        .unwrap();
    families.push((ControlFamily::Feedback(extract_policy(&vg, &th)), 0, 1250));

    let dt = grid.dt();
    let lo_step = th.sigma_low() * th.sigma_low() * dt;
    let hi_step = th.sigma_high() * th.sigma_high() * dt;
    let mut total = 0usize;
    let mut violations = 0usize;
    for (family, member, n_lifts) in &families {
        for p in 0..*n_lifts as u64 {
            let lift = simulate_controlled_path(family, *member, &cfg, p).unwrap();
            total += 1;
            let (mut lo, mut hi) = (0.0f64, 0.0f64);
            for k in 1..=grid.n_steps() {
                lo += lo_step;
                hi += hi_step;
                if !(lo <= lift.qv()[k] && lift.qv()[k] <= hi) {
                    violations += 1;
                }
            }
        }
    }
    assert!(total >= 10_000, "only {total} lifts simulated");
    assert_eq!(violations, 0);
    println!("criterion 5 (QV bounds): PASS  {total} lifts, 0 violations");
}

#[test]
fn criterion_6_dpp_semigroup() {
    // Composing the solve at a split point agrees with the direct solve
    // within 1e-2, for quadratic and butterfly payoffs at three splits.
    let th = theta(0.5, 1.0);
    let space = SpaceGrid::default_for(&th, 1.0).unwrap();
    // Steps rounded up to a multiple of 4 so 0.25/0.5/0.75 are grid nodes.
    let time = TimeGrid::new(1.0, space.min_cfl_steps(&th, 1.0).div_ceil(4) * 4).unwrap();

    let mut worst: f64 = 0.0;
    for payoff in [
        PayoffSpec::Quadratic,
        PayoffSpec::Butterfly { strike: 0.0, width: 1.0 },
    ] {
        let direct = g_expectation_pde(&payoff, &th, &time, &space).unwrap();
        for split in [0.25, 0.5, 0.75] {
            let composed = semigroup_compose(&payoff, &th, split, &time, &space).unwrap();
            let gap = (composed - direct).abs();
            assert!(gap <= 1e-2, "{payoff} split {split}: composed {composed} vs {direct}");
            worst = worst.max(gap);
        }
    }
    println!("criterion 6 (DPP/semigroup): PASS  worst |gap| = {worst:.2e}");
}

#[test]
fn criterion_7_tower_property() {
    // tower gap ≤ 2e-2 for the n = 2 sum-of-quadratics and
    // product-of-identities cylinder functions.
    let th = theta(0.5, 1.0);
    let space = SpaceGrid::new(6.0, 201).unwrap();
    let cases = [
        CompositePayoff::Sum(vec![PayoffSpec::Quadratic, PayoffSpec::Quadratic]),
        CompositePayoff::Product(vec![PayoffSpec::Identity, PayoffSpec::Identity]),
    ];
    let mut gaps = Vec::new();
    for phi in cases {
        let c = CylinderFunction::new(vec![0.5, 1.0], phi).unwrap();
        let (direct, composed) = tower_check(&c, 0.5, &th, &space).unwrap();
        let gap = (direct - composed).abs();
        assert!(gap <= 2e-2, "tower gap {gap} (direct {direct}, composed {composed})");
        gaps.push(gap);
    }
    println!(
        "criterion 7 (tower property): PASS  gaps = {:.2e}, {:.2e}",
        gaps[0], gaps[1]
    );
}

#[test]
fn criterion_8_g_ito_order() {
    // RMS of the discrete G-Itô residual over 10³ paths at n_steps in
    // {128, 512, 2048} follows Δt^{1/2}: slope −0.5 ± 0.15 against
    // n_steps on the log-log scale (equivalently +0.5 against Δt).
    let th = theta(0.5, 1.0);
    let family = ControlFamily::constant_grid(th, 2).unwrap();
    let mut log_steps = Vec::new();
    let mut log_rms = Vec::new();
    for n_steps in [128usize, 512, 2048] {
        let cfg = mc_config(1000, n_steps);
        let mut acc = 0.0;
        for p in 0..cfg.n_paths() as u64 {
            let lift = simulate_controlled_path(&family, 1, &cfg, p).unwrap();
            let r = g_ito_residual(&PayoffSpec::Quadratic, &lift).unwrap();
            acc += r * r;
        }
        log_steps.push((n_steps as f64).ln());
        log_rms.push((acc / cfg.n_paths() as f64).sqrt().ln());
    }
    let slope = gcalc_testkit::regression_slope(&log_steps, &log_rms);
    assert!((slope + 0.5).abs() <= 0.15, "slope = {slope}");
    println!("criterion 8 (G-Itô order): PASS  log-log slope vs n_steps = {slope:.3}");
}

#[test]
fn criterion_9_cli_determinism() {
    // Identical flags with --threads in {1, 4, 8} produce byte-identical
    // JSON once the timestamp is suppressed.
    let bin = env!("CARGO_BIN_EXE_gcalc");
    let commands: [&[&str]; 2] = [
        &[
            "gexp", "--payoff", "butterfly:K=0,w=1", "--sigma-low", "0.3", "--sigma-high", "1",
            "--T", "1", "--method", "both", "--family", "constant:5", "--paths", "4000",
            "--steps", "64", "--points", "201", "--no-timestamp",
        ],
        &[
            "gsde", "geometric", "--gamma", "0.1", "--sigma", "0.2", "--sigma-low", "0.5",
            "--sigma-high", "1", "--T", "1", "--paths", "4000", "--steps", "64",
            "--no-timestamp",
        ],
    ];
    for args in commands {
        let mut outputs = Vec::new();
        for threads in ["1", "4", "8"] {
            let out = Command::new(bin)
                .args(args)
                .args(["--threads", threads])
                .output()
                .expect("failed to launch gcalc");
            assert!(
                out.status.success(),
                "command failed: {:?}\n{}",
                args,
                String::from_utf8_lossy(&out.stderr)
            );
            outputs.push(out.stdout);
        }
        assert_eq!(outputs[0], outputs[1], "threads 1 vs 4 differ for {args:?}");
        assert_eq!(outputs[1], outputs[2], "threads 4 vs 8 differ for {args:?}");
    }
    println!("criterion 9 (determinism): PASS  byte-identical JSON across --threads 1/4/8");
}
