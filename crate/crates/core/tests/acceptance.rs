//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `cargo test --test acceptance -- --nocapture` to see
//! them all).

use std::time::Instant;

use ndarray::Array1;
use sdpi::bounds::certify;
use sdpi::channel::{make_bec, make_bsc_with_input, make_dsbs, push_forward, JointSpec, Pmf};
use sdpi::contraction::{estimate_eta_f, local_limit_probe, OptimizerConfig};
use sdpi::divergence::{
    check_pinsker_condition, f_divergence, kl_condition_h, FGenerator, GridSpec,
};
use sdpi::sampling;
use sdpi::spectral::analyze;
use sdpi::verify;

fn report(criterion: &str, pass: bool, elapsed_s: f64, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} ({elapsed_s:.2}s) {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Criterion 1: DSBS equality eta_kl = eta_chi2 = (1-2a)^2.
#[test]
fn criterion_1_dsbs_equality() {
    let start = Instant::now();
    let kl = FGenerator::kl();
    let cfg = OptimizerConfig::light(1);
    let mut ok = true;
    let mut worst = 0.0_f64;
    for i in 0..=10 {
        let alpha = 0.05 * i as f64;
        let expect = (1.0 - 2.0 * alpha) * (1.0 - 2.0 * alpha);
        let spec = make_dsbs(alpha).unwrap();
        let eta = analyze(&spec).eta_chi2;
        ok &= (eta - expect).abs() <= 1e-10;
        let est = estimate_eta_f(&kl, &spec, &cfg).unwrap().value;
        ok &= est >= expect - 1e-4 && est <= expect + 1e-6;
        worst = worst.max((est - expect).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < 10.0;
    report(
        "1 (DSBS equality)",
        ok && within_budget,
        elapsed,
        &format!("worst |eta_kl_est - (1-2a)^2| = {worst:.2e}"),
    );
    assert!(ok, "value tolerances violated");
    assert!(within_budget, "runtime {elapsed:.1}s over 10s budget");
}

/// Criterion 2: BEC equality eta = 1 - beta for any Bernoulli input.
#[test]
fn criterion_2_bec_equality() {
    let start = Instant::now();
    let kl = FGenerator::kl();
    let cfg = OptimizerConfig::light(2);
    let mut ok = true;
    let mut worst = 0.0_f64;
    for bi in 1..=9 {
        let beta = 0.1 * bi as f64;
        for qi in 1..=9 {
            let q = 0.1 * qi as f64;
            let spec = make_bec(beta, q).unwrap();
            let eta = analyze(&spec).eta_chi2;
            ok &= (eta - (1.0 - beta)).abs() <= 1e-10;
            let est = estimate_eta_f(&kl, &spec, &cfg).unwrap().value;
            ok &= (est - (1.0 - beta)).abs() <= 1e-4;
            worst = worst.max((est - (1.0 - beta)).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < 30.0;
    report(
        "2 (BEC equality)",
        ok && within_budget,
        elapsed,
        &format!("worst |eta_kl_est - (1-beta)| = {worst:.2e}"),
    );
    assert!(ok, "value tolerances violated");
    assert!(within_budget, "runtime {elapsed:.1}s over 30s budget");
}

/// Criterion 3: 19x19 BSC sweep; sandwich ordering on every row and the
/// plain bound equal to eta_chi2 / min(q, 1-q).
#[test]
fn criterion_3_figure_sweep_ordering() {
    let start = Instant::now();
    let kl = FGenerator::kl();
    let cfg = OptimizerConfig::light(3);
    let mut ok = true;
    let mut rows = 0;
    for pi in 0..19 {
        let p = 0.05 + 0.05 * pi as f64;
        for qi in 0..19 {
            let q = 0.05 + 0.05 * qi as f64;
            let spec = make_bsc_with_input(p, q).unwrap();
            let report = certify(&kl, &spec, &cfg).unwrap();
            let (eta, est) = (report.eta_chi2, report.eta_f_estimate);
            let (t3, t2) = (report.thm3.raw, report.thm2.raw);
            ok &= eta <= est + 1e-6;
            ok &= est <= t3 + 1e-9;
            ok &= t3 <= t2 + 1e-9;
            ok &= (t2 - eta / q.min(1.0 - q)).abs() <= 1e-12;
            rows += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < 300.0;
    report(
        "3 (Figure-1 sweep ordering)",
        ok && within_budget,
        elapsed,
        &format!("{rows} rows"),
    );
    assert!(ok, "sandwich ordering violated");
    assert!(within_budget, "runtime {elapsed:.1}s over 300s budget");
}

/// Criterion 4: tau(delta) is non-increasing and converges to eta_chi2.
#[test]
fn criterion_4_local_limit_convergence() {
    let start = Instant::now();
    let deltas = [1e-2, 1e-4, 1e-6, 1e-8];
    let kl = FGenerator::kl();
    let ts = FGenerator::tsallis(1.5).unwrap();
    let cfg = OptimizerConfig::light(4);
    let mut ok = true;
    let mut worst_gap = 0.0_f64;
    for i in 0..10 {
        let mut rng = sampling::stream_rng(4, 50 + i);
        let spec = sampling::random_spec(&mut rng, 3, 3, 0.05);
        for f in [&kl, &ts] {
            let probe = local_limit_probe(f, &spec, &deltas, &cfg).unwrap();
            ok &= probe.max_monotonicity_violation <= 1e-6;
            ok &= probe.final_gap <= 1e-3;
            worst_gap = worst_gap.max(probe.final_gap);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < 120.0;
    report(
        "4 (local-limit convergence)",
        ok && within_budget,
        elapsed,
        &format!("worst final gap = {worst_gap:.2e}"),
    );
    assert!(ok, "tau ladder violated tolerances");
    assert!(within_budget, "runtime {elapsed:.1}s over 120s budget");
}

/// Criterion 5: 1e4 Dirichlet pairs per dimension, zero violations of the
/// divergence inequalities at slack 1e-9.
#[test]
fn criterion_5_inequality_suite() {
    let start = Instant::now();
    let suite = sdpi::bounds::inequality_suite(10_000, 5, &[2, 3, 5, 8]).unwrap();
    let violations: usize = suite.checks.iter().map(|c| c.violations).sum();
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < 60.0;
    report(
        "5 (inequality suite)",
        suite.pass && within_budget,
        elapsed,
        &format!(
            "{violations} violations across {} checks",
            suite.checks.len()
        ),
    );
    assert!(suite.pass, "{suite:#?}");
    assert!(within_budget, "runtime {elapsed:.1}s over 60s budget");
}

/// Criterion 6: h(t) grid minimum at t = 1, and the product condition for
/// kl and Tsallis generators.
#[test]
fn criterion_6_condition_grids() {
    let start = Instant::now();
    let grid = GridSpec::default();
    let mut ok = true;

    let rep = check_pinsker_condition(&FGenerator::kl(), grid).unwrap();
    let h = rep.kl_h.as_ref().unwrap();
    ok &= h.min >= -1e-9;
    let step = (grid.max_t.ln() - grid.min_t.ln()) / (grid.points - 1) as f64;
    ok &= h.argmin_t.ln().abs() <= step; // nearest grid point to t = 1
    ok &= kl_condition_h(1.0).abs() <= 1e-12;
    ok &= rep.min_margin >= -1e-9;

    for alpha in [0.5, 1.5, 2.0] {
        let f = FGenerator::tsallis(alpha).unwrap();
        ok &= check_pinsker_condition(&f, grid).unwrap().min_margin >= -1e-9;
    }

    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < 5.0;
    report(
        "6 (condition grids)",
        ok && within_budget,
        elapsed,
        &format!("h min = {:.2e} at t = {:.4}", h.min, h.argmin_t),
    );
    assert!(ok, "condition grid checks failed");
    assert!(within_budget, "runtime {elapsed:.1}s over 5s budget");
}

/// Criterion 7: eta_chi2 tensorizes exactly across 2- and 3-fold products;
/// naive vs single-letter constants reported.
#[test]
fn criterion_7_tensorization() {
    let start = Instant::now();
    let mut ok = true;
    let mut worst = 0.0_f64;
    for i in 0..20 {
        let mut rng = sampling::stream_rng(7, i);
        let dim = if i % 2 == 0 { 2 } else { 3 };
        let spec = sampling::random_spec(&mut rng, dim, dim, 0.02);
        let eta = analyze(&spec).eta_chi2;
        for n in [2usize, 3] {
            let prod = spec.tensor_power(n, 4096).unwrap();
            let gap = (analyze(&prod).eta_chi2 - eta).abs();
            ok &= gap <= 1e-9;
            worst = worst.max(gap);
            // looseness contrast is strict for non-uniform p_star < 1/2
            let ps = spec.input().min_mass();
            ok &= 1.0 / ps.powi(n as i32) >= 1.0 / ps;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < 30.0;
    report(
        "7 (tensorization)",
        ok && within_budget,
        elapsed,
        &format!("worst product gap = {worst:.2e}"),
    );
    assert!(ok, "tensorization violated");
    assert!(within_budget, "runtime {elapsed:.1}s over 30s budget");
}

/// Criterion 8: binary-input exhaustive oracle; the estimator matches a
/// 1e5-point grid maximum of the ratio.
#[test]
fn criterion_8_binary_oracle() {
    let start = Instant::now();
    let kl = FGenerator::kl();
    let cfg = OptimizerConfig {
        restarts: 24,
        max_iters: 200,
        ..OptimizerConfig::light(8)
    };
    let mut ok = true;
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let mut rng = sampling::stream_rng(8, 100 + i);
        let ny = 2 + (i % 2) as usize;
        let spec = sampling::random_spec(&mut rng, 2, ny, 0.02);
        let est = estimate_eta_f(&kl, &spec, &cfg).unwrap().value;
        let mut grid_max = 0.0_f64;
        let points = 100_000;
        for k in 1..=points {
            let r1 = k as f64 / (points + 1) as f64;
            let r = Pmf::new(vec![1.0 - r1, r1]).unwrap();
            let d_in = f_divergence(&kl, &r, spec.input()).unwrap().value();
            if !(d_in > 0.0) {
                continue;
            }
            let wr = push_forward(spec.channel(), &r).unwrap();
            let d_out = f_divergence(&kl, &wr, spec.output()).unwrap().value();
            grid_max = grid_max.max(d_out / d_in);
        }
        let gap = (est - grid_max).abs();
        ok &= gap <= 1e-5;
        worst = worst.max(gap);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < 120.0;
    report(
        "8 (binary exhaustive oracle)",
        ok && within_budget,
        elapsed,
        &format!("worst |estimate - grid max| = {worst:.2e}"),
    );
    assert!(ok, "estimator missed the grid maximum");
    assert!(within_budget, "runtime {elapsed:.1}s over 120s budget");
}

/// Criterion 9: DTM spectral facts plus sub-multiplicativity and
/// monotonicity of eta_chi2 on random chains.
#[test]
fn criterion_9_spectral_properties() {
    let start = Instant::now();
    let mut ok = true;
    for i in 0..100 {
        let mut rng = sampling::stream_rng(9, i);
        let nx = 2 + (i % 4) as usize;
        let ny = 2 + ((i / 4) % 4) as usize;
        let spec = sampling::random_spec(&mut rng, nx, ny, 1e-4);
        let res = analyze(&spec);
        ok &= (res.singular_values[0] - 1.0).abs() <= 1e-9;
        let b = spec.dtm();
        let sx = Array1::from_vec(spec.input().sqrt_masses());
        let bx = b.dot(&sx);
        let res_right: f64 = bx
            .iter()
            .zip(spec.output().sqrt_masses())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let bty = b.t().dot(&Array1::from_vec(spec.output().sqrt_masses()));
        let res_left: f64 = bty
            .iter()
            .zip(spec.input().sqrt_masses())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        ok &= res_right <= 1e-8 && res_left <= 1e-8;
    }
    for i in 0..100 {
        let mut rng = sampling::stream_rng(9, 1000 + i);
        let nu = 2 + (i % 3) as usize;
        let nx = 2 + ((i / 3) % 3) as usize;
        let ny = 2 + ((i / 9) % 3) as usize;
        let p_u = sampling::interior_pmf(&mut rng, nu, 1e-4);
        let s = sampling::random_channel(&mut rng, nx, nu);
        let w = sampling::random_channel(&mut rng, ny, nx);
        let first = JointSpec::new(p_u.clone(), s.clone()).unwrap();
        let second = JointSpec::new(first.output().clone(), w.clone()).unwrap();
        let chain = JointSpec::new(p_u.clone(), w.compose(&s).unwrap()).unwrap();
        let (e1, e2, ec) = (
            analyze(&first).eta_chi2,
            analyze(&second).eta_chi2,
            analyze(&chain).eta_chi2,
        );
        ok &= ec <= e1 * e2 + 1e-9;
        let t = sampling::random_channel(&mut rng, ny, ny);
        let post = JointSpec::new(p_u, t.compose(&w.compose(&s).unwrap()).unwrap()).unwrap();
        ok &= analyze(&post).eta_chi2 <= e2 + 1e-9;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < 60.0;
    report("9 (spectral properties)", ok && within_budget, elapsed, "");
    assert!(ok, "spectral property checks failed");
    assert!(within_budget, "runtime {elapsed:.1}s over 60s budget");
}

/// The verify suites behind the CLI must also pass at a realistic budget.
#[test]
fn verify_suites_all_pass() {
    let start = Instant::now();
    let mut ok = true;
    ok &= verify::run_inequalities(2_000, 11, &[2, 3, 5, 8])
        .unwrap()
        .pass;
    ok &= verify::run_properties(60, 11).unwrap().pass;
    ok &= verify::run_tensorization(11, 20).unwrap().pass;
    ok &= verify::run_appendix_c(11).unwrap().pass;
    ok &= verify::run_local_limit(11, 3).unwrap().pass;
    let elapsed = start.elapsed().as_secs_f64();
    report("(verify suites)", ok, elapsed, "");
    assert!(ok);
}
