//! Batch verification suites behind `sdpi verify`.
//!
//! Each runner samples seeded random instances, records worst margins into
//! a [`SuiteReport`], and passes only with zero violations. Slack is
//! -1e-9 for closed-form inequalities and 1e-6 where an optimizer estimate
//! sits on one side of the comparison.

use crate::bounds::{self, InequalityStat, SuiteReport};
use crate::channel::JointSpec;
use crate::contraction::{estimate_eta_f, local_limit_probe, OptimizerConfig};
use crate::divergence::{check_pinsker_condition, kl_condition_h, FGenerator, GridSpec};
use crate::sampling;
use crate::spectral::analyze;
use crate::Result;

/// Pointwise divergence inequalities on Dirichlet pairs.
pub fn run_inequalities(samples: usize, seed: u64, dims: &[usize]) -> Result<SuiteReport> {
    bounds::inequality_suite(samples, seed, dims)
}

/// Sampled checks of the structural properties of `eta_chi2` and the
/// maximal-correlation lower bound on `eta_f`.
pub fn run_properties(samples: usize, seed: u64) -> Result<SuiteReport> {
    let mut normalization = InequalityStat::new("normalization_0_le_eta_le_1");
    let mut independence_zero = InequalityStat::new("independence_rank_one_eta_zero");
    let mut independence_pos = InequalityStat::new("independence_distinct_columns_eta_positive");
    let mut tensorization = InequalityStat::new("tensorization_product_matches_max");
    let mut submult = InequalityStat::new("sub_multiplicativity");
    let mut monotone = InequalityStat::new("monotonicity_pre_post_processing");
    let mut mc_kl = InequalityStat::new("maximal_correlation_bound_kl");
    let mut mc_ts = InequalityStat::new("maximal_correlation_bound_tsallis_1.5");

    let kl = FGenerator::kl();
    let ts = FGenerator::tsallis(1.5)?;
    let estimates = samples.min(100);

    for i in 0..samples {
        let mut rng = sampling::stream_rng(seed, i as u64);
        let dims = [2usize, 3, 4, 5];
        let nx = dims[i % 4];
        let ny = dims[(i / 4) % 4];
        let spec = sampling::random_spec(&mut rng, nx, ny, 1e-4);
        let eta = analyze(&spec).eta_chi2;
        normalization.record(eta.min(1.0 - eta));

        // tensorization: i.i.d. pair and a heterogeneous pair
        let prod = spec.tensor(&spec)?;
        tensorization.record(1e-9 - (analyze(&prod).eta_chi2 - eta).abs());
        let other = sampling::random_spec(&mut rng, nx, ny, 1e-4);
        let eta_other = analyze(&other).eta_chi2;
        let hetero = spec.tensor(&other)?;
        tensorization.record(1e-9 - (analyze(&hetero).eta_chi2 - eta.max(eta_other)).abs());

        // chains U -> X -> Y for sub-multiplicativity and monotonicity
        let p_u = sampling::interior_pmf(&mut rng, nx, 1e-4);
        let s = sampling::random_channel(&mut rng, nx, nx);
        let w = sampling::random_channel(&mut rng, ny, nx);
        let first = JointSpec::new(p_u.clone(), s.clone())?;
        let p_x = first.output().clone();
        let second = JointSpec::new(p_x.clone(), w.clone())?;
        let chain = JointSpec::new(p_u.clone(), w.compose(&s)?)?;
        let (e_first, e_second, e_chain) = (
            analyze(&first).eta_chi2,
            analyze(&second).eta_chi2,
            analyze(&chain).eta_chi2,
        );
        submult.record(e_first * e_second - e_chain + 1e-9);

        let t = sampling::random_channel(&mut rng, ny, ny);
        let post = JointSpec::new(p_u.clone(), t.compose(&w.compose(&s)?)?)?;
        monotone.record(e_second - analyze(&post).eta_chi2 + 1e-9);
    }

    // independence, both directions, on constructed cases
    for i in 0..samples.min(200) {
        let mut rng = sampling::stream_rng(seed, 1_000_000 + i as u64);
        let p = sampling::interior_pmf(&mut rng, 3, 1e-3);
        let row = sampling::dirichlet_pmf(&mut rng, 3);
        let w = crate::channel::Channel::from_rows(&[
            vec![row.get(0); 3],
            vec![row.get(1); 3],
            vec![row.get(2); 3],
        ])?;
        let spec = JointSpec::new(p.clone(), w)?;
        independence_zero.record(1e-9 - analyze(&spec).eta_chi2);

        let distinct = sampling::random_channel(&mut rng, 3, 3);
        let spec = JointSpec::new(p, distinct)?;
        // random dense columns are distinct almost surely: eta must be > 0
        independence_pos.record(analyze(&spec).eta_chi2 - 1e-12);
    }

    let cfg = OptimizerConfig::light(seed);
    for i in 0..estimates {
        let mut rng = sampling::stream_rng(seed, 2_000_000 + i as u64);
        let spec = sampling::random_spec(&mut rng, 3, 3, 0.02);
        let eta = analyze(&spec).eta_chi2;
        let est = estimate_eta_f(&kl, &spec, &cfg)?;
        mc_kl.record(est.value - eta + 1e-6);
        let est = estimate_eta_f(&ts, &spec, &cfg)?;
        mc_ts.record(est.value - eta + 1e-6);
    }

    Ok(SuiteReport::from_checks(
        "properties",
        seed,
        vec![
            normalization,
            independence_zero,
            independence_pos,
            tensorization,
            submult,
            monotone,
            mc_kl,
            mc_ts,
        ],
    ))
}

/// Vanishing-input-divergence probes on random interior 3x3 specs.
pub fn run_local_limit(seed: u64, specs: usize) -> Result<SuiteReport> {
    let deltas = [1e-2, 1e-4, 1e-6, 1e-8];
    let mut gap_kl = InequalityStat::new("local_limit_gap_kl");
    let mut gap_ts = InequalityStat::new("local_limit_gap_tsallis_1.5");
    let mut mono = InequalityStat::new("tau_non_increasing");
    let kl = FGenerator::kl();
    let ts = FGenerator::tsallis(1.5)?;
    let cfg = OptimizerConfig::light(seed);

    for i in 0..specs {
        let mut rng = sampling::stream_rng(seed, 3_000_000 + i as u64);
        let spec = sampling::random_spec(&mut rng, 3, 3, 0.05);
        for (f, gap_stat) in [(&kl, &mut gap_kl), (&ts, &mut gap_ts)] {
            let report = local_limit_probe(f, &spec, &deltas, &cfg)?;
            gap_stat.record(1e-3 - report.final_gap);
            mono.record(1e-6 - report.max_monotonicity_violation);
        }
    }
    Ok(SuiteReport::from_checks(
        "local_limit",
        seed,
        vec![gap_kl, gap_ts, mono],
    ))
}

/// Tensorization of `eta_chi2` on random binary/ternary specs, with the
/// naive-vs-corollary constant contrast.
pub fn run_tensorization(seed: u64, specs: usize) -> Result<SuiteReport> {
    let mut match2 = InequalityStat::new("eta_chi2_2fold_match");
    let mut match3 = InequalityStat::new("eta_chi2_3fold_match");
    let mut loose = InequalityStat::new("naive_constant_at_least_corollary");

    for i in 0..specs {
        let mut rng = sampling::stream_rng(seed, 4_000_000 + i as u64);
        let dim = if i % 2 == 0 { 2 } else { 3 };
        let spec = sampling::random_spec(&mut rng, dim, dim, 0.02);
        let eta = analyze(&spec).eta_chi2;
        let e2 = analyze(&spec.tensor_power(2, 4096)?).eta_chi2;
        let e3 = analyze(&spec.tensor_power(3, 4096)?).eta_chi2;
        match2.record(1e-9 - (e2 - eta).abs());
        match3.record(1e-9 - (e3 - eta).abs());
        let ps = spec.input().min_mass();
        for n in [2, 3] {
            loose.record(1.0 / ps.powi(n) - 1.0 / ps);
        }
    }
    Ok(SuiteReport::from_checks(
        "tensorization",
        seed,
        vec![match2, match3, loose],
    ))
}

/// Grid verification of `h(t) >= 0` and of the product condition for the
/// generators the linear bounds rely on.
pub fn run_appendix_c(seed: u64) -> Result<SuiteReport> {
    let grid = GridSpec::default();
    let mut h_min = InequalityStat::new("h_grid_min_nonnegative");
    let mut h_at_one = InequalityStat::new("h_vanishes_at_one");
    let mut h_argmin = InequalityStat::new("h_argmin_nearest_one");
    let mut condition = InequalityStat::new("product_condition_margins");

    let report = check_pinsker_condition(&FGenerator::kl(), grid)?;
    let h = report.kl_h.as_ref().expect("kl carries the h report");
    h_min.record(h.min + 1e-9);
    h_at_one.record(1e-12 - kl_condition_h(1.0).abs());
    // log-spacing of the default grid; the argmin must be the point nearest 1
    let step = (grid.max_t.ln() - grid.min_t.ln()) / (grid.points - 1) as f64;
    h_argmin.record(step - h.argmin_t.ln().abs());
    condition.record(report.min_margin + 1e-9);

    for alpha in [0.5, 1.5, 2.0] {
        let f = FGenerator::tsallis(alpha)?;
        let r = check_pinsker_condition(&f, grid)?;
        condition.record(r.min_margin + 1e-9);
    }
    Ok(SuiteReport::from_checks(
        "appendix_c",
        seed,
        vec![h_min, h_at_one, h_argmin, condition],
    ))
}
