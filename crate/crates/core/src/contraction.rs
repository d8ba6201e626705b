//! Numerical estimation of contraction coefficients.
//!
//! `eta_f(P, W)` is the supremum of `D_f(WR || WP) / D_f(R || P)` over
//! pmfs `R != P` with finite input divergence. The problem is not concave,
//! so no global certificate is possible; everything reported here is an
//! *achieved* ratio at a concrete argmax, hence a sound lower bound.
//!
//! [`estimate_eta_f`] runs a quasi-Newton multistart over softmax
//! coordinates anchored at the input pmf (iterates stay strictly
//! interior). The restart pool mixes the spectral principal direction at a
//! few scales, near-vertex mixtures, and Dirichlet draws; ratios along the
//! principal ray at tiny input divergence are always included as
//! candidates, which realizes the maximal-correlation lower bound.
//!
//! [`estimate_tau`] solves the same problem restricted to
//! `D_f(R || P) <= delta` by searching over unit spherical directions with
//! a per-direction radius bisection: along a fixed ray the input
//! divergence is increasing in the step size, so the feasible segment is
//! exactly `[0, eps(delta)]`, which the search then scans and refines.
//! [`local_limit_probe`] drives `delta` down a given ladder and checks
//! convergence of `tau(delta)` to `eta_chi2`.
//!
//! Iterates with input divergence below a trust floor (1e-11 for the
//! built-in generators, 1e-5 for custom ones) are rejected: below that
//! scale the ratio's floating-point error would compete with the
//! tolerances being certified.

use serde::{Deserialize, Serialize};

use crate::channel::{push_forward, JointSpec, Perturbation, Pmf};
use crate::divergence::{f_divergence, FGenerator};
use crate::sampling;
use crate::spectral::analyze;
use crate::{Error, Result};

/// Multistart optimizer settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Number of restarts (deterministic seeds first, Dirichlet fill after).
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iters: usize,
    /// Stop when the step norm falls below this.
    pub step_tolerance: f64,
    /// Stop when the ratio improvement falls below this.
    pub ratio_tolerance: f64,
    /// Base seed; restart i uses stream i of this seed.
    pub seed: u64,
    /// Seed restarts along the principal chi-squared direction.
    pub include_chi2_seed: bool,
    /// Seed restarts at near-vertex mixtures of the input pmf.
    pub include_vertex_seeds: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iters: 500,
            step_tolerance: 1e-10,
            ratio_tolerance: 1e-9,
            seed: 0,
            include_chi2_seed: true,
            include_vertex_seeds: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "restarts",
                value: 0.0,
            });
        }
        if self.max_iters == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "max_iters",
                value: 0.0,
            });
        }
        if !(self.step_tolerance > 0.0) {
            return Err(Error::ParameterOutOfRange {
                name: "step_tolerance",
                value: self.step_tolerance,
            });
        }
        if !(self.ratio_tolerance > 0.0) {
            return Err(Error::ParameterOutOfRange {
                name: "ratio_tolerance",
                value: self.ratio_tolerance,
            });
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// A cheaper budget for inner loops (probes, sweeps, property suites).
    pub fn light(seed: u64) -> Self {
        Self {
            restarts: 16,
            max_iters: 120,
            seed,
            ..Self::default()
        }
    }
}

/// A certified lower estimate of a contraction coefficient: the achieved
/// ratio at `argmax`.
#[derive(Clone, Debug, Serialize)]
pub struct EtaEstimate {
    /// `output_divergence / input_divergence`, reported raw.
    pub value: f64,
    /// The best input pmf found.
    pub argmax: Pmf,
    pub input_divergence: f64,
    pub output_divergence: f64,
    /// Set when the raw ratio exceeds 1 + 1e-9, which the data processing
    /// inequality forbids; it indicates a numerics bug, never clipped away.
    pub exceeds_dpi: bool,
    /// Best ratio found by each restart (NaN for infeasible restarts).
    pub diagnostics: Vec<f64>,
}

#[derive(Clone, Debug)]
struct RatioPoint {
    pmf: Pmf,
    d_in: f64,
    d_out: f64,
}

impl RatioPoint {
    fn ratio(&self) -> f64 {
        self.d_out / self.d_in
    }
}

/// Input divergences below this cannot be evaluated with enough relative
/// accuracy to honor the 1e-9 ratio tolerances.
fn divergence_floor(f: &FGenerator) -> f64 {
    if f.has_stable_path() {
        1e-11
    } else {
        1e-5
    }
}

fn eval_point(f: &FGenerator, spec: &JointSpec, r: &Pmf, floor: f64) -> Option<RatioPoint> {
    let d_in = f_divergence(f, r, spec.input()).ok()?.value();
    if !d_in.is_finite() || d_in < floor {
        return None;
    }
    let wr = push_forward(spec.channel(), r).ok()?;
    let d_out = f_divergence(f, &wr, spec.output()).ok()?.value();
    if !d_out.is_finite() || d_out < 0.0 {
        return None;
    }
    Some(RatioPoint {
        pmf: r.clone(),
        d_in,
        d_out,
    })
}

/// Ratios are compared with a relative tie window; among ties the smaller
/// input divergence wins (the more local certificate).
fn better_of(a: RatioPoint, b: RatioPoint) -> RatioPoint {
    let (ra, rb) = (a.ratio(), b.ratio());
    let tie = 1e-12 * ra.abs().max(rb.abs()).max(1.0);
    if ra > rb + tie {
        a
    } else if rb > ra + tie {
        b
    } else if a.d_in <= b.d_in {
        a
    } else {
        b
    }
}

fn merge(best: Option<RatioPoint>, cand: Option<RatioPoint>) -> Option<RatioPoint> {
    match (best, cand) {
        (Some(a), Some(b)) => Some(better_of(a, b)),
        (a, b) => a.or(b),
    }
}

// ---------------------------------------------------------------------------
// softmax coordinates
// ---------------------------------------------------------------------------

fn pmf_from_logits(p: &Pmf, theta: &[f64]) -> Pmf {
    let m = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = p
        .masses()
        .iter()
        .zip(theta)
        .map(|(&pi, &t)| pi * (t - m).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    Pmf::from_normalized(w)
}

fn logits_from_pmf(p: &Pmf, r: &Pmf) -> Vec<f64> {
    p.masses()
        .iter()
        .zip(r.masses())
        .map(|(&pi, &ri)| (ri / pi).ln())
        .collect()
}

// ---------------------------------------------------------------------------
// quasi-Newton ascent (BFGS with numerical central-difference gradients)
// ---------------------------------------------------------------------------

struct AscentResult {
    x: Vec<f64>,
}

fn numeric_gradient(obj: &mut impl FnMut(&[f64]) -> f64, x: &[f64], fx: f64) -> Vec<f64> {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut xp = x.to_vec();
    for i in 0..n {
        let h = 1e-6 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = obj(&xp);
        xp[i] = x[i] - h;
        let fm = obj(&xp);
        xp[i] = x[i];
        g[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * h)
        } else if fp.is_finite() {
            (fp - fx) / h
        } else if fm.is_finite() {
            (fx - fm) / h
        } else {
            0.0
        };
    }
    g
}

fn bfgs_maximize(
    obj: &mut impl FnMut(&[f64]) -> f64,
    x0: Vec<f64>,
    max_iters: usize,
    step_tol: f64,
    val_tol: f64,
) -> Option<AscentResult> {
    let n = x0.len();
    let mut x = x0;
    let mut fx = obj(&x);
    if !fx.is_finite() {
        return None;
    }
    let mut g = numeric_gradient(obj, &x, fx);
    // inverse Hessian approximation of -obj
    let mut h = vec![vec![0.0; n]; n];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _ in 0..max_iters {
        // ascent direction H * g
        let mut d: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| h[i][j] * g[j]).sum())
            .collect();
        let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if gd <= 0.0 {
            // reset to steepest ascent
            d = g.clone();
            for (i, row) in h.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if gd <= 1e-18 {
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let fc = obj(&cand);
            if fc.is_finite() && fc >= fx + 1e-4 * t * gd {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let step_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let improvement = f_new - fx;

        let g_new = numeric_gradient(obj, &x_new, f_new);
        // y for the minimization of -obj
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(old, new)| old - new).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s_norm = step_norm;
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-12 * s_norm * y_norm && sy > 0.0 {
            // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
            let r = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i][j] * y[j]).sum())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -r * (s[i] * hy[j] + hy[i] * s[j])
                        + r * r * yhy * s[i] * s[j]
                        + r * s[i] * s[j];
                }
            }
        }

        x = x_new;
        fx = f_new;
        g = g_new;

        if step_norm < step_tol * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()) {
            break;
        }
        if improvement < val_tol * fx.abs().max(1.0) {
            break;
        }
    }
    Some(AscentResult { x })
}

// ---------------------------------------------------------------------------
// eta_f estimation
// ---------------------------------------------------------------------------

fn seed_pool(spec: &JointSpec, cfg: &OptimizerConfig, principal_k: Option<&[f64]>) -> Vec<Pmf> {
    let p = spec.input();
    let n = p.len();
    let mut seeds = Vec::new();

    if cfg.include_chi2_seed {
        if let Some(k) = principal_k {
            if let Ok(base) = Perturbation::from_spherical(p, k, 0.0) {
                let eps_max = base.max_epsilon();
                for scale in [1e-3_f64, 1e-2, 1e-1] {
                    let eps = scale.min(0.9 * eps_max);
                    if eps > 0.0 {
                        if let Ok(r) =
                            Perturbation::from_spherical(p, k, eps).and_then(|pt| pt.apply())
                        {
                            seeds.push(r);
                        }
                    }
                }
            }
        }
    }
    if cfg.include_vertex_seeds {
        for i in 0..n {
            for w in [0.5, 0.9, 0.99] {
                let masses: Vec<f64> = (0..n)
                    .map(|j| (1.0 - w) * p.get(j) + if j == i { w } else { 0.0 })
                    .collect();
                seeds.push(Pmf::from_normalized(masses));
            }
        }
    }
    seeds.truncate(cfg.restarts);
    let mut idx = 0u64;
    while seeds.len() < cfg.restarts {
        let mut rng = sampling::stream_rng(cfg.seed, idx);
        seeds.push(sampling::dirichlet_pmf(&mut rng, n));
        idx += 1;
    }
    seeds
}

/// Perturbation step along `k` whose input divergence is
/// `min(target, divergence at the validity boundary)`, found by bisection.
/// The divergence is increasing in the step, so the result is feasible.
fn radius_for_target(
    f: &FGenerator,
    spec: &JointSpec,
    perturbation: &Perturbation,
    target: f64,
) -> Option<(f64, Pmf, f64)> {
    let p = spec.input();
    let eps_max = perturbation.max_epsilon();
    if !eps_max.is_finite() || eps_max <= 0.0 {
        return None;
    }
    let d_at = |eps: f64| -> Option<(Pmf, f64)> {
        let masses: Vec<f64> = p
            .masses()
            .iter()
            .zip(perturbation.additive())
            .map(|(&pi, &ji)| (pi + eps * ji).max(0.0))
            .collect();
        let sum: f64 = masses.iter().sum();
        let r = Pmf::from_normalized(masses.into_iter().map(|m| m / sum).collect());
        let d = f_divergence(f, &r, p).ok()?.value();
        d.is_finite().then_some((r, d))
    };

    let hi = eps_max * (1.0 - 1e-9);
    // an unevaluable endpoint (infinite divergence at the boundary) just
    // means the target is crossed before it: bisect
    if let Some((r_hi, d_hi)) = d_at(hi) {
        if d_hi <= target {
            return Some((hi, r_hi, d_hi));
        }
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match d_at(mid) {
            Some((_, d)) if d > target => hi = mid,
            Some(_) => lo = mid,
            None => hi = mid,
        }
    }
    // report the feasible endpoint
    let (r, d) = d_at(lo)?;
    if d > target || d <= 0.0 {
        return None;
    }
    Some((lo, r, d))
}

/// Direct ratio candidates along the principal direction at tiny input
/// divergences; these realize the chi-squared lower bound without relying
/// on the optimizer's path.
fn principal_ray_candidates(
    f: &FGenerator,
    spec: &JointSpec,
    principal_k: &[f64],
    floor: f64,
    targets: &[f64],
) -> Vec<RatioPoint> {
    let mut out = Vec::new();
    let Ok(base) = Perturbation::from_spherical(spec.input(), principal_k, 1.0) else {
        return out;
    };
    for &target in targets {
        if target < floor {
            continue;
        }
        if let Some((_, r, _)) = radius_for_target(f, spec, &base, target) {
            if let Some(pt) = eval_point(f, spec, &r, floor) {
                out.push(pt);
            }
        }
    }
    out
}

/// Multistart lower estimate of `eta_f(P_X, P_{Y|X})`.
///
/// The returned value is always an achieved ratio; with the chi-squared
/// seeds enabled it realizes `eta_chi2` up to optimizer tolerance whenever
/// the generator is twice differentiable at unity.
pub fn estimate_eta_f(
    f: &FGenerator,
    spec: &JointSpec,
    cfg: &OptimizerConfig,
) -> Result<EtaEstimate> {
    cfg.validate()?;
    if !spec.input().is_interior() {
        return Err(Error::NonInteriorInput);
    }
    if f.d2_at_one().is_none() && !f.is_total_variation() {
        return Err(Error::MissingData("f''(1) (or use a builtin)"));
    }

    let spectral = analyze(spec);
    let principal = spectral.principal_k.as_deref();
    let floor = divergence_floor(f);
    let p = spec.input().clone();

    let seeds = seed_pool(spec, cfg, principal);
    let mut best: Option<RatioPoint> = None;
    let mut diagnostics = Vec::with_capacity(seeds.len());

    for seed_pmf in &seeds {
        // the raw seed is itself a candidate
        let mut restart_best = eval_point(f, spec, seed_pmf, floor);

        let mut obj = |theta: &[f64]| -> f64 {
            let r = pmf_from_logits(&p, theta);
            match eval_point(f, spec, &r, floor) {
                Some(pt) if pt.d_out > 0.0 => (pt.d_out / pt.d_in).ln(),
                Some(_) => -1e300, // zero output divergence: ratio 0
                None => f64::NEG_INFINITY,
            }
        };
        let theta0 = logits_from_pmf(&p, seed_pmf);
        if let Some(result) = bfgs_maximize(
            &mut obj,
            theta0,
            cfg.max_iters,
            cfg.step_tolerance,
            cfg.ratio_tolerance,
        ) {
            let r = pmf_from_logits(&p, &result.x);
            restart_best = merge(restart_best, eval_point(f, spec, &r, floor));
        }
        diagnostics.push(restart_best.as_ref().map_or(f64::NAN, RatioPoint::ratio));
        best = merge(best, restart_best);
    }

    if let Some(k) = principal {
        if f.d2_at_one().is_some() {
            for pt in principal_ray_candidates(f, spec, k, floor, &[1e-9, 1e-11]) {
                best = merge(best, Some(pt));
            }
        }
    }

    let best = best.ok_or(Error::MissingData("no feasible ratio candidate"))?;
    Ok(finish(best, diagnostics))
}

fn finish(best: RatioPoint, diagnostics: Vec<f64>) -> EtaEstimate {
    let value = best.ratio();
    EtaEstimate {
        value,
        argmax: best.pmf,
        input_divergence: best.d_in,
        output_divergence: best.d_out,
        exceeds_dpi: value > 1.0 + 1e-9,
        diagnostics,
    }
}

// ---------------------------------------------------------------------------
// tau(delta): the input-divergence-capped supremum
// ---------------------------------------------------------------------------

fn project_direction(v: &[f64], sqrt_p: &[f64]) -> Option<Vec<f64>> {
    let dot: f64 = v.iter().zip(sqrt_p).map(|(a, b)| a * b).sum();
    let mut k: Vec<f64> = v.iter().zip(sqrt_p).map(|(a, b)| a - dot * b).collect();
    let norm = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return None;
    }
    for x in &mut k {
        *x /= norm;
    }
    Some(k)
}

/// Best achieved ratio along the feasible segment of one direction: ladder
/// scan from the bisected endpoint down to the trust floor, then a
/// golden-section refinement around the best rung.
fn best_on_ray(
    f: &FGenerator,
    spec: &JointSpec,
    k: &[f64],
    delta: f64,
    floor: f64,
    refine: bool,
) -> Option<RatioPoint> {
    let base = Perturbation::from_spherical(spec.input(), k, 1.0).ok()?;
    let (eps_end, r_end, _) = radius_for_target(f, spec, &base, delta)?;

    let eval_eps = |eps: f64| -> Option<RatioPoint> {
        let masses: Vec<f64> = spec
            .input()
            .masses()
            .iter()
            .zip(base.additive())
            .map(|(&pi, &ji)| (pi + eps * ji).max(0.0))
            .collect();
        let sum: f64 = masses.iter().sum();
        let r = Pmf::from_normalized(masses.into_iter().map(|m| m / sum).collect());
        let pt = eval_point(f, spec, &r, floor)?;
        (pt.d_in <= delta * (1.0 + 1e-12)).then_some(pt)
    };

    let mut best = eval_point(f, spec, &r_end, floor);
    let mut ladder: Vec<(f64, f64)> = Vec::new(); // (eps, ratio)
    if let Some(pt) = &best {
        ladder.push((eps_end, pt.ratio()));
    }
    let mut eps = eps_end;
    for _ in 0..60 {
        eps *= 0.5;
        match eval_eps(eps) {
            Some(pt) => {
                ladder.push((eps, pt.ratio()));
                best = merge(best, Some(pt));
            }
            None => break, // below the floor
        }
    }

    if refine && ladder.len() >= 2 {
        // golden-section polish in log-step space around the best rung
        let best_idx = ladder
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.1.partial_cmp(&b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        let hi = if best_idx == 0 {
            ladder[0].0
        } else {
            ladder[best_idx - 1].0
        };
        let lo = if best_idx + 1 < ladder.len() {
            ladder[best_idx + 1].0
        } else {
            ladder[best_idx].0 * 0.5
        };
        let (mut a, mut b) = (lo.ln(), hi.ln());
        let golden = 0.618_033_988_749_894_9_f64;
        let mut c = b - golden * (b - a);
        let mut d = a + golden * (b - a);
        let mut fc = eval_eps(c.exp()).map_or(f64::NEG_INFINITY, |p| p.ratio());
        let mut fd = eval_eps(d.exp()).map_or(f64::NEG_INFINITY, |p| p.ratio());
        for _ in 0..40 {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - golden * (b - a);
                fc = eval_eps(c.exp()).map_or(f64::NEG_INFINITY, |p| p.ratio());
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + golden * (b - a);
                fd = eval_eps(d.exp()).map_or(f64::NEG_INFINITY, |p| p.ratio());
            }
        }
        best = merge(best, eval_eps(0.5 * (a + b).exp()));
        best = merge(best, eval_eps(c.exp()));
        best = merge(best, eval_eps(d.exp()));
    }
    best
}

fn tau_impl(
    f: &FGenerator,
    spec: &JointSpec,
    delta: f64,
    cfg: &OptimizerConfig,
    carried: &[Pmf],
) -> Result<EtaEstimate> {
    cfg.validate()?;
    if !(delta > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "delta",
            value: delta,
        });
    }
    if !spec.input().is_interior() {
        return Err(Error::NonInteriorInput);
    }

    let spectral = analyze(spec);
    let floor = divergence_floor(f).min(delta / 4.0).max(1e-13);
    let sqrt_p = spec.input().sqrt_masses();
    let n = spec.input().len();

    let mut best: Option<RatioPoint> = None;
    let mut diagnostics = Vec::new();

    // the unconstrained multistart argmax is a feasible achieved ratio
    // whenever its input divergence fits the budget; with the constraint
    // inactive this makes tau recover the unconstrained estimate exactly
    let mut extra_pmfs: Vec<Pmf> = carried.to_vec();
    if let Ok(unconstrained) = estimate_eta_f(f, spec, cfg) {
        extra_pmfs.push(unconstrained.argmax);
    }
    for r in &extra_pmfs {
        if let Some(pt) = eval_point(f, spec, r, 1e-13) {
            if pt.d_in <= delta * (1.0 + 1e-12) {
                best = merge(best, Some(pt));
            }
        }
    }

    // direction seeds: principal, carried/unconstrained directions, then
    // random streams
    let mut seed_dirs: Vec<Vec<f64>> = Vec::new();
    if let Some(k) = &spectral.principal_k {
        seed_dirs.push(k.clone());
    }
    for r in &extra_pmfs {
        if let Ok(pert) = Perturbation::from_endpoints(spec.input(), r) {
            if pert.epsilon() > 0.0 {
                seed_dirs.push(pert.spherical().to_vec());
            }
        }
    }
    let mut idx = 0u64;
    while seed_dirs.len() < cfg.restarts {
        let mut rng = sampling::stream_rng(cfg.seed, 1_000_000 + idx);
        if let Some(dir) = sampling::unit_orthogonal(&mut rng, &sqrt_p) {
            seed_dirs.push(dir);
        }
        idx += 1;
        if idx > 4 * cfg.restarts as u64 {
            break;
        }
    }

    for dir in &seed_dirs {
        let mut obj = |v: &[f64]| -> f64 {
            let Some(k) = project_direction(v, &sqrt_p) else {
                return f64::NEG_INFINITY;
            };
            match best_on_ray(f, spec, &k, delta, floor, false) {
                Some(pt) if pt.d_out > 0.0 => pt.ratio().ln(),
                Some(_) => -1e300,
                None => f64::NEG_INFINITY,
            }
        };
        let restart_best = if n <= 2 {
            // one direction up to sign: nothing to optimize over
            project_direction(dir, &sqrt_p)
                .and_then(|k| best_on_ray(f, spec, &k, delta, floor, true))
        } else {
            match bfgs_maximize(
                &mut obj,
                dir.clone(),
                cfg.max_iters,
                cfg.step_tolerance,
                cfg.ratio_tolerance,
            ) {
                Some(res) => project_direction(&res.x, &sqrt_p)
                    .and_then(|k| best_on_ray(f, spec, &k, delta, floor, true)),
                None => None,
            }
        };
        diagnostics.push(restart_best.as_ref().map_or(f64::NAN, RatioPoint::ratio));
        best = merge(best, restart_best);
    }

    // mirrored principal ray (sign matters once third-order terms do)
    if let Some(k) = &spectral.principal_k {
        let neg: Vec<f64> = k.iter().map(|x| -x).collect();
        best = merge(best, best_on_ray(f, spec, &neg, delta, floor, true));
    }

    let best = best.ok_or(Error::MissingData("no feasible ratio candidate"))?;
    Ok(finish(best, diagnostics))
}

/// `tau(delta)`: the contraction ratio supremum restricted to input
/// divergence at most `delta`, estimated by direction search with
/// per-direction radius bisection.
pub fn estimate_tau(
    f: &FGenerator,
    spec: &JointSpec,
    delta: f64,
    cfg: &OptimizerConfig,
) -> Result<EtaEstimate> {
    tau_impl(f, spec, delta, cfg, &[])
}

/// Report of a vanishing-input-divergence probe.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub deltas: Vec<f64>,
    pub tau_values: Vec<f64>,
    pub eta_chi2: f64,
    /// Max over consecutive deltas of `tau(smaller) - tau(larger)`;
    /// positive values violate monotonicity of nested suprema.
    pub max_monotonicity_violation: f64,
    /// `|tau(delta_last) - eta_chi2|`.
    pub final_gap: f64,
    /// The gap criterion applies once the final delta reaches 1e-8.
    pub gap_checked: bool,
    pub pass: bool,
}

/// Drives `tau` down a strictly decreasing ladder of deltas and checks
/// that the values are non-increasing and converge to `eta_chi2`.
///
/// Deltas are processed smallest-first, and each argmax is carried into
/// the runs with larger deltas (it stays feasible there), so the reported
/// sequence inherits the nesting of the feasible sets.
pub fn local_limit_probe(
    f: &FGenerator,
    spec: &JointSpec,
    deltas: &[f64],
    cfg: &OptimizerConfig,
) -> Result<ConvergenceReport> {
    if deltas.len() < 3 {
        return Err(Error::MalformedSequence("need at least 3 deltas"));
    }
    if deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::MalformedSequence("deltas must be positive"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::MalformedSequence(
            "deltas must be strictly decreasing",
        ));
    }

    let eta_chi2 = analyze(spec).eta_chi2;
    let mut carried: Vec<Pmf> = Vec::new();
    let mut values_ascending = Vec::with_capacity(deltas.len());
    for &delta in deltas.iter().rev() {
        let est = tau_impl(f, spec, delta, cfg, &carried)?;
        carried.push(est.argmax.clone());
        values_ascending.push(est.value);
    }
    let tau_values: Vec<f64> = values_ascending.iter().rev().cloned().collect();

    let mut max_violation = f64::NEG_INFINITY;
    for w in tau_values.windows(2) {
        max_violation = max_violation.max(w[1] - w[0]);
    }
    let final_gap = (tau_values[tau_values.len() - 1] - eta_chi2).abs();
    let gap_checked = *deltas.last().unwrap() <= 1e-8;
    let pass = max_violation <= 1e-6 && (!gap_checked || final_gap <= 1e-3);

    Ok(ConvergenceReport {
        deltas: deltas.to_vec(),
        tau_values,
        eta_chi2,
        max_monotonicity_violation: max_violation,
        final_gap,
        gap_checked,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_bec, make_bsc, make_dsbs};
    use crate::divergence::FGenerator;

    fn light(seed: u64) -> OptimizerConfig {
        OptimizerConfig::light(seed)
    }

    #[test]
    fn dsbs_kl_matches_eta_chi2() {
        let f = FGenerator::kl();
        for alpha in [0.1, 0.25, 0.4] {
            let spec = make_dsbs(alpha).unwrap();
            let expect = (1.0 - 2.0 * alpha) * (1.0 - 2.0 * alpha);
            let est = estimate_eta_f(&f, &spec, &light(1)).unwrap();
            assert!(
                est.value >= expect - 1e-4 && est.value <= expect + 1e-6,
                "alpha={alpha}: {} vs {expect}",
                est.value
            );
            assert!(!est.exceeds_dpi);
        }
    }

    #[test]
    fn bec_kl_matches_one_minus_beta() {
        let f = FGenerator::kl();
        let spec = make_bec(0.3, 0.4).unwrap();
        let est = estimate_eta_f(&f, &spec, &light(2)).unwrap();
        assert!(est.value >= 0.7 - 1e-4, "{}", est.value);
        assert!(est.value <= 0.7 + 1e-6, "{}", est.value);
    }

    #[test]
    fn chi2_estimate_matches_svd() {
        let f = FGenerator::chi2();
        let mut rng = sampling::stream_rng(5, 0);
        for _ in 0..5 {
            let spec = sampling::random_spec(&mut rng, 3, 3, 0.02);
            let eta = analyze(&spec).eta_chi2;
            let est = estimate_eta_f(&f, &spec, &light(3)).unwrap();
            assert!((est.value - eta).abs() < 1e-6, "{} vs {eta}", est.value);
        }
    }

    #[test]
    fn estimate_is_achieved_ratio() {
        let f = FGenerator::kl();
        let spec = make_bsc(0.2).unwrap();
        let est = estimate_eta_f(&f, &spec, &light(4)).unwrap();
        let d_in = f_divergence(&f, &est.argmax, spec.input()).unwrap().value();
        let wr = push_forward(spec.channel(), &est.argmax).unwrap();
        let d_out = f_divergence(&f, &wr, spec.output()).unwrap().value();
        assert!((est.value - d_out / d_in).abs() <= 1e-12 * est.value.max(1.0));
        assert!((est.input_divergence - d_in).abs() <= 1e-15);
        assert!((est.output_divergence - d_out).abs() <= 1e-15);
    }

    #[test]
    fn identity_channel_estimates_one_without_dpi_flag() {
        let spec = JointSpec::new(
            Pmf::new(vec![0.3, 0.3, 0.4]).unwrap(),
            crate::channel::Channel::identity(3),
        )
        .unwrap();
        let est = estimate_eta_f(&FGenerator::kl(), &spec, &light(6)).unwrap();
        assert!((est.value - 1.0).abs() <= 1e-9, "{}", est.value);
        assert!(!est.exceeds_dpi);
    }

    #[test]
    fn rank_one_channel_estimates_zero() {
        let w = crate::channel::Channel::from_rows(&[vec![0.4, 0.4], vec![0.6, 0.6]]).unwrap();
        let spec = JointSpec::new(Pmf::uniform(2), w).unwrap();
        let est = estimate_eta_f(&FGenerator::kl(), &spec, &light(5)).unwrap();
        assert!(est.value.abs() < 1e-15);
    }

    #[test]
    fn non_interior_input_is_rejected() {
        let spec = JointSpec::new(
            Pmf::new(vec![1.0, 0.0]).unwrap(),
            crate::channel::Channel::identity(2),
        )
        .unwrap();
        assert!(matches!(
            estimate_eta_f(&FGenerator::kl(), &spec, &light(0)),
            Err(Error::NonInteriorInput)
        ));
    }

    #[test]
    fn determinism_same_seed_same_bits() {
        let f = FGenerator::kl();
        let mut rng = sampling::stream_rng(77, 0);
        let spec = sampling::random_spec(&mut rng, 3, 3, 0.05);
        let a = estimate_eta_f(&f, &spec, &light(9)).unwrap();
        let b = estimate_eta_f(&f, &spec, &light(9)).unwrap();
        assert_eq!(format!("{:.15e}", a.value), format!("{:.15e}", b.value));
        assert_eq!(a.argmax.masses(), b.argmax.masses());
    }

    #[test]
    fn tau_monotone_and_capped_by_eta() {
        let f = FGenerator::kl();
        let spec = make_dsbs(0.3).unwrap();
        let cfg = light(11);
        let t_loose = estimate_tau(&f, &spec, 1e-2, &cfg).unwrap().value;
        let t_tight = estimate_tau(&f, &spec, 1e-6, &cfg).unwrap().value;
        assert!(t_loose >= t_tight - 1e-6);
        // constraint inactive: recovers the unconstrained estimate
        let eta = estimate_eta_f(&f, &spec, &cfg).unwrap().value;
        let t_inf = estimate_tau(&f, &spec, 1e9, &cfg).unwrap().value;
        assert!((t_inf - eta).abs() < 1e-6, "{t_inf} vs {eta}");
    }

    #[test]
    fn tau_rejects_bad_delta() {
        let f = FGenerator::kl();
        let spec = make_dsbs(0.3).unwrap();
        assert!(estimate_tau(&f, &spec, 0.0, &light(0)).is_err());
        assert!(estimate_tau(&f, &spec, -1.0, &light(0)).is_err());
    }

    #[test]
    fn chi2_tau_is_flat_in_delta() {
        let f = FGenerator::chi2();
        let mut rng = sampling::stream_rng(13, 0);
        let spec = sampling::random_spec(&mut rng, 3, 3, 0.05);
        let eta = analyze(&spec).eta_chi2;
        for delta in [1e-2, 1e-5, 1e-8] {
            let t = estimate_tau(&f, &spec, delta, &light(13)).unwrap().value;
            assert!((t - eta).abs() < 1e-6, "delta={delta}: {t} vs {eta}");
        }
    }

    #[test]
    fn probe_converges_on_dsbs() {
        let f = FGenerator::kl();
        let spec = make_dsbs(0.3).unwrap();
        let report = local_limit_probe(&f, &spec, &[1e-2, 1e-4, 1e-6, 1e-8], &light(17)).unwrap();
        assert!(report.pass, "{report:?}");
        assert!((report.eta_chi2 - 0.16).abs() < 1e-12);
        assert!(report.final_gap <= 1e-3);
        assert!(report.max_monotonicity_violation <= 1e-6);
    }

    #[test]
    fn probe_rejects_malformed_ladders() {
        let f = FGenerator::kl();
        let spec = make_dsbs(0.3).unwrap();
        let cfg = light(0);
        assert!(local_limit_probe(&f, &spec, &[1e-2, 1e-4], &cfg).is_err());
        assert!(local_limit_probe(&f, &spec, &[1e-2, 1e-2, 1e-4], &cfg).is_err());
        assert!(local_limit_probe(&f, &spec, &[1e-2, -1.0, 1e-4], &cfg).is_err());
    }
}
