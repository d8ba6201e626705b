//! Linear bounds between contraction coefficients, and the divergence
//! inequalities behind them.
//!
//! With `p_star = min_x P_X(x)` and `pi = max_A min{P_X(A), 1 - P_X(A)}`
//! (the balance coefficient), the certified orderings are
//!
//! ```text
//! eta_chi2 <= eta_kl <= 2 eta_chi2 / (phi(pi) p_star) <= eta_chi2 / p_star
//! ```
//!
//! and, for a generator with the product condition and a concave
//! difference quotient,
//!
//! ```text
//! eta_chi2 <= eta_f <= min{ 2 (f'(1)+f(0)) / f''(1/p_star),
//!                           (f'(1)+f(0)) / (f''(1) p_star) } eta_chi2 .
//! ```
//!
//! [`certify`] assembles the spectral value, the optimizer estimate, and
//! every applicable upper bound into a [`BoundReport`] with ordering
//! verdicts. [`inequality_suite`] hammers the underlying pointwise
//! divergence inequalities on random pmf pairs.

use serde::Serialize;

use crate::channel::{JointSpec, Pmf};
use crate::contraction::{estimate_eta_f, EtaEstimate, OptimizerConfig};
use crate::divergence::{
    check_difference_quotient_concave, check_pinsker_condition, f_divergence, kl_divergence,
    total_variation, FGenerator, GridSpec,
};
use crate::sampling;
use crate::spectral::{analyze, SpectralResult};
use crate::{Error, Result};

/// Distribution-dependent Pinsker constant
/// `phi(p) = log((1-p)/p) / (1-2p)` on [0, 1/2), extended by continuity to
/// `phi(1/2) = 2`; decreasing, always >= 2, `phi(0) = +inf`.
pub fn phi(p: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::ParameterOutOfRange {
            name: "p",
            value: p,
        });
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    // with u = 1 - 2p (exact): phi = log((1-p)/p)/u = 2 atanh(u)/u,
    // which stays accurate (and >= 2) through the removable point u = 0
    let u = 1.0 - 2.0 * p;
    if u == 0.0 {
        return Ok(2.0);
    }
    if u < 1e-4 {
        return Ok(2.0 * (1.0 + u * u / 3.0 + u.powi(4) / 5.0));
    }
    Ok(2.0 * u.atanh() / u)
}

/// Exact balance coefficient `max_A min{P(A), 1 - P(A)}` by subset
/// enumeration (symmetric in A vs its complement, so letter 0 is pinned to
/// the complement).
pub fn balance_coefficient(p: &Pmf) -> Result<f64> {
    balance_coefficient_with_cap(p, 20)
}

pub fn balance_coefficient_with_cap(p: &Pmf, cap: usize) -> Result<f64> {
    let n = p.len();
    if n > cap {
        return Err(Error::AlphabetTooLarge { size: n, cap });
    }
    if n == 1 {
        return Ok(0.0);
    }
    let masses = p.masses();
    let mut best = 0.0_f64;
    // subsets of letters 1..n (letter 0 stays out; complements covered)
    for mask in 0u64..(1u64 << (n - 1)) {
        let mut sum = 0.0;
        for i in 0..n - 1 {
            if mask >> i & 1 == 1 {
                sum += masses[i + 1];
            }
        }
        best = best.max(sum.min(1.0 - sum));
    }
    Ok(best)
}

/// Subset-sum DP fallback for alphabets past the enumeration cap: masses
/// are discretized at `resolution`, achievable subset sums tracked in a
/// bitset, and the best-balanced achievable sum returned with a
/// +-(n * resolution) error band.
pub fn balance_coefficient_dp(p: &Pmf, resolution: f64) -> Result<f64> {
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(Error::ParameterOutOfRange {
            name: "resolution",
            value: resolution,
        });
    }
    let buckets = (1.0 / resolution).ceil() as usize + 1;
    let words = buckets / 64 + 1;
    let mut reachable = vec![0u64; words];
    reachable[0] = 1; // empty subset
    for &m in p.masses() {
        let shift = (m / resolution).round() as usize;
        if shift == 0 {
            continue;
        }
        let mut shifted = vec![0u64; words];
        let (word_shift, bit_shift) = (shift / 64, shift % 64);
        for i in (0..words).rev() {
            if i < word_shift {
                break;
            }
            let mut v = reachable[i - word_shift] << bit_shift;
            if bit_shift > 0 && i > word_shift {
                v |= reachable[i - word_shift - 1] >> (64 - bit_shift);
            }
            shifted[i] |= v;
        }
        for i in 0..words {
            reachable[i] |= shifted[i];
        }
    }
    // achievable sum closest to 1/2 maximizes min(s, 1-s)
    let half = buckets / 2;
    let mut best = 0.0_f64;
    for offset in 0..=half {
        for idx in [
            half.saturating_sub(offset),
            (half + offset).min(buckets - 1),
        ] {
            if reachable[idx / 64] >> (idx % 64) & 1 == 1 {
                let s = idx as f64 * resolution;
                best = s.min(1.0 - s);
                return Ok(best.max(0.0));
            }
        }
    }
    Ok(best)
}

fn p_star(spec: &JointSpec) -> Result<f64> {
    if !spec.input().is_interior() {
        return Err(Error::NonInteriorInput);
    }
    Ok(spec.input().min_mass())
}

/// `eta_chi2 / p_star`, the plain linear upper bound on `eta_kl` (raw).
pub fn thm2_bound(spec: &JointSpec) -> Result<f64> {
    Ok(analyze(spec).eta_chi2 / p_star(spec)?)
}

/// `2 eta_chi2 / (phi(balance) p_star)`, the refined upper bound on
/// `eta_kl` (raw); never looser than [`thm2_bound`].
pub fn thm3_bound(spec: &JointSpec) -> Result<f64> {
    let ps = p_star(spec)?;
    let balance = balance_coefficient(spec.input())?;
    Ok(2.0 * analyze(spec).eta_chi2 / (phi(balance)? * ps))
}

/// An upper bound value: raw, clipped at 1 (coefficients never exceed 1),
/// and a flag for whether the generator passed the grid condition checks
/// its derivation requires.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundValue {
    pub raw: f64,
    pub clipped: f64,
    pub certified: bool,
}

impl BoundValue {
    fn new(raw: f64, certified: bool) -> Self {
        Self {
            raw,
            clipped: raw.min(1.0),
            certified,
        }
    }
}

fn general_constant(f: &FGenerator) -> Result<f64> {
    let d1 = f.d1_at_one().ok_or(Error::MissingData("f'(1)"))?;
    let d2 = f.d2_at_one().ok_or(Error::MissingData("f''(1)"))?;
    let f0 = f.f_at_zero();
    if !f0.is_finite() {
        return Err(Error::MissingData("finite f(0)"));
    }
    Ok((d1 + f0) / d2)
}

fn conditions_certified(f: &FGenerator) -> bool {
    let grid = GridSpec::default();
    let pinsker = check_pinsker_condition(f, grid)
        .map(|r| r.pass)
        .unwrap_or(false);
    let quotient = check_difference_quotient_concave(f, grid)
        .map(|r| r.pass)
        .unwrap_or(false);
    pinsker && quotient
}

/// General linear bound `(f'(1)+f(0)) eta_chi2 / (f''(1) p_star)`; for
/// `kl` the constant is exactly `1 / p_star` and the bound coincides with
/// [`thm2_bound`].
pub fn thm4_bound(f: &FGenerator, spec: &JointSpec) -> Result<BoundValue> {
    let c = general_constant(f)?;
    let raw = c * analyze(spec).eta_chi2 / p_star(spec)?;
    Ok(BoundValue::new(raw, conditions_certified(f)))
}

/// Alternative linear bound `2 (f'(1)+f(0)) eta_chi2 / f''(1/p_star)`,
/// needing a second-derivative evaluator and a non-increasing second
/// derivative.
pub fn eq33_bound(f: &FGenerator, spec: &JointSpec) -> Result<BoundValue> {
    let d1 = f.d1_at_one().ok_or(Error::MissingData("f'(1)"))?;
    let f0 = f.f_at_zero();
    if !f0.is_finite() {
        return Err(Error::MissingData("finite f(0)"));
    }
    let ps = p_star(spec)?;
    let d2_at_inv = f
        .d2_at(1.0 / ps)
        .ok_or(Error::MissingData("second-derivative evaluator"))?;
    let raw = 2.0 * (d1 + f0) * analyze(spec).eta_chi2 / d2_at_inv;
    let certified = conditions_certified(f) && d2_non_increasing(f);
    Ok(BoundValue::new(raw, certified))
}

fn d2_non_increasing(f: &FGenerator) -> bool {
    let grid = GridSpec::default();
    let mut prev = f64::INFINITY;
    for t in grid.log_points() {
        match f.d2_at(t) {
            Some(v) => {
                if v > prev + 1e-9 {
                    return false;
                }
                prev = v;
            }
            None => return false,
        }
    }
    true
}

/// `min(thm4, eq33)`: the best certified linear constant available.
pub fn combined_bound(f: &FGenerator, spec: &JointSpec) -> Result<BoundValue> {
    let a = thm4_bound(f, spec)?;
    let b = eq33_bound(f, spec)?;
    Ok(BoundValue {
        raw: a.raw.min(b.raw),
        clipped: a.clipped.min(b.clipped),
        certified: a.certified && b.certified,
    })
}

/// A single ordering check inside a report.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn verdict(name: &str, lhs: f64, rhs: f64, slack: f64) -> Verdict {
    Verdict {
        name: name.to_string(),
        lhs,
        rhs,
        pass: lhs <= rhs + slack,
    }
}

/// Tensor-product block of a [`BoundReport`].
#[derive(Clone, Debug, Serialize)]
pub struct TensorBlock {
    pub copies: usize,
    pub eta_chi2_product: f64,
    /// `|eta_chi2(product) - eta_chi2(single)| <= 1e-9`.
    pub tensor_match: bool,
    /// Product-level constant `C / p_star^n`: what the plain bound would
    /// charge on the product alphabet.
    pub naive_constant: f64,
    /// Single-letter constant `C / p_star` that tensorization justifies.
    pub corollary_constant: f64,
}

/// Everything [`certify`] computes for one generator and one joint spec.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub f: String,
    pub input_dim: usize,
    pub output_dim: usize,
    pub eta_chi2: f64,
    pub eta_f_estimate: f64,
    pub p_star: f64,
    pub balance: f64,
    pub phi_of_balance: f64,
    pub thm2: BoundValue,
    pub thm3: BoundValue,
    pub thm4: Option<BoundValue>,
    pub eq33: Option<BoundValue>,
    pub eq34: Option<BoundValue>,
    pub estimate: EtaEstimate,
    pub tensor: Option<TensorBlock>,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
}

/// Computes the spectral coefficient, the optimizer estimate, and all
/// applicable linear bounds, then checks the sandwich orderings.
///
/// Verdicts compare raw (unclipped) bounds; bounds whose side conditions
/// did not certify are reported but excluded from the verdict list.
pub fn certify(f: &FGenerator, spec: &JointSpec, cfg: &OptimizerConfig) -> Result<BoundReport> {
    let ps = p_star(spec)?;
    let spectral: SpectralResult = analyze(spec);
    let eta_chi2 = spectral.eta_chi2;
    let estimate = estimate_eta_f(f, spec, cfg)?;
    let balance = balance_coefficient(spec.input())?;
    let phi_b = phi(balance)?;

    let thm2 = BoundValue::new(eta_chi2 / ps, true);
    let thm3 = BoundValue::new(2.0 * eta_chi2 / (phi_b * ps), true);
    let thm4 = thm4_bound(f, spec).ok();
    let eq33 = eq33_bound(f, spec).ok();
    let eq34 = match (&thm4, &eq33) {
        (Some(a), Some(b)) => Some(BoundValue {
            raw: a.raw.min(b.raw),
            clipped: a.clipped.min(b.clipped),
            certified: a.certified && b.certified,
        }),
        _ => None,
    };

    // the chi-squared lower bound needs f''(1) > 0; tv has no derivative
    let mut verdicts = Vec::new();
    if f.d2_at_one().is_some() {
        verdicts.push(verdict("eta_chi2_le_eta_f", eta_chi2, estimate.value, 1e-6));
    }
    if f.is_kl() {
        verdicts.push(verdict("eta_f_le_thm3", estimate.value, thm3.raw, 1e-9));
        verdicts.push(verdict("eta_f_le_thm2", estimate.value, thm2.raw, 1e-9));
    }
    verdicts.push(verdict("thm3_le_thm2", thm3.raw, thm2.raw, 1e-9));
    for (name, bound) in [("thm4", &thm4), ("eq33", &eq33), ("eq34", &eq34)] {
        if let Some(b) = bound {
            if b.certified {
                verdicts.push(verdict(
                    &format!("eta_f_le_{name}"),
                    estimate.value,
                    b.raw,
                    1e-9,
                ));
            }
        }
    }
    let all_pass = verdicts.iter().all(|v| v.pass);

    Ok(BoundReport {
        f: f.name().to_string(),
        input_dim: spec.input().len(),
        output_dim: spec.output().len(),
        eta_chi2,
        eta_f_estimate: estimate.value,
        p_star: ps,
        balance,
        phi_of_balance: phi_b,
        thm2,
        thm3,
        thm4,
        eq33,
        eq34,
        estimate,
        tensor: None,
        verdicts,
        all_pass,
    })
}

/// [`certify`] on the single-letter spec plus the n-fold product check:
/// the product's `eta_chi2` must match the single-copy value, and the
/// report contrasts the naive product constant `C / p_star^n` with the
/// single-letter constant `C / p_star` that the tensorized bounds justify.
pub fn tensorized_certify(
    f: &FGenerator,
    spec: &JointSpec,
    n: usize,
    cfg: &OptimizerConfig,
) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "n",
            value: 0.0,
        });
    }
    let mut report = certify(f, spec, cfg)?;
    let product = spec.tensor_power(n, crate::channel::DEFAULT_TENSOR_CAP)?;
    let eta_product = analyze(&product).eta_chi2;
    let tensor_match = (eta_product - report.eta_chi2).abs() <= 1e-9;

    let c = general_constant(f).unwrap_or(1.0);
    let naive_constant = c / report.p_star.powi(n as i32);
    let corollary_constant = c / report.p_star;

    report.verdicts.push(verdict(
        "tensor_eta_chi2_match",
        (eta_product - report.eta_chi2).abs(),
        1e-9,
        0.0,
    ));
    // the single-letter constant bounds the product coefficient
    report.verdicts.push(verdict(
        "eta_f_le_corollary",
        report.eta_f_estimate,
        corollary_constant * eta_product,
        1e-9,
    ));
    report.all_pass = report.verdicts.iter().all(|v| v.pass);
    report.tensor = Some(TensorBlock {
        copies: n,
        eta_chi2_product: eta_product,
        tensor_match,
        naive_constant,
        corollary_constant,
    });
    Ok(report)
}

/// Worst-case margin statistics for one inequality across a sample run.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityStat {
    pub name: String,
    /// Minimum of LHS - RHS seen (inequalities are stated as LHS >= RHS);
    /// anything below -1e-9 is a violation.
    pub worst_margin: f64,
    pub violations: usize,
    pub samples: usize,
}

impl InequalityStat {
    pub(crate) fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            worst_margin: f64::INFINITY,
            violations: 0,
            samples: 0,
        }
    }

    pub(crate) fn record(&mut self, margin: f64) {
        self.samples += 1;
        if margin < self.worst_margin {
            self.worst_margin = margin;
        }
        if margin < -1e-9 {
            self.violations += 1;
        }
    }
}

/// Batch verification outcome; `pass` iff no check recorded a violation.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<InequalityStat>,
    pub pass: bool,
}

impl SuiteReport {
    pub(crate) fn from_checks(suite: &str, seed: u64, checks: Vec<InequalityStat>) -> Self {
        let pass = checks.iter().all(|c| c.violations == 0);
        Self {
            suite: suite.to_string(),
            seed,
            checks,
            pass,
        }
    }
}

/// Random-pair verification of the pointwise divergence inequalities: the
/// Pinsker bounds, the chi-squared lower bounds on KL (plain, balanced,
/// and support-weighted), the log upper bound, and their f-divergence
/// analogues for Tsallis generators.
pub fn inequality_suite(samples: usize, seed: u64, dims: &[usize]) -> Result<SuiteReport> {
    for &d in dims {
        if !(2..=16).contains(&d) {
            return Err(Error::ParameterOutOfRange {
                name: "dim",
                value: d as f64,
            });
        }
    }
    let ts05 = FGenerator::tsallis(0.5)?;
    let ts15 = FGenerator::tsallis(1.5)?;
    let fs = [
        ("kl", FGenerator::kl()),
        ("tsallis_0.5", ts05),
        ("tsallis_1.5", ts15),
    ];

    let mut stats: Vec<InequalityStat> = [
        "pinsker_eq18",
        "lemma1_kl",
        "lemma2_kl_balanced",
        "lemma3_log_upper",
        "lemma3_chi2_upper",
        "eq19_kl",
        "eq26_kl_balanced",
        "lemma4_kl",
        "lemma4_tsallis_0.5",
        "lemma4_tsallis_1.5",
        "lemma5_kl",
        "lemma5_tsallis_0.5",
        "lemma5_tsallis_1.5",
        "lemma6_kl",
        "lemma6_tsallis_0.5",
        "lemma6_tsallis_1.5",
    ]
    .iter()
    .map(|n| InequalityStat::new(n))
    .collect();

    for (dim_idx, &dim) in dims.iter().enumerate() {
        for sample in 0..samples {
            let mut rng = sampling::stream_rng(seed, (dim_idx as u64) << 40 | sample as u64);
            let p = sampling::dirichlet_pmf(&mut rng, dim);
            let r = sampling::dirichlet_pmf(&mut rng, dim);

            let d_kl = kl_divergence(&r, &p)?.value();
            let tv = total_variation(&r, &p)?;
            let j: Vec<f64> = r
                .masses()
                .iter()
                .zip(p.masses())
                .map(|(&a, &b)| a - b)
                .collect();
            let j1: f64 = j.iter().map(|v| v.abs()).sum();
            let chi2: f64 = j
                .iter()
                .zip(p.masses())
                .map(|(&ji, &pi)| ji * ji / pi)
                .sum();
            let max_ratio: f64 = j
                .iter()
                .zip(p.masses())
                .map(|(&ji, &pi)| (ji / pi).abs())
                .fold(0.0, f64::max);
            let ps = p.min_mass();
            let balance = balance_coefficient(&p)?;
            let phi_b = phi(balance)?;

            stats[0].record(d_kl - 2.0 * tv * tv);
            if max_ratio > 0.0 {
                stats[1].record(d_kl - chi2 * j1 / (2.0 * max_ratio));
                stats[2].record(d_kl - phi_b * chi2 * j1 / (4.0 * max_ratio));
            }
            stats[3].record(chi2.ln_1p() - d_kl);
            stats[4].record(chi2 - chi2.ln_1p());
            stats[5].record(d_kl - 0.5 * ps * chi2);
            stats[6].record(d_kl - 0.5 * phi_b * ps * chi2);

            for (i, (_, f)) in fs.iter().enumerate() {
                let d_f = f_divergence(f, &r, &p)?.value();
                let d2 = f.d2_at_one().unwrap();
                stats[7 + i].record(d_f - 0.5 * d2 * j1 * j1);
                if max_ratio > 0.0 {
                    stats[10 + i].record(d_f - 0.5 * d2 * chi2 * j1 / max_ratio);
                }
                let c6 = f.d1_at_one().unwrap() + f.f_at_zero();
                stats[13 + i].record(c6 * chi2 - d_f);
            }
        }
    }
    Ok(SuiteReport::from_checks("inequalities", seed, stats))
}
