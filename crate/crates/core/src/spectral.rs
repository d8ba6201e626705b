//! Singular values of the DTM, maximal correlation, and `eta_chi2`.
//!
//! The contraction coefficient for chi-squared divergence is the squared
//! second-largest singular value of the divergence transition matrix; the
//! top singular value is always 1, with singular vectors `sqrt(P_X)` and
//! `sqrt(P_Y)`. Computation restricts to the supports first (padding with
//! zero rows/columns does not change the non-zero singular values) and
//! runs a dense one-sided Jacobi SVD: deterministic and accurate at the
//! small alphabet sizes this crate targets.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::channel::{dtm, JointSpec};
use crate::sampling;
use crate::{Error, Result};

/// Full SVD of a dense matrix: `m = u . diag(s) . v^T` with `u: m x k`,
/// `v: n x k`, `k = min(m, n)`, singular values descending.
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Vec<f64>,
    pub v: Array2<f64>,
}

/// One-sided Jacobi SVD. Columns of the working matrix are rotated until
/// pairwise orthogonal; column norms are the singular values.
pub fn svd_dense(m: &Array2<f64>) -> Result<Svd> {
    for ((row, col), &v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry { row, col });
        }
    }
    let (rows, cols) = m.dim();
    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(cols);

    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..cols.saturating_sub(1) {
            for q in p + 1..cols {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..rows {
                    let (x, y) = (a[[i, p]], a[[i, q]]);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= 1e-30 + 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (a[[i, p]], a[[i, q]]);
                    a[[i, p]] = c * x - s * y;
                    a[[i, q]] = s * x + c * y;
                }
                for i in 0..cols {
                    let (x, y) = (v[[i, p]], v[[i, q]]);
                    v[[i, p]] = c * x - s * y;
                    v[[i, q]] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Sort columns by norm, descending; stable order keeps ties deterministic.
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| a[[i, j]] * a[[i, j]]).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let k = rows.min(cols);
    let mut u = Array2::<f64>::zeros((rows, k));
    let mut vout = Array2::<f64>::zeros((cols, k));
    let mut s = Vec::with_capacity(k);
    for (slot, &j) in order.iter().take(k).enumerate() {
        let sigma = norms[j];
        s.push(sigma);
        for i in 0..cols {
            vout[[i, slot]] = v[[i, j]];
        }
        if sigma > 0.0 {
            for i in 0..rows {
                u[[i, slot]] = a[[i, j]] / sigma;
            }
        }
    }
    complete_null_columns(&mut u, &s);
    Ok(Svd { u, s, v: vout })
}

/// Fills zero-singular-value columns of `u` with an orthonormal completion
/// so the factor stays orthonormal.
fn complete_null_columns(u: &mut Array2<f64>, s: &[f64]) {
    let (rows, k) = u.dim();
    for slot in 0..k {
        if s[slot] > 0.0 {
            continue;
        }
        // pick the standard basis vector with the largest residual
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..rows {
            let mut cand = vec![0.0; rows];
            cand[e] = 1.0;
            for j in 0..k {
                if j == slot || (s[j] == 0.0 && j > slot) {
                    continue;
                }
                let dot: f64 = (0..rows).map(|i| cand[i] * u[[i, j]]).sum();
                for i in 0..rows {
                    cand[i] -= dot * u[[i, j]];
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().map_or(true, |(b, _)| norm > *b) {
                best = Some((norm, cand));
            }
        }
        if let Some((norm, cand)) = best {
            if norm > 1e-12 {
                for i in 0..rows {
                    u[[i, slot]] = cand[i] / norm;
                }
            }
        }
    }
}

/// Spectral summary of a joint spec.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralResult {
    /// Singular values of the support-restricted DTM, descending, clamped
    /// to [0, 1].
    pub singular_values: Vec<f64>,
    /// Maximal correlation: the second-largest singular value (0 when a
    /// marginal is constant on its support).
    pub rho: f64,
    /// `rho^2`.
    pub eta_chi2: f64,
    /// Unit right singular vector for `rho`, orthogonal to `sqrt(P_X)`,
    /// mapped back to the full input alphabet. `None` in the degenerate
    /// constant-marginal case.
    pub principal_k: Option<Vec<f64>>,
}

/// Computes the DTM spectrum of a joint spec.
///
/// Supports are restricted first; if either restricted alphabet is a
/// single letter the coefficient is 0 by convention.
pub fn analyze(spec: &JointSpec) -> SpectralResult {
    let supp_x = spec.input().support();
    let supp_y = spec.output().support();
    if supp_x.len() <= 1 || supp_y.len() <= 1 {
        return SpectralResult {
            singular_values: vec![1.0],
            rho: 0.0,
            eta_chi2: 0.0,
            principal_k: None,
        };
    }

    let restricted = restrict_to_support(spec, &supp_x, &supp_y);
    let svd = svd_dense(&restricted).expect("DTM entries are finite");

    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let singular_values: Vec<f64> = svd.s.iter().map(|&x| clamp(x)).collect();
    let rho = clamp(svd.s[1]);

    // Map the second right singular vector back to the full alphabet and
    // re-project it exactly against sqrt(P_X).
    let sqrt_p = spec.input().sqrt_masses();
    let mut k = vec![0.0; spec.input().len()];
    for (j, &x) in supp_x.iter().enumerate() {
        k[x] = svd.v[[j, 1]];
    }
    let dot: f64 = k.iter().zip(&sqrt_p).map(|(a, b)| a * b).sum();
    for (ki, si) in k.iter_mut().zip(&sqrt_p) {
        *ki -= dot * si;
    }
    let norm = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    let principal_k = if norm > 1e-12 {
        for x in &mut k {
            *x /= norm;
        }
        // sign convention: first component of non-negligible size positive
        if let Some(first) = k.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                for x in &mut k {
                    *x = -*x;
                }
            }
        }
        Some(k)
    } else {
        None
    };

    SpectralResult {
        singular_values,
        rho,
        eta_chi2: rho * rho,
        principal_k,
    }
}

fn restrict_to_support(spec: &JointSpec, supp_x: &[usize], supp_y: &[usize]) -> Array2<f64> {
    let b = dtm(spec.input(), spec.channel()).expect("validated");
    let mut out = Array2::zeros((supp_y.len(), supp_x.len()));
    for (i, &y) in supp_y.iter().enumerate() {
        for (j, &x) in supp_x.iter().enumerate() {
            out[[i, j]] = b[[y, x]];
        }
    }
    out
}

/// Monte-Carlo check of the variational characterization: the maximum of
/// `||B x||^2` over random unit `x` orthogonal to `sqrt(P_X)` (with the
/// principal direction always included as a candidate). Bounded above by
/// `eta_chi2`, and equal to it when the principal candidate is exact.
pub fn rayleigh_check(spec: &JointSpec, trials: usize, seed: u64) -> f64 {
    let spectral = analyze(spec);
    let b = spec.dtm();
    let sqrt_p = spec.input().sqrt_masses();

    let ratio = |x: &[f64]| -> f64 {
        let v = Array1::from_vec(x.to_vec());
        let bx = b.dot(&v);
        bx.iter().map(|t| t * t).sum::<f64>() / x.iter().map(|t| t * t).sum::<f64>()
    };

    let mut best = f64::NEG_INFINITY;
    if let Some(k) = &spectral.principal_k {
        best = ratio(k);
    }
    let mut rng = sampling::stream_rng(seed, 0);
    for _ in 0..trials {
        if let Some(x) = sampling::unit_orthogonal(&mut rng, &sqrt_p) {
            best = best.max(ratio(&x));
        }
    }
    if best == f64::NEG_INFINITY {
        0.0
    } else {
        best
    }
}
