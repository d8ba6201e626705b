//! Deterministic samplers backing the verification suites.
//!
//! Everything takes an explicit RNG; callers derive per-task streams from
//! `(seed, index)` via [`stream_rng`] so that results are reproducible and
//! independent of evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{Channel, JointSpec, Pmf};

/// ChaCha stream `index` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Dirichlet(1) sample: exponential weights, normalized. Almost surely
/// interior; masses below 1e-12 are resampled so downstream ratios stay
/// representable.
pub fn dirichlet_pmf(rng: &mut impl Rng, dim: usize) -> Pmf {
    loop {
        let mut w: Vec<f64> = (0..dim).map(|_| exp_sample(rng)).collect();
        let sum: f64 = w.iter().sum();
        for v in &mut w {
            *v /= sum;
        }
        if w.iter().all(|&v| v > 1e-12) {
            return Pmf::from_normalized(w);
        }
    }
}

/// Interior pmf with smallest mass at least `min_mass`.
pub fn interior_pmf(rng: &mut impl Rng, dim: usize, min_mass: f64) -> Pmf {
    loop {
        let p = dirichlet_pmf(rng, dim);
        if p.min_mass() >= min_mass {
            return p;
        }
    }
}

/// Column-stochastic matrix with Dirichlet(1) columns.
pub fn random_channel(rng: &mut impl Rng, ny: usize, nx: usize) -> Channel {
    let mut m = ndarray::Array2::zeros((ny, nx));
    for x in 0..nx {
        let col = dirichlet_pmf(rng, ny);
        for y in 0..ny {
            m[[y, x]] = col.get(y);
        }
    }
    Channel::new(m).expect("columns are normalized by construction")
}

/// Random joint spec with an interior input of the requested floor.
pub fn random_spec(rng: &mut impl Rng, nx: usize, ny: usize, min_mass: f64) -> JointSpec {
    let input = interior_pmf(rng, nx, min_mass);
    let channel = random_channel(rng, ny, nx);
    JointSpec::new(input, channel).expect("dimensions agree by construction")
}

/// Standard normal via Box-Muller.
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn exp_sample(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    -u.ln()
}

/// Unit vector orthogonal to `basis` (itself unit), or `None` when the
/// projection degenerates.
pub fn unit_orthogonal(rng: &mut impl Rng, basis: &[f64]) -> Option<Vec<f64>> {
    let n = basis.len();
    let mut v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
    let dot: f64 = v.iter().zip(basis).map(|(a, b)| a * b).sum();
    for i in 0..n {
        v[i] -= dot * basis[i];
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return None;
    }
    for x in &mut v {
        *x /= norm;
    }
    Some(v)
}
