//! Pmfs, channels, joint distributions, and perturbations.
//!
//! A [`Pmf`] is a point of the probability simplex; a [`Channel`] is a
//! column-stochastic |Y|×|X| matrix mapping input pmfs to output pmfs
//! `P_Y = W P_X`. A [`JointSpec`] bundles the two (and caches the output
//! marginal), which is the object every contraction-coefficient routine
//! consumes. Local analysis works with [`Perturbation`] vectors: an
//! additive direction `J` with `sum(J) = 0`, or equivalently a spherical
//! direction `K = diag(sqrt(P))^-1 J` with `K . sqrt(P) = 0`.

use ndarray::{linalg::kron, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on tensor-product alphabet sizes. Dense SVD past this size
/// stops being desk-scale.
pub const DEFAULT_TENSOR_CAP: usize = 4096;

/// Normalization drift tolerated at construction time.
const SUM_TOLERANCE: f64 = 1e-8;

/// A probability mass function on a finite alphabet.
///
/// Masses are validated (non-negative, summing to 1 within 1e-8) and then
/// renormalized exactly once, at construction; downstream code assumes the
/// sum is exactly 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pmf {
    masses: Vec<f64>,
}

impl Pmf {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        for (index, &value) in masses.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidMass { index, value });
            }
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self::renormalize(masses, sum))
    }

    /// Uniform pmf on `n` letters.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "alphabet must be non-empty");
        Self {
            masses: vec![1.0 / n as f64; n],
        }
    }

    /// Two-letter pmf `(1-q, q)` with `q` strictly inside `(0, 1)`.
    pub fn bernoulli(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::ParameterOutOfRange {
                name: "q",
                value: q,
            });
        }
        Ok(Self {
            masses: vec![1.0 - q, q],
        })
    }

    /// Trusted constructor for masses that are already normalized (e.g. the
    /// output of a stochastic matrix-vector product after its guard).
    pub(crate) fn from_normalized(masses: Vec<f64>) -> Self {
        debug_assert!(!masses.is_empty());
        debug_assert!(
            (masses.iter().sum::<f64>() - 1.0).abs() < 1e-9,
            "from_normalized given drifted masses"
        );
        Self { masses }
    }

    fn renormalize(mut masses: Vec<f64>, sum: f64) -> Self {
        for m in &mut masses {
            *m /= sum;
        }
        Self { masses }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn get(&self, i: usize) -> f64 {
        self.masses[i]
    }

    /// True when every mass is strictly positive (the relative interior of
    /// the simplex).
    pub fn is_interior(&self) -> bool {
        self.masses.iter().all(|&m| m > 0.0)
    }

    /// Smallest mass, the `p_star` of the linear bound constants.
    pub fn min_mass(&self) -> f64 {
        self.masses.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Indices of letters with non-zero mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.masses[i] > 0.0).collect()
    }

    /// Entry-wise square root, the unit vector `sqrt(P)`.
    pub fn sqrt_masses(&self) -> Vec<f64> {
        self.masses.iter().map(|&m| m.sqrt()).collect()
    }
}

/// A discrete memoryless channel: a column-stochastic |Y|×|X| matrix whose
/// x-th column is the conditional pmf `P_{Y|X=x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    matrix: Array2<f64>,
}

impl Channel {
    /// Validates entries (finite, non-negative) and column sums (1 within
    /// 1e-8), then renormalizes each column exactly, mirroring [`Pmf::new`].
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let (ny, nx) = matrix.dim();
        if ny == 0 || nx == 0 {
            return Err(Error::EmptyAlphabet);
        }
        for ((row, col), &value) in matrix.indexed_iter() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidChannelEntry { row, col, value });
            }
        }
        let mut matrix = matrix;
        for col in 0..nx {
            let sum: f64 = matrix.column(col).sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::ColumnNotStochastic { col, sum });
            }
            matrix.column_mut(col).mapv_inplace(|v| v / sum);
        }
        Ok(Self { matrix })
    }

    /// Builds a channel from row-major rows (`rows[y][x]`), as in the JSON
    /// channel schema.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let nx = rows[0].len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != nx {
                return Err(Error::RaggedRow {
                    row,
                    got: r.len(),
                    expected: nx,
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
        let matrix = Array2::from_shape_vec((rows.len(), nx), flat).expect("shape checked above");
        Self::new(matrix)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: Array2::eye(n),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// `self . inner`: the composite channel of the chain
    /// `U -> (inner) -> X -> (self) -> Y`.
    pub fn compose(&self, inner: &Channel) -> Result<Channel> {
        if self.input_dim() != inner.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: inner.output_dim(),
            });
        }
        // The product of column-stochastic matrices is column-stochastic up
        // to rounding, which Channel::new absorbs.
        Channel::new(self.matrix.dot(&inner.matrix))
    }

    /// Kronecker product, the channel of an independent pair.
    pub fn kron(&self, other: &Channel) -> Channel {
        Channel {
            matrix: kron(&self.matrix, &other.matrix),
        }
    }
}

/// Output pmf `P_Y = W P_X`, renormalized under a 1e-12 drift guard.
pub fn push_forward(w: &Channel, p: &Pmf) -> Result<Pmf> {
    if w.input_dim() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: w.input_dim(),
            got: p.len(),
        });
    }
    let x = Array1::from_vec(p.masses().to_vec());
    let mut y = w.matrix().dot(&x).to_vec();
    let sum: f64 = y.iter().sum();
    debug_assert!((sum - 1.0).abs() <= 1e-12, "push_forward drift {sum}");
    for v in &mut y {
        *v /= sum;
    }
    Ok(Pmf::from_normalized(y))
}

/// Divergence transition matrix `B = diag(sqrt(P_Y))^+ W diag(sqrt(P_X))`,
/// entry-wise `B[y,x] = P_{X,Y}(x,y) / sqrt(P_X(x) P_Y(y))`.
///
/// Letters with zero input or output mass get zero rows/columns (the
/// pseudoinverse convention), leaving the non-zero singular values of the
/// support-restricted matrix untouched.
pub fn dtm(p: &Pmf, w: &Channel) -> Result<Array2<f64>> {
    if w.input_dim() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: w.input_dim(),
            got: p.len(),
        });
    }
    let py = push_forward(w, p)?;
    let (ny, nx) = (w.output_dim(), w.input_dim());
    let mut b = Array2::zeros((ny, nx));
    for y in 0..ny {
        if py.get(y) <= 0.0 {
            continue;
        }
        let inv_sqrt_py = 1.0 / py.get(y).sqrt();
        for x in 0..nx {
            if p.get(x) > 0.0 {
                b[[y, x]] = w.matrix()[[y, x]] * p.get(x).sqrt() * inv_sqrt_py;
            }
        }
    }
    Ok(b)
}

/// An input pmf and a channel, with the output marginal derived once.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    input: Pmf,
    channel: Channel,
    output: Pmf,
}

impl JointSpec {
    pub fn new(input: Pmf, channel: Channel) -> Result<Self> {
        let output = push_forward(&channel, &input)?;
        Ok(Self {
            input,
            channel,
            output,
        })
    }

    pub fn input(&self) -> &Pmf {
        &self.input
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn output(&self) -> &Pmf {
        &self.output
    }

    pub fn dtm(&self) -> Array2<f64> {
        dtm(&self.input, &self.channel).expect("dimensions validated at construction")
    }

    /// Independent product: Kronecker product of channels, product of
    /// input pmfs. Alphabet sizes multiply; refuses past `cap`.
    pub fn tensor_with_cap(&self, other: &JointSpec, cap: usize) -> Result<JointSpec> {
        let nx = self.input.len() * other.input.len();
        let ny = self.channel.output_dim() * other.channel.output_dim();
        let dim = nx.max(ny);
        if dim > cap {
            return Err(Error::DimensionCapExceeded { dim, cap });
        }
        let mut masses = Vec::with_capacity(nx);
        for &a in self.input.masses() {
            for &b in other.input.masses() {
                masses.push(a * b);
            }
        }
        let channel = self.channel.kron(&other.channel);
        JointSpec::new(Pmf::from_normalized(masses), channel)
    }

    pub fn tensor(&self, other: &JointSpec) -> Result<JointSpec> {
        self.tensor_with_cap(other, DEFAULT_TENSOR_CAP)
    }

    /// n-fold i.i.d. product of this spec.
    pub fn tensor_power(&self, n: usize, cap: usize) -> Result<JointSpec> {
        if n == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "n",
                value: 0.0,
            });
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor_with_cap(self, cap)?;
        }
        Ok(acc)
    }

    /// Parses the JSON channel schema `{"p_x": [...], "W": [[row-major]]}`.
    pub fn from_json(text: &str) -> Result<JointSpec> {
        let raw: ChannelSpecJson = serde_json::from_str(text)?;
        let channel = Channel::from_rows(&raw.w)?;
        let input = Pmf::new(raw.p_x)?;
        if channel.input_dim() != input.len() {
            return Err(Error::DimensionMismatch {
                expected: channel.input_dim(),
                got: input.len(),
            });
        }
        JointSpec::new(input, channel)
    }

    /// Parses builtin spec strings: `bsc:<p>`, `bec:<beta>:<q>`,
    /// `dsbs:<alpha>`.
    pub fn from_builtin_str(spec: &str) -> Result<JointSpec> {
        let parts: Vec<&str> = spec.split(':').collect();
        let parse = |s: &str, name: &'static str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::ParameterOutOfRange {
                name,
                value: f64::NAN,
            })
        };
        match parts.as_slice() {
            ["bsc", p] => make_bsc(parse(p, "p")?),
            ["dsbs", a] => make_dsbs(parse(a, "alpha")?),
            ["bec", b, q] => make_bec(parse(b, "beta")?, parse(q, "q")?),
            _ => Err(Error::UnknownGenerator(spec.to_string())),
        }
    }
}

#[derive(Deserialize)]
struct ChannelSpecJson {
    p_x: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
}

fn bsc_matrix(p: f64) -> Array2<f64> {
    Array2::from_shape_vec((2, 2), vec![1.0 - p, p, p, 1.0 - p]).expect("2x2")
}

/// Binary symmetric channel with crossover `p`, uniform input.
pub fn make_bsc(p: f64) -> Result<JointSpec> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ParameterOutOfRange {
            name: "p",
            value: p,
        });
    }
    JointSpec::new(Pmf::uniform(2), Channel::new(bsc_matrix(p))?)
}

/// Binary symmetric channel with crossover `p` and input Bernoulli(q).
pub fn make_bsc_with_input(p: f64, q: f64) -> Result<JointSpec> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ParameterOutOfRange {
            name: "p",
            value: p,
        });
    }
    JointSpec::new(Pmf::bernoulli(q)?, Channel::new(bsc_matrix(p))?)
}

/// Binary erasure channel with erasure probability `beta` and input
/// Bernoulli(q); output alphabet {0, e, 1}.
pub fn make_bec(beta: f64, q: f64) -> Result<JointSpec> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::ParameterOutOfRange {
            name: "beta",
            value: beta,
        });
    }
    let w = Array2::from_shape_vec(
        (3, 2),
        vec![
            1.0 - beta,
            0.0, // y = 0
            beta,
            beta, // y = e
            0.0,
            1.0 - beta, // y = 1
        ],
    )
    .expect("3x2");
    JointSpec::new(Pmf::bernoulli(q)?, Channel::new(w)?)
}

/// Doubly symmetric binary source: uniform input through BSC(alpha).
pub fn make_dsbs(alpha: f64) -> Result<JointSpec> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::ParameterOutOfRange {
            name: "alpha",
            value: alpha,
        });
    }
    make_bsc(alpha)
}

/// A local perturbation of a reference pmf: `R = P + eps * J` with the
/// additive direction `J = diag(sqrt(P)) K` tied to the spherical
/// direction `K` orthogonal to `sqrt(P)`.
#[derive(Clone, Debug)]
pub struct Perturbation {
    reference: Pmf,
    spherical: Vec<f64>,
    additive: Vec<f64>,
    epsilon: f64,
}

impl Perturbation {
    /// Builds a perturbation from a spherical direction. `k` need not be
    /// unit norm but must satisfy `k . sqrt(P) = 0` within 1e-10.
    pub fn from_spherical(reference: &Pmf, k: &[f64], epsilon: f64) -> Result<Self> {
        if k.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                got: k.len(),
            });
        }
        let sqrt_p = reference.sqrt_masses();
        let dot: f64 = k.iter().zip(&sqrt_p).map(|(a, b)| a * b).sum();
        if dot.abs() > 1e-10 {
            return Err(Error::OrthogonalityViolated { dot });
        }
        let additive: Vec<f64> = k.iter().zip(&sqrt_p).map(|(a, b)| a * b).collect();
        Ok(Self {
            reference: reference.clone(),
            spherical: k.to_vec(),
            additive,
            epsilon,
        })
    }

    /// Recovers the perturbation carrying `reference` to `target`.
    /// The scale is fixed so that the spherical direction has unit norm.
    pub fn from_endpoints(reference: &Pmf, target: &Pmf) -> Result<Self> {
        if reference.len() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                got: target.len(),
            });
        }
        if !reference.is_interior() {
            return Err(Error::NonInteriorInput);
        }
        let sqrt_p = reference.sqrt_masses();
        let scaled: Vec<f64> = (0..reference.len())
            .map(|i| (target.get(i) - reference.get(i)) / sqrt_p[i])
            .collect();
        let norm = scaled.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(Self {
                reference: reference.clone(),
                spherical: vec![0.0; reference.len()],
                additive: vec![0.0; reference.len()],
                epsilon: 0.0,
            });
        }
        let k: Vec<f64> = scaled.iter().map(|v| v / norm).collect();
        Self::from_spherical(reference, &k, norm)
    }

    pub fn reference(&self) -> &Pmf {
        &self.reference
    }

    pub fn spherical(&self) -> &[f64] {
        &self.spherical
    }

    pub fn additive(&self) -> &[f64] {
        &self.additive
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The perturbed pmf `P + eps J`, erroring if any mass leaves [0, 1].
    pub fn apply(&self) -> Result<Pmf> {
        let mut masses = Vec::with_capacity(self.reference.len());
        for (index, (&p, &j)) in self
            .reference
            .masses()
            .iter()
            .zip(&self.additive)
            .enumerate()
        {
            let mass = p + self.epsilon * j;
            if !(0.0..=1.0).contains(&mass) {
                return Err(Error::PerturbationTooLarge { index, mass });
            }
            masses.push(mass);
        }
        let sum: f64 = masses.iter().sum();
        // sum(J) = 0 analytically; the residual is float dust.
        debug_assert!((sum - 1.0).abs() < 1e-12);
        for m in &mut masses {
            *m /= sum;
        }
        Ok(Pmf::from_normalized(masses))
    }

    /// Largest epsilon (for this direction) keeping every mass in [0, 1].
    pub fn max_epsilon(&self) -> f64 {
        let mut eps = f64::INFINITY;
        for (&p, &j) in self.reference.masses().iter().zip(&self.additive) {
            if j < 0.0 {
                eps = eps.min(p / -j);
            } else if j > 0.0 {
                eps = eps.min((1.0 - p) / j);
            }
        }
        eps
    }
}

/// `R = P + eps * diag(sqrt(P)) K` for a spherical direction `K`.
pub fn perturb(p: &Pmf, k: &[f64], eps: f64) -> Result<Pmf> {
    Perturbation::from_spherical(p, k, eps)?.apply()
}
