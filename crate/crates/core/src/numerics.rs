//! Numerical kernels shared by the model and the optimizer: a small dense
//! matrix, activation functions, a minimum-norm least-squares solver and the
//! seeded random stream every stochastic routine draws from.

use std::fmt;
use std::str::FromStr;

use faer::linalg::solvers::SolveLstsq;
use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    /// A `len x 1` matrix.
    pub fn column(values: &[f64]) -> Result<Self> {
        Matrix::new(values.len(), 1, values.to_vec())
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix::new(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn col_values(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::DimensionMismatch(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(indices.len(), self.cols, data)
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Matrix::new(self.rows, other.cols, out)
    }

    fn to_faer(&self) -> faer::Mat<f64> {
        faer::Mat::from_fn(self.rows, self.cols, |r, c| self.get(r, c))
    }
}

/// Hidden-layer transfer function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
    Sine,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Sine,
        Activation::Identity,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Sine => x.sin(),
            Activation::Identity => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Sine => "sine",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown activation {s:?} (expected sigmoid, tanh, sine or identity)"
                ))
            })
    }
}

pub fn apply_activation(kind: Activation, x: f64) -> f64 {
    kind.apply(x)
}

/// Pivoted-QR diagonal ratio above which `H` counts as comfortably full rank.
const QR_RANK_RATIO: f64 = 1e-8;

/// Minimum-norm least-squares solution of `H * beta = T`.
///
/// When a column-pivoted QR shows `H` to be well inside full column rank the
/// least-squares solution is unique and taken from the QR factors. Otherwise
/// it comes from the SVD of `H`, treating singular values at or below
/// `max(k, L) * eps * sigma_max` as zero, so rank-deficient hidden layers get
/// the Moore-Penrose solution instead of failing.
pub fn least_squares_solve(h: &Matrix, t: &Matrix) -> Result<Matrix> {
    if h.rows != t.rows {
        return Err(Error::DimensionMismatch(format!(
            "H has {} rows but T has {}",
            h.rows, t.rows
        )));
    }
    let (k, l, m) = (h.rows, h.cols, t.cols);
    let hf = h.to_faer();
    let tf = t.to_faer();
    if k >= l {
        let qr = hf.col_piv_qr();
        let r = qr.thin_R();
        let (first, last) = (r[(0, 0)].abs(), r[(l - 1, l - 1)].abs());
        if first > 0.0 && last > QR_RANK_RATIO * first {
            let beta = qr.solve_lstsq(&tf);
            return Matrix::new(l, m, (0..l * m).map(|i| beta[(i / m, i % m)]).collect());
        }
    }

    let svd = hf
        .thin_svd()
        .map_err(|_| Error::InvalidArgument("SVD did not converge".into()))?;
    let (u, v) = (svd.U(), svd.V());
    let sigma: Vec<f64> = (0..k.min(l)).map(|i| svd.S()[i]).collect();

    let sigma_max = sigma.iter().copied().fold(0.0_f64, f64::max);
    let tol = k.max(l) as f64 * f64::EPSILON * sigma_max;

    let mut beta = vec![0.0; l * m];
    for (i, &s) in sigma.iter().enumerate() {
        if s <= tol || s == 0.0 {
            continue;
        }
        for c in 0..m {
            let mut proj = 0.0;
            for r in 0..k {
                proj += u[(r, i)] * tf[(r, c)];
            }
            let coef = proj / s;
            for j in 0..l {
                beta[j * m + c] += coef * v[(j, i)];
            }
        }
    }
    Matrix::new(l, m, beta)
}

/// Deterministic random stream (ChaCha8) with seed-derived child streams.
///
/// Children are derived from the stream's seed and a label, never from its
/// current state, so the values a child produces do not depend on how much
/// of the parent has been consumed or on thread scheduling.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used to turn string labels into child-stream labels.
fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child_seed(&self, label: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(label))
    }

    pub fn child(&self, label: u64) -> RandomStream {
        RandomStream::new(self.child_seed(label))
    }

    /// Child addressed by a sequence of labels, e.g. `(bacterium, l, k, j)`.
    pub fn child_path(&self, labels: &[u64]) -> RandomStream {
        let seed = labels
            .iter()
            .fold(self.seed, |s, &label| splitmix64(s ^ splitmix64(label)));
        RandomStream::new(seed)
    }

    pub fn child_named(&self, label: &str) -> RandomStream {
        self.child(fnv1a(label))
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "uniform range requires finite lo < hi, got [{lo}, {hi})"
            )));
        }
        let dist = Uniform::new(lo, hi).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(dist.sample(&mut self.rng))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn gaussian(&mut self, mean: f64, sd: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        mean + sd * z
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}

pub fn uniform(stream: &mut RandomStream, lo: f64, hi: f64) -> Result<f64> {
    stream.uniform(lo, hi)
}
