//! Kernels, Gram matrices, and spectral quantities.
//!
//! A [`GramMatrix`] is the only view of geometry the exact clustering code ever
//! sees: squared feature-space distances come from the identity
//! `‖Φ_i − Φ_j‖² = K_ii − 2 K_ij + K_jj`.

use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::format_float;

/// Slack allowed on `κ(x, x) ≤ 1` when normalization is requested.
pub const NORM_SLACK: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(−‖x − y‖² / (2 h²))`.
    Gaussian {
        bandwidth: f64,
    },
    Linear,
    /// `(⟨x, y⟩ + offset)^degree`.
    Polynomial {
        degree: u32,
        offset: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: KernelFamily,
    /// Reject inputs whose feature norm exceeds one.
    #[serde(default)]
    pub normalize: bool,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Self {
        Self {
            family: KernelFamily::Gaussian { bandwidth },
            normalize: true,
        }
    }

    pub fn linear(normalize: bool) -> Self {
        Self {
            family: KernelFamily::Linear,
            normalize,
        }
    }

    pub fn polynomial(degree: u32, offset: f64, normalize: bool) -> Self {
        Self {
            family: KernelFamily::Polynomial { degree, offset },
            normalize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Gaussian { bandwidth } => {
                if !(bandwidth.is_finite() && bandwidth > 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "gaussian bandwidth must be positive, got {bandwidth}"
                    )));
                }
            }
            KernelFamily::Linear => {}
            KernelFamily::Polynomial { degree, offset } => {
                if degree == 0 {
                    return Err(Error::InvalidKernel("polynomial degree must be >= 1".into()));
                }
                if !(offset.is_finite() && offset >= 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "polynomial offset must be nonnegative, got {offset}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Scalar kernel evaluation. Does not validate.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelFamily::Linear => dot(x, y),
            KernelFamily::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Symmetric PSD kernel matrix with a cached diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    diag: Vec<f64>,
}

impl GramMatrix {
    /// Wraps an existing matrix. Checks shape, finiteness, and symmetry; PSD-ness
    /// is the caller's responsibility (see [`GramMatrix::min_eigen_ratio`]).
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: entries.ncols(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                if !entries[(i, j)].is_finite() {
                    return Err(Error::NonFiniteInput { point: i });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        let diag = (0..n).map(|i| entries[(i, i)]).collect();
        Ok(Self { entries, diag })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Principal submatrix on `idx` (indices may repeat).
    pub fn submatrix(&self, idx: &[usize]) -> Result<GramMatrix> {
        if idx.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = self.n();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        let entries = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.entries[(idx[a], idx[b])]);
        let diag = idx.iter().map(|&i| self.diag[i]).collect();
        Ok(GramMatrix { entries, diag })
    }

    /// Rectangular block `K[rows, cols]`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.entries[(rows[a], cols[b])])
    }

    /// Distance identity without bounds checks beyond the matrix indexing itself.
    #[inline]
    pub fn dist_sq(&self, i: usize, j: usize) -> f64 {
        (self.diag[i] - 2.0 * self.entries[(i, j)] + self.diag[j]).max(0.0)
    }

    /// `λ_min / λ_max` of the matrix; values `≥ −1e-8` certify PSD up to tolerance.
    pub fn min_eigen_ratio(&self) -> Result<f64> {
        let eig = symmetric_eigenvalues(&self.entries)?;
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if max <= 0.0 {
            return Ok(if min < 0.0 { -1.0 } else { 0.0 });
        }
        Ok(min / max)
    }

    /// Row-major dump of the full matrix, no header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.n()).map(|j| format_float(self.get(i, j))).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Builds `K_ij = κ(x_i, x_j)` over `points`.
pub fn gram_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<GramMatrix> {
    spec.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let dim = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { point: i });
        }
    }
    let n = points.len();
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(&points[i], &points[j]);
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    for i in 0..n {
        if !entries[(i, i)].is_finite() {
            return Err(Error::NonFiniteInput { point: i });
        }
    }
    if spec.normalize {
        for i in 0..n {
            let v = entries[(i, i)];
            if v > 1.0 + NORM_SLACK {
                return Err(Error::NormalizationViolated { point: i, value: v });
            }
        }
    }
    let diag = (0..n).map(|i| entries[(i, i)]).collect();
    Ok(GramMatrix { entries, diag })
}

/// Squared feature-space distance between points `i` and `j`, clamped at zero.
pub fn kernel_dist_sq(k: &GramMatrix, i: usize, j: usize) -> Result<f64> {
    let n = k.n();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    Ok(k.dist_sq(i, j))
}

pub(crate) fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), 1e-15, 0).ok_or(Error::SpectralFailure)?;
    Ok(eig.eigenvalues.iter().cloned().collect())
}

pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m.clone(), 1e-15, 0).ok_or(Error::SpectralFailure)
}

/// Eigenvalues sorted nonincreasing, tiny negatives clamped to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn of(k: &GramMatrix) -> Result<Self> {
        Ok(Self::from_eigenvalues(symmetric_eigenvalues(k.matrix())?))
    }

    pub fn from_eigenvalues(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Self { eigenvalues: values }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `Σ λ_i / (λ_i + 1)`.
    pub fn effective_dimension(&self) -> f64 {
        self.eigenvalues.iter().map(|&l| l / (l + 1.0)).sum()
    }
}

/// `Tr(K (K + I)^{-1})` over the clamped spectrum of `k`.
pub fn effective_dimension(k: &GramMatrix) -> Result<f64> {
    Ok(Spectrum::of(k)?.effective_dimension())
}

/// Upper bound `(1 + c/(α − 1))·√k` on the effective dimension of a spectrum
/// with `λ_i ≤ c·i^{−α}`.
pub fn eigendecay_xi_bound(c: f64, alpha: f64, k: usize) -> Result<f64> {
    if !(alpha > 1.0 && c > 0.0) || !alpha.is_finite() || !c.is_finite() {
        return Err(Error::InvalidDecayParams { alpha, c });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    Ok((1.0 + c / (alpha - 1.0)) * (k as f64).sqrt())
}
