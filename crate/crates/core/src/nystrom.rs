//! Nyström kernel k-means.
//!
//! Points are projected onto the span of `m` sampled landmarks. With
//! `T = (K_mm + jitter·I)^{-1/2}` (pseudo-inverse, small eigenvalues cut), the
//! coordinates `Z = K_nm T` satisfy `⟨Φ_i, PΦ_j⟩ = z_i · z_j`, and the squared
//! distance from `Φ_i` to any center in the landmark span splits into
//! `‖z_i − z_c‖² + r_i` with `r_i = K_ii − ‖z_i‖²`.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{Assignment, ClusterCostTrace, DEFAULT_MAX_ITER, DEFAULT_REL_TOL};
use crate::error::{Error, Result};
use crate::fmt::format_float;
use crate::kernel::{symmetric_eigen, GramMatrix};
use crate::seeding::sample_proportional;

/// Eigenvalues of the landmark block below this fraction of the largest are dropped.
pub const EIGEN_CUTOFF: f64 = 1e-10;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_C_SCALE: f64 = 1.0;

/// Sorted, distinct landmark indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSet {
    indices: Vec<usize>,
}

impl LandmarkSet {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::MTooLarge { m: 0, n });
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("landmark indices must be distinct".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::IndexOutOfRange { index: last, len: n });
            }
        }
        Ok(Self { indices })
    }

    pub fn all(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }
}

/// `m` indices drawn uniformly without replacement from `0..n`.
pub fn sample_landmarks_uniform<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<LandmarkSet> {
    if m == 0 || m > n {
        return Err(Error::MTooLarge { m, n });
    }
    let picked = rand::seq::index::sample(rng, n, m).into_vec();
    LandmarkSet::new(picked, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkMode {
    /// `√n · log(1/δ) · min(k, Ξ) / √k`
    General,
    /// `√n · log(1/δ)`, for algebraically decaying spectra.
    Eigendecay,
    /// `√n · log(1/δ) · min(k, Ξ) / k`, the regime with risk linear in `k`.
    LinearK,
}

impl LandmarkMode {
    pub const ALL: [LandmarkMode; 3] = [LandmarkMode::General, LandmarkMode::Eigendecay, LandmarkMode::LinearK];

    pub fn name(&self) -> &'static str {
        match self {
            LandmarkMode::General => "general",
            LandmarkMode::Eigendecay => "eigendecay",
            LandmarkMode::LinearK => "linear_k",
        }
    }
}

/// Landmark count prescription, scaled by `c_scale` and clamped to `[1, n]`.
pub fn landmark_size(
    n: usize,
    k: usize,
    delta: f64,
    xi: Option<f64>,
    mode: LandmarkMode,
    c_scale: f64,
) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("n and k must be >= 1".into()));
    }
    if !(c_scale > 0.0 && c_scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "c_scale must be positive, got {c_scale}"
        )));
    }
    let base = c_scale * (n as f64).sqrt() * (1.0 / delta).ln();
    let kf = k as f64;
    let raw = match mode {
        LandmarkMode::Eigendecay => base,
        LandmarkMode::General | LandmarkMode::LinearK => {
            let xi = xi.ok_or(Error::MissingXi)?;
            if xi.is_nan() || xi < 0.0 {
                return Err(Error::InvalidArgument(format!("xi must be nonnegative, got {xi}")));
            }
            let capped = kf.min(xi);
            if mode == LandmarkMode::General {
                base * capped / kf.sqrt()
            } else {
                base * capped / kf
            }
        }
    };
    Ok((raw.ceil() as usize).clamp(1, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDataset {
    coords: DMatrix<f64>,
    residuals: Vec<f64>,
    jitter: f64,
    transform: DMatrix<f64>,
    landmarks: LandmarkSet,
    rank: usize,
}

impl EmbeddedDataset {
    /// `n × m` coordinates.
    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    /// Number of landmark-block eigenvalues kept by the cutoff.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// True when the pseudo-inverse dropped directions.
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.landmarks.m()
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn m(&self) -> usize {
        self.coords.ncols()
    }

    /// Coefficients over the landmark points of the feature-space vector whose
    /// coordinates are `center`: `c = Σ_l coeff_l Φ_{landmark l}`.
    pub fn center_coefficients(&self, center: &[f64]) -> Result<Vec<f64>> {
        if center.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: center.len(),
            });
        }
        let v = &self.transform * nalgebra::DVector::from_column_slice(center);
        Ok(v.iter().cloned().collect())
    }

    /// CSV with columns `z0..z{m-1},residual`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header: Vec<String> = (0..self.m()).map(|j| format!("z{j}")).collect();
        header.push("residual".into());
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.n() {
            let mut row: Vec<String> = (0..self.m()).map(|j| format_float(self.coords[(i, j)])).collect();
            row.push(format_float(self.residuals[i]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Projects every point onto the span of the landmarks.
pub fn nystrom_embed(k: &GramMatrix, landmarks: &LandmarkSet, jitter: f64) -> Result<EmbeddedDataset> {
    let n = k.n();
    if landmarks.indices().last().is_some_and(|&l| l >= n) {
        return Err(Error::IndexOutOfRange {
            index: *landmarks.indices().last().unwrap(),
            len: n,
        });
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "jitter must be nonnegative, got {jitter}"
        )));
    }
    let idx = landmarks.indices();
    let m = idx.len();
    let mut block = k.block(idx, idx);
    for d in 0..m {
        block[(d, d)] += jitter;
    }
    let eig = symmetric_eigen(&block)?;
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if lmax.is_nan() || lmax <= 0.0 {
        return Err(Error::SingularLandmarkBlock);
    }
    let cut = EIGEN_CUTOFF * lmax;
    let mut transform = DMatrix::zeros(m, m);
    let mut rank = 0;
    for (e, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cut {
            rank += 1;
            let u = eig.eigenvectors.column(e);
            transform += (u * u.transpose()) / lambda.sqrt();
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let coords = k.block(&all, idx) * &transform;
    let residuals = (0..n)
        .map(|i| (k.diag()[i] - coords.row(i).norm_squared()).max(0.0))
        .collect();
    Ok(EmbeddedDataset {
        coords,
        residuals,
        jitter,
        transform,
        landmarks: landmarks.clone(),
        rank,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NystromInit {
    KMeansPP,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NystromOptions {
    pub init: NystromInit,
    pub jitter: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for NystromOptions {
    fn default() -> Self {
        Self {
            init: NystromInit::KMeansPP,
            jitter: 0.0,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NystromResult {
    pub assignment: Assignment,
    /// `W(C, P_n)` with the centers viewed in feature space.
    pub cost_in_h: f64,
    /// Mean squared distance in landmark coordinates only.
    pub cost_projected: f64,
    /// `k × m` centers in landmark coordinates.
    pub centers: DMatrix<f64>,
    pub trace: ClusterCostTrace,
}

fn row_dist_sq(coords: &DMatrix<f64>, i: usize, center: &DMatrix<f64>, j: usize) -> f64 {
    (0..coords.ncols())
        .map(|c| {
            let d = coords[(i, c)] - center[(j, c)];
            d * d
        })
        .sum()
}

fn means(coords: &DMatrix<f64>, a: &Assignment) -> DMatrix<f64> {
    let mut centers = DMatrix::zeros(a.k(), coords.ncols());
    for (i, &l) in a.labels().iter().enumerate() {
        for c in 0..coords.ncols() {
            centers[(l, c)] += coords[(i, c)];
        }
    }
    for (j, &size) in a.cluster_sizes().iter().enumerate() {
        if size > 0 {
            for c in 0..coords.ncols() {
                centers[(j, c)] /= size as f64;
            }
        }
    }
    centers
}

fn projected_cost(coords: &DMatrix<f64>, a: &Assignment, centers: &DMatrix<f64>) -> f64 {
    let n = coords.nrows();
    (0..n)
        .map(|i| row_dist_sq(coords, i, centers, a.labels()[i]))
        .sum::<f64>()
        / n as f64
}

fn nearest_rows(coords: &DMatrix<f64>, centers: &DMatrix<f64>, sizes: Option<&[usize]>) -> (Vec<usize>, Vec<f64>) {
    let n = coords.nrows();
    let kc = centers.nrows();
    let mut dist = vec![f64::INFINITY; n * kc];
    let mut labels = vec![0; n];
    for i in 0..n {
        let mut best = usize::MAX;
        for j in 0..kc {
            if sizes.is_some_and(|s| s[j] == 0) {
                continue;
            }
            let d = row_dist_sq(coords, i, centers, j);
            dist[i * kc + j] = d;
            if best == usize::MAX || d < dist[i * kc + best] {
                best = j;
            }
        }
        labels[i] = best;
    }
    (labels, dist)
}

/// Euclidean Lloyd on the landmark coordinates, starting from `init`.
pub fn nystrom_lloyd(emb: &EmbeddedDataset, init: &Assignment, max_iter: usize, rel_tol: f64) -> Result<NystromResult> {
    let coords = emb.coords();
    let n = coords.nrows();
    if init.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: init.n(),
        });
    }
    if init.k() > n {
        return Err(Error::KTooLarge { k: init.k(), n });
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    let mut current = init.clone();
    if current.first_empty().is_some() {
        let centers = means(coords, &current);
        let (_, dist) = nearest_rows(coords, &centers, Some(current.cluster_sizes()));
        crate::clustering::repair_empty(&mut current, &dist);
    }
    let mut centers = means(coords, &current);
    let mut cost = projected_cost(coords, &current, &centers);
    let mut trace = ClusterCostTrace {
        per_iteration_cost: vec![cost],
        converged: false,
        iterations: 0,
    };
    for it in 1..=max_iter {
        let (labels, dist) = nearest_rows(coords, &centers, Some(current.cluster_sizes()));
        let mut next = Assignment::new(labels, current.k())?;
        crate::clustering::repair_empty(&mut next, &dist);
        let changed = next.labels() != current.labels();
        let next_centers = means(coords, &next);
        let new_cost = projected_cost(coords, &next, &next_centers);
        trace.iterations = it;
        trace.per_iteration_cost.push(new_cost);
        current = next;
        centers = next_centers;
        let drop = (cost - new_cost) / cost.abs().max(f64::MIN_POSITIVE);
        cost = new_cost;
        if !changed || drop < rel_tol {
            trace.converged = true;
            break;
        }
    }
    let residual_mean = emb.residuals().iter().sum::<f64>() / n as f64;
    Ok(NystromResult {
        assignment: current,
        cost_in_h: cost + residual_mean,
        cost_projected: cost,
        centers,
        trace,
    })
}

/// Initial assignment in landmark coordinates by k-means++ or uniform random centers.
pub fn nystrom_initial_assignment<R: Rng + ?Sized>(
    emb: &EmbeddedDataset,
    clusters: usize,
    init: NystromInit,
    rng: &mut R,
) -> Result<Assignment> {
    let coords = emb.coords();
    let n = coords.nrows();
    if clusters == 0 {
        return Err(Error::InvalidK { k: 0, n });
    }
    if clusters > n {
        return Err(Error::KTooLarge { k: clusters, n });
    }
    let chosen: Vec<usize> = match init {
        NystromInit::Random => rand::seq::index::sample(rng, n, clusters).into_vec(),
        NystromInit::KMeansPP => {
            let mut chosen = vec![rng.random_range(0..n)];
            let mut best = vec![f64::INFINITY; n];
            while chosen.len() < clusters {
                let last = *chosen.last().unwrap();
                for (i, b) in best.iter_mut().enumerate() {
                    let d: f64 = (0..coords.ncols())
                        .map(|c| (coords[(i, c)] - coords[(last, c)]).powi(2))
                        .sum();
                    *b = b.min(d);
                }
                let next = match sample_proportional(rng, &best) {
                    Some(i) => i,
                    None => {
                        let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                        free[rng.random_range(0..free.len())]
                    }
                };
                chosen.push(next);
            }
            chosen
        }
    };
    let centers = DMatrix::from_fn(clusters, coords.ncols(), |j, c| coords[(chosen[j], c)]);
    let (labels, dist) = nearest_rows(coords, &centers, None);
    let mut a = Assignment::new(labels, clusters)?;
    crate::clustering::repair_empty(&mut a, &dist);
    Ok(a)
}

/// Lloyd in landmark coordinates from a fresh initialization on an existing embedding.
pub fn nystrom_kkmeans_embedded<R: Rng + ?Sized>(
    emb: &EmbeddedDataset,
    clusters: usize,
    opts: &NystromOptions,
    rng: &mut R,
) -> Result<NystromResult> {
    let init = nystrom_initial_assignment(emb, clusters, opts.init, rng)?;
    nystrom_lloyd(emb, &init, opts.max_iter, opts.rel_tol)
}

/// Approximate kernel k-means with centers restricted to the landmark span.
///
/// Memory beyond the Gram matrix is the `n × m` coordinates, the `m × m`
/// transform, `n` residuals and `k × m` centers.
pub fn nystrom_kkmeans<R: Rng + ?Sized>(
    k: &GramMatrix,
    landmarks: &LandmarkSet,
    clusters: usize,
    opts: &NystromOptions,
    rng: &mut R,
) -> Result<NystromResult> {
    let emb = nystrom_embed(k, landmarks, opts.jitter)?;
    nystrom_kkmeans_embedded(&emb, clusters, opts, rng)
}
