//! Excess clustering risk on finite-support distributions.
//!
//! With finitely many atoms every population quantity is a finite sum, so the
//! risk of a fitted center set is computed exactly from the atom Gram matrix.
//! Fitted centers always lie in the span of the sampled points, which is a
//! subset of the atoms, so each center is carried as a coefficient vector over
//! atoms.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{brute_force_erm, brute_force_erm_weighted, Assignment, Weights};
use crate::clustering::{BRUTE_FORCE_MAX_K, BRUTE_FORCE_MAX_N, DEFAULT_MAX_ITER, DEFAULT_REL_TOL};
use crate::error::{Error, Result};
use crate::fmt::format_float;
use crate::kernel::{effective_dimension, gram_matrix, GramMatrix, KernelSpec};
use crate::nystrom::{
    landmark_size, nystrom_embed, nystrom_kkmeans_embedded, sample_landmarks_uniform, LandmarkMode, NystromInit,
    NystromOptions, NystromResult,
};
use crate::rng::{derived, mix};
use crate::seeding::{approximate_erm_restarts, sample_proportional, ApproxErmOptions};

/// Restarts of the approximate solver standing in for exact ERM.
pub const ERM_RESTARTS: usize = 20;
/// Restarts used for the optimal-risk surrogate when enumeration is too large.
pub const SURROGATE_RESTARTS: usize = 200;
/// Atoms per blob in the standard benchmark.
pub const BENCHMARK_ATOMS_PER_BLOB: usize = 6;
pub const BENCHMARK_BANDWIDTH: f64 = 1.0;
pub const BENCHMARK_BLOB_SPREAD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub kernel: KernelSpec,
    pub generator_seed: u64,
}

impl DistributionSpec {
    pub fn uniform(atoms: Vec<Vec<f64>>, kernel: KernelSpec, generator_seed: u64) -> Self {
        let n = atoms.len().max(1);
        Self {
            weights: vec![1.0 / n as f64; atoms.len()],
            atoms,
            kernel,
            generator_seed,
        }
    }
}

/// `2·blobs` clouds of six atoms each on the unit sphere of R³, uniform
/// weights, Gaussian kernel with bandwidth 1.
pub fn standard_benchmark(blobs: usize, seed: u64) -> DistributionSpec {
    blob_benchmark(blobs, BENCHMARK_BLOB_SPREAD, seed)
}

/// Same construction as [`standard_benchmark`] with a chosen blob spread.
pub fn blob_benchmark(blobs: usize, spread: f64, seed: u64) -> DistributionSpec {
    let mut rng = derived(seed, 0);
    let sphere_point = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..3).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    };
    let centers: Vec<Vec<f64>> = (0..2 * blobs).map(|_| sphere_point(&mut rng)).collect();
    let mut atoms = Vec::with_capacity(centers.len() * BENCHMARK_ATOMS_PER_BLOB);
    for c in &centers {
        for _ in 0..BENCHMARK_ATOMS_PER_BLOB {
            let v: Vec<f64> = c
                .iter()
                .map(|x| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x + spread * z
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            atoms.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    DistributionSpec::uniform(atoms, KernelSpec::gaussian(BENCHMARK_BANDWIDTH), seed)
}

/// A validated distribution with its atom Gram matrix.
#[derive(Debug, Clone)]
pub struct Population {
    spec: DistributionSpec,
    gram: GramMatrix,
}

impl Population {
    pub fn new(spec: DistributionSpec) -> Result<Self> {
        if spec.atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        if spec.weights.len() != spec.atoms.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for {} atoms",
                spec.weights.len(),
                spec.atoms.len()
            )));
        }
        if spec.weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(Error::InvalidDistribution("weights must be nonnegative".into()));
        }
        let total: f64 = spec.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        let kernel = KernelSpec {
            normalize: true,
            ..spec.kernel
        };
        let gram = gram_matrix(&kernel, &spec.atoms)?;
        Ok(Self { spec, gram })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn weights(&self) -> &[f64] {
        &self.spec.weights
    }

    pub fn atoms(&self) -> usize {
        self.spec.atoms.len()
    }

    /// `n` i.i.d. atom indices drawn by weight.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n)
            .map(|_| sample_proportional(rng, &self.spec.weights).expect("weights have unit mass"))
            .collect()
    }

    fn support(&self) -> Vec<usize> {
        (0..self.atoms()).filter(|&a| self.spec.weights[a] > 0.0).collect()
    }
}

/// `Σ_a w_a min_j ‖Φ(atom_a) − c_j‖²` for centers given as coefficient vectors
/// over the atoms.
pub fn population_risk(pop: &Population, centers: &[Vec<f64>]) -> Result<f64> {
    let big_n = pop.atoms();
    if centers.is_empty() {
        return Err(Error::InvalidArgument("at least one center required".into()));
    }
    if let Some(bad) = centers.iter().find(|c| c.len() != big_n) {
        return Err(Error::CoefficientDimensionMismatch {
            expected: big_n,
            got: bad.len(),
        });
    }
    let g = pop.gram();
    // u_j = K α_j, norm_j = α_jᵀ K α_j
    let projections: Vec<(Vec<f64>, f64)> = centers
        .iter()
        .map(|alpha| {
            let u: Vec<f64> = (0..big_n)
                .map(|a| (0..big_n).map(|b| g.get(a, b) * alpha[b]).sum())
                .collect();
            let norm = alpha.iter().zip(&u).map(|(x, y)| x * y).sum();
            (u, norm)
        })
        .collect();
    Ok((0..big_n)
        .filter(|&a| pop.weights()[a] > 0.0)
        .map(|a| {
            let best = projections
                .iter()
                .map(|(u, norm)| (g.diag()[a] - 2.0 * u[a] + norm).max(0.0))
                .fold(f64::INFINITY, f64::min);
            pop.weights()[a] * best
        })
        .sum())
}

/// Cluster means of a sample, as coefficient vectors over atoms.
pub fn mean_centers(sample: &[usize], assignment: &Assignment, atoms: usize) -> Vec<Vec<f64>> {
    let mut centers = vec![vec![0.0; atoms]; assignment.k()];
    for (i, &l) in assignment.labels().iter().enumerate() {
        centers[l][sample[i]] += 1.0 / assignment.cluster_sizes()[l] as f64;
    }
    centers
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalRisk {
    pub value: f64,
    /// False when the value comes from the multi-restart surrogate.
    pub exact: bool,
}

/// `W*(P)`: exact by weighted partition enumeration for at most 12 support atoms
/// and `k ≤ 4`, otherwise the best of 200 seeded weighted solver runs.
pub fn optimal_risk(pop: &Population, k: usize) -> Result<OptimalRisk> {
    if k == 0 {
        return Err(Error::InvalidK { k, n: pop.atoms() });
    }
    let support = pop.support();
    if k >= support.len() {
        return Ok(OptimalRisk {
            value: 0.0,
            exact: true,
        });
    }
    let gram = pop.gram().submatrix(&support)?;
    let w: Vec<f64> = support.iter().map(|&a| pop.weights()[a]).collect();
    if support.len() <= BRUTE_FORCE_MAX_N && k <= BRUTE_FORCE_MAX_K {
        let (_, value) = brute_force_erm_weighted(&gram, k, Weights::Explicit(&w))?;
        return Ok(OptimalRisk { value, exact: true });
    }
    let mut rng = derived(pop.spec().generator_seed, mix(&[0x0F7, k as u64]));
    let opts = ApproxErmOptions::default();
    let (_, value) = approximate_erm_restarts(&gram, k, Weights::Explicit(&w), SURROGATE_RESTARTS, &opts, &mut rng)?;
    Ok(OptimalRisk { value, exact: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Best of 20 approximate-ERM restarts with Lloyd refinement.
    ExactErmApprox,
    Nystrom,
    /// A single approximate-ERM run.
    ApproxErm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ExactErmApprox, Method::Nystrom, Method::ApproxErm];

    pub fn name(&self) -> &'static str {
        match self {
            Method::ExactErmApprox => "exact_erm_approx",
            Method::Nystrom => "nystrom",
            Method::ApproxErm => "approx_erm",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "exact_erm_approx" | "exact" => Some(Method::ExactErmApprox),
            "nystrom" => Some(Method::Nystrom),
            "approx_erm" | "approx" => Some(Method::ApproxErm),
            _ => None,
        }
    }

    fn code(&self) -> u64 {
        match self {
            Method::ExactErmApprox => 1,
            Method::Nystrom => 2,
            Method::ApproxErm => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum MPolicy {
    Fixed {
        m: usize,
    },
    /// `landmark_size` in general mode, with `Ξ` of the sample Gram matrix.
    General {
        c_scale: f64,
        delta: f64,
    },
    Eigendecay {
        c_scale: f64,
        delta: f64,
    },
}

impl Default for MPolicy {
    fn default() -> Self {
        MPolicy::General {
            c_scale: crate::nystrom::DEFAULT_C_SCALE,
            delta: crate::nystrom::DEFAULT_DELTA,
        }
    }
}

impl MPolicy {
    pub fn landmarks_for(&self, gram: &GramMatrix, k: usize) -> Result<usize> {
        let n = gram.n();
        match *self {
            MPolicy::Fixed { m } => {
                if m == 0 {
                    return Err(Error::MTooLarge { m, n });
                }
                Ok(m.min(n))
            }
            MPolicy::General { c_scale, delta } => {
                let xi = effective_dimension(gram)?;
                landmark_size(n, k, delta, Some(xi), LandmarkMode::General, c_scale)
            }
            MPolicy::Eigendecay { c_scale, delta } => {
                landmark_size(n, k, delta, None, LandmarkMode::Eigendecay, c_scale)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOptions {
    pub erm_restarts: usize,
    /// Best-of restarts for the Nyström fit.
    pub nystrom_restarts: usize,
    pub rounds: Option<usize>,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub jitter: f64,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            erm_restarts: ERM_RESTARTS,
            nystrom_restarts: ERM_RESTARTS,
            rounds: None,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
            jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub n: usize,
    pub k: usize,
    pub method: Method,
    /// Mean landmark count over reps (Nyström only).
    pub m_used: Option<f64>,
    pub reps: usize,
    pub mean_empirical_risk: f64,
    pub mean_population_risk: f64,
    pub optimal_risk: f64,
    pub optimal_exact: bool,
    pub mean_excess_risk: f64,
    pub std_error: f64,
    pub mean_generalization_gap: f64,
}

impl CellRecord {
    pub const CSV_HEADER: &'static str = "n,k,method,m_used,reps,mean_empirical_risk,mean_population_risk,\
optimal_risk,optimal_exact,mean_excess_risk,std_error,mean_generalization_gap";

    pub fn csv_row(&self) -> String {
        [
            self.n.to_string(),
            self.k.to_string(),
            self.method.name().to_string(),
            self.m_used.map(format_float).unwrap_or_default(),
            self.reps.to_string(),
            format_float(self.mean_empirical_risk),
            format_float(self.mean_population_risk),
            format_float(self.optimal_risk),
            self.optimal_exact.to_string(),
            format_float(self.mean_excess_risk),
            format_float(self.std_error),
            format_float(self.mean_generalization_gap),
        ]
        .join(",")
    }

    /// `mean ± 2·se` intervals of the two cells intersect.
    pub fn overlaps(&self, other: &CellRecord) -> bool {
        (self.mean_excess_risk - other.mean_excess_risk).abs() <= 2.0 * (self.std_error + other.std_error)
    }
}

struct RepOutcome {
    empirical: f64,
    population: f64,
    m: Option<usize>,
}

fn fit_rep<R: Rng + ?Sized>(
    pop: &Population,
    n: usize,
    k: usize,
    method: Method,
    policy: &MPolicy,
    opts: &CellOptions,
    rng: &mut R,
) -> Result<RepOutcome> {
    let sample = pop.sample(n, rng);
    let gram = pop.gram().submatrix(&sample)?;
    let atoms = pop.atoms();
    let approx = ApproxErmOptions {
        rounds: opts.rounds,
        lloyd_refine: true,
        max_iter: opts.max_iter,
        rel_tol: opts.rel_tol,
    };
    match method {
        Method::ExactErmApprox | Method::ApproxErm => {
            let restarts = if method == Method::ApproxErm {
                1
            } else {
                opts.erm_restarts
            };
            let (a, empirical) = approximate_erm_restarts(&gram, k, Weights::Uniform, restarts, &approx, rng)?;
            let centers = mean_centers(&sample, &a, atoms);
            Ok(RepOutcome {
                empirical,
                population: population_risk(pop, &centers)?,
                m: None,
            })
        }
        Method::Nystrom => {
            let m = policy.landmarks_for(&gram, k)?;
            let landmarks = sample_landmarks_uniform(n, m, rng)?;
            let emb = nystrom_embed(&gram, &landmarks, opts.jitter)?;
            let nopts = NystromOptions {
                init: NystromInit::KMeansPP,
                jitter: opts.jitter,
                max_iter: opts.max_iter,
                rel_tol: opts.rel_tol,
            };
            let mut best: Option<NystromResult> = None;
            for _ in 0..opts.nystrom_restarts.max(1) {
                let r = nystrom_kkmeans_embedded(&emb, k, &nopts, rng)?;
                if best.as_ref().is_none_or(|b| r.cost_in_h < b.cost_in_h) {
                    best = Some(r);
                }
            }
            let best = best.expect("at least one restart");
            let mut centers = vec![vec![0.0; atoms]; k];
            for (j, center) in centers.iter_mut().enumerate() {
                let row: Vec<f64> = best.centers.row(j).iter().cloned().collect();
                let coeff = emb.center_coefficients(&row)?;
                for (&l, c) in landmarks.indices().iter().zip(coeff) {
                    center[sample[l]] += c;
                }
            }
            Ok(RepOutcome {
                empirical: best.cost_in_h,
                population: population_risk(pop, &centers)?,
                m: Some(m),
            })
        }
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let t = values.len() as f64;
    let mean = values.iter().sum::<f64>() / t;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1.0);
    (mean, (var / t).sqrt())
}

/// Runs `reps` independent fits with per-rep streams derived from
/// `(master_seed, cell, rep)`. Output does not depend on thread count.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    pop: &Population,
    n: usize,
    k: usize,
    method: Method,
    policy: &MPolicy,
    reps: usize,
    master_seed: u64,
    opts: &CellOptions,
) -> Result<CellRecord> {
    let optimal = optimal_risk(pop, k)?;
    run_cell_with_optimum(pop, n, k, method, policy, reps, master_seed, opts, optimal)
}

#[allow(clippy::too_many_arguments)]
pub fn run_cell_with_optimum(
    pop: &Population,
    n: usize,
    k: usize,
    method: Method,
    policy: &MPolicy,
    reps: usize,
    master_seed: u64,
    opts: &CellOptions,
    optimal: OptimalRisk,
) -> Result<CellRecord> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let cell_id = mix(&[n as u64, k as u64, method.code()]);
    let outcomes: Vec<RepOutcome> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = derived(master_seed, mix(&[cell_id, rep as u64]));
            fit_rep(pop, n, k, method, policy, opts, &mut rng)
        })
        .collect::<Result<_>>()?;
    let population: Vec<f64> = outcomes.iter().map(|o| o.population).collect();
    let empirical: Vec<f64> = outcomes.iter().map(|o| o.empirical).collect();
    let gaps: Vec<f64> = outcomes.iter().map(|o| o.population - o.empirical).collect();
    let (mean_pop, se) = mean_and_se(&population);
    let m_used = if method == Method::Nystrom {
        Some(outcomes.iter().map(|o| o.m.unwrap_or(0) as f64).sum::<f64>() / reps as f64)
    } else {
        None
    };
    Ok(CellRecord {
        n,
        k,
        method,
        m_used,
        reps,
        mean_empirical_risk: mean_and_se(&empirical).0,
        mean_population_risk: mean_pop,
        optimal_risk: optimal.value,
        optimal_exact: optimal.exact,
        mean_excess_risk: mean_pop - optimal.value,
        std_error: se,
        mean_generalization_gap: mean_and_se(&gaps).0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    K,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    /// Twice the standard error of the slope.
    pub half_width: f64,
    pub cells_used: usize,
    /// Axis values dropped because their excess risk was not positive.
    pub excluded: Vec<usize>,
}

/// Least-squares slope of `log(excess)` against `log(axis value)`.
pub fn scaling_fit(cells: &[CellRecord], axis: Axis) -> Result<ScalingFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for c in cells {
        let x = match axis {
            Axis::N => c.n,
            Axis::K => c.k,
        };
        if c.mean_excess_risk > 0.0 {
            xs.push((x as f64).ln());
            ys.push(c.mean_excess_risk.ln());
        } else {
            excluded.push(x);
        }
    }
    let m = xs.len();
    if m < 3 {
        return Err(Error::NonPositiveRisk(m));
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx.is_nan() || sxx <= 0.0 {
        return Err(Error::InvalidArgument("scaling fit needs distinct axis values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let se = (rss / (mf - 2.0) / sxx).sqrt();
    Ok(ScalingFit {
        exponent: slope,
        half_width: 2.0 * se,
        cells_used: m,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub cells: Vec<CellRecord>,
    /// Fit over `n` at the smallest `k`, for the reference method.
    pub alpha_n: Option<ScalingFit>,
    /// Fit over `k` at the largest `n`, for the reference method.
    pub alpha_k: Option<ScalingFit>,
}

impl RiskReport {
    pub fn from_cells(cells: Vec<CellRecord>, reference: Method) -> Self {
        let of_method: Vec<&CellRecord> = cells.iter().filter(|c| c.method == reference).collect();
        let alpha_n = of_method.iter().map(|c| c.k).min().and_then(|k0| {
            let slice: Vec<CellRecord> = of_method.iter().filter(|c| c.k == k0).map(|c| (*c).clone()).collect();
            scaling_fit(&slice, Axis::N).ok()
        });
        let alpha_k = of_method.iter().map(|c| c.n).max().and_then(|n0| {
            let slice: Vec<CellRecord> = of_method.iter().filter(|c| c.n == n0).map(|c| (*c).clone()).collect();
            scaling_fit(&slice, Axis::K).ok()
        });
        Self {
            cells,
            alpha_n,
            alpha_k,
        }
    }

    pub fn cell(&self, n: usize, k: usize, method: Method) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.n == n && c.k == k && c.method == method)
    }

    /// `(overlapping, compared)` over `(n, k)` cells present for both methods.
    pub fn compare(&self, a: Method, b: Method) -> (usize, usize) {
        let mut overlapping = 0;
        let mut compared = 0;
        for ca in self.cells.iter().filter(|c| c.method == a) {
            if let Some(cb) = self.cell(ca.n, ca.k, b) {
                compared += 1;
                if ca.overlaps(cb) {
                    overlapping += 1;
                }
            }
        }
        (overlapping, compared)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", CellRecord::CSV_HEADER)?;
        for c in &self.cells {
            writeln!(out, "{}", c.csv_row())?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let fmt_fit = |f: &Option<ScalingFit>| match f {
            Some(f) => format!(
                "{} +/- {} ({} cells)",
                format_float(f.exponent),
                format_float(f.half_width),
                f.cells_used
            ),
            None => "n/a".to_string(),
        };
        let mut s = String::new();
        s.push_str(&format!("alpha_n: {}\n", fmt_fit(&self.alpha_n)));
        s.push_str(&format!("alpha_k: {}\n", fmt_fit(&self.alpha_k)));
        let (ov, total) = self.compare(Method::ExactErmApprox, Method::Nystrom);
        if total > 0 {
            s.push_str(&format!("exact_vs_nystrom_overlap: {ov}/{total}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub master_seed: u64,
    pub policy: MPolicy,
    pub options: CellOptions,
}

/// Every `(n, k, method)` cell, in grid order.
pub fn run_sweep(pop: &Population, cfg: &SweepConfig) -> Result<RiskReport> {
    if cfg.n_values.is_empty() || cfg.k_values.is_empty() || cfg.methods.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be nonempty".into()));
    }
    let mut cells = Vec::new();
    for &k in &cfg.k_values {
        let optimal = optimal_risk(pop, k)?;
        for &n in &cfg.n_values {
            for &method in &cfg.methods {
                cells.push(run_cell_with_optimum(
                    pop,
                    n,
                    k,
                    method,
                    &cfg.policy,
                    cfg.reps,
                    cfg.master_seed,
                    &cfg.options,
                    optimal,
                )?);
            }
        }
    }
    let reference = if cfg.methods.contains(&Method::ExactErmApprox) {
        Method::ExactErmApprox
    } else {
        cfg.methods[0]
    };
    Ok(RiskReport::from_cells(cells, reference))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaSummary {
    pub ratios: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub p95: f64,
    pub min: f64,
}

/// Ratio of solver cost to exact ERM cost; `1` when both vanish.
pub fn beta_ratio(approx: f64, optimum: f64) -> f64 {
    if optimum <= 1e-12 {
        if approx <= 1e-12 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        approx / optimum
    }
}

/// Measured `W(C^A, P_n) / W(C_n, P_n)` on random tiny samples from `pop`
/// (`4 ≤ n ≤ 8`, `k ∈ {2, 3}`), solver = one k-means++ + local search +
/// Lloyd run, denominator by exhaustive enumeration.
pub fn beta_ratio_study(pop: &Population, instances: usize, seed: u64) -> Result<BetaSummary> {
    if instances == 0 {
        return Err(Error::InvalidArgument("instances must be >= 1".into()));
    }
    let ratios: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|t| {
            let mut rng = derived(seed, t as u64);
            let n = rng.random_range(4..=8usize);
            let k = rng.random_range(2..=3usize);
            let sample = pop.sample(n, &mut rng);
            let gram = pop.gram().submatrix(&sample)?;
            let (_, optimum) = brute_force_erm(&gram, k)?;
            let (_, approx) =
                approximate_erm_restarts(&gram, k, Weights::Uniform, 1, &ApproxErmOptions::default(), &mut rng)?;
            Ok(beta_ratio(approx, optimum))
        })
        .collect::<Result<_>>()?;
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let idx = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    Ok(BetaSummary {
        max: *sorted.last().unwrap(),
        min: sorted[0],
        mean: ratios.iter().sum::<f64>() / ratios.len() as f64,
        p95: sorted[idx],
        ratios,
    })
}
