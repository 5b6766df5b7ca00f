//! Kernel k-means++ seeding and swap-based local search.
//!
//! Centers here are data points. The reported cost of a center set is the
//! mean-centroid cost of the assignment it induces, so it is directly
//! comparable with [`crate::clustering::cluster_cost`].

use rand::Rng;

use crate::clustering::{cluster_cost_weighted, kernel_lloyd_weighted, repair_empty, Assignment, Weights};
use crate::clustering::{DEFAULT_MAX_ITER, DEFAULT_REL_TOL};
use crate::error::{Error, Result};
use crate::kernel::GramMatrix;

/// Swaps must lower the cost by more than this to be accepted.
pub const SWAP_IMPROVEMENT: f64 = 1e-12;
/// Local-search rounds per cluster when no budget is given.
pub const ROUNDS_PER_CLUSTER: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedingResult {
    pub center_indices: Vec<usize>,
    pub induced: Assignment,
    pub cost: f64,
    pub swaps_accepted: usize,
}

/// Point weights for D² sampling: `w_i · min_c ‖Φ_i − Φ_c‖²`.
/// Points that coincide with a chosen center get exactly zero.
pub fn d2_weights(k: &GramMatrix, centers: &[usize], w: Weights) -> Vec<f64> {
    let n = k.n();
    (0..n)
        .map(|i| {
            let d = centers.iter().map(|&c| k.dist_sq(i, c)).fold(f64::INFINITY, f64::min);
            let wi = match w {
                Weights::Uniform => 1.0,
                Weights::Explicit(ws) => ws[i],
            };
            if d.is_finite() {
                wi * d
            } else {
                wi
            }
        })
        .collect()
}

/// Draws an index with probability proportional to `weights`; `None` if all are zero.
pub(crate) fn sample_proportional<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &wt) in weights.iter().enumerate() {
        if wt > 0.0 {
            acc += wt;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// Nearest-center assignment (lowest center position wins ties).
pub fn induced_assignment(k: &GramMatrix, centers: &[usize]) -> Result<Assignment> {
    let n = k.n();
    let kc = centers.len();
    let mut dist = vec![0.0; n * kc];
    let mut labels = vec![0; n];
    for i in 0..n {
        let row = &mut dist[i * kc..(i + 1) * kc];
        for (p, &c) in centers.iter().enumerate() {
            row[p] = k.dist_sq(i, c);
        }
        let mut best = 0;
        for p in 1..kc {
            if row[p] < row[best] {
                best = p;
            }
        }
        labels[i] = best;
    }
    let mut a = Assignment::new(labels, kc)?;
    // only reachable when centers coincide in feature space
    repair_empty(&mut a, &dist);
    Ok(a)
}

fn evaluate(k: &GramMatrix, centers: Vec<usize>, w: Weights, swaps: usize) -> Result<SeedingResult> {
    let induced = induced_assignment(k, &centers)?;
    let cost = cluster_cost_weighted(k, &induced, w)?;
    Ok(SeedingResult {
        center_indices: centers,
        induced,
        cost,
        swaps_accepted: swaps,
    })
}

fn check_k(k: &GramMatrix, clusters: usize) -> Result<()> {
    if clusters == 0 {
        return Err(Error::InvalidK { k: 0, n: k.n() });
    }
    if clusters > k.n() {
        return Err(Error::KTooLarge { k: clusters, n: k.n() });
    }
    Ok(())
}

pub fn kernel_kmeanspp_weighted<R: Rng + ?Sized>(
    k: &GramMatrix,
    clusters: usize,
    w: Weights,
    rng: &mut R,
) -> Result<SeedingResult> {
    check_k(k, clusters)?;
    let n = k.n();
    let first = match w {
        Weights::Uniform => rng.random_range(0..n),
        Weights::Explicit(ws) => {
            sample_proportional(rng, ws).ok_or(Error::InvalidArgument("weights must have positive mass".into()))?
        }
    };
    let mut centers = vec![first];
    while centers.len() < clusters {
        let weights = d2_weights(k, &centers, w);
        let next = match sample_proportional(rng, &weights) {
            Some(i) => i,
            None => {
                // every point sits on a chosen center; pad with distinct indices
                let free: Vec<usize> = (0..n).filter(|i| !centers.contains(i)).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        centers.push(next);
    }
    evaluate(k, centers, w, 0)
}

/// k-means++ in feature space: the first center is uniform, each further
/// center is drawn proportionally to its squared distance to the chosen set.
pub fn kernel_kmeanspp<R: Rng + ?Sized>(k: &GramMatrix, clusters: usize, rng: &mut R) -> Result<SeedingResult> {
    kernel_kmeanspp_weighted(k, clusters, Weights::Uniform, rng)
}

pub fn local_search_improve_weighted<R: Rng + ?Sized>(
    k: &GramMatrix,
    seed: SeedingResult,
    rounds: usize,
    w: Weights,
    rng: &mut R,
) -> Result<SeedingResult> {
    let mut current = seed;
    for _ in 0..rounds {
        let weights = d2_weights(k, &current.center_indices, w);
        let Some(candidate) = sample_proportional(rng, &weights) else {
            break;
        };
        let mut best: Option<SeedingResult> = None;
        for p in 0..current.center_indices.len() {
            let mut centers = current.center_indices.clone();
            centers[p] = candidate;
            let trial = evaluate(k, centers, w, current.swaps_accepted + 1)?;
            let bar = best.as_ref().map_or(current.cost - SWAP_IMPROVEMENT, |b| b.cost);
            if trial.cost < bar {
                best = Some(trial);
            }
        }
        if let Some(b) = best {
            debug_assert!(b.cost < current.cost);
            current = b;
        }
    }
    Ok(current)
}

/// Per round: D²-sample a candidate point, try it in place of each current
/// center, and keep the best swap if it strictly lowers the cost.
pub fn local_search_improve<R: Rng + ?Sized>(
    k: &GramMatrix,
    seed: SeedingResult,
    rounds: usize,
    rng: &mut R,
) -> Result<SeedingResult> {
    local_search_improve_weighted(k, seed, rounds, Weights::Uniform, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxErmOptions {
    /// Local-search rounds; `None` means `25·k`.
    pub rounds: Option<usize>,
    pub lloyd_refine: bool,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for ApproxErmOptions {
    fn default() -> Self {
        Self {
            rounds: None,
            lloyd_refine: true,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

pub fn approximate_erm_weighted<R: Rng + ?Sized>(
    k: &GramMatrix,
    clusters: usize,
    w: Weights,
    opts: &ApproxErmOptions,
    rng: &mut R,
) -> Result<(Assignment, f64)> {
    let rounds = opts.rounds.unwrap_or(ROUNDS_PER_CLUSTER * clusters);
    let seed = kernel_kmeanspp_weighted(k, clusters, w, rng)?;
    let searched = local_search_improve_weighted(k, seed, rounds, w, rng)?;
    if !opts.lloyd_refine {
        return Ok((searched.induced, searched.cost));
    }
    let (a, trace) = kernel_lloyd_weighted(k, &searched.induced, w, opts.max_iter, opts.rel_tol)?;
    Ok((a, trace.final_cost()))
}

/// k-means++ seeding, then local search, then optional Lloyd refinement.
pub fn approximate_erm<R: Rng + ?Sized>(
    k: &GramMatrix,
    clusters: usize,
    rounds: usize,
    lloyd_refine: bool,
    rng: &mut R,
) -> Result<(Assignment, f64)> {
    let opts = ApproxErmOptions {
        rounds: Some(rounds),
        lloyd_refine,
        ..Default::default()
    };
    approximate_erm_weighted(k, clusters, Weights::Uniform, &opts, rng)
}

/// Best of `restarts` independent [`approximate_erm_weighted`] runs.
pub fn approximate_erm_restarts<R: Rng + ?Sized>(
    k: &GramMatrix,
    clusters: usize,
    w: Weights,
    restarts: usize,
    opts: &ApproxErmOptions,
    rng: &mut R,
) -> Result<(Assignment, f64)> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let mut best: Option<(Assignment, f64)> = None;
    for _ in 0..restarts {
        let run = approximate_erm_weighted(k, clusters, w, opts, rng)?;
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
