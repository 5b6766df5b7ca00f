//! Exact kernel k-means over a Gram matrix.
//!
//! Centers are never materialized: a cluster's center is the (weighted) mean
//! of its members in feature space, and every distance to it is expanded in
//! Gram entries. All costs are normalized by the total weight, which is `1/n`
//! per point in the unweighted entry points.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_REL_TOL: f64 = 1e-9;
/// Largest instance `brute_force_erm` accepts.
pub const BRUTE_FORCE_MAX_N: usize = 12;
pub const BRUTE_FORCE_MAX_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    labels: Vec<usize>,
    k: usize,
    sizes: Vec<usize>,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidK { k, n: labels.len() });
        }
        let mut sizes = vec![0; k];
        for (point, &label) in labels.iter().enumerate() {
            if label >= k {
                return Err(Error::LabelOutOfRange { point, label, k });
            }
            sizes[label] += 1;
        }
        Ok(Self { labels, k, sizes })
    }

    /// Every point in cluster 0.
    pub fn single(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            k: 1,
            sizes: vec![n],
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn first_empty(&self) -> Option<usize> {
        self.sizes.iter().position(|&s| s == 0)
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Labels renumbered by order of first appearance.
    pub fn canonical_labels(&self) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        self.labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect()
    }

    /// Equal as partitions, ignoring label names.
    pub fn same_partition(&self, other: &Assignment) -> bool {
        self.n() == other.n() && self.canonical_labels() == other.canonical_labels()
    }

    /// CSV with columns `point_index,cluster_id`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "point_index,cluster_id")?;
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(out, "{i},{l}")?;
        }
        Ok(())
    }

    fn set(&mut self, i: usize, label: usize) {
        let old = self.labels[i];
        self.sizes[old] -= 1;
        self.sizes[label] += 1;
        self.labels[i] = label;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCostTrace {
    /// Cost of the initial assignment followed by the cost after each iteration.
    pub per_iteration_cost: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl ClusterCostTrace {
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.per_iteration_cost
            .windows(2)
            .all(|w| w[1] <= w[0] + rel_tol * w[0].abs().max(f64::MIN_POSITIVE))
    }

    pub fn final_cost(&self) -> f64 {
        *self.per_iteration_cost.last().expect("trace is never empty")
    }
}

/// Per-point weights. `Uniform` is `1/n` for each point.
#[derive(Debug, Clone, Copy)]
pub enum Weights<'a> {
    Uniform,
    Explicit(&'a [f64]),
}

impl Weights<'_> {
    #[inline]
    fn at(&self, i: usize, n: usize) -> f64 {
        match self {
            Weights::Uniform => 1.0 / n as f64,
            Weights::Explicit(w) => w[i],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Weights::Explicit(w) = self {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: w.len(),
                });
            }
            if w.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::InvalidArgument("weights must be positive and finite".into()));
            }
        }
        Ok(())
    }
}

fn check_consistent(k: &GramMatrix, a: &Assignment) -> Result<()> {
    if a.n() != k.n() {
        return Err(Error::DimensionMismatch {
            expected: k.n(),
            got: a.n(),
        });
    }
    Ok(())
}

/// Weighted within-cluster scatter of one member list around its weighted mean.
fn cluster_scatter(k: &GramMatrix, members: &[usize], w: Weights) -> f64 {
    let n = k.n();
    let mut mass = 0.0;
    let mut diag = 0.0;
    let mut pairs = 0.0;
    for (a, &t) in members.iter().enumerate() {
        let wt = w.at(t, n);
        mass += wt;
        diag += wt * k.diag()[t];
        let mut cross = 0.0;
        for &u in &members[..a] {
            cross += w.at(u, n) * k.get(t, u);
        }
        pairs += wt * (2.0 * cross + wt * k.diag()[t]);
    }
    if mass <= 0.0 {
        return 0.0;
    }
    (diag - pairs / mass).max(0.0)
}

/// Weighted clustering cost `Σ_i w_i ‖Φ_i − mean(C_{label i})‖²`.
pub fn cluster_cost_weighted(k: &GramMatrix, a: &Assignment, w: Weights) -> Result<f64> {
    check_consistent(k, a)?;
    w.check(k.n())?;
    if let Some(cluster) = a.first_empty() {
        return Err(Error::EmptyCluster { cluster });
    }
    Ok(a.members().iter().map(|m| cluster_scatter(k, m, w)).sum())
}

/// `W(C, P_n)`: mean squared feature-space distance to the assigned cluster mean.
pub fn cluster_cost(k: &GramMatrix, a: &Assignment) -> Result<f64> {
    cluster_cost_weighted(k, a, Weights::Uniform)
}

/// Squared distance from point `i` to the mean of cluster `j`.
pub fn point_center_dist_sq(k: &GramMatrix, a: &Assignment, i: usize, j: usize) -> Result<f64> {
    check_consistent(k, a)?;
    if i >= k.n() {
        return Err(Error::IndexOutOfRange { index: i, len: k.n() });
    }
    if j >= a.k() {
        return Err(Error::LabelOutOfRange {
            point: i,
            label: j,
            k: a.k(),
        });
    }
    if a.cluster_sizes()[j] == 0 {
        return Err(Error::EmptyCluster { cluster: j });
    }
    let members: Vec<usize> = (0..a.n()).filter(|&t| a.labels()[t] == j).collect();
    let size = members.len() as f64;
    let cross: f64 = members.iter().map(|&t| k.get(i, t)).sum::<f64>() / size;
    let mut pairs = 0.0;
    for &t in &members {
        for &u in &members {
            pairs += k.get(t, u);
        }
    }
    Ok((k.diag()[i] - 2.0 * cross + pairs / (size * size)).max(0.0))
}

/// Distances from every point to every cluster mean, as an `n × k` row-major table.
fn distance_table(k: &GramMatrix, a: &Assignment, w: Weights) -> Vec<f64> {
    let n = k.n();
    let kc = a.k();
    let mut mass = vec![0.0; kc];
    for i in 0..n {
        mass[a.labels[i]] += w.at(i, n);
    }
    // g[i*kc + j] = Σ_{t∈C_j} w_t K_it / W_j
    let mut g = vec![0.0; n * kc];
    for i in 0..n {
        let row = &mut g[i * kc..(i + 1) * kc];
        for t in 0..n {
            row[a.labels[t]] += w.at(t, n) * k.get(i, t);
        }
        for j in 0..kc {
            if mass[j] > 0.0 {
                row[j] /= mass[j];
            }
        }
    }
    let mut self_term = vec![0.0; kc];
    for t in 0..n {
        let j = a.labels[t];
        self_term[j] += w.at(t, n) * g[t * kc + j];
    }
    for j in 0..kc {
        if mass[j] > 0.0 {
            self_term[j] /= mass[j];
        }
    }
    let mut dist = vec![f64::INFINITY; n * kc];
    for i in 0..n {
        for j in 0..kc {
            if mass[j] > 0.0 {
                dist[i * kc + j] = (k.diag()[i] - 2.0 * g[i * kc + j] + self_term[j]).max(0.0);
            }
        }
    }
    dist
}

/// Fills every empty cluster with the point farthest from its own center,
/// taken from a cluster that keeps at least one member.
pub(crate) fn repair_empty(a: &mut Assignment, dist: &[f64]) {
    let kc = a.k();
    while let Some(empty) = a.first_empty() {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..a.n() {
            let l = a.labels[i];
            if a.sizes[l] < 2 {
                continue;
            }
            let d = dist[i * kc + l];
            let d = if d.is_finite() { d } else { 0.0 };
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, _)) => a.set(i, empty),
            None => break,
        }
    }
}

/// Weighted Lloyd iteration in feature space.
pub fn kernel_lloyd_weighted(
    k: &GramMatrix,
    init: &Assignment,
    w: Weights,
    max_iter: usize,
    rel_tol: f64,
) -> Result<(Assignment, ClusterCostTrace)> {
    check_consistent(k, init)?;
    w.check(k.n())?;
    let n = k.n();
    let kc = init.k();
    if kc > n {
        return Err(Error::KTooLarge { k: kc, n });
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    if rel_tol.is_nan() || rel_tol < 0.0 {
        return Err(Error::InvalidArgument("rel_tol must be >= 0".into()));
    }
    let mut current = init.clone();
    if current.first_empty().is_some() {
        let dist = distance_table(k, &current, w);
        repair_empty(&mut current, &dist);
    }
    let mut cost = cluster_cost_weighted(k, &current, w)?;
    let mut trace = ClusterCostTrace {
        per_iteration_cost: vec![cost],
        converged: false,
        iterations: 0,
    };
    for it in 1..=max_iter {
        let dist = distance_table(k, &current, w);
        let mut next = current.clone();
        for i in 0..n {
            let row = &dist[i * kc..(i + 1) * kc];
            let mut best = 0;
            for j in 1..kc {
                if row[j] < row[best] {
                    best = j;
                }
            }
            next.set(i, best);
        }
        repair_empty(&mut next, &dist);
        let changed = next.labels != current.labels;
        let new_cost = cluster_cost_weighted(k, &next, w)?;
        trace.iterations = it;
        trace.per_iteration_cost.push(new_cost);
        current = next;
        let drop = (cost - new_cost) / cost.abs().max(f64::MIN_POSITIVE);
        cost = new_cost;
        if !changed || drop < rel_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((current, trace))
}

/// Lloyd's algorithm on implicit feature-space centroids.
pub fn kernel_lloyd(
    k: &GramMatrix,
    init: &Assignment,
    max_iter: usize,
    rel_tol: f64,
) -> Result<(Assignment, ClusterCostTrace)> {
    kernel_lloyd_weighted(k, init, Weights::Uniform, max_iter, rel_tol)
}

struct PartitionSearch<'a> {
    gram: &'a GramMatrix,
    w: Weights<'a>,
    k: usize,
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
    mass: Vec<f64>,
    diag: Vec<f64>,
    pairs: Vec<f64>,
    best_cost: f64,
    best_labels: Vec<usize>,
}

impl PartitionSearch<'_> {
    fn add(&mut self, i: usize, b: usize) {
        let n = self.gram.n();
        let wi = self.w.at(i, n);
        let cross: f64 = self.members[b]
            .iter()
            .map(|&t| self.w.at(t, n) * self.gram.get(i, t))
            .sum();
        self.mass[b] += wi;
        self.diag[b] += wi * self.gram.diag()[i];
        self.pairs[b] += wi * (2.0 * cross + wi * self.gram.diag()[i]);
        self.members[b].push(i);
        self.labels[i] = b;
    }

    fn remove(&mut self, b: usize, saved: (f64, f64, f64)) {
        self.members[b].pop();
        (self.mass[b], self.diag[b], self.pairs[b]) = saved;
    }

    fn cost(&self) -> f64 {
        (0..self.k)
            .map(|b| {
                if self.mass[b] > 0.0 {
                    (self.diag[b] - self.pairs[b] / self.mass[b]).max(0.0)
                } else {
                    0.0
                }
            })
            .sum()
    }

    // Restricted-growth enumeration of partitions into exactly `k` blocks.
    fn recurse(&mut self, i: usize, used: usize) {
        let n = self.gram.n();
        if i == n {
            if used == self.k {
                let c = self.cost();
                if c < self.best_cost {
                    self.best_cost = c;
                    self.best_labels.clone_from(&self.labels);
                }
            }
            return;
        }
        let remaining = n - i;
        let upper = if used < self.k { used + 1 } else { used };
        for b in 0..upper {
            let opened = b == used;
            if !opened && self.k - used >= remaining {
                // every remaining point must open a new block
                continue;
            }
            let saved = (self.mass[b], self.diag[b], self.pairs[b]);
            self.add(i, b);
            self.recurse(i + 1, if opened { used + 1 } else { used });
            self.remove(b, saved);
        }
    }
}

/// Exhaustive weighted ERM over all partitions of the points into `k` clusters.
pub fn brute_force_erm_weighted(k: &GramMatrix, clusters: usize, w: Weights) -> Result<(Assignment, f64)> {
    let n = k.n();
    w.check(n)?;
    if clusters == 0 || clusters > n {
        return Err(Error::InvalidK { k: clusters, n });
    }
    // a single partition exists in both cases
    if clusters == n {
        return Ok((Assignment::new((0..n).collect(), n)?, 0.0));
    }
    if clusters == 1 {
        let a = Assignment::single(n);
        let cost = cluster_cost_weighted(k, &a, w)?;
        return Ok((a, cost));
    }
    if n > BRUTE_FORCE_MAX_N || clusters > BRUTE_FORCE_MAX_K {
        return Err(Error::InstanceTooLarge { n, k: clusters });
    }
    let mut search = PartitionSearch {
        gram: k,
        w,
        k: clusters,
        labels: vec![0; n],
        members: vec![Vec::with_capacity(n); clusters],
        mass: vec![0.0; clusters],
        diag: vec![0.0; clusters],
        pairs: vec![0.0; clusters],
        best_cost: f64::INFINITY,
        best_labels: vec![0; n],
    };
    search.recurse(0, 0);
    let assignment = Assignment::new(search.best_labels, clusters)?;
    Ok((assignment, search.best_cost))
}

/// Exact empirical risk minimizer by enumerating partitions.
///
/// Optimal centers are cluster means, and splitting a cluster never raises the
/// cost, so searching partitions into exactly `k` nonempty blocks is exact.
pub fn brute_force_erm(k: &GramMatrix, clusters: usize) -> Result<(Assignment, f64)> {
    brute_force_erm_weighted(k, clusters, Weights::Uniform)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gram_matrix, KernelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear(points: &[Vec<f64>]) -> GramMatrix {
        gram_matrix(&KernelSpec::linear(false), points).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn assignment_validation() {
        assert!(matches!(
            Assignment::new(vec![0, 2], 2),
            Err(Error::LabelOutOfRange {
                point: 1,
                label: 2,
                k: 2
            })
        ));
        let a = Assignment::new(vec![1, 1, 0], 3).unwrap();
        assert_eq!(a.cluster_sizes(), &[1, 2, 0]);
        assert_eq!(a.first_empty(), Some(2));
        assert_eq!(a.canonical_labels(), vec![0, 0, 1]);
    }

    #[test]
    fn cost_examples() {
        let k = linear(&[vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert_eq!(cluster_cost(&k, &Assignment::single(2)).unwrap(), 1.0);
        assert_eq!(point_center_dist_sq(&k, &Assignment::single(2), 0, 0).unwrap(), 1.0);
        let own = Assignment::new(vec![0, 1], 2).unwrap();
        assert_eq!(cluster_cost(&k, &own).unwrap(), 0.0);
        assert_eq!(point_center_dist_sq(&k, &own, 1, 1).unwrap(), 0.0);
        let empty = Assignment::new(vec![0, 0], 2).unwrap();
        assert!(matches!(
            cluster_cost(&k, &empty),
            Err(Error::EmptyCluster { cluster: 1 })
        ));
        assert!(matches!(
            point_center_dist_sq(&k, &empty, 0, 1),
            Err(Error::EmptyCluster { cluster: 1 })
        ));
        assert!(matches!(
            point_center_dist_sq(&k, &own, 5, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn cost_is_mean_of_point_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let pts = random_points(&mut rng, 9, 3);
            let k = gram_matrix(&KernelSpec::gaussian(0.8), &pts).unwrap();
            let labels: Vec<usize> = (0..9).map(|i| i % 3).collect();
            let a = Assignment::new(labels, 3).unwrap();
            let direct = cluster_cost(&k, &a).unwrap();
            let via_points: f64 = (0..9)
                .map(|i| point_center_dist_sq(&k, &a, i, a.labels()[i]).unwrap())
                .sum::<f64>()
                / 9.0;
            assert!((direct - via_points).abs() < 1e-10);
        }
    }

    #[test]
    fn lloyd_fixed_point_stops_after_one_iteration() {
        let k = linear(&[vec![0.0], vec![0.1], vec![5.0], vec![5.1]]);
        let init = Assignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let (out, trace) = kernel_lloyd(&k, &init, 300, 1e-9).unwrap();
        assert_eq!(out, init);
        assert_eq!(trace.iterations, 1);
        assert!(trace.converged);
    }

    #[test]
    fn lloyd_repairs_empty_clusters() {
        let k = linear(&[vec![0.0], vec![0.1], vec![5.0], vec![5.1]]);
        let init = Assignment::new(vec![0, 0, 0, 0], 3).unwrap();
        let (out, trace) = kernel_lloyd(&k, &init, 300, 0.0).unwrap();
        assert!(out.first_empty().is_none());
        assert!(trace.is_monotone(1e-9));
    }

    #[test]
    fn brute_force_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = random_points(&mut rng, 6, 2);
        let k = linear(&pts);
        let (_, c) = brute_force_erm(&k, 6).unwrap();
        assert!(c.abs() < 1e-12);
        let (a, c) = brute_force_erm(&k, 1).unwrap();
        assert_eq!(a.labels(), &[0; 6]);
        assert!((c - cluster_cost(&k, &Assignment::single(6)).unwrap()).abs() < 1e-14);
        assert!(matches!(
            brute_force_erm(&linear(&random_points(&mut rng, 13, 1)), 2),
            Err(Error::InstanceTooLarge { .. })
        ));
        assert!(matches!(brute_force_erm(&k, 5), Err(Error::InstanceTooLarge { .. })));
        assert!(matches!(brute_force_erm(&k, 7), Err(Error::InvalidK { .. })));
    }

    /// Stirling numbers S(n, k) check the enumeration visits each partition once.
    #[test]
    fn partition_count_matches_stirling() {
        fn count(n: usize, k: usize) -> usize {
            fn rec(i: usize, used: usize, n: usize, k: usize) -> usize {
                if i == n {
                    return usize::from(used == k);
                }
                let mut total = 0;
                let upper = if used < k { used + 1 } else { used };
                for b in 0..upper {
                    let opened = b == used;
                    if !opened && k - used >= n - i {
                        continue;
                    }
                    total += rec(i + 1, if opened { used + 1 } else { used }, n, k);
                }
                total
            }
            rec(0, 0, n, k)
        }
        assert_eq!(count(5, 2), 15);
        assert_eq!(count(6, 3), 90);
        assert_eq!(count(12, 4), 611_501);
    }

    #[test]
    fn brute_force_recovers_blobs() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
            vec![5.0, 5.0],
            vec![5.1, 5.0],
            vec![5.0, 5.1],
        ];
        let k = gram_matrix(&KernelSpec::gaussian(1.0), &pts).unwrap();
        let (a, _) = brute_force_erm(&k, 2).unwrap();
        assert_eq!(a.canonical_labels(), vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn weighted_matches_duplicated_points() {
        // weight 2/3 on one atom equals two copies of it out of three points
        let atoms = vec![vec![0.2, 0.0], vec![-0.5, 0.4]];
        let dup = vec![atoms[0].clone(), atoms[0].clone(), atoms[1].clone()];
        let ka = linear(&atoms);
        let kd = linear(&dup);
        let w = [2.0 / 3.0, 1.0 / 3.0];
        let cw = cluster_cost_weighted(&ka, &Assignment::single(2), Weights::Explicit(&w)).unwrap();
        let cd = cluster_cost(&kd, &Assignment::single(3)).unwrap();
        assert!((cw - cd).abs() < 1e-14);
    }
}
