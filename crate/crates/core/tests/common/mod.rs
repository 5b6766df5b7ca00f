#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use kkmeans::kernel::{gram_matrix, GramMatrix, KernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Points inside the unit ball (for normalized linear kernels).
pub fn ball_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    random_points(rng, n, d)
        .into_iter()
        .map(|p| {
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = rng.random_range(0.0..1.0) / norm.max(1e-12);
            p.into_iter().map(|x| x * scale).collect()
        })
        .collect()
}

pub fn gaussian(points: &[Vec<f64>], bandwidth: f64) -> GramMatrix {
    gram_matrix(&KernelSpec::gaussian(bandwidth), points).unwrap()
}

pub fn linear(points: &[Vec<f64>]) -> GramMatrix {
    gram_matrix(&KernelSpec::linear(false), points).unwrap()
}

/// Two blobs of `per` points each, separation ten times the within-blob spread.
pub fn two_blobs(rng: &mut ChaCha8Rng, per: usize) -> Vec<Vec<f64>> {
    let spread = 0.1;
    let mut pts = Vec::new();
    for c in [0.0, 10.0 * spread] {
        for _ in 0..per {
            pts.push(vec![
                c + spread * rng.random_range(-0.5..0.5),
                spread * rng.random_range(-0.5..0.5),
            ]);
        }
    }
    pts
}

/// Cyclic Jacobi eigen-solver: returns (eigenvalues, eigenvectors as columns).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

pub fn to_rows(k: &GramMatrix) -> Vec<Vec<f64>> {
    (0..k.n()).map(|i| (0..k.n()).map(|j| k.get(i, j)).collect()).collect()
}

/// Explicit feature rows `V √Λ` with `K = F Fᵀ`.
pub fn eigen_features(k: &GramMatrix) -> Vec<Vec<f64>> {
    let (vals, vecs) = jacobi_eigen(&to_rows(k));
    let n = k.n();
    (0..n)
        .map(|i| (0..n).map(|e| vecs[i][e] * vals[e].max(0.0).sqrt()).collect())
        .collect()
}

/// Mean squared distance to explicit cluster centroids.
pub fn explicit_cost(features: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let d = features[0].len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (f, &l) in features.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(f) {
            *s += x;
        }
    }
    let n = features.len() as f64;
    features
        .iter()
        .zip(labels)
        .map(|(f, &l)| {
            f.iter()
                .zip(&sums[l])
                .map(|(x, s)| (x - s / counts[l] as f64).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n
}

/// Every labeling of `n` points into exactly `k` nonempty clusters (as label vectors).
pub fn all_partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, used: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            if used == k {
                out.push(cur.clone());
            }
            return;
        }
        for b in 0..(used + 1).min(k) {
            cur.push(b);
            rec(i + 1, used.max(b + 1), n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, 0, n, k, &mut Vec::new(), &mut out);
    out
}
