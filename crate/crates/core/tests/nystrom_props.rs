#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use kkmeans::clustering::{brute_force_erm, kernel_lloyd, Assignment};
use kkmeans::kernel::{gram_matrix, GramMatrix, KernelSpec};
use kkmeans::nystrom::{
    landmark_size, nystrom_embed, nystrom_kkmeans, nystrom_lloyd, sample_landmarks_uniform, LandmarkMode, LandmarkSet,
    NystromInit, NystromOptions,
};
use proptest::prelude::*;
use rand::Rng;

/// `K_nm · K_mm⁺ · K_mn` with the pseudo-inverse from the Jacobi oracle.
fn projected_gram(k: &GramMatrix, landmarks: &[usize]) -> Vec<Vec<f64>> {
    let m = landmarks.len();
    let kmm: Vec<Vec<f64>> = landmarks
        .iter()
        .map(|&a| landmarks.iter().map(|&b| k.get(a, b)).collect())
        .collect();
    let (vals, vecs) = jacobi_eigen(&kmm);
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let mut pinv = vec![vec![0.0; m]; m];
    for (e, &l) in vals.iter().enumerate() {
        if l > 1e-10 * top {
            for a in 0..m {
                for b in 0..m {
                    pinv[a][b] += vecs[a][e] * vecs[b][e] / l;
                }
            }
        }
    }
    let n = k.n();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut s = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            s += k.get(i, landmarks[a]) * pinv[a][b] * k.get(landmarks[b], j);
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn random_landmarks(r: &mut rand_chacha::ChaCha8Rng, n: usize, m: usize) -> LandmarkSet {
    sample_landmarks_uniform(n, m, r).unwrap()
}

#[test]
fn embedding_reproduces_projected_kernel() {
    let mut r = rng(21);
    for _ in 0..20 {
        let n = r.random_range(4..=14usize);
        let m = r.random_range(1..=n.min(6));
        let pts = random_points(&mut r, n, 2);
        let k = gaussian(&pts, 0.8);
        let lm = random_landmarks(&mut r, n, m);
        let emb = nystrom_embed(&k, &lm, 0.0).unwrap();
        let z = emb.coords();
        let oracle = projected_gram(&k, lm.indices());
        for i in 0..n {
            let zi = z.row(i);
            assert!((emb.residuals()[i] - (k.get(i, i) - zi.norm_squared())).abs() < 1e-12);
            assert!(emb.residuals()[i] >= -1e-10);
            for j in 0..n {
                assert!((zi.dot(&z.row(j)) - oracle[i][j]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn landmark_rows_are_exact() {
    let mut r = rng(22);
    let pts = random_points(&mut r, 12, 3);
    let k = gaussian(&pts, 1.0);
    let lm = LandmarkSet::new(vec![0, 3, 5, 9], 12).unwrap();
    let emb = nystrom_embed(&k, &lm, 0.0).unwrap();
    assert!(!emb.is_rank_deficient());
    for &a in lm.indices() {
        assert!(emb.residuals()[a].abs() < 1e-10);
        for &b in lm.indices() {
            assert!((emb.coords().row(a).dot(&emb.coords().row(b)) - k.get(a, b)).abs() < 1e-10);
        }
    }
}

proptest! {
    #[test]
    fn distance_splits_into_projection_and_residual(
        seed in any::<u64>(),
        center in prop::collection::vec(-1.0..1.0f64, 4),
    ) {
        let mut r = rng(seed);
        let pts = random_points(&mut r, 10, 2);
        let k = gaussian(&pts, 1.0);
        let lm = LandmarkSet::new(vec![1, 2, 6, 8], 10).unwrap();
        let emb = nystrom_embed(&k, &lm, 0.0).unwrap();
        let coeff = emb.center_coefficients(&center).unwrap();
        let idx = lm.indices();
        let mut cc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                cc += coeff[a] * coeff[b] * k.get(idx[a], idx[b]);
            }
        }
        for i in 0..10 {
            let cross: f64 = (0..4).map(|a| coeff[a] * k.get(i, idx[a])).sum();
            let direct = k.get(i, i) - 2.0 * cross + cc;
            let zi = emb.coords().row(i);
            let proj: f64 = (0..4).map(|c| (zi[c] - center[c]).powi(2)).sum();
            prop_assert!((direct - proj - emb.residuals()[i]).abs() < 1e-8);
        }
    }
}

#[test]
fn all_landmarks_agree_with_exact_lloyd() {
    for t in 0..100 {
        let mut r = rng(400 + t);
        let n = r.random_range(4..=30usize);
        let kc = r.random_range(1..=n.min(5));
        let pts = random_points(&mut r, n, 2);
        let k = gaussian(&pts, r.random_range(0.3..1.5));
        let labels: Vec<usize> = (0..n).map(|i| if i < kc { i } else { r.random_range(0..kc) }).collect();
        let init = Assignment::new(labels, kc).unwrap();
        let emb = nystrom_embed(&k, &LandmarkSet::all(n), 0.0).unwrap();
        let ny = nystrom_lloyd(&emb, &init, 300, 1e-9).unwrap();
        let (a, trace) = kernel_lloyd(&k, &init, 300, 1e-9).unwrap();
        assert!((ny.cost_in_h - trace.final_cost()).abs() < 1e-8, "instance {t}");
        assert!(ny.assignment.same_partition(&a), "instance {t}");
    }
}

#[test]
fn more_landmarks_never_hurt_the_optimum() {
    let mut r = rng(23);
    for _ in 0..10 {
        let n = 8;
        let pts = random_points(&mut r, n, 2);
        let k = gaussian(&pts, 0.7);
        let (_, exact) = brute_force_erm(&k, 2).unwrap();
        let order: Vec<usize> = rand::seq::index::sample(&mut r, n, n).into_vec();
        let mut prev = f64::INFINITY;
        for m in 1..=n {
            let emb = nystrom_embed(&k, &LandmarkSet::new(order[..m].to_vec(), n).unwrap(), 0.0).unwrap();
            let z = emb.coords();
            let zz = GramMatrix::from_matrix(z * z.transpose()).unwrap();
            let mean_residual = emb.residuals().iter().sum::<f64>() / n as f64;
            let (_, restricted) = brute_force_erm(&zz, 2).unwrap();
            let best = restricted + mean_residual;
            assert!(best <= prev + 1e-10);
            assert!(best >= exact - 1e-10);
            prev = best;
        }
        assert!((prev - exact).abs() < 1e-8);
    }
}

#[test]
fn few_landmarks_recover_blobs() {
    let mut recovered = 0;
    for t in 0..100 {
        let mut r = rng(7000 + t);
        let pts = two_blobs(&mut r, 15);
        let k = gram_matrix(&KernelSpec::gaussian(0.5), &pts).unwrap();
        let lm = sample_landmarks_uniform(30, 4, &mut r).unwrap();
        let res = nystrom_kkmeans(&k, &lm, 2, &NystromOptions::default(), &mut r).unwrap();
        let truth = Assignment::new((0..30).map(|i| usize::from(i >= 15)).collect(), 2).unwrap();
        recovered += usize::from(res.assignment.same_partition(&truth));
        assert!(res.trace.is_monotone(1e-9));
        assert!(res.cost_in_h >= res.cost_projected - 1e-12);
    }
    assert!(recovered >= 95, "recovered {recovered}/100");
}

#[test]
fn random_init_is_valid() {
    let mut r = rng(24);
    let pts = random_points(&mut r, 25, 2);
    let k = gaussian(&pts, 0.5);
    let opts = NystromOptions {
        init: NystromInit::Random,
        ..Default::default()
    };
    let lm = sample_landmarks_uniform(25, 6, &mut r).unwrap();
    let res = nystrom_kkmeans(&k, &lm, 3, &opts, &mut r).unwrap();
    assert_eq!(res.centers.shape(), (3, 6));
    assert!(res.assignment.first_empty().is_none());
}

#[test]
fn rank_deficiency_is_reported() {
    let pts = vec![vec![0.0], vec![0.0], vec![1.0]];
    let k = gaussian(&pts, 1.0);
    let emb = nystrom_embed(&k, &LandmarkSet::all(3), 0.0).unwrap();
    assert!(emb.is_rank_deficient());
    assert_eq!(emb.rank(), 2);
    let zz = emb.coords() * emb.coords().transpose();
    assert!((zz - k.matrix()).abs().max() < 1e-10);
}

proptest! {
    #[test]
    fn landmark_size_is_monotone_and_clamped(n in 1usize..5000, k in 1usize..20, xi in 0.0..50.0f64, delta in 0.01..0.99f64) {
        for mode in LandmarkMode::ALL {
            let m = landmark_size(n, k, delta, Some(xi), mode, 1.0).unwrap();
            prop_assert!((1..=n).contains(&m));
            let bigger = landmark_size(n + 100, k, delta, Some(xi), mode, 1.0).unwrap();
            prop_assert!(bigger >= m);
        }
        let general = landmark_size(n, k, delta, Some(xi), LandmarkMode::General, 1.0).unwrap();
        let linear = landmark_size(n, k, delta, Some(xi), LandmarkMode::LinearK, 1.0).unwrap();
        prop_assert!(linear <= general);
    }
}
