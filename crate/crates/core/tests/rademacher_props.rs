mod common;

use common::*;
use kkmeans::rademacher::{
    coordinate_rad, coordinate_sup, finite_class_rad, khintchine_check, lower_bound_construction, min_lipschitz_gap,
    Sampling,
};
use rand::Rng;

fn objective(data: &[Vec<f64>], sigma: &[f64], c: [f64; 2]) -> f64 {
    data.iter()
        .zip(sigma)
        .map(|(p, s)| s * ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)))
        .sum()
}

/// Coarse disk grid plus a dense boundary scan, then local refinement.
fn grid_sup(data: &[Vec<f64>], sigma: &[f64]) -> f64 {
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    let consider = |c: [f64; 2], best: &mut (f64, [f64; 2])| {
        if c[0] * c[0] + c[1] * c[1] <= 1.0 {
            let v = objective(data, sigma, c);
            if v > best.0 {
                *best = (v, c);
            }
        }
    };
    let steps = 100;
    for i in -steps..=steps {
        for j in -steps..=steps {
            consider([i as f64 / steps as f64, j as f64 / steps as f64], &mut best);
        }
    }
    for t in 0..4000 {
        let th = t as f64 * std::f64::consts::TAU / 4000.0;
        consider([th.cos(), th.sin()], &mut best);
    }
    let mut radius = 0.02;
    for _ in 0..6 {
        let centre = best.1;
        for i in -20..=20 {
            for j in -20..=20 {
                let c = [
                    centre[0] + radius * i as f64 / 20.0,
                    centre[1] + radius * j as f64 / 20.0,
                ];
                let norm = (c[0] * c[0] + c[1] * c[1]).sqrt();
                consider(c, &mut best);
                if norm > 1.0 {
                    consider([c[0] / norm, c[1] / norm], &mut best);
                }
            }
        }
        radius /= 10.0;
    }
    best.0
}

fn expected_abs_sum(b: usize) -> f64 {
    let mut binom = 1.0f64;
    let mut total = 0.0;
    for j in 0..=b {
        total += binom * (2.0 * j as f64 - b as f64).abs();
        binom = binom * (b - j) as f64 / (j + 1) as f64;
    }
    total / 2f64.powi(b as i32)
}

fn signs(mask: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

#[test]
fn closed_form_matches_grid_search() {
    let mut r = rng(31);
    for _ in 0..200 {
        let n = r.random_range(1..=6usize);
        let data = ball_points(&mut r, n, 2);
        let sigma: Vec<f64> = (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let closed = coordinate_sup(&data, &sigma);
        let grid = grid_sup(&data, &sigma);
        assert!((closed - grid).abs() < 1e-3, "{closed} vs {grid}");
    }
}

#[test]
fn exact_coordinate_rad_matches_plain_enumeration() {
    let mut r = rng(32);
    for _ in 0..10 {
        let n = r.random_range(1..=10usize);
        let data = ball_points(&mut r, n, 3);
        let oracle = (0..1usize << n)
            .map(|m| coordinate_sup(&data, &signs(m, n)))
            .sum::<f64>()
            / (1 << n) as f64;
        let est = coordinate_rad(&data, Sampling::Exact).unwrap();
        assert!(est.exact);
        assert!((est.value - oracle).abs() < 1e-10);
        assert!(est.value <= 3.0 * (n as f64).sqrt());
    }
}

#[test]
fn monte_carlo_agrees_with_exact() {
    let mut r = rng(33);
    let data = ball_points(&mut r, 12, 2);
    let exact = coordinate_rad(&data, Sampling::Exact).unwrap();
    let mc = coordinate_rad(
        &data,
        Sampling::MonteCarlo {
            trials: 20_000,
            seed: 9,
        },
    )
    .unwrap();
    assert!(!mc.exact && mc.std_error > 0.0);
    assert!((mc.value - exact.value).abs() <= 4.0 * mc.std_error);
}

#[test]
fn monte_carlo_ignores_thread_count() {
    let mut r = rng(34);
    let data = ball_points(&mut r, 30, 2);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| coordinate_rad(&data, Sampling::Auto { trials: 5000, seed: 1 }).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn finite_class_matches_plain_enumeration() {
    let mut r = rng(35);
    let n = 8;
    let data = ball_points(&mut r, n, 2);
    let class: Vec<Vec<Vec<f64>>> = (0..6).map(|_| ball_points(&mut r, 2, 2)).collect();
    let value = |m: usize, class: &[Vec<Vec<f64>>]| {
        let s = signs(m, n);
        class
            .iter()
            .map(|centers| {
                data.iter()
                    .zip(&s)
                    .map(|(p, sg)| {
                        let d = centers
                            .iter()
                            .map(|c| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2))
                            .fold(f64::INFINITY, f64::min);
                        sg * d
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let oracle = (0..1usize << n).map(|m| value(m, &class)).sum::<f64>() / (1 << n) as f64;
    let full = finite_class_rad(&data, &class, Sampling::Exact).unwrap();
    assert!((full.value - oracle).abs() < 1e-10);
    let sub = finite_class_rad(&data, &class[..3], Sampling::Exact).unwrap();
    assert!(sub.value <= full.value + 1e-12);
}

#[test]
fn lower_bound_construction_values() {
    for (k, n) in [(2, 2), (2, 4), (2, 8), (4, 8), (4, 16)] {
        let inst = lower_bound_construction(k, n).unwrap();
        let est = finite_class_rad(&inst.data, &inst.class, Sampling::Exact).unwrap();
        let oracle = k as f64 * expected_abs_sum(n / k);
        assert!((est.value - oracle).abs() < 1e-12, "(k={k}, n={n})");
        assert!(est.value >= (k as f64 * n as f64 / 2.0).sqrt() - 1e-12);
    }
}

#[test]
fn khintchine_matches_binomial_sum() {
    for block in 1..=20 {
        let c = khintchine_check(block, Sampling::Exact).unwrap();
        assert!((c.lhs - 0.5 * expected_abs_sum(block)).abs() < 1e-12);
        assert!(c.holds());
    }
    assert_eq!(khintchine_check(4, Sampling::Exact).unwrap().lhs, 0.75);
}

#[test]
fn min_is_lipschitz_in_sup_norm() {
    let mut r = rng(36);
    for _ in 0..100_000 {
        let len = r.random_range(1..=8usize);
        let a: Vec<f64> = (0..len).map(|_| r.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..len).map(|_| r.random_range(-10.0..10.0)).collect();
        let (gap, sup) = min_lipschitz_gap(&a, &b);
        assert!(gap <= sup);
    }
}
