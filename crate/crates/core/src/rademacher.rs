//! Empirical Rademacher complexity of clustering function classes.
//!
//! The supremum over every center collection in the feature space cannot be
//! computed, so the estimators here cover two tractable cases:
//!
//! * the single-center class `{x ↦ ‖Φ_x − c‖² : ‖c‖ ≤ 1}`, whose inner
//!   supremum has a closed form for every sign vector;
//! * explicit finite classes of center collections, scored with the
//!   min-distance loss `Σ_i σ_i min_j ‖Φ_i − c_j‖²`.
//!
//! Sign vectors are either enumerated exhaustively (Gray-code order, `n ≤ 20`)
//! or drawn by Monte Carlo with one derived RNG stream per draw, so results do
//! not depend on how the draws are scheduled across threads.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::derived;

/// Largest `n` for which sign vectors are enumerated exhaustively.
pub const MAX_EXACT_N: usize = 20;
/// Largest finite class accepted by exact enumeration.
pub const MAX_EXACT_CLASS: usize = 1 << 16;
pub const DEFAULT_TRIALS: usize = 10_000;
const NORM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: usize,
    pub exact: bool,
}

impl RadEstimate {
    fn from_draws(draws: &[f64]) -> Self {
        let t = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / t;
        let var = if draws.len() > 1 {
            draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            std_error: (var / t).sqrt(),
            trials: draws.len(),
            exact: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Exact,
    MonteCarlo {
        trials: usize,
        seed: u64,
    },
    /// Exact when `n ≤ 20`, otherwise Monte Carlo.
    Auto {
        trials: usize,
        seed: u64,
    },
}

impl Sampling {
    fn resolve(self, n: usize) -> Result<Option<(usize, u64)>> {
        match self {
            Sampling::Exact if n > MAX_EXACT_N => Err(Error::EnumerationTooLarge(format!(
                "2^{n} sign vectors (limit 2^{MAX_EXACT_N})"
            ))),
            Sampling::Exact => Ok(None),
            Sampling::Auto { .. } if n <= MAX_EXACT_N => Ok(None),
            Sampling::MonteCarlo { trials, seed } | Sampling::Auto { trials, seed } => {
                if trials == 0 {
                    return Err(Error::InvalidArgument("trials must be >= 1".into()));
                }
                Ok(Some((trials, seed)))
            }
        }
    }
}

fn signs_for_draw(master: u64, draw: usize, n: usize) -> Vec<f64> {
    let mut rng = derived(master, draw as u64);
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

fn monte_carlo<F>(n: usize, trials: usize, seed: u64, f: F) -> RadEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let draws: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| f(&signs_for_draw(seed, t, n)))
        .collect();
    RadEstimate::from_draws(&draws)
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn check_data(data: &[Vec<f64>]) -> Result<usize> {
    let first = data.first().ok_or(Error::EmptyInput)?;
    let dim = first.len();
    for (i, p) in data.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput { point: i });
        }
    }
    Ok(dim)
}

/// `max_{‖c‖≤1} s‖c‖² − 2⟨v, c⟩` given `s` and `‖v‖`.
fn ball_sup(s: f64, v_norm: f64) -> f64 {
    if s >= 0.0 {
        s + 2.0 * v_norm
    } else if v_norm <= -s {
        // interior vertex; equals 0 at v = 0, attained by c = 0
        v_norm * v_norm / -s
    } else {
        s + 2.0 * v_norm
    }
}

/// `sup_{‖c‖≤1} Σ_j σ_j ‖Φ_j − c‖²` for one sign vector, in closed form.
pub fn coordinate_sup(data: &[Vec<f64>], sigma: &[f64]) -> f64 {
    let dim = data.first().map_or(0, Vec::len);
    let mut s = 0.0;
    let mut base = 0.0;
    let mut v = vec![0.0; dim];
    for (phi, &sg) in data.iter().zip(sigma) {
        s += sg;
        base += sg * norm_sq(phi);
        for (acc, x) in v.iter_mut().zip(phi) {
            *acc += sg * x;
        }
    }
    base + ball_sup(s, norm_sq(&v).sqrt())
}

/// Rademacher complexity of the single-center class over the unit ball.
pub fn coordinate_rad(data: &[Vec<f64>], sampling: Sampling) -> Result<RadEstimate> {
    let dim = check_data(data)?;
    for (i, p) in data.iter().enumerate() {
        let norm = norm_sq(p).sqrt();
        if norm > 1.0 + NORM_SLACK {
            return Err(Error::NormViolation { point: i, norm });
        }
    }
    let n = data.len();
    match sampling.resolve(n)? {
        Some((trials, seed)) => Ok(monte_carlo(n, trials, seed, |s| coordinate_sup(data, s))),
        None => {
            // Gray-code walk: one sign flips per step, sums update in O(dim)
            let norms: Vec<f64> = data.iter().map(|p| norm_sq(p)).collect();
            let mut sigma = vec![-1.0; n];
            let mut s = -(n as f64);
            let mut base = -norms.iter().sum::<f64>();
            let mut v = vec![0.0; dim];
            for p in data {
                for (acc, x) in v.iter_mut().zip(p) {
                    *acc -= x;
                }
            }
            let total = 1usize << n;
            let mut sum = base + ball_sup(s, norm_sq(&v).sqrt());
            for step in 1..total {
                let j = step.trailing_zeros() as usize;
                let delta = -2.0 * sigma[j];
                sigma[j] = -sigma[j];
                s += delta;
                base += delta * norms[j];
                for (acc, x) in v.iter_mut().zip(&data[j]) {
                    *acc += delta * x;
                }
                sum += base + ball_sup(s, norm_sq(&v).sqrt());
            }
            Ok(RadEstimate {
                value: sum / total as f64,
                std_error: 0.0,
                trials: total,
                exact: true,
            })
        }
    }
}

/// Basis-vector dataset with `n/k` copies of each `e_i`, and the class of
/// center collections `(±e_1, …, ±e_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundInstance {
    pub k: usize,
    pub n: usize,
    pub data: Vec<Vec<f64>>,
    pub class: Vec<Vec<Vec<f64>>>,
}

impl LowerBoundInstance {
    pub fn class_size(&self) -> usize {
        self.class.len()
    }
}

pub fn lower_bound_construction(k: usize, n: usize) -> Result<LowerBoundInstance> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument("k and n must be >= 1".into()));
    }
    if !n.is_multiple_of(k) {
        return Err(Error::NotDivisible { n, k });
    }
    if k > 16 {
        return Err(Error::EnumerationTooLarge(format!("class of size 2^{k}")));
    }
    let basis = |i: usize, sign: f64| -> Vec<f64> {
        let mut e = vec![0.0; k];
        e[i] = sign;
        e
    };
    let block = n / k;
    let data = (0..n).map(|t| basis(t / block, 1.0)).collect();
    let class = (0..1usize << k)
        .map(|mask| {
            (0..k)
                .map(|i| basis(i, if mask >> i & 1 == 1 { 1.0 } else { -1.0 }))
                .collect()
        })
        .collect();
    Ok(LowerBoundInstance { k, n, data, class })
}

/// `E_σ max_{C ∈ class} Σ_i σ_i min_j ‖Φ_i − c_j‖²`.
pub fn finite_class_rad(data: &[Vec<f64>], class: &[Vec<Vec<f64>>], sampling: Sampling) -> Result<RadEstimate> {
    let dim = check_data(data)?;
    if class.is_empty() {
        return Err(Error::InvalidArgument("class must be nonempty".into()));
    }
    for centers in class {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("every member needs at least one center".into()));
        }
        if let Some(bad) = centers.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
    }
    let n = data.len();
    // losses[c][i] = min_j ‖Φ_i − c_j‖²
    let losses: Vec<Vec<f64>> = class
        .iter()
        .map(|centers| {
            data.iter()
                .map(|phi| {
                    centers
                        .iter()
                        .map(|c| phi.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        })
        .collect();
    match sampling.resolve(n)? {
        Some((trials, seed)) => Ok(monte_carlo(n, trials, seed, |s| {
            losses
                .iter()
                .map(|l| l.iter().zip(s).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        })),
        None => {
            if class.len() > MAX_EXACT_CLASS {
                return Err(Error::EnumerationTooLarge(format!(
                    "class of {} members (limit {MAX_EXACT_CLASS})",
                    class.len()
                )));
            }
            let mut sigma = vec![-1.0; n];
            let mut sums: Vec<f64> = losses.iter().map(|l| -l.iter().sum::<f64>()).collect();
            let max = |sums: &[f64]| sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let total = 1usize << n;
            let mut acc = max(&sums);
            for step in 1..total {
                let j = step.trailing_zeros() as usize;
                let delta = -2.0 * sigma[j];
                sigma[j] = -sigma[j];
                for (s, l) in sums.iter_mut().zip(&losses) {
                    *s += delta * l[j];
                }
                acc += max(&sums);
            }
            Ok(RadEstimate {
                value: acc / total as f64,
                std_error: 0.0,
                trials: total,
                exact: true,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhintchineCheck {
    /// `½ E|Σ_{t ≤ block} σ_t|`
    pub lhs: f64,
    /// `√(block / 8)`
    pub rhs: f64,
    pub exact: bool,
}

impl KhintchineCheck {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs - 1e-12
    }
}

/// Compares half the mean absolute Rademacher sum against `√(block/8)`.
pub fn khintchine_check(block: usize, sampling: Sampling) -> Result<KhintchineCheck> {
    if block == 0 {
        return Err(Error::InvalidArgument("block must be >= 1".into()));
    }
    let rhs = (block as f64 / 8.0).sqrt();
    match sampling.resolve(block)? {
        None => {
            let total = 1u64 << block;
            let sum: u64 = (0..total)
                .map(|mask| (2 * mask.count_ones() as i64 - block as i64).unsigned_abs())
                .sum();
            Ok(KhintchineCheck {
                lhs: 0.5 * sum as f64 / total as f64,
                rhs,
                exact: true,
            })
        }
        Some((trials, seed)) => {
            let est = monte_carlo(block, trials, seed, |s| s.iter().sum::<f64>().abs());
            Ok(KhintchineCheck {
                lhs: 0.5 * est.value,
                rhs,
                exact: false,
            })
        }
    }
}

/// `c · √k · r · ln(n / r)^{3/2 + δ}` with `r` the largest single-center complexity.
pub fn theorem_bound_value(k: usize, n: f64, max_coord_rad: f64, delta_exponent: f64, c_const: f64) -> Result<f64> {
    if !(max_coord_rad > 0.0 && n > max_coord_rad) {
        return Err(Error::InvalidLogArgument { n, rad: max_coord_rad });
    }
    Ok(c_const * (k as f64).sqrt() * max_coord_rad * (n / max_coord_rad).ln().powf(1.5 + delta_exponent))
}

/// `(|min a − min b|, ‖a − b‖_∞)`; the first never exceeds the second.
pub fn min_lipschitz_gap(a: &[f64], b: &[f64]) -> (f64, f64) {
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ((min(a) - min(b)).abs(), sup)
}

/// One `(k, n)` cell of the lower-bound verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundCheck {
    pub k: usize,
    pub n: usize,
    pub class_rad: RadEstimate,
    /// `√(kn/2)`
    pub class_bound: f64,
    pub coord_rad: RadEstimate,
    /// `3√n`
    pub coord_bound: f64,
    pub khintchine: KhintchineCheck,
}

impl LowerBoundCheck {
    pub fn class_ok(&self) -> bool {
        self.class_rad.value + 3.0 * self.class_rad.std_error >= self.class_bound - 1e-12
    }

    pub fn coord_ok(&self) -> bool {
        self.coord_rad.value <= self.coord_bound + 3.0 * self.coord_rad.std_error
    }

    pub fn all_ok(&self) -> bool {
        self.class_ok() && self.coord_ok() && self.khintchine.holds()
    }
}

/// Runs both sides of the lower-bound argument on the basis-vector construction.
pub fn check_lower_bound(k: usize, n: usize, trials: usize, seed: u64) -> Result<LowerBoundCheck> {
    let inst = lower_bound_construction(k, n)?;
    let sampling = Sampling::Auto { trials, seed };
    let class_rad = finite_class_rad(&inst.data, &inst.class, sampling)?;
    let coord_rad = coordinate_rad(&inst.data, sampling)?;
    let khintchine = khintchine_check(n / k, sampling)?;
    Ok(LowerBoundCheck {
        k,
        n,
        class_rad,
        class_bound: (k as f64 * n as f64 / 2.0).sqrt(),
        coord_rad,
        coord_bound: 3.0 * (n as f64).sqrt(),
        khintchine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let data = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((coordinate_sup(&data, &[1.0, -1.0]) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((coordinate_sup(&data, &[-1.0, -1.0]) + 1.0).abs() < 1e-15);
        // s < 0 with v = 0: attained at the origin
        let pair = vec![vec![0.5, 0.0], vec![-0.5, 0.0]];
        assert!((coordinate_sup(&pair, &[-1.0, -1.0]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn construction_shapes() {
        let inst = lower_bound_construction(2, 4).unwrap();
        assert_eq!(
            inst.data,
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]
        );
        assert_eq!(inst.class_size(), 4);
        let one = lower_bound_construction(1, 3).unwrap();
        assert_eq!(one.data, vec![vec![1.0]; 3]);
        assert_eq!(one.class, vec![vec![vec![-1.0]], vec![vec![1.0]]]);
        assert!(matches!(
            lower_bound_construction(3, 5),
            Err(Error::NotDivisible { n: 5, k: 3 })
        ));
    }

    #[test]
    fn single_member_class_is_zero() {
        let data = vec![vec![0.3, 0.1], vec![-0.2, 0.5], vec![0.0, 0.9]];
        let class = vec![vec![vec![0.1, 0.1], vec![0.5, -0.5]]];
        let r = finite_class_rad(&data, &class, Sampling::Exact).unwrap();
        assert!(r.value.abs() < 1e-15);
        assert!(r.exact);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn smallest_lower_bound_instance() {
        let inst = lower_bound_construction(2, 2).unwrap();
        let r = finite_class_rad(&inst.data, &inst.class, Sampling::Exact).unwrap();
        assert_eq!(r.value, 2.0);
        assert!(r.value >= 2f64.sqrt());
    }

    #[test]
    fn khintchine_small_blocks() {
        let one = khintchine_check(1, Sampling::Exact).unwrap();
        assert_eq!(one.lhs, 0.5);
        assert!(one.holds());
        let two = khintchine_check(2, Sampling::Exact).unwrap();
        assert_eq!(two.lhs, 0.5);
        assert_eq!(two.rhs, 0.5);
        assert_eq!(khintchine_check(4, Sampling::Exact).unwrap().lhs, 0.75);
        let mc = khintchine_check(
            64,
            Sampling::Auto {
                trials: 20_000,
                seed: 1,
            },
        )
        .unwrap();
        assert!(!mc.exact);
        assert!(mc.holds());
    }

    #[test]
    fn bound_value_examples() {
        let n = 100.0;
        let v = theorem_bound_value(1, n, n / std::f64::consts::E, 0.3, 1.0).unwrap();
        assert!((v - n / std::f64::consts::E).abs() < 1e-12);
        let v4 = theorem_bound_value(4, n, 7.0, 0.01, 1.0).unwrap();
        let v1 = theorem_bound_value(1, n, 7.0, 0.01, 1.0).unwrap();
        assert!((v4 - 2.0 * v1).abs() < 1e-12);
        let v = theorem_bound_value(4, 256.0, 48.0, 0.01, 1.0).unwrap();
        assert!((v - 96.0 * (16.0f64 / 3.0).ln().powf(1.51)).abs() < 1e-12);
        assert!(matches!(
            theorem_bound_value(1, 10.0, 10.0, 0.0, 1.0),
            Err(Error::InvalidLogArgument { .. })
        ));
    }

    #[test]
    fn norm_and_size_guards() {
        assert!(matches!(
            coordinate_rad(&[vec![1.5]], Sampling::Exact),
            Err(Error::NormViolation { point: 0, .. })
        ));
        let big = vec![vec![0.1]; 21];
        assert!(matches!(
            coordinate_rad(&big, Sampling::Exact),
            Err(Error::EnumerationTooLarge(_))
        ));
        let est = coordinate_rad(&big, Sampling::Auto { trials: 100, seed: 0 }).unwrap();
        assert!(!est.exact);
        assert_eq!(est.trials, 100);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let data: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).sin() * 0.9]).collect();
        let s = Sampling::MonteCarlo { trials: 500, seed: 77 };
        assert_eq!(coordinate_rad(&data, s).unwrap(), coordinate_rad(&data, s).unwrap());
    }
}
