//! Balls-into-bins oracles and max-load formulas.
//!
//! Rewrites of a randomized code behave like balls thrown into `n` bins
//! (cells): the block is erased the first time a bin would exceed `q - 1`
//! balls. Uniform placement (`d = 1`) models the self-randomized code and
//! least-loaded-of-two placement (`d = 2`) models the load-balancing code.

use std::f64::consts::E;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("Lambert W0 is undefined for x = {0} < -1/e")]
    LambertBelowBranchPoint(f64),
    #[error("d(c) needs c > 0, got {0}")]
    NonPositiveC(f64),
}

/// Bin occupancies after a sequence of throws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadVector {
    loads: Vec<u64>,
}

impl LoadVector {
    pub fn new(n: usize) -> Self {
        Self { loads: vec![0; n] }
    }

    pub fn loads(&self) -> &[u64] {
        &self.loads
    }

    pub fn balls(&self) -> u64 {
        self.loads.iter().sum()
    }

    pub fn max_load(&self) -> u64 {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    /// Samples `min(d, n)` distinct bins uniformly and returns the least
    /// loaded one, lowest bin index on ties.
    fn choose<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> usize {
        let n = self.loads.len();
        let pick_better = |best: usize, bin: usize| {
            let (lb, lc) = (self.loads[bin], self.loads[best]);
            if lb < lc || (lb == lc && bin < best) {
                bin
            } else {
                best
            }
        };
        match d.min(n) {
            1 => rng.random_range(0..n),
            2 => {
                let first = rng.random_range(0..n);
                let mut second = rng.random_range(0..n - 1);
                if second >= first {
                    second += 1;
                }
                pick_better(first, second)
            }
            d => rand::seq::index::sample(rng, n, d)
                .iter()
                .reduce(pick_better)
                .expect("d >= 1"),
        }
    }
}

/// Throws `m` balls into `n` bins, each into the least loaded of `d`
/// distinct uniform picks.
pub fn throw_balls<R: Rng + ?Sized>(n: usize, m: u64, d: usize, rng: &mut R) -> LoadVector {
    assert!(n >= 1 && d >= 1, "need n >= 1 and d >= 1");
    let mut lv = LoadVector::new(n);
    for _ in 0..m {
        let bin = lv.choose(d, rng);
        lv.loads[bin] += 1;
    }
    lv
}

/// Counts placements until the selected bin already holds `q - 1` balls.
/// The overflowing throw is not counted.
pub fn balls_until_overflow<R: Rng + ?Sized>(n: usize, q: u32, d: usize, rng: &mut R) -> u64 {
    assert!(n >= 1 && d >= 1 && q >= 2, "need n >= 1, d >= 1, q >= 2");
    let cap = q as u64 - 1;
    let mut lv = LoadVector::new(n);
    let mut placed = 0;
    loop {
        let bin = lv.choose(d, rng);
        if lv.loads[bin] >= cap {
            return placed;
        }
        lv.loads[bin] += 1;
        placed += 1;
    }
}

/// Upper bound `(m e / (n k))^k` on the probability that one given bin
/// receives at least `k` of `m` uniformly thrown balls, clamped to 1.
pub fn collision_bound(m: f64, n: f64, k: f64) -> f64 {
    assert!(m > 0.0 && n > 0.0 && k > 0.0, "m, n, k must be positive");
    let log_bound = k * ((m / (n * k)).ln() + 1.0);
    log_bound.min(0.0).exp()
}

/// Union of [`collision_bound`] over all `n` bins: a bound on `Pr{L >= k}`.
pub fn max_load_tail_bound(m: f64, n: f64, k: f64) -> f64 {
    (n * collision_bound(m, n, k)).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `m < n ln n`, single choice.
    LinearM,
    /// `n ln n <= m < n (ln n)^2`, single choice.
    NLogN,
    /// `m >= n (ln n)^2`, single choice.
    Polynomial,
    /// `d >= 2` choices.
    TwoChoice,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimePrediction {
    pub regime: Regime,
    pub predicted_max_load: f64,
}

/// Point estimate of the max load of `m` balls in `n` bins with `d` choices.
///
/// * `d = 1`, `m < n ln n`: `ln n / ln(n ln n / m)`.
/// * `d = 1`, `m = c n ln n`: `(d(c) - 1) ln n`.
/// * `d >= 2`: `m / n + ln ln n / ln d`.
pub fn max_load_prediction(n: f64, m: f64, d: u32) -> RegimePrediction {
    assert!(n >= 3.0, "ln ln n needs n >= 3");
    assert!(m >= 1.0 && d >= 1, "need m >= 1 and d >= 1");
    let ln_n = n.ln();
    if d >= 2 {
        return RegimePrediction {
            regime: Regime::TwoChoice,
            predicted_max_load: m / n + ln_n.ln() / (d as f64).ln(),
        };
    }
    let n_ln_n = n * ln_n;
    if m < n_ln_n {
        return RegimePrediction {
            regime: Regime::LinearM,
            predicted_max_load: ln_n / (n_ln_n / m).ln(),
        };
    }
    let c = m / n_ln_n;
    let regime = if c < ln_n {
        Regime::NLogN
    } else {
        Regime::Polynomial
    };
    let dc = solve_dc(c).expect("c > 0");
    RegimePrediction {
        regime,
        predicted_max_load: (dc - 1.0) * ln_n,
    }
}

fn dc_residual(c: f64, x: f64) -> f64 {
    x * (c.ln() - x.ln() + 1.0) + 1.0 - c
}

/// Largest root `d(c)` of `x (ln c - ln x + 1) + 1 - c = 0`.
///
/// The residual equals 1 at `x = c` and decreases monotonically beyond, so
/// the root is bracketed on `[c, hi]`, narrowed by bisection and polished
/// with Newton steps.
pub fn solve_dc(c: f64) -> Result<f64, DomainError> {
    if c <= 0.0 || !c.is_finite() {
        return Err(DomainError::NonPositiveC(c));
    }
    let g = |x: f64| dc_residual(c, x);
    let mut lo = c;
    let mut hi = c + 40.0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..8 {
        // g'(x) = ln c - ln x
        let slope = c.ln() - x.ln();
        if slope == 0.0 {
            break;
        }
        let next = x - g(x) / slope;
        if !(next > lo && next < hi) || next == x {
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Principal branch of the Lambert W function, `w e^w = x` with `w >= -1`.
pub fn lambert_w0(x: f64) -> Result<f64, DomainError> {
    let branch = -1.0 / E;
    if x < branch || x.is_nan() {
        return Err(DomainError::LambertBelowBranchPoint(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == branch {
        return Ok(-1.0);
    }
    let mut w = if x < -0.25 {
        // series around the branch point
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        // log1p(x) tracks W0 on this range well enough for Halley
        x.ln_1p() * (1.0 - x.ln_1p() / (2.0 + x.ln_1p()))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = (w - step).max(-1.0);
        if (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs()) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn throw_examples() {
        assert_eq!(throw_balls(4, 0, 1, &mut rng(0)).loads(), &[0, 0, 0, 0]);
        for d in 1..4 {
            assert_eq!(throw_balls(1, 5, d, &mut rng(1)).loads(), &[5]);
        }
        let lv = throw_balls(50, 1234, 2, &mut rng(2));
        assert_eq!(lv.balls(), 1234);
    }

    #[test]
    fn overflow_examples() {
        assert_eq!(balls_until_overflow(1, 3, 1, &mut rng(0)), 2);
        assert_eq!(balls_until_overflow(1, 2, 3, &mut rng(0)), 1);
    }

    #[test]
    fn two_choice_on_two_bins_fills_both() {
        let mut r = rng(3);
        for _ in 0..100 {
            assert_eq!(balls_until_overflow(2, 2, 2, &mut r), 2);
        }
    }

    #[test]
    fn choices_are_distinct_bins() {
        // d choices over d bins always see every bin, so loads stay level.
        for d in 2..6 {
            let lv = throw_balls(d, 10 * d as u64 + 3, d, &mut rng(d as u64));
            assert!(lv.max_load() - lv.loads().iter().min().unwrap() <= 1);
        }
        // d > n degrades to n distinct picks
        let lv = throw_balls(3, 30, 7, &mut rng(0));
        assert_eq!(lv.loads(), &[10, 10, 10]);
    }

    #[test]
    fn throw_is_reproducible() {
        let a = throw_balls(100, 1000, 1, &mut rng(9));
        let b = throw_balls(100, 1000, 1, &mut rng(9));
        assert_eq!(a, b);
    }

    #[test]
    fn two_choices_never_worse_under_coupling() {
        // Same seed per trial; the extra choice can only lower the max load
        // in distribution. Compare the totals over many trials.
        let (mut one, mut two) = (0, 0);
        for seed in 0..100 {
            one += throw_balls(500, 500, 1, &mut rng(seed)).max_load();
            two += throw_balls(500, 500, 2, &mut rng(seed)).max_load();
        }
        assert!(two < one, "d=2 total {two} vs d=1 total {one}");
    }

    #[test]
    fn collision_bound_examples() {
        assert!((collision_bound(100.0, 100.0, E) - 1.0).abs() < 1e-12);
        // (e/2)^8 ~ 11.6 before clamping
        assert_eq!(collision_bound(8.0, 2.0, 8.0), 1.0);
        assert!(collision_bound(1e4, 1e4, 20.0) <= 1e-17);
        let direct = (E / 6.0f64).powi(6);
        assert!((collision_bound(1e4, 1e4, 6.0) - direct).abs() < 1e-15);
    }

    #[test]
    fn prediction_examples() {
        let n = 1e4;
        let p = max_load_prediction(n, n, 1);
        assert_eq!(p.regime, Regime::LinearM);
        assert!((p.predicted_max_load - n.ln() / n.ln().ln()).abs() < 1e-12);
        assert!((p.predicted_max_load - 4.148).abs() < 1e-3);

        let p = max_load_prediction(n, n * n.ln(), 1);
        assert_eq!(p.regime, Regime::NLogN);
        assert!((p.predicted_max_load - (E - 1.0) * n.ln()).abs() < 1e-8);
        assert!((p.predicted_max_load - 15.82).abs() < 0.01);

        let p = max_load_prediction(n, n, 2);
        assert_eq!(p.regime, Regime::TwoChoice);
        assert!((p.predicted_max_load - 4.2).abs() < 0.05);

        let p = max_load_prediction(n, n * n.ln().powi(3), 1);
        assert_eq!(p.regime, Regime::Polynomial);
        assert!(p.predicted_max_load > n.ln().powi(3));
    }

    #[test]
    fn dc_values() {
        assert!((solve_dc(1.0).unwrap() - E).abs() < 1e-12);
        for c in [1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 50.0, 1e4] {
            let d = solve_dc(c).unwrap();
            assert!(d > c, "c={c} d={d}");
            assert!(dc_residual(c, d).abs() < 1e-12 * (1.0 + c), "c={c}");
        }
        assert!(solve_dc(0.0).is_err());
        assert!(solve_dc(-1.0).is_err());
    }

    #[test]
    fn lambert_examples() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-14);
        let x = -(-1.0 - 1.0 / E).exp();
        assert!((lambert_w0(x).unwrap() + 1.0 / E).abs() < 1e-9);
        assert_eq!(lambert_w0(-1.0 / E).unwrap(), -1.0);
        assert!(lambert_w0(-0.5).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn lambert_residual_over_wide_range() {
        for i in 0..=2000 {
            let x = -1.0 / E + 1e-9 + (i as f64 / 2000.0).powi(3) * 1e6;
            let w = lambert_w0(x).unwrap();
            assert!(w >= -1.0);
            assert!(
                (w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0),
                "x={x} w={w}"
            );
        }
    }
}
