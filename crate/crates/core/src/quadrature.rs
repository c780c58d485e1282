//! Composite Simpson rules used throughout the crate.

/// Number of Simpson panels used for integrals over one photon length.
pub const PHOTON_GRID: usize = 4096;

/// Composite Simpson over `[a, b]` with `intervals` sub-intervals (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + h * i as f64;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    (f(a) + f(b) + 4.0 * odd + 2.0 * even) * h / 3.0
}

/// Simpson over `[a, b]` split at interior `breaks` where the integrand is
/// allowed to jump or kink. Panels are shared out proportionally to length.
pub fn simpson_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    intervals: usize,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut knots: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    knots.push(a);
    knots.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    knots.push(b);
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let span = b - a;
    knots
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let share = ((hi - lo) / span * intervals as f64).ceil() as usize;
            // one-sided limits at the knots, so a jump is not sampled from the wrong side
            let e = 1e-12 * (hi - lo);
            simpson(|x| f(x.clamp(lo + e, hi - e)), lo, hi, share.max(2))
        })
        .sum()
}

/// Simpson weights for `n + 1` equally spaced samples (`n` even).
pub fn simpson_weights(n: usize) -> Vec<f64> {
    debug_assert!(n % 2 == 0 && n >= 2);
    (0..=n)
        .map(|i| {
            if i == 0 || i == n {
                1.0 / 3.0
            } else if i % 2 == 1 {
                4.0 / 3.0
            } else {
                2.0 / 3.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_cubic_exactly() {
        let v = simpson(|x| x * x * x - 2.0 * x, 0.0, 3.0, 2);
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn piecewise_handles_jump() {
        let step = |x: f64| if x < 0.3 { 1.0 } else { 3.0 };
        let v = simpson_piecewise(step, 0.0, 1.0, &[0.3], 64);
        assert!((v - (0.3 + 2.1)).abs() < 1e-10);
        // without the break the jump costs accuracy
        assert!((simpson(step, 0.0, 1.0, 64) - 2.4).abs() > 1e-4);
    }

    #[test]
    fn empty_range_is_zero() {
        assert_eq!(simpson(|_| 1.0, 1.0, 1.0, 8), 0.0);
        assert_eq!(simpson_piecewise(|_| 1.0, 2.0, 1.0, &[], 8), 0.0);
    }

    #[test]
    fn weights_sum_to_interval_count() {
        let w = simpson_weights(8);
        assert!((w.iter().sum::<f64>() - 8.0).abs() < 1e-12);
    }
}
