//! Small numerical kernels shared across the crate: compensated summation,
//! log-factorial tables, cubic Hermite interpolation and sign-change bisection.

use num_complex::Complex64;

/// Neumaier-compensated accumulator. Tracks the rounding error of every
/// addition so that long alternating sums keep full absolute accuracy.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Table of ln(n!) built by compensated accumulation of ln(k).
///
/// The absolute error stays near machine precision for the table sizes used
/// here (a few thousand entries), which is all the series evaluator needs.
#[derive(Debug, Clone)]
pub struct LnFactorial {
    table: Vec<f64>,
    acc: Kahan,
}

impl LnFactorial {
    pub fn new() -> Self {
        Self {
            table: vec![0.0],
            acc: Kahan::new(),
        }
    }

    /// ln(n!), extending the table as needed.
    pub fn get(&mut self, n: usize) -> f64 {
        while self.table.len() <= n {
            let k = self.table.len() as f64;
            self.acc.add(k.ln());
            self.table.push(self.acc.value());
        }
        self.table[n]
    }
}

impl Default for LnFactorial {
    fn default() -> Self {
        Self::new()
    }
}

/// Cubic Hermite interpolant on one mesh interval of width `h`.
///
/// `v0`, `v1` are the endpoint values, `f0`, `f1` the endpoint derivatives,
/// `s` the fractional position in [0, 1].
#[inline]
pub fn hermite(
    v0: Complex64,
    f0: Complex64,
    v1: Complex64,
    f1: Complex64,
    h: f64,
    s: f64,
) -> Complex64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    v0 * h00 + f0 * (h10 * h) + v1 * h01 + f1 * (h11 * h)
}

/// Hermite value at the interval midpoint, which is all the integrator's
/// interior stages require.
#[inline]
pub fn hermite_mid(
    v0: Complex64,
    f0: Complex64,
    v1: Complex64,
    f1: Complex64,
    h: f64,
) -> Complex64 {
    (v0 + v1) * 0.5 + (f0 - f1) * (0.125 * h)
}

/// Bisect a sign change of `f` on [a, b] down to interval width `tol`.
///
/// `fa` is the already-computed value at `a`; the caller guarantees that
/// `f(a)` and `f(b)` have opposite (nonzero) signs.
pub fn bisect_sign_change<F>(
    mut a: f64,
    mut b: f64,
    fa: f64,
    tol: f64,
    max_iter: usize,
    f: F,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut sa = fa.signum();
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == sa {
            a = mid;
            sa = fm.signum();
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_cancellation() {
        let mut acc = Kahan::new();
        acc.add(1.0);
        for _ in 0..10 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-15).abs() < 1e-30);
    }

    #[test]
    fn ln_factorial_matches_known_values() {
        let mut lf = LnFactorial::new();
        assert_eq!(lf.get(0), 0.0);
        assert_eq!(lf.get(1), 0.0);
        assert!((lf.get(10) - (3628800.0f64).ln()).abs() < 1e-12);
        // ln(170!) is the largest factorial representable in f64.
        let direct: f64 = (1..=170).map(|k| (k as f64).ln()).sum();
        assert!((lf.get(170) - direct).abs() < 1e-9);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        // p(t) = (2t - 1)^3 on [0, h] with h = 0.5.
        let h = 0.5;
        let p = |t: f64| (2.0 * t - 1.0).powi(3);
        let dp = |t: f64| 6.0 * (2.0 * t - 1.0).powi(2);
        let c = |x: f64| Complex64::new(x, -2.0 * x);
        for &s in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let got = hermite(c(p(0.0)), c(dp(0.0)), c(p(h)), c(dp(h)), h, s);
            let want = c(p(s * h));
            assert!((got - want).norm() < 1e-14, "s={s}: {got} vs {want}");
        }
        let mid = hermite_mid(c(p(0.0)), c(dp(0.0)), c(p(h)), c(dp(h)), h);
        assert!((mid - c(p(0.5 * h))).norm() < 1e-14);
    }

    #[test]
    fn bisect_finds_root() {
        let f = |x: f64| x * x - 2.0;
        let root = bisect_sign_change(0.0, 2.0, f(0.0), 1e-12, 100, f);
        assert!((root - std::f64::consts::SQRT_2).abs() < 1e-11);
    }
}
