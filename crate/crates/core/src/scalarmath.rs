//! Scalar helpers shared by every other module.

use crate::error::{Error, Result};

/// Slack allowed when validating probabilities that come out of arithmetic.
pub const PROB_TOL: f64 = 1e-12;

/// Absolute tolerance of the [`p01_min`] root.
pub const P01_MIN_TOL: f64 = 1e-12;

/// A probability in `[0, 1]`.
///
/// Values within [`PROB_TOL`] outside the interval are clamped on construction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&value) {
            return Err(Error::domain("probability", value, "[0, 1]"));
        }
        Ok(Probability(value.clamp(0.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Efficiency of detector 1 relative to detector 0, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MismatchEta(f64);

impl MismatchEta {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::domain("eta", value, "(0, 1]"));
        }
        Ok(MismatchEta(value))
    }

    /// Matched detectors.
    pub fn perfect() -> Self {
        MismatchEta(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Binary Shannon entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    Ok(entropy_of(Probability::new(x)?))
}

pub fn entropy_of(p: Probability) -> f64 {
    h(p.value())
}

/// Binary entropy of `x` clamped into `[0, 1]`.
///
/// For internal callers whose argument is a probability up to rounding.
pub(crate) fn h(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// `theta_n = 1 - (1 - eta)^n`: probability that at least one of `n` photons
/// fires the weaker detector.
pub fn theta(eta: MismatchEta, n: u32) -> f64 {
    // -expm1(n ln(1 - eta)) keeps precision for small eta.
    -(f64::from(n) * (-eta.value()).ln_1p()).exp_m1()
}

/// Residual of the double-click entropy inequality for `n` photons,
/// `2 y log2(2^(n-1) - 1) + 2 h(y) - (n - 2)`.
///
/// Strictly increasing in `y` on `(0, 1/2)`.
pub fn double_click_residual(n: u32, y: f64) -> f64 {
    let log_term = (2f64.powi(n as i32 - 1) - 1.0).log2();
    2.0 * y * log_term + 2.0 * h(y) - (f64::from(n) - 2.0)
}

/// Minimal mean double-click probability of an `n`-photon input under
/// perfect detection: the root of [`double_click_residual`] in `(0, 1/2)`.
pub fn p01_min(n: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::domain("n", f64::from(n), "n >= 3"));
    }
    Ok(bisect(|y| double_click_residual(n, y), 0.0, 0.5, P01_MIN_TOL))
}

/// Bisection for a sign change of `f` on `[lo, hi]`, assuming `f(lo) <= 0 < f(hi)`.
///
/// Returns the midpoint of the final bracket once its width is below `tol`,
/// so the result lies within `tol / 2` of the last feasible point.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Like [`bisect`] but returns the lower (feasible) end of the final bracket.
pub fn bisect_last_feasible<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
///
/// Shrinks the bracket to `width`, then compares the interior estimate with
/// both endpoints so boundary minima are returned exactly.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, width: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn entropy_endpoints_and_peak() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            binary_entropy(0.3).unwrap(),
            binary_entropy(0.7).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn entropy_rejects_out_of_range() {
        assert!(binary_entropy(-1e-9).is_err());
        assert!(binary_entropy(1.0 + 1e-9).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
        assert_eq!(binary_entropy(-1e-13).unwrap(), 0.0);
    }

    #[test]
    fn theta_values() {
        let eta = |x| MismatchEta::new(x).unwrap();
        assert_eq!(theta(eta(1.0), 5), 1.0);
        assert_abs_diff_eq!(theta(eta(0.5), 2), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(theta(eta(0.8), 1), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn eta_domain() {
        assert!(MismatchEta::new(0.0).is_err());
        assert!(MismatchEta::new(1.5).is_err());
        assert!(MismatchEta::new(1.0).is_ok());
    }

    #[test]
    fn p01_min_rejects_small_n() {
        assert!(p01_min(2).is_err());
        assert!(p01_min(0).is_err());
    }

    #[test]
    fn p01_min_residual_vanishes() {
        for n in 3..=12 {
            let y = p01_min(n).unwrap();
            assert!(y > 0.0 && y < 0.5);
            assert!(double_click_residual(n, y).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn p01_min_three_matches_grid_scan() {
        // Independent route: first grid point where the residual turns positive.
        let step = 1e-6;
        let mut y = step;
        while double_click_residual(3, y) <= 0.0 {
            y += step;
        }
        let root = p01_min(3).unwrap();
        assert!((root - y).abs() <= 2e-6, "bisection {root} vs scan {y}");
        assert!((root - 0.0744).abs() < 5e-4);
    }

    #[test]
    fn golden_section_finds_boundary_and_interior() {
        let (x, fx) = golden_section_min(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-8);
        assert_abs_diff_eq!(fx, 0.0, epsilon = 1e-15);
        let (x, _) = golden_section_min(|x| x, 0.0, 1.0, 1e-10);
        assert_eq!(x, 0.0);
        let (x, _) = golden_section_min(|x| -x, 0.0, 1.0, 1e-10);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn bisect_finds_sign_change() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13);
        assert_abs_diff_eq!(r, 2f64.sqrt(), epsilon = 1e-12);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn entropy_is_concave(x in 0.0f64..=1.0, y in 0.0f64..=1.0, t in 0.0f64..=1.0) {
                let lhs = t * h(x) + (1.0 - t) * h(y);
                let rhs = h(t * x + (1.0 - t) * y);
                prop_assert!(lhs <= rhs + 1e-12);
            }

            #[test]
            fn theta_increases_with_n(e in 0.01f64..0.99, n in 1u32..30) {
                let eta = MismatchEta::new(e).unwrap();
                prop_assert!(theta(eta, n + 1) >= theta(eta, n));
                if (1.0 - e).powi(n as i32) > 1e-12 {
                    prop_assert!(theta(eta, n + 1) > theta(eta, n));
                }
            }

            #[test]
            fn residual_increases_in_y(n in 3u32..13, a in 1e-6f64..0.499, b in 1e-6f64..0.499) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assume!(hi - lo > 1e-9);
                prop_assert!(double_click_residual(n, hi) > double_click_residual(n, lo));
            }
        }
    }

    #[test]
    fn p01_min_nondecreasing() {
        let values: Vec<f64> = (3..=12).map(|n| p01_min(n).unwrap()).collect();
        for w in values.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn theta_is_one_at_perfect_eta() {
        for n in 1..10 {
            assert_eq!(theta(MismatchEta::perfect(), n), 1.0);
        }
    }
}
