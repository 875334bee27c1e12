//! Standard normal density, tails and the Mills-ratio term used by the
//! censored lognormal likelihood.

use crate::real::Real;

/// Beyond this point the upper tail is taken from the continued fraction.
const TAIL_SWITCH: f64 = 8.0;
const CF_TERMS: usize = 60;

#[inline]
pub fn pdf<T: Real>(z: T) -> T {
    (-(z * z) / T::lit(2.0)).exp() / (T::TAU()).sqrt()
}

#[inline]
pub fn ln_pdf<T: Real>(z: T) -> T {
    -(z * z) / T::lit(2.0) - T::TAU().sqrt().ln()
}

/// Φ(x).
#[inline]
pub fn cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * (-x / T::SQRT_2()).erfc()
}

/// Φ(−z) = 1 − Φ(z), computed without cancellation.
#[inline]
pub fn sf<T: Real>(z: T) -> T {
    T::lit(0.5) * (z / T::SQRT_2()).erfc()
}

/// Mills ratio Φ(−z)/φ(z) for large positive z via its continued fraction
/// `1/(z + 1/(z + 2/(z + 3/(z + ...))))`.
fn mills_cf<T: Real>(z: T) -> T {
    let mut t = z;
    for k in (1..=CF_TERMS).rev() {
        t = z + T::lit(k as f64) / t;
    }
    t.recip()
}

/// ln Φ(−z), finite for every finite z.
pub fn ln_sf<T: Real>(z: T) -> T {
    if z < T::lit(TAIL_SWITCH) {
        sf(z).ln()
    } else {
        ln_pdf(z) + mills_cf(z).ln()
    }
}

/// The hazard-side Mills term q(z) = φ(z)/Φ(−z).
pub fn inv_mills<T: Real>(z: T) -> T {
    if z < T::lit(TAIL_SWITCH) {
        let s = sf(z);
        if s > T::zero() {
            pdf(z) / s
        } else {
            mills_cf(z).recip()
        }
    } else {
        mills_cf(z).recip()
    }
}

/// Inverse of Φ by bisection refined with Newton steps; used only where a
/// quantile is needed (stream diagnostics, tests).
pub fn quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile requires 0 < p < 1");
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centre_values() {
        assert!((cdf(0.0_f64) - 0.5).abs() < 1e-16);
        assert!((pdf(0.0_f64) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((cdf(1.0_f64) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn tail_branches_agree_at_switch() {
        let a = sf(8.0_f64).ln();
        let b = ln_pdf(8.0_f64) + mills_cf(8.0_f64).ln();
        assert!((a - b).abs() < 1e-10 * a.abs());
        let qa = pdf(7.999_f64) / sf(7.999_f64);
        let qb = inv_mills(8.001_f64);
        assert!((qa - qb).abs() < 2e-3);
    }

    #[test]
    fn far_tail_is_finite() {
        for &z in &[10.0_f64, 40.0, 1e3, 1e8] {
            assert!(ln_sf(z).is_finite());
            let q = inv_mills(z);
            assert!(q.is_finite() && q >= z);
        }
        // q(z) ~ z + 1/z for large z
        assert!((inv_mills(100.0_f64) - (100.0 + 0.01)).abs() < 1e-5);
        assert_eq!(inv_mills(-60.0_f64), 0.0);
    }

    #[test]
    fn f32_paths() {
        assert!((cdf(0.0_f32) - 0.5).abs() < 1e-7);
        assert!(inv_mills(30.0_f32).is_finite());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[0.001, 0.025, 0.5, 0.9, 0.999] {
            assert!((cdf(quantile(p)) - p).abs() < 1e-12);
        }
    }
}
