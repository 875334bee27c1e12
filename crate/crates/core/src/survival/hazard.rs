use super::quadrature::{adaptive_simpson, DEFAULT_MAX_DEPTH};
use super::{DispositionId, FittedLosModel, LognormalDispositionParams};
use crate::error::{Error, Result};
use crate::normal;
use crate::real::Real;

/// Mass of a lognormal factor beyond this many scale units is below 1e-32.
const SUPPORT_SIGMAS: f64 = 12.0;
const INCIDENCE_ABS_TOL: f64 = 1e-8;

/// Cause-specific hazard d_μ(t) = φ(z)/(t σ Φ(−z)), in 1/days.
pub fn disposition_hazard<T: Real>(t: T, p: &LognormalDispositionParams<T>) -> T {
    debug_assert!(t > T::zero());
    normal::inv_mills(p.z(t)) / (t * p.sigma)
}

/// d(t) = Σ_μ d_μ(t).
pub fn total_hazard<T: Real>(t: T, m: &FittedLosModel<T>) -> T {
    m.params.iter().map(|p| disposition_hazard(t, p)).sum()
}

/// S(t) = Π_μ Φ(−z_μ(t)), the probability of still being resident at t.
pub fn overall_survival<T: Real>(t: T, m: &FittedLosModel<T>) -> T {
    if t <= T::zero() {
        return T::one();
    }
    m.params.iter().fold(T::one(), |acc, p| acc * normal::sf(p.z(t)))
}

/// ln S(t), accurate deep in the tail.
pub fn ln_overall_survival<T: Real>(t: T, m: &FittedLosModel<T>) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    m.params.iter().map(|p| normal::ln_sf(p.z(t))).sum()
}

/// Marginal CDF of the latent time for one disposition, Φ((ln t − η)/σ).
pub fn marginal_latent_cdf<T: Real>(t: T, mu: DispositionId, m: &FittedLosModel<T>) -> Result<T> {
    let p = m.param(mu)?;
    Ok(normal::cdf(p.z(t)))
}

/// Probability of having been discharged to `mu` by `t` under competition,
/// ∫₀ᵗ d_μ(τ) S(τ) dτ. Integrated on the log-time axis where the integrand is
/// φ(z_μ)/σ_μ · Π_{ν≠μ} Φ(−z_ν). `t` may be `+∞`.
pub fn cumulative_incidence<T: Real>(t: T, mu: DispositionId, m: &FittedLosModel<T>) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::InvalidInput(format!("incidence time must be positive, got {t}")));
    }
    let target = *m.param(mu)?;
    let k = mu.0 - 1;
    let span = T::lit(SUPPORT_SIGMAS) * target.sigma;
    let lo = target.eta - span;
    let hi = t.ln().min(target.eta + span);
    if hi <= lo {
        return Ok(T::zero());
    }
    let integrand = |u: T| {
        let z = (u - target.eta) / target.sigma;
        let mut v = normal::pdf(z) / target.sigma;
        for (j, p) in m.params.iter().enumerate() {
            if j != k {
                v = v * normal::sf((u - p.eta) / p.sigma);
            }
        }
        v
    };
    let half_sigma = target.sigma / T::lit(2.0);
    let panels = ((hi - lo) / half_sigma).ceil().to_usize().unwrap_or(1).clamp(1, 64);
    // f32 cannot resolve 1e-8 in the Richardson estimate
    let tol = T::lit(INCIDENCE_ABS_TOL).max(T::epsilon() * T::lit(64.0));
    adaptive_simpson(integrand, lo, hi, tol, panels, DEFAULT_MAX_DEPTH)
}
