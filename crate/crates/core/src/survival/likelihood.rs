//! Exact log of the competing-risks likelihood and its analytic derivatives.
//!
//! For an individual discharged to μ the likelihood factor is
//! d_μ(t) S(t) = f_μ(t) Π_{ν≠μ} S_ν(t); for a censored individual it is
//! Π_ν S_ν(t). The log therefore splits into one term per disposition:
//!
//! ℓ_μ(η, σ) = Σ_{i ∈ I_μ} ln f_μ(t_i) + Σ_{i ∉ I_μ} ln Φ(−z_i)
//!
//! where the second sum runs over everyone not discharged to μ, including
//! those discharged elsewhere. Derivatives of the survival term use
//! q = φ(z)/Φ(−z), with q'(z) = q (q − z).

use super::{DispositionId, LosDataset, LognormalDispositionParams};
use crate::error::{Error, Result};
use crate::normal;
use crate::real::Real;

/// Symmetric 2×2 matrix of second derivatives in (η, σ) order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian2<T = f64> {
    pub a11: T,
    pub a12: T,
    pub a22: T,
}

impl<T: Real> Hessian2<T> {
    pub fn det(&self) -> T {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn is_negative_definite(&self) -> bool {
        self.a11 < T::zero() && self.det() > T::zero()
    }

    /// Solves `H x = g`; `None` when the matrix is numerically singular.
    pub fn solve(&self, g: (T, T)) -> Option<(T, T)> {
        let det = self.det();
        let scale = self.a11.abs().max(self.a22.abs()).max(self.a12.abs());
        if !det.is_finite() || det.abs() <= T::epsilon() * scale * scale {
            return None;
        }
        let x = (self.a22 * g.0 - self.a12 * g.1) / det;
        let y = (self.a11 * g.1 - self.a12 * g.0) / det;
        Some((x, y))
    }

    pub fn shifted(&self, ridge: T) -> Self {
        Self { a11: self.a11 - ridge, a12: self.a12, a22: self.a22 - ridge }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Component<T> {
    pub value: T,
    pub grad: (T, T),
    pub hess: Hessian2<T>,
}

fn check_positive<T: Real>(data: &LosDataset<T>) -> Result<()> {
    // LosDataset enforces this at construction; the check guards deserialized data.
    if let Some(o) = data.observations().iter().find(|o| !(o.t_days > T::zero())) {
        return Err(Error::InvalidInput(format!("non-positive duration {}", o.t_days)));
    }
    Ok(())
}

/// Value, gradient and Hessian of ℓ_μ in one pass.
pub(crate) fn component<T: Real>(
    data: &LosDataset<T>,
    mu: DispositionId,
    p: &LognormalDispositionParams<T>,
) -> Component<T> {
    let half_ln_tau = T::TAU().sqrt().ln();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let s = p.sigma;
    let s2 = s * s;
    let ln_s = s.ln();

    let mut value = T::zero();
    let (mut g_eta, mut g_sigma) = (T::zero(), T::zero());
    let (mut a11, mut a12, mut a22) = (T::zero(), T::zero(), T::zero());

    for o in data.observations() {
        let ln_t = o.t_days.ln();
        let z = (ln_t - p.eta) / s;
        if o.disposition == Some(mu) {
            value = value - ln_t - ln_s - half_ln_tau - z * z / two;
            g_eta = g_eta + z / s;
            g_sigma = g_sigma + (z * z - T::one()) / s;
            a11 = a11 - T::one() / s2;
            a12 = a12 - two * z / s2;
            a22 = a22 + (T::one() - three * z * z) / s2;
        } else {
            let q = normal::inv_mills(z);
            value = value + normal::ln_sf(z);
            g_eta = g_eta + q / s;
            g_sigma = g_sigma + q * z / s;
            a11 = a11 + q * (z - q) / s2;
            a12 = a12 + q * (z * z - z * q - T::one()) / s2;
            a22 = a22 + q * z * (z * z - z * q - two) / s2;
        }
    }
    Component { value, grad: (g_eta, g_sigma), hess: Hessian2 { a11, a12, a22 } }
}

fn check_params<T: Real>(data: &LosDataset<T>, params: &[LognormalDispositionParams<T>]) -> Result<()> {
    if params.len() != data.dispositions().len() {
        return Err(Error::InvalidInput(format!(
            "{} parameter sets for {} dispositions",
            params.len(),
            data.dispositions().len()
        )));
    }
    for p in params {
        LognormalDispositionParams::new(p.eta, p.sigma)?;
    }
    Ok(())
}

/// ln L(Θ | D), including all constants.
pub fn log_likelihood<T: Real>(data: &LosDataset<T>, params: &[LognormalDispositionParams<T>]) -> Result<T> {
    check_positive(data)?;
    check_params(data, params)?;
    Ok(params
        .iter()
        .enumerate()
        .map(|(i, p)| component(data, DispositionId(i + 1), p).value)
        .sum())
}

/// (∂/∂η_μ, ∂/∂σ_μ) of the log-likelihood.
pub fn score<T: Real>(data: &LosDataset<T>, mu: DispositionId, p: &LognormalDispositionParams<T>) -> Result<(T, T)> {
    check_positive(data)?;
    check_mu(data, mu)?;
    Ok(component(data, mu, p).grad)
}

/// Second derivatives of the log-likelihood in (η_μ, σ_μ).
pub fn hessian<T: Real>(
    data: &LosDataset<T>,
    mu: DispositionId,
    p: &LognormalDispositionParams<T>,
) -> Result<Hessian2<T>> {
    check_positive(data)?;
    check_mu(data, mu)?;
    Ok(component(data, mu, p).hess)
}

fn check_mu<T: Real>(data: &LosDataset<T>, mu: DispositionId) -> Result<()> {
    if mu.0 == 0 || mu.0 > data.dispositions().len() {
        return Err(Error::InvalidInput(format!("unknown disposition {}", mu.0)));
    }
    Ok(())
}
