//! Latent competing-risks lognormal model for length of stay.
//!
//! Each resident has one latent lognormal discharge time per disposition;
//! only the earliest of them (and which one it was) is observed, possibly
//! right-censored. The model exposes cause-specific hazards, overall
//! survival, incidence, the exact censored log-likelihood with analytic
//! derivatives, and a per-disposition Newton–Raphson fit.

mod fit;
mod hazard;
mod km;
mod likelihood;
pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub use fit::{fit, FitOptions};
pub use hazard::{
    cumulative_incidence, disposition_hazard, ln_overall_survival, marginal_latent_cdf,
    overall_survival, total_hazard,
};
pub use km::{kaplan_meier, KmCurve};
pub use likelihood::{hessian, log_likelihood, score, Hessian2};

/// 1-based disposition index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DispositionId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disposition {
    pub id: DispositionId,
    pub label: String,
}

/// Validates that ids run 1..=K with unique labels.
pub fn validate_dispositions(dispositions: &[Disposition]) -> Result<()> {
    if dispositions.is_empty() {
        return Err(Error::InvalidInput("at least one disposition is required".into()));
    }
    for (i, d) in dispositions.iter().enumerate() {
        if d.id.0 != i + 1 {
            return Err(Error::InvalidInput(format!(
                "disposition ids must be contiguous from 1; found {} at position {}",
                d.id.0,
                i + 1
            )));
        }
        if dispositions[..i].iter().any(|o| o.label == d.label) {
            return Err(Error::InvalidInput(format!("duplicate disposition label `{}`", d.label)));
        }
    }
    Ok(())
}

/// Location/scale of ln T for one disposition, in log-days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalDispositionParams<T = f64> {
    pub eta: T,
    pub sigma: T,
}

impl<T: Real> LognormalDispositionParams<T> {
    pub fn new(eta: T, sigma: T) -> Result<Self> {
        if !eta.is_finite() {
            return Err(Error::InvalidInput(format!("eta must be finite, got {eta}")));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { eta, sigma })
    }

    /// Standardized log time z = (ln t − η)/σ.
    #[inline]
    pub fn z(&self, t: T) -> T {
        (t.ln() - self.eta) / self.sigma
    }
}

/// One (t_i, Z_iμ, δ_i) record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosObservation<T = f64> {
    pub t_days: T,
    /// Realized disposition; `None` iff censored.
    pub disposition: Option<DispositionId>,
}

impl<T: Real> LosObservation<T> {
    pub fn discharged(t_days: T, disposition: DispositionId) -> Self {
        Self { t_days, disposition: Some(disposition) }
    }

    pub fn censored(t_days: T) -> Self {
        Self { t_days, disposition: None }
    }

    #[inline]
    pub fn is_censored(&self) -> bool {
        self.disposition.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosDataset<T = f64> {
    observations: Vec<LosObservation<T>>,
    dispositions: Vec<Disposition>,
}

impl<T: Real> LosDataset<T> {
    pub fn new(observations: Vec<LosObservation<T>>, dispositions: Vec<Disposition>) -> Result<Self> {
        validate_dispositions(&dispositions)?;
        if observations.is_empty() {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        for (i, o) in observations.iter().enumerate() {
            if !(o.t_days > T::zero()) || !o.t_days.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "observation {i}: duration must be positive and finite, got {}",
                    o.t_days
                )));
            }
            if let Some(d) = o.disposition {
                if d.0 == 0 || d.0 > dispositions.len() {
                    return Err(Error::InvalidInput(format!(
                        "observation {i}: unknown disposition {}",
                        d.0
                    )));
                }
            }
        }
        Ok(Self { observations, dispositions })
    }

    pub fn observations(&self) -> &[LosObservation<T>] {
        &self.observations
    }

    pub fn dispositions(&self) -> &[Disposition] {
        &self.dispositions
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Estimation diagnostics attached to a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics<T = f64> {
    pub log_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
    pub tolerance: T,
}

/// Per-disposition lognormal parameters, optionally with the diagnostics of
/// the fit that produced them. Models written by hand (e.g. from a config
/// file) carry no diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLosModel<T = f64> {
    pub dispositions: Vec<Disposition>,
    pub params: Vec<LognormalDispositionParams<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics<T>>,
}

impl<T: Real> FittedLosModel<T> {
    pub fn new(dispositions: Vec<Disposition>, params: Vec<LognormalDispositionParams<T>>) -> Result<Self> {
        let m = Self { dispositions, params, diagnostics: None };
        m.validate()?;
        Ok(m)
    }

    /// Builds a model from `(label, eta, sigma)` triples, numbering dispositions in order.
    pub fn from_labeled(entries: &[(&str, T, T)]) -> Result<Self> {
        let mut dispositions = Vec::with_capacity(entries.len());
        let mut params = Vec::with_capacity(entries.len());
        for (i, (label, eta, sigma)) in entries.iter().enumerate() {
            dispositions.push(Disposition { id: DispositionId(i + 1), label: (*label).to_string() });
            params.push(LognormalDispositionParams::new(*eta, *sigma)?);
        }
        Self::new(dispositions, params)
    }

    pub fn validate(&self) -> Result<()> {
        validate_dispositions(&self.dispositions)?;
        if self.params.len() != self.dispositions.len() {
            return Err(Error::InvalidInput(format!(
                "{} dispositions but {} parameter sets",
                self.dispositions.len(),
                self.params.len()
            )));
        }
        for p in &self.params {
            LognormalDispositionParams::new(p.eta, p.sigma)?;
        }
        if let Some(d) = &self.diagnostics {
            if !(d.tolerance > T::zero()) {
                return Err(Error::InvalidInput("fit tolerance must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.params.len()
    }

    pub fn param(&self, mu: DispositionId) -> Result<&LognormalDispositionParams<T>> {
        mu.0.checked_sub(1)
            .and_then(|i| self.params.get(i))
            .ok_or_else(|| Error::InvalidInput(format!("unknown disposition {}", mu.0)))
    }

    pub fn disposition_by_label(&self, label: &str) -> Option<DispositionId> {
        self.dispositions.iter().find(|d| d.label == label).map(|d| d.id)
    }

    /// Converts the parameters to another scalar width.
    pub fn cast<U: Real>(&self) -> FittedLosModel<U> {
        let c = |x: T| U::from_f64(x.to_f64().unwrap_or(f64::NAN)).unwrap_or_else(U::nan);
        FittedLosModel {
            dispositions: self.dispositions.clone(),
            params: self
                .params
                .iter()
                .map(|p| LognormalDispositionParams { eta: c(p.eta), sigma: c(p.sigma) })
                .collect(),
            diagnostics: self.diagnostics.map(|d| FitDiagnostics {
                log_likelihood: c(d.log_likelihood),
                iterations: d.iterations,
                converged: d.converged,
                tolerance: c(d.tolerance),
            }),
        }
    }
}
