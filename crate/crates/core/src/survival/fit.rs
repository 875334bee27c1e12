//! Per-disposition Newton–Raphson maximum likelihood.
//!
//! The log-likelihood separates into independent (η_μ, σ_μ) blocks, so every
//! iteration takes one Newton step per disposition and the loop stops once
//! every |Δη_μ| and |Δσ_μ| is below the tolerance.

use super::likelihood::{component, Hessian2};
use super::{
    DispositionId, FitDiagnostics, FittedLosModel, LognormalDispositionParams, LosDataset,
    LosObservation,
};
use crate::error::{Error, Result};
use crate::real::Real;

const SIGMA_FLOOR: f64 = 1e-4;
const INIT_SIGMA_MIN: f64 = 0.05;
const MAX_HALVINGS: usize = 60;
const MAX_RIDGE_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T = f64> {
    pub tolerance: T,
    pub max_iter: usize,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self { tolerance: T::lit(1e-6), max_iter: 100 }
    }
}

/// Starting point: mean and (population) standard deviation of ln t over the
/// individuals discharged to each disposition.
fn initial_params<T: Real>(data: &LosDataset<T>) -> Result<Vec<LognormalDispositionParams<T>>> {
    data.dispositions()
        .iter()
        .map(|d| {
            let logs: Vec<T> = data
                .observations()
                .iter()
                .filter(|o| o.disposition == Some(d.id))
                .map(|o| o.t_days.ln())
                .collect();
            if logs.len() < 2 {
                return Err(Error::Precondition(format!(
                    "disposition `{}` has {} discharged observation(s); at least 2 are needed",
                    d.label,
                    logs.len()
                )));
            }
            let n = T::lit(logs.len() as f64);
            let mean = logs.iter().copied().sum::<T>() / n;
            let var = logs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
            Ok(LognormalDispositionParams { eta: mean, sigma: var.sqrt().max(T::lit(INIT_SIGMA_MIN)) })
        })
        .collect()
}

/// Newton direction for maximization, regularized until the (shifted)
/// Hessian is negative definite so the step is an ascent direction.
fn ascent_direction<T: Real>(h: &Hessian2<T>, g: (T, T)) -> (T, T) {
    let solve = |m: &Hessian2<T>| m.solve(g).map(|(x, y)| (-x, -y));
    if h.is_negative_definite() {
        if let Some(d) = solve(h) {
            return d;
        }
    }
    let scale = h.a11.abs().max(h.a22.abs()).max(T::one());
    let mut ridge = scale * T::lit(1e-3);
    for _ in 0..MAX_RIDGE_DOUBLINGS {
        let m = h.shifted(ridge);
        if m.is_negative_definite() {
            if let Some(d) = solve(&m) {
                return d;
            }
        }
        ridge = ridge * T::lit(2.0);
    }
    // gradient ascent with a conservative scale
    (g.0 / scale, g.1 / scale)
}

/// Summation order is fixed by sorting so the estimate does not depend on
/// the order records arrive in.
fn sorted_copy<T: Real>(data: &LosDataset<T>) -> Result<LosDataset<T>> {
    let mut sorted: Vec<LosObservation<T>> = data.observations().to_vec();
    sorted.sort_by(|a, b| {
        a.t_days
            .partial_cmp(&b.t_days)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.disposition.cmp(&b.disposition))
    });
    LosDataset::new(sorted, data.dispositions().to_vec())
}

/// Fits the model by maximum likelihood.
///
/// `init` overrides the moment-based starting point. Non-convergence within
/// `max_iter` is not an error: the last iterate is returned with
/// `converged = false`.
pub fn fit<T: Real>(
    data: &LosDataset<T>,
    init: Option<&[LognormalDispositionParams<T>]>,
    opts: FitOptions<T>,
) -> Result<FittedLosModel<T>> {
    if !(opts.tolerance > T::zero()) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let data = &sorted_copy(data)?;
    let moments = initial_params(data)?;
    let mut params = match init {
        Some(p) => {
            if p.len() != moments.len() {
                return Err(Error::InvalidInput(format!(
                    "{} initial parameter sets for {} dispositions",
                    p.len(),
                    moments.len()
                )));
            }
            for q in p {
                LognormalDispositionParams::new(q.eta, q.sigma)?;
            }
            p.to_vec()
        }
        None => moments,
    };

    let floor = T::lit(SIGMA_FLOOR);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut all_small = true;
        for (i, p) in params.iter_mut().enumerate() {
            let mu = DispositionId(i + 1);
            let c = component(data, mu, p);
            let (de, ds) = ascent_direction(&c.hess, c.grad);
            let mut alpha = T::one();
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand = LognormalDispositionParams { eta: p.eta + alpha * de, sigma: p.sigma + alpha * ds };
                if cand.sigma > floor && cand.eta.is_finite() {
                    let v = component(data, mu, &cand).value;
                    let slack = T::epsilon() * T::lit(64.0) * (T::one() + c.value.abs());
                    if v.is_finite() && v >= c.value - slack {
                        accepted = Some(cand);
                        break;
                    }
                }
                alpha = alpha / T::lit(2.0);
            }
            let next = accepted.unwrap_or(*p);
            if (next.eta - p.eta).abs() >= opts.tolerance || (next.sigma - p.sigma).abs() >= opts.tolerance {
                all_small = false;
            }
            *p = next;
        }
        if all_small {
            converged = true;
            break;
        }
    }

    let log_likelihood = params
        .iter()
        .enumerate()
        .map(|(i, p)| component(data, DispositionId(i + 1), p).value)
        .sum();
    Ok(FittedLosModel {
        dispositions: data.dispositions().to_vec(),
        params,
        diagnostics: Some(FitDiagnostics { log_likelihood, iterations, converged, tolerance: opts.tolerance }),
    })
}
