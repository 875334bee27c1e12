use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

const MIN_DAYS: usize = 10;
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalFamily {
    NegativeBinomial,
    Poisson,
}

/// Daily arrival-count distribution. The negative binomial uses the
/// (size r, success probability p) parameterization with mean r(1 − p)/p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ArrivalModel {
    NegativeBinomial { r: f64, p: f64 },
    Poisson { lambda: f64 },
}

impl ArrivalModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ArrivalModel::NegativeBinomial { r, p } => {
                if !(r > 0.0 && r.is_finite()) || !(p > 0.0 && p < 1.0) {
                    return Err(Error::Config(format!("negative binomial needs r > 0 and 0 < p < 1, got r={r}, p={p}")));
                }
            }
            ArrivalModel::Poisson { lambda } => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::Config(format!("poisson rate must be >= 0, got {lambda}")));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> ArrivalFamily {
        match self {
            ArrivalModel::NegativeBinomial { .. } => ArrivalFamily::NegativeBinomial,
            ArrivalModel::Poisson { .. } => ArrivalFamily::Poisson,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ArrivalModel::NegativeBinomial { r, p } => r * (1.0 - p) / p,
            ArrivalModel::Poisson { lambda } => lambda,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ArrivalModel::NegativeBinomial { r, p } => r * (1.0 - p) / (p * p),
            ArrivalModel::Poisson { lambda } => lambda,
        }
    }

    pub fn fitted_params(&self) -> usize {
        match self {
            ArrivalModel::NegativeBinomial { .. } => 2,
            ArrivalModel::Poisson { .. } => 1,
        }
    }

    pub fn ln_pmf(&self, k: u32) -> f64 {
        let kf = f64::from(k);
        match *self {
            ArrivalModel::NegativeBinomial { r, p } => {
                ln_gamma(kf + r) - ln_gamma(r) - ln_gamma(kf + 1.0) + r * p.ln() + kf * (1.0 - p).ln()
            }
            ArrivalModel::Poisson { lambda } => {
                if lambda == 0.0 {
                    if k == 0 { 0.0 } else { f64::NEG_INFINITY }
                } else {
                    kf * lambda.ln() - lambda - ln_gamma(kf + 1.0)
                }
            }
        }
    }

    pub fn pmf(&self, k: u32) -> f64 {
        self.ln_pmf(k).exp()
    }
}

pub fn arrival_log_likelihood(counts: &[u32], model: &ArrivalModel) -> f64 {
    counts.iter().map(|&k| model.ln_pmf(k)).sum()
}

/// (value, multiplicity) pairs.
fn histogram(counts: &[u32]) -> Vec<(u32, usize)> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<(u32, usize)> = Vec::new();
    for k in sorted {
        match out.last_mut() {
            Some((v, c)) if *v == k => *c += 1,
            _ => out.push((k, 1)),
        }
    }
    out
}

/// Maximum-likelihood fit of daily arrival counts.
///
/// The negative binomial fit profiles p out as r/(r + mean) and solves the
/// remaining score equation in r by bisection on ln r. Data that is not
/// overdispersed has no finite negative binomial MLE and is rejected.
pub fn fit_arrivals(counts: &[u32], family: ArrivalFamily) -> Result<ArrivalModel> {
    if counts.len() < MIN_DAYS {
        return Err(Error::Precondition(format!(
            "arrival fit needs at least {MIN_DAYS} days, got {}",
            counts.len()
        )));
    }
    let n = counts.len() as f64;
    let hist = histogram(counts);
    let mean = hist.iter().map(|&(k, c)| f64::from(k) * c as f64).sum::<f64>() / n;
    match family {
        ArrivalFamily::Poisson => Ok(ArrivalModel::Poisson { lambda: mean }),
        ArrivalFamily::NegativeBinomial => {
            let var = hist.iter().map(|&(k, c)| (f64::from(k) - mean).powi(2) * c as f64).sum::<f64>() / n;
            if var == 0.0 {
                return Err(Error::Precondition(
                    "arrival counts have zero variance; fit a Poisson model instead".into(),
                ));
            }
            if var <= mean {
                return Err(Error::Precondition(format!(
                    "arrival counts are not overdispersed (mean {mean:.4}, variance {var:.4}); fit a Poisson model instead"
                )));
            }
            let profile_score = |r: f64| {
                hist.iter().map(|&(k, c)| c as f64 * digamma(f64::from(k) + r)).sum::<f64>() - n * digamma(r)
                    + n * (r / (r + mean)).ln()
            };
            let (mut lo, mut hi) = ((1e-8f64).ln(), 0.0f64);
            while profile_score(hi.exp()) > 0.0 {
                hi += 2.0;
                if hi > 40.0 {
                    return Err(Error::Precondition(
                        "negative binomial size diverges; data is close to Poisson".into(),
                    ));
                }
            }
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if profile_score(mid.exp()) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r = (0.5 * (lo + hi)).exp();
            Ok(ArrivalModel::NegativeBinomial { r, p: r / (r + mean) })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofBin {
    pub lo: u32,
    /// Inclusive upper count; `None` for the open tail bin.
    pub hi: Option<u32>,
    pub observed: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: Vec<GofBin>,
}

pub fn pearson_statistic(observed: &[f64], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum()
}

/// Pearson chi-square goodness of fit with adjacent bins pooled until each
/// expected count is at least 5; the last bin is the open upper tail.
pub fn chi_square_gof(counts: &[u32], model: &ArrivalModel) -> Result<GofResult> {
    model.validate()?;
    if counts.is_empty() {
        return Err(Error::InvalidInput("no counts to test".into()));
    }
    let n = counts.len() as f64;
    let max_obs = counts.iter().copied().max().unwrap_or(0);
    let hist = histogram(counts);
    let observed_at = |k: u32| hist.iter().find(|&&(v, _)| v == k).map_or(0.0, |&(_, c)| c as f64);

    let mut bins: Vec<GofBin> = Vec::new();
    let mut lo = 0u32;
    let mut exp_acc = 0.0;
    let mut obs_acc = 0.0;
    let mut cdf = 0.0;
    let mut k = 0u32;
    loop {
        let pk = model.pmf(k);
        exp_acc += n * pk;
        obs_acc += observed_at(k);
        cdf += pk;
        let tail_expected = n * (1.0 - cdf).max(0.0);
        if exp_acc >= MIN_EXPECTED && tail_expected >= MIN_EXPECTED {
            bins.push(GofBin { lo, hi: Some(k), observed: obs_acc, expected: exp_acc });
            lo = k + 1;
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
        if tail_expected < MIN_EXPECTED && k >= max_obs {
            break;
        }
        k += 1;
        if k > max_obs.saturating_add(100_000) {
            break;
        }
    }
    // the open tail takes whatever is left, including counts above k
    let tail_obs = counts.iter().filter(|&&c| c >= lo).count() as f64;
    let tail_exp = n - bins.iter().map(|b| b.expected).sum::<f64>();
    let tail = GofBin { lo, hi: None, observed: tail_obs, expected: tail_exp.max(0.0) };
    if tail.expected < MIN_EXPECTED {
        if let Some(last) = bins.pop() {
            bins.push(GofBin {
                lo: last.lo,
                hi: None,
                observed: last.observed + tail.observed,
                expected: last.expected + tail.expected,
            });
        } else {
            bins.push(tail);
        }
    } else {
        bins.push(tail);
    }

    if bins.len() < 2 {
        return Err(Error::Precondition(format!(
            "only {} bin(s) with expected count >= {MIN_EXPECTED}; need at least 2",
            bins.len()
        )));
    }
    let used = 1 + model.fitted_params();
    if bins.len() <= used {
        return Err(Error::Precondition(format!(
            "{} pooled bins leave no degrees of freedom for {} fitted parameter(s)",
            bins.len(),
            model.fitted_params()
        )));
    }
    let dof = bins.len() - used;
    let obs: Vec<f64> = bins.iter().map(|b| b.observed).collect();
    let exp: Vec<f64> = bins.iter().map(|b| b.expected).collect();
    let statistic = pearson_statistic(&obs, &exp);
    let p_value = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .sf(statistic);
    Ok(GofResult { statistic, dof, p_value, bins })
}

/// i.i.d. daily counts; the negative binomial is drawn as a gamma–Poisson mixture.
pub fn sample_arrivals<R: Rng + ?Sized>(model: &ArrivalModel, days: usize, rng: &mut R) -> Vec<u32> {
    (0..days).map(|_| sample_one(model, rng)).collect()
}

pub(crate) fn sample_one<R: Rng + ?Sized>(model: &ArrivalModel, rng: &mut R) -> u32 {
    let rate = match *model {
        ArrivalModel::Poisson { lambda } => lambda,
        ArrivalModel::NegativeBinomial { r, p } => {
            Gamma::new(r, (1.0 - p) / p).expect("validated gamma parameters").sample(rng)
        }
    };
    if rate <= 0.0 {
        return 0;
    }
    let k: f64 = Poisson::new(rate).expect("positive poisson rate").sample(rng);
    k as u32
}
