//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use careflow_core::census::ResidentProfile;
use careflow_core::survival::{
    log_likelihood, Disposition, DispositionId, FittedLosModel, LognormalDispositionParams, LosDataset,
    LosObservation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn dispositions(k: usize) -> Vec<Disposition> {
    (1..=k).map(|i| Disposition { id: DispositionId(i), label: format!("d{i}") }).collect()
}

pub fn random_model(r: &mut impl Rng, k: usize) -> FittedLosModel<f64> {
    let params = (0..k)
        .map(|_| LognormalDispositionParams::new(r.random_range(1.0..5.0), r.random_range(0.3..2.0)).unwrap())
        .collect();
    FittedLosModel::new(dispositions(k), params).unwrap()
}

/// Latent-min draws from the model, with
/// administrative censoring at `censor_at`.
pub fn simulate_dataset(r: &mut impl Rng, m: &FittedLosModel<f64>, n: usize, censor_at: f64) -> LosDataset<f64> {
    let obs = (0..n)
        .map(|_| {
            let (t, mu) = m
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let z: f64 = StandardNormal.sample(r);
                    ((p.eta + p.sigma * z).exp(), i + 1)
                })
                .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
            if t > censor_at {
                LosObservation::censored(censor_at)
            } else {
                LosObservation::discharged(t, DispositionId(mu))
            }
        })
        .collect();
    LosDataset::new(obs, m.dispositions.clone()).unwrap()
}

fn ll_at(data: &LosDataset<f64>, base: &[LognormalDispositionParams<f64>], mu: usize, de: f64, ds: f64) -> f64 {
    let mut p = base.to_vec();
    p[mu].eta += de;
    p[mu].sigma += ds;
    log_likelihood(data, &p).unwrap()
}

/// Richardson-extrapolated central differences of the full log-likelihood in (η_μ, σ_μ).
pub fn fd_score(data: &LosDataset<f64>, params: &[LognormalDispositionParams<f64>], mu: usize) -> (f64, f64) {
    let central = |h: f64| {
        let ge = (ll_at(data, params, mu, h, 0.0) - ll_at(data, params, mu, -h, 0.0)) / (2.0 * h);
        let gs = (ll_at(data, params, mu, 0.0, h) - ll_at(data, params, mu, 0.0, -h)) / (2.0 * h);
        (ge, gs)
    };
    let h = 1e-3;
    let (a, b) = (central(h), central(h / 2.0));
    ((4.0 * b.0 - a.0) / 3.0, (4.0 * b.1 - a.1) / 3.0)
}

/// Second differences with one Richardson step, as (a11, a12, a22).
pub fn fd_hessian(data: &LosDataset<f64>, params: &[LognormalDispositionParams<f64>], mu: usize) -> (f64, f64, f64) {
    let raw = |h: f64| {
        let f0 = ll_at(data, params, mu, 0.0, 0.0);
        let a11 = (ll_at(data, params, mu, h, 0.0) - 2.0 * f0 + ll_at(data, params, mu, -h, 0.0)) / (h * h);
        let a22 = (ll_at(data, params, mu, 0.0, h) - 2.0 * f0 + ll_at(data, params, mu, 0.0, -h)) / (h * h);
        let a12 = (ll_at(data, params, mu, h, h) - ll_at(data, params, mu, h, -h) - ll_at(data, params, mu, -h, h)
            + ll_at(data, params, mu, -h, -h))
            / (4.0 * h * h);
        (a11, a12, a22)
    };
    let h = 2e-3;
    let (a, b) = (raw(h), raw(h / 2.0));
    let rich = |x: f64, y: f64| (4.0 * y - x) / 3.0;
    (rich(a.0, b.0), rich(a.1, b.1), rich(a.2, b.2))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// E[min_μ T_μ] by plain Monte Carlo on the latent lognormals.
pub fn latent_min_mean(m: &FittedLosModel<f64>, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut s = 0.0;
    for _ in 0..n {
        let t = m
            .params
            .iter()
            .map(|p| {
                let z: f64 = StandardNormal.sample(&mut r);
                (p.eta + p.sigma * z).exp()
            })
            .fold(f64::INFINITY, f64::min);
        s += t;
    }
    s / n as f64
}

/// Kaplan–Meier by explicit risk sets: at each distinct event time count
/// those still at risk (time ≥ t) and those with an event at t.
pub fn km_risk_set(times: &[f64], events: &[bool], at: f64) -> f64 {
    let mut ts: Vec<f64> = times.iter().zip(events).filter(|(_, e)| **e).map(|(t, _)| *t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut s = 1.0;
    for t in ts.into_iter().filter(|t| *t <= at) {
        let at_risk = times.iter().filter(|&&x| x >= t).count() as f64;
        let d = times.iter().zip(events).filter(|(x, e)| **e && **x == t).count() as f64;
        s *= 1.0 - d / at_risk;
    }
    s
}

/// One-sample K-S distance between data and a continuous CDF.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value for a one-sample statistic.
pub fn ks_one_sample_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    careflow_core::validate::kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// Cost of ratio 1/k on a set of traces computed from scratch:
/// staff = ⌈census / k⌉, supply = staff · minutes, cost = planned + temp.
pub fn brute_cost(traces: &[Vec<(u32, f64)>], k: u32, day_minutes: f64, reg: f64, temp: f64) -> f64 {
    let mut total = 0.0;
    for tr in traces {
        for &(census, demand) in tr {
            let staff = census.div_ceil(k);
            let supply = f64::from(staff) * day_minutes;
            total += supply * reg + (demand - supply).max(0.0) * temp;
        }
    }
    total / traces.len() as f64
}

pub fn profile(values: [u8; 9]) -> ResidentProfile {
    ResidentProfile::from_values(values, 0).unwrap()
}

/// Workspace `fixtures/` directory.
pub fn fixtures() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
