use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Resident attribute variables x1..x9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Var {
    X1,
    X2,
    X3,
    X4,
    X5,
    X6,
    X7,
    X8,
    X9,
}

/// Inclusive value range of each variable, in x1..x9 order.
pub const VAR_RANGES: [(u8, u8); 9] = [(0, 16), (0, 1), (0, 1), (0, 5), (0, 3), (0, 1), (0, 1), (0, 1), (0, 1)];

impl Var {
    pub const ALL: [Var; 9] = [Var::X1, Var::X2, Var::X3, Var::X4, Var::X5, Var::X6, Var::X7, Var::X8, Var::X9];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn range(self) -> (u8, u8) {
        VAR_RANGES[self.index()]
    }

    pub fn name(self) -> &'static str {
        ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9"][self.index()]
    }

    pub fn parse(s: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// x1 ADL score, x4 rehabilitation level, x5 extensive medical level; the
/// rest are binary indicators fixed at admission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ResidentProfile {
    pub x1: u8,
    pub x2: u8,
    pub x3: u8,
    pub x4: u8,
    pub x5: u8,
    pub x6: u8,
    pub x7: u8,
    pub x8: u8,
    pub x9: u8,
    #[serde(default)]
    pub admit_day: u32,
}

impl ResidentProfile {
    pub fn from_values(values: [u8; 9], admit_day: u32) -> Result<Self> {
        let p = ResidentProfile {
            x1: values[0],
            x2: values[1],
            x3: values[2],
            x4: values[3],
            x5: values[4],
            x6: values[5],
            x7: values[6],
            x8: values[7],
            x9: values[8],
            admit_day,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn values(&self) -> [u8; 9] {
        [self.x1, self.x2, self.x3, self.x4, self.x5, self.x6, self.x7, self.x8, self.x9]
    }

    pub fn get(&self, var: Var) -> u8 {
        self.values()[var.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for (var, v) in Var::ALL.into_iter().zip(self.values()) {
            let (lo, hi) = var.range();
            if v < lo || v > hi {
                return Err(Error::InvalidInput(format!("{} = {v} outside {lo}..={hi}", var.name())));
            }
        }
        Ok(())
    }
}

/// Per-variable probability mass functions over each variable's full range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusScenario {
    pub name: String,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    pub x4: Vec<f64>,
    pub x5: Vec<f64>,
    pub x6: Vec<f64>,
    pub x7: Vec<f64>,
    pub x8: Vec<f64>,
    pub x9: Vec<f64>,
    /// Optional 9×9 latent-normal correlation for a Gaussian copula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioTransform {
    /// Re-weight the ADL marginal so `band` holds `band_mass`, then tilt it
    /// so the mean is `mean_factor` times the original mean.
    AdlShift { band: [u8; 2], band_mass: f64, mean_factor: f64 },
    /// Scale the share of residents with any rehabilitation (x4 ≥ 1).
    TherapyScale { factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: CensusScenario,
    pub warnings: Vec<String>,
}

const SUM_TOL: f64 = 1e-9;
const BAND_WARN_TOL: f64 = 0.05;

fn mean_of(pmf: &[f64]) -> f64 {
    pmf.iter().enumerate().map(|(x, p)| x as f64 * p).sum()
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= s);
}

fn tilt(pmf: &[f64], theta: f64) -> Vec<f64> {
    let mut out: Vec<f64> = pmf.iter().enumerate().map(|(x, p)| p * (theta * x as f64).exp()).collect();
    normalize(&mut out);
    out
}

impl CensusScenario {
    pub fn marginal(&self, var: Var) -> &[f64] {
        match var {
            Var::X1 => &self.x1,
            Var::X2 => &self.x2,
            Var::X3 => &self.x3,
            Var::X4 => &self.x4,
            Var::X5 => &self.x5,
            Var::X6 => &self.x6,
            Var::X7 => &self.x7,
            Var::X8 => &self.x8,
            Var::X9 => &self.x9,
        }
    }

    fn marginal_mut(&mut self, var: Var) -> &mut Vec<f64> {
        match var {
            Var::X1 => &mut self.x1,
            Var::X2 => &mut self.x2,
            Var::X3 => &mut self.x3,
            Var::X4 => &mut self.x4,
            Var::X5 => &mut self.x5,
            Var::X6 => &mut self.x6,
            Var::X7 => &mut self.x7,
            Var::X8 => &mut self.x8,
            Var::X9 => &mut self.x9,
        }
    }

    /// Point mass at `profile`.
    pub fn degenerate(name: &str, profile: &ResidentProfile) -> Self {
        let mut s = CensusScenario {
            name: name.to_string(),
            x1: vec![],
            x2: vec![],
            x3: vec![],
            x4: vec![],
            x5: vec![],
            x6: vec![],
            x7: vec![],
            x8: vec![],
            x9: vec![],
            correlation: None,
        };
        for var in Var::ALL {
            let mut pmf = vec![0.0; usize::from(var.range().1) + 1];
            pmf[usize::from(profile.get(var))] = 1.0;
            *s.marginal_mut(var) = pmf;
        }
        s
    }

    pub fn mean(&self, var: Var) -> f64 {
        mean_of(self.marginal(var))
    }

    /// P(lo ≤ var ≤ hi).
    pub fn mass(&self, var: Var, lo: u8, hi: u8) -> f64 {
        self.marginal(var)
            .iter()
            .enumerate()
            .filter(|(x, _)| *x >= usize::from(lo) && *x <= usize::from(hi))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        for var in Var::ALL {
            let pmf = self.marginal(var);
            let want = usize::from(var.range().1) + 1;
            if pmf.len() != want {
                return Err(Error::Config(format!(
                    "scenario `{}`: {} needs {want} probabilities, got {}",
                    self.name,
                    var.name(),
                    pmf.len()
                )));
            }
            if pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Config(format!("scenario `{}`: {} has a negative or non-finite probability", self.name, var.name())));
            }
            let s: f64 = pmf.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::Config(format!("scenario `{}`: {} sums to {s}", self.name, var.name())));
            }
        }
        if let Some(c) = &self.correlation {
            cholesky(c).map_err(|m| Error::Config(format!("scenario `{}`: correlation {m}", self.name)))?;
        }
        Ok(())
    }

    /// Apply transforms in order and return the derived scenario with any
    /// constraint warnings.
    pub fn derive(&self, name: &str, transforms: &[ScenarioTransform]) -> Result<ScenarioReport> {
        self.validate()?;
        let mut out = self.clone();
        out.name = name.to_string();
        let mut warnings = Vec::new();
        for t in transforms {
            match *t {
                ScenarioTransform::AdlShift { band, band_mass, mean_factor } => {
                    let target = mean_factor * self.mean(Var::X1);
                    out.x1 = adl_shift(&out.x1, band, band_mass, target)?;
                    let got = out.mass(Var::X1, band[0], band[1]);
                    if (got - band_mass).abs() > BAND_WARN_TOL {
                        warnings.push(format!(
                            "ADL band {}..={} holds {:.3} after the mean shift, requested {:.3}",
                            band[0], band[1], got, band_mass
                        ));
                    }
                }
                ScenarioTransform::TherapyScale { factor } => {
                    let p0 = out.x4[0];
                    let any = 1.0 - p0;
                    if !(factor >= 0.0) || factor * any > 1.0 + SUM_TOL {
                        return Err(Error::Config(format!("therapy factor {factor} leaves x4 outside [0, 1]")));
                    }
                    for p in out.x4.iter_mut().skip(1) {
                        *p *= factor;
                    }
                    out.x4[0] = 1.0 - factor * any;
                }
            }
        }
        out.validate()?;
        Ok(ScenarioReport { scenario: out, warnings })
    }
}

fn adl_shift(pmf: &[f64], band: [u8; 2], band_mass: f64, target_mean: f64) -> Result<Vec<f64>> {
    let (lo, hi) = (usize::from(band[0]), usize::from(band[1]));
    if lo > hi || hi >= pmf.len() {
        return Err(Error::Config(format!("ADL band {lo}..={hi} outside 0..={}", pmf.len() - 1)));
    }
    if !(0.0..=1.0).contains(&band_mass) {
        return Err(Error::Config(format!("band mass {band_mass} outside [0, 1]")));
    }
    let in_band = |x: usize| x >= lo && x <= hi;
    let b: f64 = pmf.iter().enumerate().filter(|(x, _)| in_band(*x)).map(|(_, p)| p).sum();
    let width_in = (hi - lo + 1) as f64;
    let width_out = (pmf.len() as f64) - width_in;
    let mixed: Vec<f64> = pmf
        .iter()
        .enumerate()
        .map(|(x, &p)| {
            if in_band(x) {
                if b > 0.0 { band_mass * p / b } else { band_mass / width_in }
            } else if b < 1.0 {
                (1.0 - band_mass) * p / (1.0 - b)
            } else if width_out > 0.0 {
                (1.0 - band_mass) / width_out
            } else {
                0.0
            }
        })
        .collect();

    let support: Vec<usize> = mixed.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(x, _)| x).collect();
    let (min_x, max_x) = (support[0] as f64, *support.last().unwrap() as f64);
    if !(target_mean > min_x && target_mean < max_x) {
        return Err(Error::Config(format!(
            "ADL mean {target_mean:.4} is not reachable on support {min_x}..={max_x}"
        )));
    }
    let (mut a, mut z) = (-60.0f64, 60.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (a + z);
        if mean_of(&tilt(&mixed, mid)) < target_mean {
            a = mid;
        } else {
            z = mid;
        }
    }
    Ok(tilt(&mixed, 0.5 * (a + z)))
}

#[allow(clippy::needless_range_loop)]
fn cholesky(m: &[Vec<f64>]) -> std::result::Result<Vec<Vec<f64>>, String> {
    let n = 9;
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err("must be 9x9".into());
    }
    for i in 0..n {
        if (m[i][i] - 1.0).abs() > 1e-12 {
            return Err("needs a unit diagonal".into());
        }
        for j in 0..n {
            if (m[i][j] - m[j][i]).abs() > 1e-12 {
                return Err("must be symmetric".into());
            }
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if d <= 0.0 {
                    return Err("is not positive definite".into());
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

fn inverse_cdf(pmf: &[f64], u: f64) -> u8 {
    let mut acc = 0.0;
    let mut last = 0;
    for (x, p) in pmf.iter().enumerate() {
        if *p > 0.0 {
            last = x;
        }
        acc += p;
        if u < acc && *p > 0.0 {
            return x as u8;
        }
    }
    last as u8
}

/// Draw one profile. Without a correlation matrix the variables are
/// independent; with one they are coupled through a Gaussian copula.
pub fn sample_profile<R: Rng + ?Sized>(scenario: &CensusScenario, rng: &mut R) -> ResidentProfile {
    let mut u = [0.0f64; 9];
    match scenario.correlation.as_deref().map(cholesky) {
        Some(Ok(l)) => {
            let e: Vec<f64> = (0..9).map(|_| StandardNormal.sample(rng)).collect();
            for i in 0..9 {
                let z: f64 = (0..=i).map(|k| l[i][k] * e[k]).sum();
                u[i] = normal::cdf(z);
            }
        }
        _ => u.iter_mut().for_each(|x| *x = rng.random::<f64>()),
    }
    let mut values = [0u8; 9];
    for var in Var::ALL {
        values[var.index()] = inverse_cdf(scenario.marginal(var), u[var.index()]);
    }
    ResidentProfile {
        x1: values[0],
        x2: values[1],
        x3: values[2],
        x4: values[3],
        x5: values[4],
        x6: values[5],
        x7: values[6],
        x8: values[7],
        x9: values[8],
        admit_day: 0,
    }
}

/// Where new residents' attributes come from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ProfileSource {
    #[default]
    Scenario,
    /// Resample observed rows uniformly with replacement.
    Bootstrap { profiles: Vec<ResidentProfile> },
}

impl ProfileSource {
    pub fn draw<R: Rng + ?Sized>(&self, scenario: &CensusScenario, rng: &mut R) -> ResidentProfile {
        match self {
            ProfileSource::Scenario => sample_profile(scenario, rng),
            ProfileSource::Bootstrap { profiles } => {
                let mut p = profiles[rng.random_range(0..profiles.len())];
                p.admit_day = 0;
                p
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ProfileSource::Bootstrap { profiles } = self {
            if profiles.is_empty() {
                return Err(Error::Config("bootstrap profile source is empty".into()));
            }
            for p in profiles {
                p.validate()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::spawn_stream;

    fn flat() -> CensusScenario {
        let mut s = CensusScenario::degenerate("flat", &ResidentProfile::default());
        for var in Var::ALL {
            let n = usize::from(var.range().1) + 1;
            *s.marginal_mut(var) = vec![1.0 / n as f64; n];
        }
        s
    }

    #[test]
    fn degenerate_gives_fixed_profile() {
        let p = ResidentProfile::from_values([9, 1, 0, 3, 2, 0, 1, 0, 1], 0).unwrap();
        let s = CensusScenario::degenerate("pt", &p);
        s.validate().unwrap();
        let mut rng = spawn_stream(5, 0, 1);
        for _ in 0..100 {
            assert_eq!(sample_profile(&s, &mut rng), p);
        }
    }

    #[test]
    fn range_check() {
        assert!(ResidentProfile::from_values([17, 0, 0, 0, 0, 0, 0, 0, 0], 0).is_err());
        assert!(ResidentProfile::from_values([16, 1, 1, 5, 3, 1, 1, 1, 1], 0).is_ok());
    }

    #[test]
    fn adl_shift_hits_mean() {
        let s = flat();
        let base = s.mean(Var::X1);
        let r = s
            .derive("low", &[ScenarioTransform::AdlShift { band: [0, 1], band_mass: 0.7, mean_factor: 0.4 }])
            .unwrap();
        assert!((r.scenario.mean(Var::X1) - 0.4 * base).abs() < 1e-9);
    }

    #[test]
    fn unreachable_mean_rejected() {
        let s = flat();
        let t = ScenarioTransform::AdlShift { band: [0, 1], band_mass: 0.7, mean_factor: 3.0 };
        assert!(s.derive("x", &[t]).is_err());
    }

    #[test]
    fn therapy_scale() {
        let s = flat();
        let r = s.derive("t", &[ScenarioTransform::TherapyScale { factor: 0.5 }]).unwrap();
        assert!((r.scenario.mass(Var::X4, 1, 5) - 0.5 * s.mass(Var::X4, 1, 5)).abs() < 1e-12);
        assert!(s.derive("t", &[ScenarioTransform::TherapyScale { factor: 2.0 }]).is_err());
    }

    #[test]
    fn bad_sum_rejected() {
        let mut s = flat();
        s.x9 = vec![0.5, 0.6];
        assert!(s.validate().is_err());
    }

    #[test]
    fn identity_copula_matches_marginals() {
        let mut s = flat();
        let mut c = vec![vec![0.0; 9]; 9];
        for (i, row) in c.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        c[0][3] = 0.6;
        c[3][0] = 0.6;
        s.correlation = Some(c);
        s.validate().unwrap();
        let mut rng = spawn_stream(11, 0, 1);
        let draws: Vec<ResidentProfile> = (0..20_000).map(|_| sample_profile(&s, &mut rng)).collect();
        let m1 = draws.iter().map(|p| f64::from(p.x1)).sum::<f64>() / draws.len() as f64;
        assert!((m1 - 8.0).abs() < 0.15);
        let m4 = draws.iter().map(|p| f64::from(p.x4)).sum::<f64>() / draws.len() as f64;
        let cov = draws.iter().map(|p| (f64::from(p.x1) - m1) * (f64::from(p.x4) - m4)).sum::<f64>();
        assert!(cov > 0.0);
    }

    #[test]
    fn bootstrap_draws_from_rows() {
        let rows = vec![
            ResidentProfile::from_values([1, 0, 0, 0, 0, 0, 0, 0, 0], 4).unwrap(),
            ResidentProfile::from_values([2, 1, 0, 0, 0, 0, 0, 0, 0], 9).unwrap(),
        ];
        let src = ProfileSource::Bootstrap { profiles: rows.clone() };
        let mut rng = spawn_stream(2, 0, 1);
        let s = flat();
        for _ in 0..50 {
            let p = src.draw(&s, &mut rng);
            assert_eq!(p.admit_day, 0);
            assert!(p.x1 == 1 || p.x1 == 2);
        }
    }
}
