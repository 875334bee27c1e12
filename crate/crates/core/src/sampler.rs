//! Length-of-stay sampling from a fitted competing-risks model, plus the
//! counter-based random streams every stochastic component draws from.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::survival::{disposition_hazard, ln_overall_survival, DispositionId, FittedLosModel};

/// Bracket for the inversion, in ln-days.
const LN_T_MIN: f64 = -20.0;
const LN_T_MAX: f64 = 20.0;
const BISECTION_TOL: f64 = 1e-10;

/// A random stream fully determined by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the 64-bit stream selector set to `stream_id`, so
/// distinct ids give non-overlapping keystreams under one seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Stream for `entity` within `replication`. The id packs both counters into
/// disjoint halves of the 64-bit selector, so the map is injective and a
/// resident's draws do not change when replications or residents are added.
pub fn spawn_stream(master_seed: u64, replication: u32, entity: u32) -> RngStream {
    RngStream::new(master_seed, (u64::from(replication) << 32) | u64::from(entity))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosSample {
    pub los_days: f64,
    pub disposition: DispositionId,
}

/// Inverse-transform sampling on the overall survival followed by a
/// categorical draw of the disposition with probabilities d_μ(T)/d(T).
///
/// The stay solves S(T) = u by bisection on ln T; draws of `u` that fall
/// outside the bracket's survival range are redrawn.
pub fn sample_by_total_hazard<R: Rng + ?Sized>(m: &FittedLosModel<f64>, rng: &mut R) -> LosSample {
    let ln_s_lo = ln_overall_survival(LN_T_MIN.exp(), m);
    let ln_s_hi = ln_overall_survival(LN_T_MAX.exp(), m);
    let los_days = loop {
        let u: f64 = rng.random();
        let ln_u = u.ln();
        if !(ln_u < ln_s_lo && ln_u > ln_s_hi) {
            continue;
        }
        let (mut lo, mut hi) = (LN_T_MIN, LN_T_MAX);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if ln_overall_survival(mid.exp(), m) > ln_u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        break (0.5 * (lo + hi)).exp();
    };
    LosSample { los_days, disposition: draw_disposition(m, los_days, rng) }
}

fn draw_disposition<R: Rng + ?Sized>(m: &FittedLosModel<f64>, t: f64, rng: &mut R) -> DispositionId {
    let hazards: Vec<f64> = m.params.iter().map(|p| disposition_hazard(t, p)).collect();
    let total: f64 = hazards.iter().sum();
    let v: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, h) in hazards.iter().enumerate() {
        acc += h;
        if v < acc {
            return DispositionId(i + 1);
        }
    }
    DispositionId(hazards.len())
}

/// Draws every latent lognormal time and returns the earliest.
pub fn sample_by_latent_min<R: Rng + ?Sized>(m: &FittedLosModel<f64>, rng: &mut R) -> LosSample {
    let mut best = LosSample { los_days: f64::INFINITY, disposition: DispositionId(1) };
    for (i, p) in m.params.iter().enumerate() {
        let z: f64 = StandardNormal.sample(rng);
        let t = (p.eta + p.sigma * z).exp();
        if t < best.los_days {
            best = LosSample { los_days: t, disposition: DispositionId(i + 1) };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn table_b1() -> FittedLosModel<f64> {
        FittedLosModel::from_labeled(&[("community", 3.41, 0.94), ("hospital", 4.52, 1.58)]).unwrap()
    }

    #[test]
    fn same_stream_same_sample() {
        let m = table_b1();
        let a = sample_by_total_hazard(&m, &mut spawn_stream(7, 3, 11));
        let b = sample_by_total_hazard(&m, &mut spawn_stream(7, 3, 11));
        assert_eq!(a, b);
        let c = sample_by_latent_min(&m, &mut spawn_stream(7, 3, 11));
        let d = sample_by_latent_min(&m, &mut spawn_stream(7, 3, 11));
        assert_eq!(c, d);
    }

    #[test]
    fn stream_ids_are_distinct() {
        assert_ne!(spawn_stream(1, 0, 1).stream_id(), spawn_stream(1, 1, 0).stream_id());
        let mut a = spawn_stream(1, 0, 1);
        let mut b = spawn_stream(1, 1, 0);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn no_collisions_among_spawned_streams() {
        let mut seen = HashSet::new();
        for rep in 0..100u32 {
            for ent in 0..100u32 {
                assert!(seen.insert(spawn_stream(2024, rep, ent).next_u64()));
            }
        }
        assert_eq!(seen.len(), 10_000);
    }

    #[test]
    fn single_disposition_always_chosen() {
        let m = FittedLosModel::from_labeled(&[("only", 2.0, 0.5)]).unwrap();
        let mut rng = spawn_stream(5, 0, 0);
        for _ in 0..200 {
            let s = sample_by_total_hazard(&m, &mut rng);
            assert_eq!(s.disposition, DispositionId(1));
            assert!(s.los_days > 0.0);
        }
    }

    #[test]
    fn latent_min_single_equals_lognormal_draw() {
        let m = FittedLosModel::from_labeled(&[("only", 1.0, 0.3)]).unwrap();
        let s = sample_by_latent_min(&m, &mut spawn_stream(9, 0, 0));
        let mut rng = spawn_stream(9, 0, 0);
        let z: f64 = StandardNormal.sample(&mut rng);
        assert_eq!(s.los_days, (1.0 + 0.3 * z).exp());
    }

    #[test]
    fn symmetric_split_is_even() {
        let m = FittedLosModel::from_labeled(&[("a", 2.0, 0.7), ("b", 2.0, 0.7)]).unwrap();
        let mut rng = spawn_stream(11, 0, 0);
        let n = 100_000;
        let first = (0..n).filter(|_| sample_by_total_hazard(&m, &mut rng).disposition == DispositionId(1)).count();
        let sd = (n as f64 * 0.25).sqrt();
        assert!(((first as f64) - n as f64 / 2.0).abs() < 3.0 * sd, "{first}");
    }
}
