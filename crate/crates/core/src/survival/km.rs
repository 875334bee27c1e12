use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Product-limit survival curve: `survival[i]` holds on `[times[i], times[i+1])`
/// and the curve is 1 before `times[0]`. Steps occur only at event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve<T = f64> {
    pub times: Vec<T>,
    pub survival: Vec<T>,
}

impl<T: Real> KmCurve<T> {
    /// Right-continuous evaluation.
    pub fn eval(&self, t: T) -> T {
        match self.times.iter().rposition(|&s| s <= t) {
            Some(i) => self.survival[i],
            None => T::one(),
        }
    }
}

/// Kaplan–Meier estimator. At tied times all events are processed before
/// censorings, so censored subjects count as at risk for same-time events.
pub fn kaplan_meier<T: Real>(times: &[T], events: &[bool]) -> Result<KmCurve<T>> {
    if times.is_empty() {
        return Err(Error::InvalidInput("Kaplan-Meier needs at least one observation".into()));
    }
    if times.len() != events.len() {
        return Err(Error::InvalidInput(format!(
            "times/events length mismatch: {} vs {}",
            times.len(),
            events.len()
        )));
    }
    if let Some(t) = times.iter().find(|&&t| !(t > T::zero()) || !t.is_finite()) {
        return Err(Error::InvalidInput(format!("times must be positive and finite, got {t}")));
    }

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| {
        times[a]
            .partial_cmp(&times[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(events[b].cmp(&events[a]))
    });

    let mut at_risk = times.len();
    let mut s = T::one();
    let mut curve = KmCurve { times: Vec::new(), survival: Vec::new() };
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0usize;
        let mut leaving = 0usize;
        while i < order.len() && times[order[i]] == t {
            if events[order[i]] {
                deaths += 1;
            }
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            s = s * (T::one() - T::lit(deaths as f64) / T::lit(at_risk as f64));
            curve.times.push(t);
            curve.survival.push(s);
        }
        at_risk -= leaving;
    }
    Ok(curve)
}
