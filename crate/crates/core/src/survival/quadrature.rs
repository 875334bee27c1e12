//! Adaptive Simpson integration.

use crate::error::{Error, Result};
use crate::real::Real;

pub const DEFAULT_MAX_DEPTH: u32 = 40;

/// Integrates `f` over `[a, b]`, first splitting into `panels` equal pieces,
/// each refined adaptively until the Richardson estimate is below its share of
/// `abs_tol`. Fails if any subinterval reaches `max_depth` unresolved.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    abs_tol: T,
    panels: usize,
    max_depth: u32,
) -> Result<T> {
    if b <= a {
        return Ok(T::zero());
    }
    let panels = panels.max(1);
    let width = (b - a) / T::lit(panels as f64);
    let tol = abs_tol / T::lit(panels as f64);
    let mut total = T::zero();
    for p in 0..panels {
        let lo = a + width * T::lit(p as f64);
        let hi = if p + 1 == panels { b } else { lo + width };
        let (flo, fhi) = (f(lo), f(hi));
        let mid = (lo + hi) / T::lit(2.0);
        let fmid = f(mid);
        let whole = (hi - lo) / T::lit(6.0) * (flo + T::lit(4.0) * fmid + fhi);
        total = total + recurse(&f, lo, hi, flo, fmid, fhi, whole, tol, max_depth, max_depth)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
    max_depth: u32,
) -> Result<T> {
    let m = (a + b) / T::lit(2.0);
    let lm = (a + m) / T::lit(2.0);
    let rm = (m + b) / T::lit(2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / T::lit(6.0) * (fa + T::lit(4.0) * flm + fm);
    let right = (b - m) / T::lit(6.0) * (fm + T::lit(4.0) * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= T::lit(15.0) * tol {
        return Ok(left + right + delta / T::lit(15.0));
    }
    if depth == 0 {
        return Err(Error::Quadrature {
            lo: a.to_f64().unwrap_or(f64::NAN),
            hi: b.to_f64().unwrap_or(f64::NAN),
            depth: max_depth,
        });
    }
    let half = tol / T::lit(2.0);
    Ok(recurse(f, a, m, fa, flm, fm, left, half, depth - 1, max_depth)?
        + recurse(f, m, b, fm, frm, fb, right, half, depth - 1, max_depth)?)
}
