//! Closed-form efficiency and CHSH value for each faking strategy.
//!
//! These are the oracles the Monte Carlo engine is checked against.
//! Correlations are indexed like [`SettingPair::ALL`](crate::types::SettingPair::ALL);
//! every strategy uses the CHSH sign pattern with `a0b1` as the negative term.

use crate::error::{Error, Result};
use crate::inequalities::gm_bound;

/// Per-setting signs of the CHSH sum, indexed a0b0, a1b0, a0b1, a1b1.
pub const CHSH_SIGNS: [f64; 4] = [1.0, 1.0, -1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Symmetric efficiency, `sqrt(coincidence_prob)`.
    pub eta: f64,
    pub s: f64,
    pub e_per_setting: [f64; 4],
    pub coincidence_prob: f64,
}

// Method 1 (deterministic polarization pairs) and method 2 (midpoint pulses).
const ETA1: f64 = 0.5;
const S1: f64 = 4.0;
const ETA2: f64 = 1.0;
const S2: f64 = 2.0;

/// Mixture of method 1 with probability `1 - p2` and method 2 with `p2`.
pub fn improved_predict(p2: f64) -> Result<Prediction> {
    if !(0.0..=1.0).contains(&p2) {
        return Err(Error::invalid(format!("p2 must lie in [0, 1], got {p2}")));
    }
    let p1 = 1.0 - p2;
    let c1 = p1 * ETA1 * ETA1;
    let c2 = p2 * ETA2 * ETA2;
    let coincidence_prob = c1 + c2;
    let s = (c1 * S1 + c2 * S2) / coincidence_prob;
    // Method 1 contributes ±1 with the CHSH sign, method 2 contributes +1.
    let e_per_setting = CHSH_SIGNS.map(|sign| (c1 * sign + c2) / coincidence_prob);
    Ok(Prediction {
        eta: coincidence_prob.sqrt(),
        s,
        e_per_setting,
        coincidence_prob,
    })
}

/// Perfect model with match probability `a` and mismatch probability `b`.
pub fn perfect_predict(a: f64, b: f64) -> Result<Prediction> {
    if !((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)) {
        return Err(Error::invalid(format!(
            "a and b must lie in [0, 1], got a = {a}, b = {b}"
        )));
    }
    if a + b == 0.0 {
        return Err(Error::invalid("a = b = 0 produces no coincidences"));
    }
    let e = a / (a + b);
    let coincidence_prob = a / 2.0 + b / 2.0;
    Ok(Prediction {
        eta: coincidence_prob.sqrt(),
        s: 4.0 * e,
        e_per_setting: CHSH_SIGNS.map(|sign| sign * e),
        coincidence_prob,
    })
}

/// Perfect-model parameters that sit exactly on the recalibrated local bound
/// at efficiency `eta`. Returns `(a, b, e)`.
pub fn ab_from_eta(eta: f64) -> Result<(f64, f64, f64)> {
    // Accept the boundary 2/3 despite rounding in its decimal spelling.
    if !(2.0 / 3.0 - 1e-12..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta must lie in [2/3, 1], got {eta}")));
    }
    let e = gm_bound(eta)? / 4.0;
    let eta2 = eta * eta;
    let a = 2.0 * e * eta2;
    let b = 2.0 * (1.0 - e) * eta2;
    Ok((a.clamp(0.0, 1.0), b.clamp(0.0, 1.0), e))
}

/// Existing deterministic-pair model: efficiency 1/2 per side and `S = 4E`.
pub fn existing_predict(e_target: f64) -> Result<Prediction> {
    if !(0.0..=1.0).contains(&e_target) {
        return Err(Error::invalid(format!("e_target must lie in [0, 1], got {e_target}")));
    }
    Ok(Prediction {
        eta: 0.5,
        s: 4.0 * e_target,
        e_per_setting: CHSH_SIGNS.map(|sign| sign * e_target),
        coincidence_prob: 0.25,
    })
}

/// Inverts [`improved_predict`]: the `p2` whose CHSH value is `s_target`.
pub fn p2_for_s(s_target: f64) -> Result<f64> {
    if !(2.0..=4.0).contains(&s_target) {
        return Err(Error::invalid(format!("target S must lie in [2, 4], got {s_target}")));
    }
    let s_at = |p2: f64| improved_predict(p2).map(|p| p.s);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // S decreases in p2.
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if s_at(mid)? > s_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
