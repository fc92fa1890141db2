//! Post-selected correlations and CHSH-type statistics.

use crate::error::{Error, Result};
use crate::types::SettingPair;

/// Correlations for the four setting pairs, named `e{alice}{bob}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshCombination {
    pub e00: f64,
    pub e10: f64,
    pub e11: f64,
    pub e01: f64,
}

impl ChshCombination {
    pub fn new(e00: f64, e10: f64, e11: f64, e01: f64) -> Result<Self> {
        for (name, e) in [("e00", e00), ("e10", e10), ("e11", e11), ("e01", e01)] {
            if !(-1.0..=1.0).contains(&e) {
                return Err(Error::invalid(format!("{name} = {e} outside [-1, 1]")));
            }
        }
        Ok(ChshCombination { e00, e10, e11, e01 })
    }

    /// From an array indexed like [`SettingPair::ALL`].
    pub fn from_array(e: [f64; 4]) -> Result<Self> {
        let at = |s: SettingPair| e[s.index()];
        let [s00, s10, s01, s11] = SettingPair::ALL;
        Self::new(at(s00), at(s10), at(s11), at(s01))
    }
}

/// Coincidence-only correlation `(N++ + N-- - N+- - N-+) / (N++ + N-- + N+- + N-+)`.
/// Single-sided and empty events never enter.
pub fn correlation_from_counts(n_pp: u64, n_pm: u64, n_mp: u64, n_mm: u64) -> Result<f64> {
    let same = n_pp as f64 + n_mm as f64;
    let diff = n_pm as f64 + n_mp as f64;
    let total = same + diff;
    if total == 0.0 {
        // The caller attaches the setting when it knows it.
        return Err(Error::AllZeroCoincidences(SettingPair::ALL[0]));
    }
    Ok(((same - diff) / total).clamp(-1.0, 1.0))
}

pub fn chsh_value(c: &ChshCombination) -> f64 {
    c.e00 + c.e10 + c.e11 - c.e01
}

/// Efficiency-recalibrated local bound `4/eta - 2`, saturating at the
/// algebraic maximum 4 for `eta <= 2/3`.
pub fn gm_bound(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    Ok((4.0 / eta - 2.0).min(4.0))
}

/// `N_sim / N_dif = (1 + E) / (1 - E)` for symmetric outcome populations.
pub fn nsim_ndif_ratio(e: f64) -> Result<f64> {
    if e == 1.0 {
        return Err(Error::SingularRatio);
    }
    if !(-1.0..1.0).contains(&e) {
        return Err(Error::invalid(format!("correlation must lie in [-1, 1), got {e}")));
    }
    Ok((1.0 + e) / (1.0 - e))
}

/// Per-setting `|E|` when all four correlations share one magnitude.
pub fn symmetric_e_for_s(s: f64) -> Result<f64> {
    if !(-4.0..=4.0).contains(&s) {
        return Err(Error::invalid(format!("|S| must not exceed 4, got {s}")));
    }
    Ok(s / 4.0)
}
