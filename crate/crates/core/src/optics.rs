//! One party's analyzer: a rotatable polarizing beamsplitter feeding two
//! blinded detectors. The transmitted arm reports `+`, the reflected arm `-`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::types::{Angle, Outcome, Pulse};

/// What an analyzer reports when both detectors click.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoubleClickPolicy {
    /// Report `?`; the double click is still counted as a diagnostic.
    #[default]
    Discard,
    /// Report `+` or `-` with probability 1/2 each.
    Randomize,
    /// Report [`Outcome::Double`].
    Flag,
}

/// Splits `intensity` between the transmitted and reflected arms according
/// to Malus's law.
pub fn malus_split(incoming: Angle, analyzer: Angle, intensity: f64) -> Result<(f64, f64)> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::invalid(format!(
            "intensity must be non-negative and finite, got {intensity}"
        )));
    }
    let delta = (incoming.degrees() - analyzer.degrees()).to_radians();
    let transmit = intensity * delta.cos().powi(2);
    // Reflected share as the complement keeps the sum exact.
    let reflect = (intensity - transmit).max(0.0);
    Ok((transmit, reflect))
}

/// Result of one analyzer measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub outcome: Outcome,
    pub double_click: bool,
}

/// The two detectors behind one beamsplitter.
#[derive(Debug, Clone, PartialEq)]
pub struct Analyzer<'a> {
    pub plus: &'a DetectorModel,
    pub minus: &'a DetectorModel,
    pub policy: DoubleClickPolicy,
}

impl<'a> Analyzer<'a> {
    pub fn new(detector: &'a DetectorModel, policy: DoubleClickPolicy) -> Self {
        Analyzer {
            plus: detector,
            minus: detector,
            policy,
        }
    }

    pub fn measure<R: Rng + ?Sized>(&self, pulse: &Pulse, basis: Angle, rng: &mut R) -> Detection {
        analyze(pulse, basis, self.plus, self.minus, self.policy, rng)
    }
}

/// Measures `pulse` in the basis at `basis_angle`.
pub fn analyze<R: Rng + ?Sized>(
    pulse: &Pulse,
    basis_angle: Angle,
    detector_plus: &DetectorModel,
    detector_minus: &DetectorModel,
    policy: DoubleClickPolicy,
    rng: &mut R,
) -> Detection {
    let (i_plus, i_minus) = match pulse.polarization() {
        None => (0.0, 0.0),
        Some(pol) => {
            malus_split(pol, basis_angle, pulse.intensity()).expect("pulse intensity is validated at construction")
        }
    };
    let click_plus = detector_plus.sample_click(i_plus, rng);
    let click_minus = detector_minus.sample_click(i_minus, rng);
    let outcome = match (click_plus, click_minus) {
        (true, false) => Outcome::Plus,
        (false, true) => Outcome::Minus,
        (false, false) => Outcome::Inconclusive,
        (true, true) => match policy {
            DoubleClickPolicy::Discard => Outcome::Inconclusive,
            DoubleClickPolicy::Randomize => {
                if rng.random::<bool>() {
                    Outcome::Plus
                } else {
                    Outcome::Minus
                }
            }
            DoubleClickPolicy::Flag => Outcome::Double,
        },
    };
    Detection {
        outcome,
        double_click: click_plus && click_minus,
    }
}
