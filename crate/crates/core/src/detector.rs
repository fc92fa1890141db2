//! Click-probability response of a blinded detector to a trigger pulse.
//!
//! Intensities are in units of the ideal threshold `I_th`. Empirical curves
//! carry their own (opaque) energy axis; `scale` converts an intensity into
//! that axis.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the click-probability ramp between the two thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Ramp {
    Linear,
    /// Probabilities sampled at evenly spaced fractions of the ramp, from
    /// 0 at `i_never` to 1 at `i_always`. Non-decreasing.
    Tabulated(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DetectorModel {
    StepThreshold { i_th: f64 },
    TwoThreshold { i_never: f64, i_always: f64, ramp: Ramp },
    Empirical { curve: Vec<(f64, f64)>, scale: f64 },
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel::StepThreshold { i_th: 1.0 }
    }
}

impl DetectorModel {
    pub fn step(i_th: f64) -> Result<Self> {
        if !(i_th.is_finite() && i_th > 0.0) {
            return Err(Error::invalid(format!("threshold must be positive, got {i_th}")));
        }
        Ok(DetectorModel::StepThreshold { i_th })
    }

    pub fn two_threshold(i_never: f64, i_always: f64, ramp: Ramp) -> Result<Self> {
        if !(i_never.is_finite() && i_always.is_finite() && i_never >= 0.0) {
            return Err(Error::invalid("thresholds must be finite and non-negative"));
        }
        if i_never >= i_always {
            return Err(Error::invalid(format!(
                "need i_never < i_always, got {i_never} >= {i_always}"
            )));
        }
        if let Ramp::Tabulated(ref table) = ramp {
            if table.len() < 2 {
                return Err(Error::invalid("tabulated ramp needs at least two points"));
            }
            if table[0] != 0.0 || table[table.len() - 1] != 1.0 {
                return Err(Error::invalid("tabulated ramp must start at 0 and end at 1"));
            }
            if table.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::invalid("tabulated ramp must be non-decreasing"));
            }
        }
        Ok(DetectorModel::TwoThreshold {
            i_never,
            i_always,
            ramp,
        })
    }

    /// Validated empirical curve; `scale` multiplies intensities before lookup.
    pub fn empirical(curve: Vec<(f64, f64)>, scale: f64) -> Result<Self> {
        validate_curve(&curve)?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("curve scale must be positive, got {scale}")));
        }
        Ok(DetectorModel::Empirical { curve, scale })
    }

    pub fn click_probability(&self, intensity: f64) -> f64 {
        debug_assert!(intensity >= 0.0);
        match self {
            DetectorModel::StepThreshold { i_th } => {
                if intensity >= *i_th {
                    1.0
                } else {
                    0.0
                }
            }
            DetectorModel::TwoThreshold {
                i_never,
                i_always,
                ramp,
            } => {
                if intensity <= *i_never {
                    0.0
                } else if intensity >= *i_always {
                    1.0
                } else {
                    let t = (intensity - i_never) / (i_always - i_never);
                    match ramp {
                        Ramp::Linear => t,
                        Ramp::Tabulated(table) => {
                            let step = 1.0 / (table.len() - 1) as f64;
                            let pts = table.iter().enumerate().map(|(i, &p)| (i as f64 * step, p));
                            interpolate(pts, t)
                        }
                    }
                }
            }
            DetectorModel::Empirical { curve, scale } => {
                let x = intensity * scale;
                if x < curve[0].0 {
                    0.0
                } else {
                    interpolate(curve.iter().copied(), x)
                }
            }
        }
        .clamp(0.0, 1.0)
    }

    pub fn sample_click<R: Rng + ?Sized>(&self, intensity: f64, rng: &mut R) -> bool {
        let p = self.click_probability(intensity);
        if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            rng.random::<f64>() < p
        }
    }
}

/// Piecewise-linear lookup on sorted points; clamps to the end values.
fn interpolate(points: impl Iterator<Item = (f64, f64)>, x: f64) -> f64 {
    let mut prev: Option<(f64, f64)> = None;
    for (xi, yi) in points {
        match prev {
            None if x <= xi => return yi,
            Some((x0, y0)) if x <= xi => {
                return y0 + (yi - y0) * (x - x0) / (xi - x0);
            }
            _ => prev = Some((xi, yi)),
        }
    }
    prev.map_or(0.0, |(_, y)| y)
}

fn validate_curve(curve: &[(f64, f64)]) -> Result<()> {
    if curve.len() < 2 {
        return Err(Error::MalformedCurve(format!(
            "need at least 2 rows, got {}",
            curve.len()
        )));
    }
    for (i, &(e, p)) in curve.iter().enumerate() {
        if !e.is_finite() {
            return Err(Error::MalformedCurve(format!(
                "row {}: energy {e} is not finite",
                i + 1
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::MalformedCurve(format!(
                "row {}: click probability {p} outside [0, 1]",
                i + 1
            )));
        }
    }
    for (i, w) in curve.windows(2).enumerate() {
        if w[1].0 <= w[0].0 {
            return Err(Error::MalformedCurve(format!(
                "row {}: energy {} does not exceed previous {}",
                i + 2,
                w[1].0,
                w[0].0
            )));
        }
        if w[1].1 < w[0].1 {
            return Err(Error::MalformedCurve(format!(
                "row {}: click probability decreases from {} to {}",
                i + 2,
                w[0].1,
                w[1].1
            )));
        }
    }
    Ok(())
}

/// Validates measured `(energy, click_probability)` rows as an empirical model
/// with unit scale.
pub fn load_response_curve(rows: Vec<(f64, f64)>) -> Result<DetectorModel> {
    DetectorModel::empirical(rows, 1.0)
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    energy: f64,
    click_probability: f64,
}

/// Reads the two-column `energy,click_probability` CSV (header required).
pub fn read_response_curve_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::MalformedCurve(e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["energy", "click_probability"] {
        return Err(Error::MalformedCurve(format!(
            "expected header `energy,click_probability`, got `{}`",
            names.join(",")
        )));
    }
    rdr.deserialize::<CurveRow>()
        .map(|row| {
            row.map(|r| (r.energy, r.click_probability))
                .map_err(|e| Error::MalformedCurve(e.to_string()))
        })
        .collect()
}

pub fn load_response_curve_file(path: impl AsRef<Path>, scale: f64) -> Result<DetectorModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    DetectorModel::empirical(read_response_curve_csv(file)?, scale)
}
