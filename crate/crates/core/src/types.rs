//! Value types shared across the simulator.
//!
//! Angles are polarization-plane angles in degrees, stored modulo 180° in
//! `[-90, 90)`. Intensities are dimensionless multiples of the ideal click
//! threshold `I_th`.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequalities::{chsh_value, correlation_from_counts, ChshCombination};
use crate::optics::DoubleClickPolicy;

/// Linear polarization angle in degrees, normalized to `[-90, 90)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct Angle(f64);

impl Angle {
    pub fn new(degrees: f64) -> Result<Self> {
        if !degrees.is_finite() {
            return Err(Error::invalid(format!("angle must be finite, got {degrees}")));
        }
        Ok(Angle(normalize_degrees(degrees)))
    }

    /// Panics on non-finite input; for literals and derived angles.
    pub fn deg(degrees: f64) -> Self {
        Self::new(degrees).expect("finite angle")
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    /// Signed rotation taking `self` onto `other`, in `[-90, 90)`.
    pub fn separation_to(self, other: Angle) -> f64 {
        normalize_degrees(other.0 - self.0)
    }

    pub fn rotated(self, degrees: f64) -> Angle {
        Angle::deg(self.0 + degrees)
    }

    pub fn perpendicular(self) -> Angle {
        self.rotated(90.0)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;
    fn try_from(x: f64) -> Result<Self> {
        Angle::new(x)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.0)
    }
}

/// Reduces `x` modulo 180 into `[-90, 90)`. Values already in range are
/// returned unchanged, which makes the map exactly idempotent.
pub fn normalize_degrees(x: f64) -> f64 {
    if (-90.0..90.0).contains(&x) {
        return x;
    }
    let r = x.rem_euclid(180.0);
    if r >= 90.0 {
        let shifted = r - 180.0;
        if shifted < -90.0 {
            -90.0
        } else {
            shifted
        }
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Zero,
    One,
}

impl Basis {
    pub fn index(self) -> usize {
        match self {
            Basis::Zero => 0,
            Basis::One => 1,
        }
    }

    pub fn from_index(i: usize) -> Basis {
        if i == 0 {
            Basis::Zero
        } else {
            Basis::One
        }
    }

    pub fn other(self) -> Basis {
        match self {
            Basis::Zero => Basis::One,
            Basis::One => Basis::Zero,
        }
    }
}

/// The joint basis choice of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SettingPair {
    pub alice: Basis,
    pub bob: Basis,
}

impl SettingPair {
    /// In index order: a0b0, a1b0, a0b1, a1b1.
    pub const ALL: [SettingPair; 4] = [
        SettingPair::new(Basis::Zero, Basis::Zero),
        SettingPair::new(Basis::One, Basis::Zero),
        SettingPair::new(Basis::Zero, Basis::One),
        SettingPair::new(Basis::One, Basis::One),
    ];

    pub const fn new(alice: Basis, bob: Basis) -> Self {
        SettingPair { alice, bob }
    }

    pub fn index(self) -> usize {
        self.alice.index() + 2 * self.bob.index()
    }

    pub fn label(self) -> &'static str {
        ["a0b0", "a1b0", "a0b1", "a1b1"][self.index()]
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The four analyzer angles of a CHSH test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    alpha: [Angle; 2],
    beta: [Angle; 2],
}

impl MeasurementSettings {
    pub fn new(alpha0: Angle, alpha1: Angle, beta0: Angle, beta1: Angle) -> Result<Self> {
        if alpha0 == alpha1 {
            return Err(Error::invalid(format!("alpha0 and alpha1 coincide at {alpha0}")));
        }
        if beta0 == beta1 {
            return Err(Error::invalid(format!("beta0 and beta1 coincide at {beta0}")));
        }
        Ok(MeasurementSettings {
            alpha: [alpha0, alpha1],
            beta: [beta0, beta1],
        })
    }

    pub fn from_degrees(alpha0: f64, alpha1: f64, beta0: f64, beta1: f64) -> Result<Self> {
        Self::new(
            Angle::new(alpha0)?,
            Angle::new(alpha1)?,
            Angle::new(beta0)?,
            Angle::new(beta1)?,
        )
    }

    /// 0°, 45° for Alice and 22.5°, 67.5° for Bob.
    pub fn standard() -> Self {
        Self::from_degrees(0.0, 45.0, 22.5, 67.5).expect("distinct angles")
    }

    pub fn alpha(&self, basis: Basis) -> Angle {
        self.alpha[basis.index()]
    }

    pub fn beta(&self, basis: Basis) -> Angle {
        self.beta[basis.index()]
    }

    pub fn angles(&self, party: Party) -> [Angle; 2] {
        match party {
            Party::Alice => self.alpha,
            Party::Bob => self.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
    Inconclusive,
    Double,
}

impl Outcome {
    pub fn is_conclusive(self) -> bool {
        matches!(self, Outcome::Plus | Outcome::Minus)
    }

    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
            other => other,
        }
    }
}

/// Light sent toward one party: a polarized pulse or vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    polarization: Option<Angle>,
    intensity: f64,
}

impl Pulse {
    pub fn new(polarization: Angle, intensity: f64) -> Result<Self> {
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(Error::invalid(format!(
                "pulse intensity must be positive and finite, got {intensity}; use Pulse::vacuum for no light"
            )));
        }
        Ok(Pulse {
            polarization: Some(polarization),
            intensity,
        })
    }

    pub const fn vacuum() -> Self {
        Pulse {
            polarization: None,
            intensity: 0.0,
        }
    }

    pub fn polarization(&self) -> Option<Angle> {
        self.polarization
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn is_vacuum(&self) -> bool {
        self.polarization.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePair {
    pub alice: Pulse,
    pub bob: Pulse,
}

/// Outcome tallies for one setting pair.
///
/// Every trial lands in exactly one of the coincidence, single-sided,
/// neither, or flagged categories. `double_events` is a diagnostic counter of
/// trials in which at least one analyzer saw both detectors click, whatever
/// the policy did with them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SettingCounts {
    pp: u64,
    pm: u64,
    mp: u64,
    mm: u64,
    alice_only: u64,
    bob_only: u64,
    neither: u64,
    flagged: u64,
    double_events: u64,
    trials: u64,
}

impl SettingCounts {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        pp: u64,
        pm: u64,
        mp: u64,
        mm: u64,
        alice_only: u64,
        bob_only: u64,
        neither: u64,
        flagged: u64,
        double_events: u64,
        trials: u64,
    ) -> Result<Self> {
        let c = SettingCounts {
            pp,
            pm,
            mp,
            mm,
            alice_only,
            bob_only,
            neither,
            flagged,
            double_events,
            trials,
        };
        let sum = [pp, pm, mp, mm, alice_only, bob_only, neither, flagged]
            .iter()
            .try_fold(0u64, |acc, &x| acc.checked_add(x));
        if sum != Some(trials) {
            return Err(Error::invalid(format!(
                "category counts sum to {sum:?} but trials = {trials}"
            )));
        }
        if double_events > trials {
            return Err(Error::invalid("more double-click trials than trials"));
        }
        Ok(c)
    }

    /// Tallies one trial. `double_click` marks that at least one analyzer
    /// registered a double click.
    pub fn record(&mut self, alice: Outcome, bob: Outcome, double_click: bool) {
        use Outcome::*;
        self.trials += 1;
        if double_click {
            self.double_events += 1;
        }
        match (alice, bob) {
            (Double, _) | (_, Double) => self.flagged += 1,
            (Plus, Plus) => self.pp += 1,
            (Plus, Minus) => self.pm += 1,
            (Minus, Plus) => self.mp += 1,
            (Minus, Minus) => self.mm += 1,
            (Plus | Minus, Inconclusive) => self.alice_only += 1,
            (Inconclusive, Plus | Minus) => self.bob_only += 1,
            (Inconclusive, Inconclusive) => self.neither += 1,
        }
    }

    pub fn add(&self, other: &SettingCounts) -> SettingCounts {
        SettingCounts {
            pp: self.pp + other.pp,
            pm: self.pm + other.pm,
            mp: self.mp + other.mp,
            mm: self.mm + other.mm,
            alice_only: self.alice_only + other.alice_only,
            bob_only: self.bob_only + other.bob_only,
            neither: self.neither + other.neither,
            flagged: self.flagged + other.flagged,
            double_events: self.double_events + other.double_events,
            trials: self.trials + other.trials,
        }
    }

    pub fn pp(&self) -> u64 {
        self.pp
    }
    pub fn pm(&self) -> u64 {
        self.pm
    }
    pub fn mp(&self) -> u64 {
        self.mp
    }
    pub fn mm(&self) -> u64 {
        self.mm
    }
    pub fn alice_only(&self) -> u64 {
        self.alice_only
    }
    pub fn bob_only(&self) -> u64 {
        self.bob_only
    }
    pub fn neither(&self) -> u64 {
        self.neither
    }
    pub fn flagged(&self) -> u64 {
        self.flagged
    }
    pub fn double_events(&self) -> u64 {
        self.double_events
    }
    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn coincidences(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }

    pub fn alice_conclusive(&self) -> u64 {
        self.coincidences() + self.alice_only
    }

    pub fn bob_conclusive(&self) -> u64 {
        self.coincidences() + self.bob_only
    }

    pub fn correlation(&self) -> Result<f64> {
        correlation_from_counts(self.pp, self.pm, self.mp, self.mm)
    }
}

/// Per-setting tallies for a whole run, indexed by [`SettingPair`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    per_setting: [SettingCounts; 4],
}

impl CoincidenceCounts {
    pub fn from_settings(per_setting: [SettingCounts; 4]) -> Self {
        CoincidenceCounts { per_setting }
    }

    pub fn add(&self, other: &CoincidenceCounts) -> CoincidenceCounts {
        let mut out = *self;
        for (dst, src) in out.per_setting.iter_mut().zip(other.per_setting.iter()) {
            *dst = dst.add(src);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (SettingPair, &SettingCounts)> {
        SettingPair::ALL.iter().copied().zip(self.per_setting.iter())
    }

    fn total(&self, f: impl Fn(&SettingCounts) -> u64) -> u64 {
        self.per_setting.iter().map(f).sum()
    }

    pub fn trials(&self) -> u64 {
        self.total(SettingCounts::trials)
    }

    pub fn coincidences(&self) -> u64 {
        self.total(SettingCounts::coincidences)
    }

    pub fn alice_conclusive(&self) -> u64 {
        self.total(SettingCounts::alice_conclusive)
    }

    pub fn bob_conclusive(&self) -> u64 {
        self.total(SettingCounts::bob_conclusive)
    }

    pub fn double_events(&self) -> u64 {
        self.total(SettingCounts::double_events)
    }
}

impl Index<SettingPair> for CoincidenceCounts {
    type Output = SettingCounts;
    fn index(&self, s: SettingPair) -> &SettingCounts {
        &self.per_setting[s.index()]
    }
}

impl IndexMut<SettingPair> for CoincidenceCounts {
    fn index_mut(&mut self, s: SettingPair) -> &mut SettingCounts {
        &mut self.per_setting[s.index()]
    }
}

/// Joint outcome counts for one setting pair, Alice's outcome first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeTable {
    cells: [[u64; 4]; 4],
}

impl OutcomeTable {
    pub const OUTCOMES: [Outcome; 4] = [Outcome::Plus, Outcome::Minus, Outcome::Inconclusive, Outcome::Double];

    fn slot(o: Outcome) -> usize {
        match o {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
            Outcome::Inconclusive => 2,
            Outcome::Double => 3,
        }
    }

    pub fn from_cells(cells: [[u64; 4]; 4]) -> Self {
        OutcomeTable { cells }
    }

    pub fn record(&mut self, alice: Outcome, bob: Outcome) {
        self.cells[Self::slot(alice)][Self::slot(bob)] += 1;
    }

    pub fn get(&self, alice: Outcome, bob: Outcome) -> u64 {
        self.cells[Self::slot(alice)][Self::slot(bob)]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    /// Counts of Alice's outcomes, in [`Self::OUTCOMES`] order.
    pub fn alice_marginal(&self) -> [u64; 4] {
        self.cells.map(|row| row.iter().sum())
    }

    pub fn bob_marginal(&self) -> [u64; 4] {
        let mut m = [0; 4];
        for row in &self.cells {
            for (acc, c) in m.iter_mut().zip(row) {
                *acc += c;
            }
        }
        m
    }

    pub fn add(&self, other: &OutcomeTable) -> OutcomeTable {
        let mut out = *self;
        for (dst, src) in out.cells.iter_mut().flatten().zip(other.cells.iter().flatten()) {
            *dst += src;
        }
        out
    }
}

/// Statistics of a finished (or merged) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub counts: CoincidenceCounts,
    /// Joint outcome tables, indexed like [`SettingPair::ALL`].
    pub tables: [OutcomeTable; 4],
    /// Indexed like [`SettingPair::ALL`].
    pub correlations: [f64; 4],
    pub s_value: f64,
    pub eta_alice: f64,
    pub eta_bob: f64,
    pub eta_symmetric: f64,
    pub seed: u64,
    pub strategy_label: String,
    pub settings: MeasurementSettings,
    pub policy: DoubleClickPolicy,
}

impl RunSummary {
    pub fn from_counts(
        counts: CoincidenceCounts,
        tables: [OutcomeTable; 4],
        seed: u64,
        strategy_label: impl Into<String>,
        settings: MeasurementSettings,
        policy: DoubleClickPolicy,
    ) -> Result<Self> {
        let trials = counts.trials();
        if trials == 0 {
            return Err(Error::invalid("summary requires at least one trial"));
        }
        let mut correlations = [0.0; 4];
        for (setting, c) in counts.iter() {
            correlations[setting.index()] = c.correlation().map_err(|_| Error::AllZeroCoincidences(setting))?;
        }
        let s_value = chsh_value(&ChshCombination::from_array(correlations)?);
        let n = trials as f64;
        Ok(RunSummary {
            counts,
            tables,
            correlations,
            s_value,
            eta_alice: counts.alice_conclusive() as f64 / n,
            eta_bob: counts.bob_conclusive() as f64 / n,
            eta_symmetric: (counts.coincidences() as f64 / n).sqrt(),
            seed,
            strategy_label: strategy_label.into(),
            settings,
            policy,
        })
    }

    pub fn correlation(&self, setting: SettingPair) -> f64 {
        self.correlations[setting.index()]
    }

    pub fn trials(&self) -> u64 {
        self.counts.trials()
    }

    /// Binomial standard error of `s_value`, treating the four settings as
    /// independent samples: `Var E = (1 - E²) / N_coinc`.
    pub fn s_standard_error(&self) -> f64 {
        self.counts
            .iter()
            .map(|(s, c)| {
                let e = self.correlation(s);
                (1.0 - e * e).max(0.0) / c.coincidences() as f64
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Standard error of `eta_symmetric` from the binomial coincidence
    /// fraction, propagated through the square root.
    pub fn eta_symmetric_standard_error(&self) -> f64 {
        let n = self.trials() as f64;
        let p = self.eta_symmetric * self.eta_symmetric;
        if self.eta_symmetric == 0.0 {
            return 0.0;
        }
        (p * (1.0 - p) / n).max(0.0).sqrt() / (2.0 * self.eta_symmetric)
    }
}
