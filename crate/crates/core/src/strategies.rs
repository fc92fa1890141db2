//! What the adversarial source sends each trial, plus the honest quantum
//! baseline.
//!
//! Every emission is decided before the trial's settings are drawn; the
//! only exception is [`TrialPlan::Quantum`], which stands in for a genuinely
//! entangled source.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Angle, Basis, MeasurementSettings, Outcome, Party, Pulse, PulsePair, SettingPair};

/// Intensity used by the deterministic-pair strategy: matched bases reach
/// the threshold exactly, any other angle stays below it.
pub const DETERMINISTIC_INTENSITY: f64 = 1.0;

// ---------------------------------------------------------------------------
// Existing model: deterministic polarization pairs.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExistingModelSpec {
    e_target: f64,
    n_sim: f64,
    n_dif: f64,
    intensity: f64,
}

/// Polarization states one side may receive: index `2*basis + perp`.
fn polarization_state(angles: [Angle; 2], index: usize) -> Angle {
    let base = angles[index / 2];
    if index % 2 == 1 {
        base.perpendicular()
    } else {
        base
    }
}

/// `true` where the emission weight of (Alice state, Bob state) is `N_sim/4`.
/// Rows: α0, α0⊥, α1, α1⊥; columns: β0, β0⊥, β1, β1⊥.
const SIMILAR_CELL: [[bool; 4]; 4] = [
    [true, false, false, true],
    [false, true, true, false],
    [true, false, true, false],
    [false, true, false, true],
];

impl ExistingModelSpec {
    pub fn new(e_target: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&e_target) {
            return Err(Error::invalid(format!("e_target must lie in [0, 1], got {e_target}")));
        }
        // N_sim/N_dif = (1+E)/(1-E) with 2 N_sim + 2 N_dif = 1; E = 1 gives N_dif = 0.
        let n_sim = (1.0 + e_target) / 4.0;
        let n_dif = if e_target == 1.0 { 0.0 } else { (1.0 - e_target) / 4.0 };
        Ok(ExistingModelSpec {
            e_target,
            n_sim,
            n_dif,
            intensity: DETERMINISTIC_INTENSITY,
        })
    }

    pub fn with_intensity(mut self, intensity: f64) -> Result<Self> {
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(Error::invalid(format!("intensity must be positive, got {intensity}")));
        }
        self.intensity = intensity;
        Ok(self)
    }

    pub fn e_target(&self) -> f64 {
        self.e_target
    }
    pub fn n_sim(&self) -> f64 {
        self.n_sim
    }
    pub fn n_dif(&self) -> f64 {
        self.n_dif
    }
    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    /// Emission probability of each (Alice state, Bob state) cell.
    pub fn table(&self) -> [[f64; 4]; 4] {
        SIMILAR_CELL.map(|row| row.map(|sim| if sim { self.n_sim / 4.0 } else { self.n_dif / 4.0 }))
    }
}

/// A sampled cell of the emission table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolarizationCombination {
    pub alice_state: usize,
    pub bob_state: usize,
}

impl PolarizationCombination {
    pub fn is_similar(&self) -> bool {
        SIMILAR_CELL[self.alice_state][self.bob_state]
    }
}

pub fn sample_existing_combination<R: Rng + ?Sized>(spec: &ExistingModelSpec, rng: &mut R) -> PolarizationCombination {
    // Each row carries 1/4; within a row two cells are similar-type.
    let alice_state = rng.random_range(0..4usize);
    let similar = rng.random::<f64>() < 2.0 * spec.n_sim;
    let pick_second = rng.random::<bool>();
    let mut candidates = (0..4).filter(|&c| SIMILAR_CELL[alice_state][c] == similar);
    let first = candidates.next().expect("two cells of each type per row");
    let second = candidates.next().expect("two cells of each type per row");
    PolarizationCombination {
        alice_state,
        bob_state: if pick_second { second } else { first },
    }
}

pub fn existing_emit<R: Rng + ?Sized>(
    spec: &ExistingModelSpec,
    settings: &MeasurementSettings,
    rng: &mut R,
) -> PulsePair {
    let combo = sample_existing_combination(spec, rng);
    existing_pulses(spec.intensity, settings, combo)
}

fn existing_pulses(intensity: f64, settings: &MeasurementSettings, combo: PolarizationCombination) -> PulsePair {
    let pulse = |party, state| {
        Pulse::new(polarization_state(settings.angles(party), state), intensity).expect("intensity validated by spec")
    };
    PulsePair {
        alice: pulse(Party::Alice, combo.alice_state),
        bob: pulse(Party::Bob, combo.bob_state),
    }
}

// ---------------------------------------------------------------------------
// Improved model: mixture with midpoint pulses.
// ---------------------------------------------------------------------------

/// Half the (acute) separation between two analyzer angles, in degrees.
pub fn half_separation(a: Angle, b: Angle) -> f64 {
    a.separation_to(b).abs() / 2.0
}

/// Polarization midway between `a` and `b` along the acute arc.
pub fn midpoint(a: Angle, b: Angle) -> Angle {
    a.rotated(a.separation_to(b) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovedModelSpec {
    p2: f64,
    phi_a: f64,
    phi_b: f64,
    trigger_intensity: f64,
    symmetrize: bool,
    midpoint_alice: Angle,
    midpoint_bob: Angle,
}

impl ImprovedModelSpec {
    /// Builds the mixture for `settings`. Without an explicit trigger
    /// intensity the midpoint of `[1/cos²φ, 2)` is used.
    pub fn new(p2: f64, settings: &MeasurementSettings, trigger_intensity: Option<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&p2) {
            return Err(Error::invalid(format!("p2 must lie in [0, 1], got {p2}")));
        }
        let phi_a = half_separation(settings.alpha(Basis::Zero), settings.alpha(Basis::One));
        let phi_b = half_separation(settings.beta(Basis::Zero), settings.beta(Basis::One));
        let (lo, hi) = improved_intensity_window(phi_a.max(phi_b));
        if hi - lo <= WINDOW_EPS * lo {
            return Err(Error::InfeasibleGeometry {
                row: "midpoint pulse".into(),
                phi0: phi_a,
                phi1: phi_b,
            });
        }
        let trigger = trigger_intensity.unwrap_or(0.5 * (lo + hi));
        if !(trigger >= lo && trigger < hi) {
            return Err(Error::invalid(format!(
                "trigger intensity {trigger} outside the window [{lo}, {hi})"
            )));
        }
        Ok(ImprovedModelSpec {
            p2,
            phi_a,
            phi_b,
            trigger_intensity: trigger,
            symmetrize: true,
            midpoint_alice: midpoint(settings.alpha(Basis::Zero), settings.alpha(Basis::One)),
            midpoint_bob: midpoint(settings.beta(Basis::Zero), settings.beta(Basis::One)),
        })
    }

    pub fn with_symmetrize(mut self, on: bool) -> Self {
        self.symmetrize = on;
        self
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }
    pub fn phi_a(&self) -> f64 {
        self.phi_a
    }
    pub fn phi_b(&self) -> f64 {
        self.phi_b
    }
    pub fn trigger_intensity(&self) -> f64 {
        self.trigger_intensity
    }
    pub fn symmetrize(&self) -> bool {
        self.symmetrize
    }
    pub fn midpoints(&self) -> (Angle, Angle) {
        (self.midpoint_alice, self.midpoint_bob)
    }
}

/// `[1/cos²φ, 2)`: the brighter arm reaches threshold while a conjugate
/// split stays below it on both arms.
pub fn improved_intensity_window(phi_degrees: f64) -> (f64, f64) {
    let c = phi_degrees.to_radians().cos().powi(2);
    (1.0 / c, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovedEmission {
    pub pulses: PulsePair,
    pub method2: bool,
    /// Method-2 trial whose signs are jointly flipped.
    pub flipped: bool,
}

pub fn improved_emit<R: Rng + ?Sized>(
    spec: &ImprovedModelSpec,
    settings: &MeasurementSettings,
    rng: &mut R,
) -> ImprovedEmission {
    if rng.random::<f64>() >= spec.p2 {
        let method1 = ExistingModelSpec::new(1.0).expect("valid target");
        return ImprovedEmission {
            pulses: existing_emit(&method1, settings, rng),
            method2: false,
            flipped: false,
        };
    }
    let flipped = spec.symmetrize && rng.random::<bool>();
    // Rotating both midpoint pulses by 90° routes the bright share to the
    // reflected arm on both sides, i.e. a joint sign flip.
    let turn = if flipped { 90.0 } else { 0.0 };
    let pulse =
        |angle: Angle| Pulse::new(angle.rotated(turn), spec.trigger_intensity).expect("positive trigger intensity");
    ImprovedEmission {
        pulses: PulsePair {
            alice: pulse(spec.midpoint_alice),
            bob: pulse(spec.midpoint_bob),
        },
        method2: true,
        flipped,
    }
}

/// With probability 1/2 flips both parties' signs.
pub fn symmetrize<R: Rng + ?Sized>(pair: (Outcome, Outcome), rng: &mut R) -> (Outcome, Outcome) {
    if rng.random::<bool>() {
        (pair.0.flipped(), pair.1.flipped())
    } else {
        pair
    }
}

// ---------------------------------------------------------------------------
// Perfect model.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerfectMode {
    /// Sample outcomes directly from the joint-probability table.
    Analytic,
    /// Emit control pulses and let the analyzer and detectors decide.
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfectModelSpec {
    a: f64,
    b: f64,
    mode: PerfectMode,
    role_reversal: bool,
}

impl PerfectModelSpec {
    pub fn new(a: f64, b: f64, mode: PerfectMode, role_reversal: bool) -> Result<Self> {
        if !((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)) {
            return Err(Error::invalid(format!(
                "a and b must lie in [0, 1], got a = {a}, b = {b}"
            )));
        }
        if mode == PerfectMode::Physical && a < b {
            return Err(Error::invalid(format!(
                "physical control needs a >= b (row probability a - b), got a = {a}, b = {b}"
            )));
        }
        Ok(PerfectModelSpec {
            a,
            b,
            mode,
            role_reversal,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn mode(&self) -> PerfectMode {
        self.mode
    }
    pub fn role_reversal(&self) -> bool {
        self.role_reversal
    }

    /// Exact joint outcome distribution at `setting` (averaged over the two
    /// source labels) for a given role assignment.
    pub fn joint_distribution(&self, setting: SettingPair, reversed: bool) -> JointDistribution {
        let mut out = JointDistribution::default();
        for source in [Basis::Zero, Basis::One] {
            let d = self.joint_distribution_for_source(source, setting, reversed);
            for (o, p) in out.p.iter_mut().flatten().zip(d.p.iter().flatten()) {
                *o += 0.5 * p;
            }
        }
        out
    }

    /// One column of the outcome table: the distribution given the source
    /// label and the setting pair.
    pub fn joint_distribution_for_source(
        &self,
        source: Basis,
        setting: SettingPair,
        reversed: bool,
    ) -> JointDistribution {
        let (responder_basis, fixed_basis) = if reversed {
            (setting.bob, setting.alice)
        } else {
            (setting.alice, setting.bob)
        };
        let responder = responder_distribution(self.a, self.b, source == responder_basis);
        let fixed = deterministic_outcome(source, fixed_basis, reversed);
        let mut out = JointDistribution::default();
        for (o, p) in [Outcome::Plus, Outcome::Minus, Outcome::Inconclusive]
            .into_iter()
            .zip(responder)
        {
            if reversed {
                out.add(fixed, o, p);
            } else {
                out.add(o, fixed, p);
            }
        }
        out
    }
}

/// `[P(+), P(-), P(?)]` of the probabilistic party.
fn responder_distribution(a: f64, b: f64, matched: bool) -> [f64; 3] {
    if matched {
        [a, 0.0, 1.0 - a]
    } else {
        [b / 2.0, b / 2.0, 1.0 - b]
    }
}

/// Outcome of the party that always clicks.
///
/// Normally Bob: source β0 gives `+` under β0 and `-` under β1, source β1
/// gives `+` under both. With roles reversed Alice carries the minus sign
/// for source α1 measured along α0, which keeps `a0b1` the anticorrelated
/// setting.
pub fn deterministic_outcome(source: Basis, own_basis: Basis, reversed: bool) -> Outcome {
    let minus = if reversed {
        source == Basis::One && own_basis == Basis::Zero
    } else {
        source == Basis::Zero && own_basis == Basis::One
    };
    if minus {
        Outcome::Minus
    } else {
        Outcome::Plus
    }
}

/// Joint probabilities over `{+, -, ?}²`, Alice first.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JointDistribution {
    pub p: [[f64; 3]; 3],
}

fn outcome_slot(o: Outcome) -> usize {
    match o {
        Outcome::Plus => 0,
        Outcome::Minus => 1,
        Outcome::Inconclusive | Outcome::Double => 2,
    }
}

impl JointDistribution {
    fn add(&mut self, alice: Outcome, bob: Outcome, p: f64) {
        self.p[outcome_slot(alice)][outcome_slot(bob)] += p;
    }

    pub fn get(&self, alice: Outcome, bob: Outcome) -> f64 {
        self.p[outcome_slot(alice)][outcome_slot(bob)]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    pub fn alice_marginal(&self) -> [f64; 3] {
        self.p.map(|row| row.iter().sum())
    }

    pub fn bob_marginal(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        for row in &self.p {
            for (acc, p) in m.iter_mut().zip(row) {
                *acc += p;
            }
        }
        m
    }
}

/// Largest change in either party's marginal when only the remote setting
/// changes, over all own settings and outcomes.
pub fn analytic_signalling(dist: impl Fn(SettingPair) -> JointDistribution) -> f64 {
    let mut worst = 0.0f64;
    for own in [Basis::Zero, Basis::One] {
        let a0 = dist(SettingPair::new(own, Basis::Zero)).alice_marginal();
        let a1 = dist(SettingPair::new(own, Basis::One)).alice_marginal();
        let b0 = dist(SettingPair::new(Basis::Zero, own)).bob_marginal();
        let b1 = dist(SettingPair::new(Basis::One, own)).bob_marginal();
        for k in 0..3 {
            worst = worst.max((a0[k] - a1[k]).abs()).max((b0[k] - b1[k]).abs());
        }
    }
    worst
}

/// The source-side decision of one perfect-model trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfectEmission {
    pub source: Basis,
    pub reversed: bool,
    /// Control pulse toward the probabilistic party (physical mode only).
    pub control: Option<(ControlBehavior, Pulse)>,
}

/// Picks the source label (α0β0 or α1β1) and, in physical mode, the
/// control pulse. Roles alternate with the trial index when role reversal
/// is on.
pub fn perfect_emit<R: Rng + ?Sized>(
    spec: &PerfectModelSpec,
    control: Option<&ControlPlan>,
    trial_index: u64,
    rng: &mut R,
) -> PerfectEmission {
    let source = if rng.random::<bool>() { Basis::One } else { Basis::Zero };
    let reversed = spec.role_reversal && trial_index % 2 == 1;
    let control = match spec.mode {
        PerfectMode::Analytic => None,
        PerfectMode::Physical => {
            let plan = control.expect("physical mode requires a control plan");
            let party = if reversed { Party::Bob } else { Party::Alice };
            Some(control_pulse_for(plan, party, source, rng))
        }
    };
    PerfectEmission {
        source,
        reversed,
        control,
    }
}

/// Samples the probabilistic party's outcome directly from the table.
pub fn sample_responder<R: Rng + ?Sized>(a: f64, b: f64, matched: bool, rng: &mut R) -> Outcome {
    let u = rng.random::<f64>();
    if matched {
        if u < a {
            Outcome::Plus
        } else {
            Outcome::Inconclusive
        }
    } else if u < b / 2.0 {
        Outcome::Plus
    } else if u < b {
        Outcome::Minus
    } else {
        Outcome::Inconclusive
    }
}

// ---------------------------------------------------------------------------
// Physical control of a and b.
// ---------------------------------------------------------------------------

/// The four ways the source can drive the probabilistic party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlBehavior {
    /// Polarized along the source basis: clicks on a match, silent otherwise.
    DeterministicMatched,
    /// Midway toward the other basis: `+` on a match, `+` on a mismatch.
    RandomOnMismatchUp,
    /// Midway toward the other basis' perpendicular: `+` on a match, `-` on a mismatch.
    RandomOnMismatchDown,
    Vacuum,
}

impl ControlBehavior {
    pub const ALL: [ControlBehavior; 4] = [
        ControlBehavior::DeterministicMatched,
        ControlBehavior::RandomOnMismatchUp,
        ControlBehavior::RandomOnMismatchDown,
        ControlBehavior::Vacuum,
    ];

    pub fn probability(self, a: f64, b: f64) -> f64 {
        match self {
            ControlBehavior::DeterministicMatched => a - b,
            ControlBehavior::RandomOnMismatchUp | ControlBehavior::RandomOnMismatchDown => b / 2.0,
            ControlBehavior::Vacuum => 1.0 - a,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ControlBehavior::DeterministicMatched => "deterministic-matched",
            ControlBehavior::RandomOnMismatchUp => "random-on-mismatch-up",
            ControlBehavior::RandomOnMismatchDown => "random-on-mismatch-down",
            ControlBehavior::Vacuum => "vacuum",
        }
    }
}

impl fmt::Display for ControlBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

const WINDOW_EPS: f64 = 1e-9;

/// Admissible trigger intensities for one control row, in units of `I_th`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntensityWindow {
    /// `[min, sup)`.
    Range {
        min: f64,
        sup: f64,
    },
    Vacuum,
    Empty,
}

impl IntensityWindow {
    fn range(min: f64, sup: f64) -> Self {
        // Degenerate windows (e.g. φ = 45° where cos² = sin²) come out a few
        // ulps wide; no real pulse can be tuned inside those.
        if sup - min > WINDOW_EPS * min.max(1.0) {
            IntensityWindow::Range { min, sup }
        } else {
            IntensityWindow::Empty
        }
    }

    pub fn is_feasible(&self) -> bool {
        !matches!(self, IntensityWindow::Empty)
    }

    /// Midpoint of the window; vacuum is 0.
    pub fn midpoint(&self) -> Option<f64> {
        match *self {
            IntensityWindow::Range { min, sup } => Some(0.5 * (min + sup)),
            IntensityWindow::Vacuum => Some(0.0),
            IntensityWindow::Empty => None,
        }
    }

    pub fn contains(&self, intensity: f64) -> bool {
        match *self {
            IntensityWindow::Range { min, sup } => intensity >= min && intensity < sup,
            IntensityWindow::Vacuum => intensity == 0.0,
            IntensityWindow::Empty => false,
        }
    }
}

/// Solves a row's intensity constraints. `phi0` is half the separation of
/// the two bases, `phi1` half the separation from the other basis'
/// perpendicular (degrees).
pub fn feasible_intensity_window(row: ControlBehavior, phi0: f64, phi1: f64) -> IntensityWindow {
    // I sin²φ < 1 <= I cos²φ
    let midpoint_row = |phi: f64| {
        let r = phi.to_radians();
        let (c, s) = (r.cos().powi(2), r.sin().powi(2));
        if c <= 0.0 {
            return IntensityWindow::Empty;
        }
        let sup = if s > 0.0 { 1.0 / s } else { f64::INFINITY };
        IntensityWindow::range(1.0 / c, sup)
    };
    match row {
        ControlBehavior::DeterministicMatched => {
            // I >= 1, I cos²(2φ0) < 1, I sin²(2φ0) < 1
            let r = (2.0 * phi0).to_radians();
            let bound = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
            let sup = bound(r.cos().powi(2)).min(bound(r.sin().powi(2)));
            IntensityWindow::range(1.0, sup)
        }
        ControlBehavior::RandomOnMismatchUp => midpoint_row(phi0),
        ControlBehavior::RandomOnMismatchDown => midpoint_row(phi1),
        ControlBehavior::Vacuum => IntensityWindow::Vacuum,
    }
}

/// Polarization and intensity of every row, for each source label, toward
/// one party with bases `angles`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTable {
    pub angles: [Angle; 2],
    pub phi0: f64,
    pub phi1: f64,
    /// `rows[source][behavior]`; `None` for rows that are never used.
    pub rows: [[Option<(ControlBehavior, Pulse)>; 4]; 2],
}

impl ControlTable {
    pub fn new(a: f64, b: f64, angles: [Angle; 2]) -> Result<Self> {
        if a < b {
            return Err(Error::invalid(format!("need a >= b, got a = {a}, b = {b}")));
        }
        // Both source labels see the same geometry up to reflection.
        let phi0 = half_separation(angles[0], angles[1]);
        let phi1 = half_separation(angles[0], angles[1].perpendicular());
        let mut rows = [[None; 4]; 2];
        for source in [Basis::Zero, Basis::One] {
            let own = angles[source.index()];
            let other = angles[source.other().index()];
            for (slot, behavior) in ControlBehavior::ALL.into_iter().enumerate() {
                if behavior.probability(a, b) <= 0.0 {
                    continue;
                }
                let window = feasible_intensity_window(behavior, phi0, phi1);
                let intensity = window.midpoint().ok_or_else(|| Error::InfeasibleGeometry {
                    row: behavior.label().into(),
                    phi0,
                    phi1,
                })?;
                let pulse = match behavior {
                    ControlBehavior::DeterministicMatched => Pulse::new(own, intensity)?,
                    ControlBehavior::RandomOnMismatchUp => Pulse::new(midpoint(own, other), intensity)?,
                    ControlBehavior::RandomOnMismatchDown => {
                        Pulse::new(midpoint(own, other.perpendicular()), intensity)?
                    }
                    ControlBehavior::Vacuum => Pulse::vacuum(),
                };
                rows[source.index()][slot] = Some((behavior, pulse));
            }
        }
        Ok(ControlTable {
            angles,
            phi0,
            phi1,
            rows,
        })
    }
}

/// Control tables for both parties (Bob's is used under role reversal).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPlan {
    pub a: f64,
    pub b: f64,
    pub alice: ControlTable,
    pub bob: ControlTable,
}

impl ControlPlan {
    pub fn new(a: f64, b: f64, settings: &MeasurementSettings) -> Result<Self> {
        Ok(ControlPlan {
            a,
            b,
            alice: ControlTable::new(a, b, settings.angles(Party::Alice))?,
            bob: ControlTable::new(a, b, settings.angles(Party::Bob))?,
        })
    }

    pub fn table(&self, party: Party) -> &ControlTable {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }
}

pub fn sample_control_behavior<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> ControlBehavior {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for behavior in ControlBehavior::ALL {
        acc += behavior.probability(a, b);
        if u < acc {
            return behavior;
        }
    }
    ControlBehavior::Vacuum
}

/// Draws a control row and returns the pulse it prescribes toward `party`
/// for the given source label.
pub fn control_pulse_for<R: Rng + ?Sized>(
    plan: &ControlPlan,
    party: Party,
    source: Basis,
    rng: &mut R,
) -> (ControlBehavior, Pulse) {
    let behavior = sample_control_behavior(plan.a, plan.b, rng);
    let slot = ControlBehavior::ALL
        .iter()
        .position(|&b| b == behavior)
        .expect("listed");
    plan.table(party).rows[source.index()][slot].unwrap_or((ControlBehavior::Vacuum, Pulse::vacuum()))
}

// ---------------------------------------------------------------------------
// Quantum baseline.
// ---------------------------------------------------------------------------

/// Two-qubit polarization state in the basis |HH>, |HV>, |VH>, |VV>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitState {
    amplitudes: [(f64, f64); 4],
}

impl TwoQubitState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("state is not normalized: <psi|psi> = {norm}")));
        }
        Ok(TwoQubitState {
            amplitudes: amplitudes.map(|a| (a.re, a.im)),
        })
    }

    fn real(v: [f64; 4]) -> Self {
        Self::new(v.map(|x| Complex64::new(x, 0.0))).expect("normalized Bell state")
    }

    pub fn phi_plus() -> Self {
        Self::real([FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2])
    }
    pub fn phi_minus() -> Self {
        Self::real([FRAC_1_SQRT_2, 0.0, 0.0, -FRAC_1_SQRT_2])
    }
    pub fn psi_plus() -> Self {
        Self::real([0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0])
    }
    pub fn psi_minus() -> Self {
        Self::real([0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0])
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        self.amplitudes.map(|(re, im)| Complex64::new(re, im))
    }

    /// Rotates Alice's qubit by `degrees` in the polarization plane.
    pub fn rotate_alice(&self, degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        let [hh, hv, vh, vv] = self.amplitudes();
        let amps = [c * hh - s * vh, c * hv - s * vv, s * hh + c * vh, s * hv + c * vv];
        Self::new(amps).expect("rotation preserves the norm")
    }

    /// `p[i][j]` for Alice outcome `i` and Bob outcome `j`, with 0 = `+`
    /// (along the analyzer) and 1 = `-` (perpendicular).
    pub fn joint_probabilities(&self, alpha: Angle, beta: Angle) -> [[f64; 2]; 2] {
        let basis = |theta: Angle| {
            let (s, c) = theta.radians().sin_cos();
            [[c, s], [-s, c]]
        };
        let (ua, ub) = (basis(alpha), basis(beta));
        let psi = self.amplitudes();
        let mut p = [[0.0; 2]; 2];
        for (i, row) in p.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut amp = Complex64::new(0.0, 0.0);
                for x in 0..2 {
                    for y in 0..2 {
                        amp += psi[2 * x + y] * (ua[i][x] * ub[j][y]);
                    }
                }
                *cell = amp.norm_sqr();
            }
        }
        p
    }
}

/// `P(++) + P(--) - P(+-) - P(-+)` from the full state vector.
pub fn quantum_correlation(alpha: Angle, beta: Angle, state: &TwoQubitState) -> f64 {
    let p = state.joint_probabilities(alpha, beta);
    p[0][0] + p[1][1] - p[0][1] - p[1][0]
}

pub fn quantum_chsh(settings: &MeasurementSettings, state: &TwoQubitState) -> f64 {
    SettingPair::ALL
        .iter()
        .zip(crate::analytic::CHSH_SIGNS)
        .map(|(s, sign)| sign * quantum_correlation(settings.alpha(s.alice), settings.beta(s.bob), state))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumSpec {
    pub state: TwoQubitState,
    eta_true: f64,
}

impl QuantumSpec {
    pub fn new(state: TwoQubitState, eta_true: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta_true) {
            return Err(Error::invalid(format!("eta_true must lie in [0, 1], got {eta_true}")));
        }
        Ok(QuantumSpec { state, eta_true })
    }

    pub fn eta_true(&self) -> f64 {
        self.eta_true
    }
}

/// Per-setting joint tables, computed once per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumTables {
    pub joint: [[[f64; 2]; 2]; 4],
    pub eta_true: f64,
}

impl QuantumTables {
    pub fn new(spec: &QuantumSpec, settings: &MeasurementSettings) -> Self {
        QuantumTables {
            joint: SettingPair::ALL.map(|s| {
                spec.state
                    .joint_probabilities(settings.alpha(s.alice), settings.beta(s.bob))
            }),
            eta_true: spec.eta_true,
        }
    }
}

/// Samples an honest trial: the quantum joint outcome, then independent
/// loss on each side with probability `1 - eta_true`.
pub fn quantum_emit<R: Rng + ?Sized>(tables: &QuantumTables, setting: SettingPair, rng: &mut R) -> (Outcome, Outcome) {
    let p = &tables.joint[setting.index()];
    let u = rng.random::<f64>();
    let (a, b) = if u < p[0][0] {
        (Outcome::Plus, Outcome::Plus)
    } else if u < p[0][0] + p[0][1] {
        (Outcome::Plus, Outcome::Minus)
    } else if u < p[0][0] + p[0][1] + p[1][0] {
        (Outcome::Minus, Outcome::Plus)
    } else {
        (Outcome::Minus, Outcome::Minus)
    };
    let keep = |o: Outcome, rng: &mut R| {
        if rng.random::<f64>() < tables.eta_true {
            o
        } else {
            Outcome::Inconclusive
        }
    };
    let a = keep(a, rng);
    let b = keep(b, rng);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::DetectorModel;
    use crate::optics::{analyze, DoubleClickPolicy};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn offset_settings() -> MeasurementSettings {
        MeasurementSettings::from_degrees(-78.75, 56.25, 11.25, -33.75).unwrap()
    }

    fn within_se(observed: u64, n: u64, p: f64, k: f64) -> bool {
        let f = observed as f64 / n as f64;
        (f - p).abs() <= k * (p * (1.0 - p) / n as f64).sqrt() + 1e-15
    }

    #[test]
    fn existing_spec_weights() {
        let s = ExistingModelSpec::new(1.0).unwrap();
        assert_eq!((s.n_sim(), s.n_dif()), (0.5, 0.0));
        let s = ExistingModelSpec::new(1.0 / SQRT_2).unwrap();
        assert_abs_diff_eq!(s.n_sim() / s.n_dif(), 3.0 + 2.0 * SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(2.0 * s.n_sim() + 2.0 * s.n_dif(), 1.0, epsilon = 1e-15);
        let total: f64 = s.table().iter().flatten().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
        assert!(ExistingModelSpec::new(1.2).is_err());
    }

    #[test]
    fn existing_e1_never_emits_dif_cells() {
        let s = ExistingModelSpec::new(1.0).unwrap();
        let mut r = rng(1);
        for _ in 0..100_000 {
            assert!(sample_existing_combination(&s, &mut r).is_similar());
        }
    }

    #[test]
    fn existing_table_frequencies() {
        let s = ExistingModelSpec::new(1.0 / SQRT_2).unwrap();
        let table = s.table();
        let mut r = rng(2);
        let n = 400_000u64;
        let mut counts = [[0u64; 4]; 4];
        let mut sim = 0u64;
        for _ in 0..n {
            let c = sample_existing_combination(&s, &mut r);
            counts[c.alice_state][c.bob_state] += 1;
            sim += c.is_similar() as u64;
        }
        for i in 0..4 {
            for j in 0..4 {
                assert!(within_se(counts[i][j], n, table[i][j], 3.0), "cell {i},{j}");
            }
        }
        let ratio = sim as f64 / (n - sim) as f64;
        assert!((ratio - (3.0 + 2.0 * SQRT_2)).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn existing_sign_pattern_matches_chsh() {
        // Deterministic outcome of a state measured in its own basis.
        let settings = offset_settings();
        let s = ExistingModelSpec::new(1.0).unwrap();
        let d = DetectorModel::default();
        let mut r = rng(3);
        for _ in 0..2000 {
            let combo = sample_existing_combination(&s, &mut r);
            let pulses = existing_pulses(1.0, &settings, combo);
            let ia = Basis::from_index(combo.alice_state / 2);
            let ib = Basis::from_index(combo.bob_state / 2);
            let oa = analyze(
                &pulses.alice,
                settings.alpha(ia),
                &d,
                &d,
                DoubleClickPolicy::Discard,
                &mut r,
            )
            .outcome;
            let ob = analyze(
                &pulses.bob,
                settings.beta(ib),
                &d,
                &d,
                DoubleClickPolicy::Discard,
                &mut r,
            )
            .outcome;
            assert!(oa.is_conclusive() && ob.is_conclusive());
            let product = if oa == ob { 1.0 } else { -1.0 };
            let sign = crate::analytic::CHSH_SIGNS[SettingPair::new(ia, ib).index()];
            assert_eq!(product, sign);
            // Mismatched bases stay dark.
            let oa = analyze(
                &pulses.alice,
                settings.alpha(ia.other()),
                &d,
                &d,
                DoubleClickPolicy::Discard,
                &mut r,
            );
            assert_eq!(oa.outcome, Outcome::Inconclusive);
        }
    }

    #[test]
    fn improved_window_and_midpoints() {
        let settings = offset_settings();
        let spec = ImprovedModelSpec::new(0.3, &settings, None).unwrap();
        assert_abs_diff_eq!(spec.phi_a(), 22.5, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.phi_b(), 22.5, epsilon = 1e-12);
        let lo = 1.0 / 22.5f64.to_radians().cos().powi(2);
        assert_abs_diff_eq!(spec.trigger_intensity(), 0.5 * (lo + 2.0), epsilon = 1e-12);
        assert!(ImprovedModelSpec::new(0.3, &settings, Some(1.0)).is_err());
        assert!(ImprovedModelSpec::new(0.3, &settings, Some(2.0)).is_err());
        assert!(ImprovedModelSpec::new(0.3, &settings, Some(1.5)).is_ok());
        // Orthogonal bases leave no window.
        let bad = MeasurementSettings::from_degrees(0.0, 90.0, 0.0, 45.0).unwrap();
        assert!(matches!(
            ImprovedModelSpec::new(0.3, &bad, None),
            Err(Error::InfeasibleGeometry { .. })
        ));
    }

    #[test]
    fn midpoint_pulses_give_plus_in_both_bases() {
        let settings = offset_settings();
        let spec = ImprovedModelSpec::new(1.0, &settings, None)
            .unwrap()
            .with_symmetrize(false);
        let d = DetectorModel::default();
        let mut r = rng(4);
        for _ in 0..100 {
            let em = improved_emit(&spec, &settings, &mut r);
            assert!(em.method2 && !em.flipped);
            for basis in [Basis::Zero, Basis::One] {
                let a = analyze(
                    &em.pulses.alice,
                    settings.alpha(basis),
                    &d,
                    &d,
                    DoubleClickPolicy::Flag,
                    &mut r,
                );
                let b = analyze(
                    &em.pulses.bob,
                    settings.beta(basis),
                    &d,
                    &d,
                    DoubleClickPolicy::Flag,
                    &mut r,
                );
                assert_eq!((a.outcome, b.outcome), (Outcome::Plus, Outcome::Plus));
            }
        }
    }

    #[test]
    fn flipped_midpoints_equal_symmetrized_outcomes() {
        let settings = offset_settings();
        let spec = ImprovedModelSpec::new(1.0, &settings, None).unwrap();
        let d = DetectorModel::default();
        let mut r = rng(5);
        let n = 200_000u64;
        let mut mm = 0u64;
        for _ in 0..n {
            let em = improved_emit(&spec, &settings, &mut r);
            let a = analyze(
                &em.pulses.alice,
                settings.alpha(Basis::One),
                &d,
                &d,
                DoubleClickPolicy::Flag,
                &mut r,
            );
            let b = analyze(
                &em.pulses.bob,
                settings.beta(Basis::Zero),
                &d,
                &d,
                DoubleClickPolicy::Flag,
                &mut r,
            );
            let expected = if em.flipped {
                (Outcome::Minus, Outcome::Minus)
            } else {
                (Outcome::Plus, Outcome::Plus)
            };
            assert_eq!((a.outcome, b.outcome), expected);
            mm += em.flipped as u64;
        }
        assert!(within_se(mm, n, 0.5, 4.0));
    }

    #[test]
    fn symmetrize_examples() {
        let mut r = rng(6);
        let n = 1_000_000u64;
        let mut mm = 0u64;
        for _ in 0..n {
            let out = symmetrize((Outcome::Plus, Outcome::Plus), &mut r);
            assert!(out == (Outcome::Plus, Outcome::Plus) || out == (Outcome::Minus, Outcome::Minus));
            mm += (out.0 == Outcome::Minus) as u64;
        }
        assert!((mm as f64 / n as f64 - 0.5).abs() < 0.002);
        // Joint flip preserves the product.
        let mut r = rng(7);
        for pair in [(Outcome::Plus, Outcome::Minus), (Outcome::Minus, Outcome::Minus)] {
            let out = symmetrize(pair, &mut r);
            assert_eq!(out.0 == out.1, pair.0 == pair.1);
        }
    }

    #[test]
    fn table2_columns_match_published_entries() {
        use Outcome::{Inconclusive as Q, Minus as M, Plus as P};
        let (a, b) = (0.9, 0.3);
        let spec = PerfectModelSpec::new(a, b, PerfectMode::Analytic, false).unwrap();
        let [s00, s10, s01, s11] = SettingPair::ALL;
        let col = |src, s| spec.joint_distribution_for_source(src, s, false);
        let z = Basis::Zero;
        let o = Basis::One;
        // source α0β0
        assert_eq!(col(z, s00).get(P, P), a);
        assert_abs_diff_eq!(col(z, s00).get(Q, P), 1.0 - a);
        assert_eq!(col(z, s10).get(P, P), b / 2.0);
        assert_eq!(col(z, s10).get(M, P), b / 2.0);
        assert_abs_diff_eq!(col(z, s10).get(Q, P), 1.0 - b);
        assert_eq!(col(z, s01).get(P, M), a);
        assert_abs_diff_eq!(col(z, s01).get(Q, M), 1.0 - a);
        assert_eq!(col(z, s11).get(P, M), b / 2.0);
        assert_eq!(col(z, s11).get(M, M), b / 2.0);
        assert_abs_diff_eq!(col(z, s11).get(Q, M), 1.0 - b);
        // source α1β1
        for s in [s00, s01] {
            assert_eq!(col(o, s).get(P, P), b / 2.0);
            assert_eq!(col(o, s).get(M, P), b / 2.0);
            assert_abs_diff_eq!(col(o, s).get(Q, P), 1.0 - b);
        }
        for s in [s10, s11] {
            assert_eq!(col(o, s).get(P, P), a);
            assert_abs_diff_eq!(col(o, s).get(Q, P), 1.0 - a);
            assert_eq!(col(o, s).get(M, P), 0.0);
        }
        for src in [z, o] {
            for s in SettingPair::ALL {
                for rev in [false, true] {
                    assert_abs_diff_eq!(
                        spec.joint_distribution_for_source(src, s, rev).total(),
                        1.0,
                        epsilon = 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn role_reversal_keeps_correlations() {
        let (a, b) = (0.8, 0.35);
        let spec = PerfectModelSpec::new(a, b, PerfectMode::Analytic, true).unwrap();
        for (s, sign) in SettingPair::ALL.iter().zip(crate::analytic::CHSH_SIGNS) {
            for rev in [false, true] {
                let d = spec.joint_distribution(*s, rev);
                let coinc = d.p[0][0] + d.p[0][1] + d.p[1][0] + d.p[1][1];
                let e = (d.p[0][0] + d.p[1][1] - d.p[0][1] - d.p[1][0]) / coinc;
                assert_abs_diff_eq!(e, sign * a / (a + b), epsilon = 1e-12);
                assert_abs_diff_eq!(coinc, (a + b) / 2.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn perfect_distribution_is_no_signalling() {
        for i in 0..10 {
            for j in 0..10 {
                let a = i as f64 / 9.0;
                let b = j as f64 / 9.0;
                let spec = PerfectModelSpec::new(a, b, PerfectMode::Analytic, false).unwrap();
                for rev in [false, true] {
                    let worst = analytic_signalling(|s| spec.joint_distribution(s, rev));
                    assert!(worst < 1e-12, "a={a} b={b} rev={rev}: {worst}");
                }
            }
        }
    }

    #[test]
    fn sampled_responder_matches_column() {
        let (a, b) = (12.0 * SQRT_2 - 16.0, 40.0 - 28.0 * SQRT_2);
        let mut r = rng(8);
        let n = 300_000u64;
        for matched in [true, false] {
            let mut c = [0u64; 3];
            for _ in 0..n {
                c[outcome_slot(sample_responder(a, b, matched, &mut r))] += 1;
            }
            let p = responder_distribution(a, b, matched);
            for k in 0..3 {
                assert!(within_se(c[k], n, p[k], 3.0), "matched={matched} slot {k}");
            }
        }
    }

    #[test]
    fn intensity_windows() {
        match feasible_intensity_window(ControlBehavior::RandomOnMismatchUp, 30.0, 15.0) {
            IntensityWindow::Range { min, sup } => {
                assert_abs_diff_eq!(min, 4.0 / 3.0, epsilon = 1e-12);
                assert_abs_diff_eq!(sup, 4.0, epsilon = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            feasible_intensity_window(ControlBehavior::RandomOnMismatchUp, 45.0, 0.0),
            IntensityWindow::Empty
        );
        assert_eq!(
            feasible_intensity_window(ControlBehavior::DeterministicMatched, 45.0, 0.0),
            IntensityWindow::Empty
        );
        assert_eq!(
            feasible_intensity_window(ControlBehavior::Vacuum, 10.0, 35.0),
            IntensityWindow::Vacuum
        );
        match feasible_intensity_window(ControlBehavior::DeterministicMatched, 22.5, 22.5) {
            IntensityWindow::Range { min, sup } => {
                assert_eq!(min, 1.0);
                assert_abs_diff_eq!(sup, 2.0, epsilon = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn control_rows_reproduce_table3_outcomes() {
        let settings = offset_settings();
        let plan = ControlPlan::new(0.9, 0.4, &settings).unwrap();
        let d = DetectorModel::default();
        let mut r = rng(9);
        for party in [Party::Alice, Party::Bob] {
            let table = plan.table(party);
            for source in [Basis::Zero, Basis::One] {
                for row in table.rows[source.index()].iter().flatten() {
                    let (behavior, pulse) = *row;
                    let measure = |basis: Basis, r: &mut ChaCha8Rng| {
                        analyze(&pulse, table.angles[basis.index()], &d, &d, DoubleClickPolicy::Flag, r).outcome
                    };
                    let (on_match, on_mismatch) = (measure(source, &mut r), measure(source.other(), &mut r));
                    let expected = match behavior {
                        ControlBehavior::DeterministicMatched => (Outcome::Plus, Outcome::Inconclusive),
                        ControlBehavior::RandomOnMismatchUp => (Outcome::Plus, Outcome::Plus),
                        ControlBehavior::RandomOnMismatchDown => (Outcome::Plus, Outcome::Minus),
                        ControlBehavior::Vacuum => (Outcome::Inconclusive, Outcome::Inconclusive),
                    };
                    assert_eq!((on_match, on_mismatch), expected, "{party:?} {source:?} {behavior}");
                }
            }
        }
    }

    #[test]
    fn control_plan_rejects_bad_inputs() {
        let settings = offset_settings();
        assert!(ControlPlan::new(0.3, 0.5, &settings).is_err());
        assert!(PerfectModelSpec::new(0.3, 0.5, PerfectMode::Physical, true).is_err());
        assert!(PerfectModelSpec::new(0.3, 0.5, PerfectMode::Analytic, true).is_ok());
        let ortho = MeasurementSettings::from_degrees(0.0, 90.0, 0.0, 45.0).unwrap();
        assert!(matches!(
            ControlPlan::new(0.9, 0.4, &ortho),
            Err(Error::InfeasibleGeometry { .. })
        ));
        // a == b never uses the deterministic row.
        assert!(ControlPlan::new(1.0, 1.0, &settings).is_ok());
    }

    #[test]
    fn control_row_frequencies() {
        let (a, b) = (0.97, 0.40);
        let mut r = rng(10);
        let n = 400_000u64;
        let mut c = [0u64; 4];
        for _ in 0..n {
            let k = sample_control_behavior(a, b, &mut r);
            c[ControlBehavior::ALL.iter().position(|&x| x == k).unwrap()] += 1;
        }
        for (k, behavior) in ControlBehavior::ALL.iter().enumerate() {
            assert!(within_se(c[k], n, behavior.probability(a, b), 4.0), "{behavior}");
        }
    }

    #[test]
    fn quantum_examples() {
        let phi = TwoQubitState::phi_plus();
        for x in [-80.0, 0.0, 33.3] {
            assert_abs_diff_eq!(
                quantum_correlation(Angle::deg(x), Angle::deg(x), &phi),
                1.0,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                quantum_correlation(Angle::deg(x), Angle::deg(x + 45.0), &phi),
                0.0,
                epsilon = 1e-12
            );
        }
        let s = quantum_chsh(&MeasurementSettings::standard(), &phi);
        assert_abs_diff_eq!(s, 2.0 * SQRT_2, epsilon = 1e-9);
        let unnormalized = [Complex64::new(1.0, 0.0); 4];
        assert!(TwoQubitState::new(unnormalized).is_err());
    }

    #[test]
    fn joint_probabilities_sum_to_one() {
        let state = TwoQubitState::new(
            [
                Complex64::new(0.5, 0.1),
                Complex64::new(0.0, 0.3),
                Complex64::new(-0.4, 0.0),
                Complex64::new(0.2, -0.5),
            ]
            .map(|c| c / (0.26f64 + 0.09 + 0.16 + 0.29).sqrt()),
        )
        .unwrap();
        let p = state.joint_probabilities(Angle::deg(12.0), Angle::deg(-40.0));
        assert_abs_diff_eq!(p.iter().flatten().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn offset_angle_set_needs_rotated_state() {
        // This angle set gives no violation with any of the four
        // Bell states, but a maximally entangled state with Alice's
        // polarization rotated by a fixed angle reaches |S| = 2√2.
        let settings = offset_settings();
        for state in [
            TwoQubitState::phi_plus(),
            TwoQubitState::phi_minus(),
            TwoQubitState::psi_plus(),
            TwoQubitState::psi_minus(),
        ] {
            assert!(quantum_chsh(&settings, &state).abs() < 2.0 + 1e-9);
        }
        let (best_angle, best_s) = (0..1800)
            .map(|k| {
                let theta = -90.0 + k as f64 * 0.1;
                (
                    theta,
                    quantum_chsh(&settings, &TwoQubitState::phi_plus().rotate_alice(theta)),
                )
            })
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .unwrap();
        assert_abs_diff_eq!(best_s.abs(), 2.0 * SQRT_2, epsilon = 1e-9);
        // Rotation of ±22.5° (mod 90°) reaches the maximum.
        assert_abs_diff_eq!(best_angle.rem_euclid(45.0), 22.5, epsilon = 1e-9);
    }

    #[test]
    fn quantum_sampling_erasure() {
        let tables = QuantumTables::new(
            &QuantumSpec::new(TwoQubitState::phi_plus(), 0.9).unwrap(),
            &MeasurementSettings::standard(),
        );
        let mut r = rng(12);
        let n = 1_000_000u64;
        let mut coinc = 0u64;
        for _ in 0..n {
            let (a, b) = quantum_emit(&tables, SettingPair::ALL[0], &mut r);
            coinc += (a.is_conclusive() && b.is_conclusive()) as u64;
        }
        assert!((coinc as f64 / n as f64 - 0.81).abs() < 0.002);
        let dark = QuantumTables::new(
            &QuantumSpec::new(TwoQubitState::phi_plus(), 0.0).unwrap(),
            &MeasurementSettings::standard(),
        );
        for _ in 0..1000 {
            assert_eq!(
                quantum_emit(&dark, SettingPair::ALL[3], &mut r),
                (Outcome::Inconclusive, Outcome::Inconclusive)
            );
        }
    }

    proptest! {
        #[test]
        fn rotation_preserves_maximal_chsh(theta in -90.0f64..90.0) {
            // Rotating Alice's state by θ is the same as rotating her analyzers by -θ.
            let st = TwoQubitState::phi_plus().rotate_alice(theta);
            let a = Angle::deg(10.0);
            let b = Angle::deg(-25.0);
            let direct = quantum_correlation(a, b, &st);
            let shifted = quantum_correlation(a.rotated(-theta), b, &TwoQubitState::phi_plus());
            prop_assert!((direct - shifted).abs() < 1e-12);
        }
    }
}
