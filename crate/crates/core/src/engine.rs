//! Monte Carlo trial loop.
//!
//! The trial index space is cut into fixed-size batches. Batch `k` draws
//! from stream `k` of the run seed, so counts depend only on
//! `(config, seed)` and never on how batches are scheduled across threads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::optics::{Analyzer, DoubleClickPolicy};
use crate::rng::{stream, SimRng};
use crate::strategies::{
    deterministic_outcome, existing_emit, improved_emit, midpoint, perfect_emit, quantum_emit, sample_responder,
    ControlPlan, ExistingModelSpec, ImprovedModelSpec, PerfectEmission, PerfectMode, PerfectModelSpec, QuantumSpec,
    QuantumTables,
};
use crate::types::{
    Basis, CoincidenceCounts, MeasurementSettings, Outcome, OutcomeTable, PulsePair, RunSummary, SettingPair,
};

pub const DEFAULT_BATCH_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    Existing(ExistingModelSpec),
    Improved(ImprovedModelSpec),
    Perfect(PerfectModelSpec),
    Quantum(QuantumSpec),
}

impl Strategy {
    /// Identifies the strategy and its parameters; summaries only merge when
    /// labels agree.
    pub fn label(&self) -> String {
        match self {
            Strategy::Existing(s) => format!("existing(e_target={},intensity={})", s.e_target(), s.intensity()),
            Strategy::Improved(s) => format!(
                "improved(p2={},trigger={},symmetrize={})",
                s.p2(),
                s.trigger_intensity(),
                s.symmetrize()
            ),
            Strategy::Perfect(s) => format!(
                "perfect(a={},b={},mode={},role_reversal={})",
                s.a(),
                s.b(),
                match s.mode() {
                    PerfectMode::Analytic => "analytic",
                    PerfectMode::Physical => "physical",
                },
                s.role_reversal()
            ),
            Strategy::Quantum(s) => format!("quantum(eta_true={},state={:?})", s.eta_true(), s.state.amplitudes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub settings: MeasurementSettings,
    pub n_trials: u64,
    pub seed: u64,
    pub double_click_policy: DoubleClickPolicy,
    /// Used by every strategy that emits physical pulses.
    pub detector: DetectorModel,
    pub batch_size: u64,
}

impl RunConfig {
    pub fn new(strategy: Strategy, settings: MeasurementSettings, n_trials: u64, seed: u64) -> Result<Self> {
        let config = RunConfig {
            strategy,
            settings,
            n_trials,
            seed,
            double_click_policy: DoubleClickPolicy::default(),
            detector: DetectorModel::default(),
            batch_size: DEFAULT_BATCH_SIZE,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_policy(mut self, policy: DoubleClickPolicy) -> Self {
        self.double_click_policy = policy;
        self
    }

    pub fn with_detector(mut self, detector: DetectorModel) -> Self {
        self.detector = detector;
        self
    }

    pub fn with_batch_size(mut self, batch_size: u64) -> Result<Self> {
        self.batch_size = batch_size;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if let Strategy::Improved(spec) = &self.strategy {
            let s = &self.settings;
            let expected = (
                midpoint(s.alpha(Basis::Zero), s.alpha(Basis::One)),
                midpoint(s.beta(Basis::Zero), s.beta(Basis::One)),
            );
            if spec.midpoints() != expected {
                return Err(Error::invalid("improved-model spec was built for different settings"));
            }
        }
        Ok(())
    }

    pub fn n_batches(&self) -> u64 {
        self.n_trials.div_ceil(self.batch_size)
    }
}

/// What the source committed to before the settings were drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialPlan {
    Pulses(PulsePair),
    Perfect(PerfectEmission),
    Quantum,
}

/// Per-run state derived once from the config.
#[derive(Debug, Clone)]
struct Prepared {
    control: Option<ControlPlan>,
    quantum: Option<QuantumTables>,
}

impl Prepared {
    fn new(config: &RunConfig) -> Result<Self> {
        let control = match &config.strategy {
            Strategy::Perfect(spec) if spec.mode() == PerfectMode::Physical => {
                Some(ControlPlan::new(spec.a(), spec.b(), &config.settings)?)
            }
            _ => None,
        };
        let quantum = match &config.strategy {
            Strategy::Quantum(spec) => Some(QuantumTables::new(spec, &config.settings)),
            _ => None,
        };
        Ok(Prepared { control, quantum })
    }
}

/// Accumulated counts; the only thing batches exchange.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub counts: CoincidenceCounts,
    pub tables: [OutcomeTable; 4],
}

impl Tally {
    fn record(&mut self, setting: SettingPair, alice: Outcome, bob: Outcome, double_click: bool) {
        self.counts[setting].record(alice, bob, double_click);
        self.tables[setting.index()].record(alice, bob);
    }

    pub fn combine(mut self, other: Tally) -> Tally {
        self.counts = self.counts.add(&other.counts);
        for (dst, src) in self.tables.iter_mut().zip(other.tables.iter()) {
            *dst = dst.add(src);
        }
        self
    }
}

fn emit(config: &RunConfig, prep: &Prepared, trial: u64, rng: &mut SimRng) -> TrialPlan {
    match &config.strategy {
        Strategy::Existing(spec) => TrialPlan::Pulses(existing_emit(spec, &config.settings, rng)),
        Strategy::Improved(spec) => TrialPlan::Pulses(improved_emit(spec, &config.settings, rng).pulses),
        Strategy::Perfect(spec) => TrialPlan::Perfect(perfect_emit(spec, prep.control.as_ref(), trial, rng)),
        Strategy::Quantum(_) => TrialPlan::Quantum,
    }
}

fn simulate_trial(config: &RunConfig, prep: &Prepared, trial: u64, rng: &mut SimRng, tally: &mut Tally) {
    let plan = emit(config, prep, trial, rng);
    let setting = SettingPair::new(
        if rng.random::<bool>() { Basis::One } else { Basis::Zero },
        if rng.random::<bool>() { Basis::One } else { Basis::Zero },
    );
    let settings = &config.settings;
    let analyzer = Analyzer::new(&config.detector, config.double_click_policy);
    let (alice, bob, double_click) = match plan {
        TrialPlan::Pulses(pulses) => {
            let a = analyzer.measure(&pulses.alice, settings.alpha(setting.alice), rng);
            let b = analyzer.measure(&pulses.bob, settings.beta(setting.bob), rng);
            (a.outcome, b.outcome, a.double_click || b.double_click)
        }
        TrialPlan::Perfect(em) => {
            let Strategy::Perfect(spec) = &config.strategy else {
                unreachable!("perfect plan from a perfect strategy")
            };
            let (responder_basis, fixed_basis, responder_angle) = if em.reversed {
                (setting.bob, setting.alice, settings.beta(setting.bob))
            } else {
                (setting.alice, setting.bob, settings.alpha(setting.alice))
            };
            let fixed = deterministic_outcome(em.source, fixed_basis, em.reversed);
            let (responder, double_click) = match em.control {
                None => (
                    sample_responder(spec.a(), spec.b(), em.source == responder_basis, rng),
                    false,
                ),
                Some((_, pulse)) => {
                    let det = analyzer.measure(&pulse, responder_angle, rng);
                    (det.outcome, det.double_click)
                }
            };
            if em.reversed {
                (fixed, responder, double_click)
            } else {
                (responder, fixed, double_click)
            }
        }
        TrialPlan::Quantum => {
            let tables = prep.quantum.as_ref().expect("quantum tables prepared");
            let (a, b) = quantum_emit(tables, setting, rng);
            (a, b, false)
        }
    };
    tally.record(setting, alice, bob, double_click);
}

fn batch_tally(config: &RunConfig, prep: &Prepared, batch: u64) -> Tally {
    let start = batch * config.batch_size;
    let end = (start + config.batch_size).min(config.n_trials);
    let mut rng = stream(config.seed, batch);
    let mut tally = Tally::default();
    for trial in start..end {
        simulate_trial(config, prep, trial, &mut rng, &mut tally);
    }
    tally
}

fn summarize(config: &RunConfig, tally: Tally) -> Result<RunSummary> {
    RunSummary::from_counts(
        tally.counts,
        tally.tables,
        config.seed,
        config.strategy.label(),
        config.settings,
        config.double_click_policy,
    )
}

/// Counts for the batches in `batches`, computed one after another.
pub fn tally_sequential(config: &RunConfig, batches: std::ops::Range<u64>) -> Result<Tally> {
    config.validate()?;
    let prep = Prepared::new(config)?;
    Ok(batches
        .map(|b| batch_tally(config, &prep, b))
        .fold(Tally::default(), Tally::combine))
}

#[cfg(feature = "parallel")]
pub fn tally_parallel(config: &RunConfig, batches: std::ops::Range<u64>) -> Result<Tally> {
    use rayon::prelude::*;
    config.validate()?;
    let prep = Prepared::new(config)?;
    Ok(batches
        .into_par_iter()
        .map(|b| batch_tally(config, &prep, b))
        .reduce(Tally::default, Tally::combine))
}

pub fn run_sequential(config: &RunConfig) -> Result<RunSummary> {
    summarize(config, tally_sequential(config, 0..config.n_batches())?)
}

#[cfg(feature = "parallel")]
pub fn run_parallel(config: &RunConfig) -> Result<RunSummary> {
    summarize(config, tally_parallel(config, 0..config.n_batches())?)
}

/// Runs on a dedicated pool of `threads` workers.
#[cfg(feature = "parallel")]
pub fn run_with_threads(config: &RunConfig, threads: usize) -> Result<RunSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_parallel(config))
}

/// Runs the whole configuration, in parallel when the `parallel` feature is on.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    #[cfg(feature = "parallel")]
    {
        run_parallel(config)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_sequential(config)
    }
}

/// Summary of a single batch, for merging experiments.
pub fn run_batch(config: &RunConfig, batch: u64) -> Result<RunSummary> {
    if batch >= config.n_batches() {
        return Err(Error::invalid(format!(
            "batch {batch} out of range (run has {} batches)",
            config.n_batches()
        )));
    }
    summarize(config, tally_sequential(config, batch..batch + 1)?)
}

/// Adds the counts of summaries that share strategy, settings and policy,
/// then recomputes every statistic. The merged seed is the smallest input
/// seed.
pub fn merge(summaries: &[RunSummary]) -> Result<RunSummary> {
    let (first, rest) = summaries
        .split_first()
        .ok_or_else(|| Error::MergeMismatch("nothing to merge".into()))?;
    let mut counts = first.counts;
    let mut tables = first.tables;
    let mut seed = first.seed;
    for s in rest {
        if s.strategy_label != first.strategy_label {
            return Err(Error::MergeMismatch(format!(
                "strategy `{}` vs `{}`",
                s.strategy_label, first.strategy_label
            )));
        }
        if s.settings != first.settings {
            return Err(Error::MergeMismatch("measurement settings differ".into()));
        }
        if s.policy != first.policy {
            return Err(Error::MergeMismatch("double-click policies differ".into()));
        }
        counts = counts.add(&s.counts);
        for (dst, src) in tables.iter_mut().zip(s.tables.iter()) {
            *dst = dst.add(src);
        }
        seed = seed.min(s.seed);
    }
    RunSummary::from_counts(
        counts,
        tables,
        seed,
        first.strategy_label.clone(),
        first.settings,
        first.policy,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoSignallingReport {
    /// Largest absolute change of a marginal probability with the remote setting.
    pub max_discrepancy: f64,
    /// Largest discrepancy measured in standard errors.
    pub max_z: f64,
    pub pass: bool,
}

/// Checks that each party's outcome frequencies, given its own setting, do
/// not depend on the remote setting. A cell passes when its discrepancy is
/// within `n_se` pooled binomial standard errors.
pub fn empirical_no_signalling(tables: &[OutcomeTable; 4], n_se: f64) -> NoSignallingReport {
    let mut max_discrepancy = 0.0f64;
    let mut max_z = 0.0f64;
    let mut pass = true;
    let mut compare = |m0: [u64; 4], m1: [u64; 4]| {
        let (n0, n1) = (m0.iter().sum::<u64>() as f64, m1.iter().sum::<u64>() as f64);
        if n0 == 0.0 || n1 == 0.0 {
            return;
        }
        for k in 0..4 {
            let (p0, p1) = (m0[k] as f64 / n0, m1[k] as f64 / n1);
            let pooled = (m0[k] + m1[k]) as f64 / (n0 + n1);
            let se = (pooled * (1.0 - pooled) * (1.0 / n0 + 1.0 / n1)).sqrt();
            let diff = (p0 - p1).abs();
            max_discrepancy = max_discrepancy.max(diff);
            if se > 0.0 {
                max_z = max_z.max(diff / se);
            }
            if diff > n_se * se {
                pass = false;
            }
        }
    };
    for own in [Basis::Zero, Basis::One] {
        let t = |alice, bob| &tables[SettingPair::new(alice, bob).index()];
        compare(
            t(own, Basis::Zero).alice_marginal(),
            t(own, Basis::One).alice_marginal(),
        );
        compare(t(Basis::Zero, own).bob_marginal(), t(Basis::One, own).bob_marginal());
    }
    NoSignallingReport {
        max_discrepancy,
        max_z,
        pass,
    }
}
