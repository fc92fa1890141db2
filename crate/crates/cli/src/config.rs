//! TOML experiment files.
//!
//! Relative paths inside a config file resolve against the file's own
//! directory.

use std::path::{Path, PathBuf};

use bellfake::analytic::ab_from_eta;
use bellfake::detector::{load_response_curve_file, DetectorModel, Ramp};
use bellfake::engine::DEFAULT_BATCH_SIZE;
use bellfake::optics::DoubleClickPolicy;
use bellfake::strategies::{
    ExistingModelSpec, ImprovedModelSpec, PerfectMode, PerfectModelSpec, QuantumSpec, TwoQubitState,
};
use bellfake::{MeasurementSettings, RunConfig, Strategy};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub strategy: StrategySection,
    #[serde(default)]
    pub settings: SettingsSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum StrategySection {
    Existing {
        e_target: f64,
        intensity: Option<f64>,
    },
    Improved {
        p2: f64,
        trigger_intensity: Option<f64>,
        symmetrize: Option<bool>,
    },
    Perfect {
        a: Option<f64>,
        b: Option<f64>,
        eta: Option<f64>,
        mode: Option<PerfectMode>,
        role_reversal: Option<bool>,
    },
    Quantum {
        eta_true: Option<f64>,
        state: Option<BellState>,
        /// Rotation applied to Alice's qubit, degrees.
        alice_rotation: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    fn state(self) -> TwoQubitState {
        match self {
            BellState::PhiPlus => TwoQubitState::phi_plus(),
            BellState::PhiMinus => TwoQubitState::phi_minus(),
            BellState::PsiPlus => TwoQubitState::psi_plus(),
            BellState::PsiMinus => TwoQubitState::psi_minus(),
        }
    }
}

/// Analyzer angles in degrees.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsSection {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl Default for SettingsSection {
    fn default() -> Self {
        SettingsSection {
            alpha0: 0.0,
            alpha1: 45.0,
            beta0: 22.5,
            beta1: 67.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    #[default]
    Step,
    TwoThreshold,
    Empirical,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default)]
    pub model: DetectorKind,
    pub i_th: Option<f64>,
    pub i_never: Option<f64>,
    pub i_always: Option<f64>,
    pub curve_file: Option<PathBuf>,
    pub scale: Option<f64>,
    #[serde(default)]
    pub double_click: DoubleClickPolicy,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub batch_size: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub summary_csv: Option<PathBuf>,
}

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;

/// A parsed config plus the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ConfigFile,
    pub base_dir: PathBuf,
}

/// Command-line overrides applied on top of `[engine]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
}

pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let file = parse(&text).map_err(|e| match e {
        CliError::Validation(msg) => CliError::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { file, base_dir })
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn settings(&self) -> Result<MeasurementSettings, CliError> {
        let s = self.file.settings;
        Ok(MeasurementSettings::from_degrees(s.alpha0, s.alpha1, s.beta0, s.beta1)?)
    }

    pub fn detector(&self) -> Result<DetectorModel, CliError> {
        let d = &self.file.detector;
        let unused = |fields: &[(&str, bool)]| -> Result<(), CliError> {
            match fields.iter().find(|(_, present)| *present) {
                Some((name, _)) => Err(CliError::Validation(format!(
                    "detector.{name} does not apply to model `{}`",
                    kind_name(d.model)
                ))),
                None => Ok(()),
            }
        };
        let model = match d.model {
            DetectorKind::Step => {
                unused(&[
                    ("i_never", d.i_never.is_some()),
                    ("i_always", d.i_always.is_some()),
                    ("curve_file", d.curve_file.is_some()),
                    ("scale", d.scale.is_some()),
                ])?;
                DetectorModel::step(d.i_th.unwrap_or(1.0))?
            }
            DetectorKind::TwoThreshold => {
                unused(&[
                    ("i_th", d.i_th.is_some()),
                    ("curve_file", d.curve_file.is_some()),
                    ("scale", d.scale.is_some()),
                ])?;
                let need = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| CliError::Validation(format!("detector.{name} is required for two_threshold")))
                };
                DetectorModel::two_threshold(need(d.i_never, "i_never")?, need(d.i_always, "i_always")?, Ramp::Linear)?
            }
            DetectorKind::Empirical => {
                unused(&[
                    ("i_th", d.i_th.is_some()),
                    ("i_never", d.i_never.is_some()),
                    ("i_always", d.i_always.is_some()),
                ])?;
                let path = d
                    .curve_file
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("detector.curve_file is required for empirical".into()))?;
                // A missing curve file is a config problem, not a run failure.
                load_response_curve_file(self.resolve(path), d.scale.unwrap_or(1.0)).map_err(|e| match e {
                    bellfake::Error::Io(msg) => CliError::Validation(format!("detector.curve_file: {msg}")),
                    other => other.into(),
                })?
            }
        };
        Ok(model)
    }

    pub fn strategy(&self, settings: &MeasurementSettings) -> Result<Strategy, CliError> {
        Ok(match &self.file.strategy {
            StrategySection::Existing { e_target, intensity } => {
                let mut spec = ExistingModelSpec::new(*e_target)?;
                if let Some(i) = intensity {
                    spec = spec.with_intensity(*i)?;
                }
                Strategy::Existing(spec)
            }
            StrategySection::Improved {
                p2,
                trigger_intensity,
                symmetrize,
            } => Strategy::Improved(
                ImprovedModelSpec::new(*p2, settings, *trigger_intensity)?.with_symmetrize(symmetrize.unwrap_or(true)),
            ),
            StrategySection::Perfect {
                mode, role_reversal, ..
            } => {
                let (a, b) = self.perfect_ab()?;
                Strategy::Perfect(PerfectModelSpec::new(
                    a,
                    b,
                    mode.unwrap_or(PerfectMode::Analytic),
                    role_reversal.unwrap_or(true),
                )?)
            }
            StrategySection::Quantum {
                eta_true,
                state,
                alice_rotation,
            } => {
                let state = state.unwrap_or(BellState::PhiPlus).state();
                let state = state.rotate_alice(alice_rotation.unwrap_or(0.0));
                Strategy::Quantum(QuantumSpec::new(state, eta_true.unwrap_or(1.0))?)
            }
        })
    }

    /// `(a, b)` of a perfect-model section, given directly or through `eta`.
    pub fn perfect_ab(&self) -> Result<(f64, f64), CliError> {
        let StrategySection::Perfect { a, b, eta, .. } = &self.file.strategy else {
            return Err(CliError::Validation("strategy.name must be `perfect`".into()));
        };
        match (a, b, eta) {
            (Some(a), Some(b), None) => Ok((*a, *b)),
            (None, None, Some(eta)) => {
                let (a, b, _) = ab_from_eta(*eta)?;
                Ok((a, b))
            }
            _ => Err(CliError::Validation(
                "perfect strategy needs either both `a` and `b`, or `eta`".into(),
            )),
        }
    }

    pub fn trials(&self, o: Overrides) -> u64 {
        o.trials.or(self.file.engine.trials).unwrap_or(DEFAULT_TRIALS)
    }

    pub fn seed(&self, o: Overrides) -> u64 {
        o.seed.or(self.file.engine.seed).unwrap_or(DEFAULT_SEED)
    }

    pub fn threads(&self) -> Option<usize> {
        self.file.engine.threads
    }

    /// Engine configuration for `strategy`, sharing everything else with
    /// the file.
    pub fn run_config_for(
        &self,
        strategy: Strategy,
        settings: MeasurementSettings,
        o: Overrides,
    ) -> Result<RunConfig, CliError> {
        let config = RunConfig::new(strategy, settings, self.trials(o), self.seed(o))?
            .with_policy(self.file.detector.double_click)
            .with_detector(self.detector()?)
            .with_batch_size(self.file.engine.batch_size.unwrap_or(DEFAULT_BATCH_SIZE))?;
        if self.file.engine.threads == Some(0) {
            return Err(CliError::Validation("engine.threads must be at least 1".into()));
        }
        Ok(config)
    }

    pub fn run_config(&self, o: Overrides) -> Result<RunConfig, CliError> {
        let settings = self.settings()?;
        let strategy = self.strategy(&settings)?;
        self.run_config_for(strategy, settings, o)
    }
}

fn kind_name(k: DetectorKind) -> &'static str {
    match k {
        DetectorKind::Step => "step",
        DetectorKind::TwoThreshold => "two_threshold",
        DetectorKind::Empirical => "empirical",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loaded(text: &str) -> Result<Loaded, CliError> {
        Ok(Loaded {
            file: parse(text)?,
            base_dir: PathBuf::new(),
        })
    }

    #[test]
    fn minimal_perfect_config() {
        let l = loaded("[strategy]\nname = \"perfect\"\neta = 0.8284271247461901\n").unwrap();
        let c = l.run_config(Overrides::default()).unwrap();
        assert_eq!(c.n_trials, DEFAULT_TRIALS);
        assert!(matches!(c.strategy, Strategy::Perfect(_)));
        let (a, b) = l.perfect_ab().unwrap();
        assert!((a - 0.9705627484771).abs() < 1e-9 && (b - 0.4020202535).abs() < 1e-9);
    }

    #[test]
    fn unknown_strategy_lists_valid_names() {
        let err = loaded("[strategy]\nname = \"bogus\"\n").unwrap_err().to_string();
        for name in ["existing", "improved", "perfect", "quantum"] {
            assert!(err.contains(name), "{err}");
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(loaded("[strategy]\nname = \"improved\"\np2 = 0.5\nfoo = 1\n").is_err());
        assert!(loaded("[strategy]\nname = \"improved\"\np2 = 0.5\n[engine]\ntrails = 5\n").is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let l = loaded("[strategy]\nname = \"existing\"\ne_target = 1.0\n[engine]\ntrials = 10\nseed = 3\n").unwrap();
        let o = Overrides {
            seed: Some(9),
            trials: None,
        };
        let c = l.run_config(o).unwrap();
        assert_eq!((c.n_trials, c.seed), (10, 9));
    }

    #[test]
    fn zero_trials_is_a_validation_error() {
        let l = loaded("[strategy]\nname = \"existing\"\ne_target = 1.0\n[engine]\ntrials = 0\n").unwrap();
        assert!(matches!(
            l.run_config(Overrides::default()),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn perfect_needs_ab_or_eta() {
        let l = loaded("[strategy]\nname = \"perfect\"\na = 0.9\n").unwrap();
        assert!(l.perfect_ab().is_err());
        let l = loaded("[strategy]\nname = \"perfect\"\na = 0.9\nb = 0.4\neta = 0.8\n").unwrap();
        assert!(l.perfect_ab().is_err());
    }

    #[test]
    fn detector_fields_must_match_model() {
        let l =
            loaded("[strategy]\nname = \"existing\"\ne_target = 1.0\n[detector]\nmodel = \"step\"\ni_never = 0.5\n")
                .unwrap();
        assert!(l.detector().is_err());
        let l = loaded(
            "[strategy]\nname = \"existing\"\ne_target = 1.0\n[detector]\nmodel = \"two_threshold\"\ni_never = 0.5\ni_always = 1.0\ndouble_click = \"flag\"\n",
        )
        .unwrap();
        assert!(matches!(l.detector().unwrap(), DetectorModel::TwoThreshold { .. }));
        assert_eq!(l.file.detector.double_click, DoubleClickPolicy::Flag);
    }
}
