use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use bellfake::analytic::{ab_from_eta, existing_predict, improved_predict, perfect_predict, Prediction};
use bellfake::inequalities::gm_bound;
use bellfake::report::{format_number, write_numeric_csv, write_summary_csv};
use bellfake::strategies::{
    feasible_intensity_window, half_separation, ControlBehavior, ExistingModelSpec, ImprovedModelSpec, IntensityWindow,
    PerfectMode, PerfectModelSpec,
};
use bellfake::{MeasurementSettings, Party, RunConfig, RunSummary, Strategy};

use crate::config::{Loaded, Overrides, StrategySection};
use crate::error::CliError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn stdout_error(e: std::io::Error) -> CliError {
    CliError::Runtime(format!("writing output: {e}"))
}

/// Runs `config`, on a dedicated pool when a thread count is given.
pub fn execute(config: &RunConfig, threads: Option<usize>) -> Result<RunSummary, CliError> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        return Ok(bellfake::engine::run_with_threads(config, n)?);
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(bellfake::run(config)?)
}

fn write_csv_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> bellfake::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| io_error(path, e))?;
    w.flush().map_err(|e| io_error(path, e))
}

pub fn run(loaded: &Loaded, o: Overrides, out: Option<&Path>, stdout: &mut impl Write) -> Result<(), CliError> {
    let config = loaded.run_config(o)?;
    let summary = execute(&config, loaded.threads())?;
    print_summary(&summary, stdout).map_err(stdout_error)?;
    let target = out
        .map(Path::to_path_buf)
        .or_else(|| loaded.file.output.summary_csv.as_deref().map(|p| loaded.resolve(p)));
    if let Some(path) = target {
        write_csv_file(&path, |w| write_summary_csv(&summary, w))?;
        writeln!(stdout, "summary written to {}", path.display()).map_err(stdout_error)?;
    }
    Ok(())
}

fn print_summary(s: &RunSummary, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "strategy: {}", s.strategy_label)?;
    writeln!(w, "trials: {}  seed: {}", s.trials(), s.seed)?;
    writeln!(
        w,
        "{:<7} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10}",
        "setting", "n_pp", "n_pm", "n_mp", "n_mm", "singles_a", "singles_b", "neither", "double", "E"
    )?;
    for (setting, c) in s.counts.iter() {
        writeln!(
            w,
            "{:<7} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10.6}",
            setting.label(),
            c.pp(),
            c.pm(),
            c.mp(),
            c.mm(),
            c.alice_only(),
            c.bob_only(),
            c.neither(),
            c.double_events(),
            s.correlation(setting)
        )?;
    }
    writeln!(w, "S = {:.6} +/- {:.6}", s.s_value, s.s_standard_error())?;
    writeln!(
        w,
        "eta_alice = {:.6}  eta_bob = {:.6}  eta_symmetric = {:.6} +/- {:.6}",
        s.eta_alice,
        s.eta_bob,
        s.eta_symmetric,
        s.eta_symmetric_standard_error()
    )?;
    if s.eta_symmetric > 0.0 {
        if let Ok(bound) = gm_bound(s.eta_symmetric) {
            writeln!(w, "local bound at eta_symmetric: 4/eta - 2 = {bound:.6}")?;
        }
    }
    writeln!(w, "double-click trials: {}", s.counts.double_events())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    P2,
    Eta,
    ETarget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn new(var: SweepVar, start: f64, stop: f64, steps: usize) -> Result<Self, CliError> {
        if !(start.is_finite() && stop.is_finite()) || start >= stop {
            return Err(CliError::Validation(format!(
                "sweep needs from < to, got {start} and {stop}"
            )));
        }
        if steps < 2 {
            return Err(CliError::Validation(format!(
                "sweep needs at least 2 steps, got {steps}"
            )));
        }
        Ok(SweepSpec {
            var,
            start,
            stop,
            steps,
        })
    }

    /// Evenly spaced grid including both ends.
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / last
                }
            })
            .collect()
    }
}

pub const SWEEP_HEADER: [&str; 7] = ["x", "eta_analytic", "s_analytic", "gm_bound", "eta_mc", "s_mc", "se_s"];

/// Prediction and strategy for one grid point. The base config supplies
/// settings, detector, engine options and compatible strategy options.
fn sweep_point(
    loaded: &Loaded,
    var: SweepVar,
    x: f64,
    settings: &MeasurementSettings,
) -> Result<(Prediction, Strategy), CliError> {
    Ok(match var {
        SweepVar::P2 => {
            let (trigger, symmetrize) = match &loaded.file.strategy {
                StrategySection::Improved {
                    trigger_intensity,
                    symmetrize,
                    ..
                } => (*trigger_intensity, symmetrize.unwrap_or(true)),
                _ => (None, true),
            };
            let spec = ImprovedModelSpec::new(x, settings, trigger)?.with_symmetrize(symmetrize);
            (improved_predict(x)?, Strategy::Improved(spec))
        }
        SweepVar::Eta => {
            let (mode, role_reversal) = match &loaded.file.strategy {
                StrategySection::Perfect {
                    mode, role_reversal, ..
                } => (mode.unwrap_or(PerfectMode::Analytic), role_reversal.unwrap_or(true)),
                _ => (PerfectMode::Analytic, true),
            };
            let (a, b, _) = ab_from_eta(x)?;
            let spec = PerfectModelSpec::new(a, b, mode, role_reversal)?;
            (perfect_predict(a, b)?, Strategy::Perfect(spec))
        }
        SweepVar::ETarget => {
            let mut spec = ExistingModelSpec::new(x)?;
            if let StrategySection::Existing { intensity: Some(i), .. } = &loaded.file.strategy {
                spec = spec.with_intensity(*i)?;
            }
            (existing_predict(x)?, Strategy::Existing(spec))
        }
    })
}

pub fn sweep(
    loaded: &Loaded,
    o: Overrides,
    spec: SweepSpec,
    monte_carlo: bool,
    out: &Path,
    stdout: &mut impl Write,
) -> Result<(), CliError> {
    let settings = loaded.settings()?;
    let seed = loaded.seed(o);
    let mut rows = Vec::with_capacity(spec.steps);
    for (i, x) in spec.grid().into_iter().enumerate() {
        let (pred, strategy) = sweep_point(loaded, spec.var, x, &settings)?;
        let bound = gm_bound(pred.eta)?;
        let mut row = vec![Some(x), Some(pred.eta), Some(pred.s), Some(bound), None, None, None];
        if monte_carlo {
            let config = loaded
                .run_config_for(strategy, settings, o)?
                .with_seed(seed.wrapping_add(i as u64));
            let mc = execute(&config, loaded.threads())?;
            row[4] = Some(mc.eta_symmetric);
            row[5] = Some(mc.s_value);
            row[6] = Some(mc.s_standard_error());
        }
        rows.push(row);
    }
    write_csv_file(out, |w| write_numeric_csv(&SWEEP_HEADER, &rows, w))?;
    writeln!(stdout, "{} points written to {}", rows.len(), out.display()).map_err(stdout_error)
}

fn window_text(w: IntensityWindow) -> (String, String) {
    match w {
        IntensityWindow::Range { min, sup } => (
            format!("[{}, {})", format_number(min), format_number(sup)),
            format_number(w.midpoint().expect("range has a midpoint")),
        ),
        IntensityWindow::Vacuum => ("vacuum".into(), "0".into()),
        IntensityWindow::Empty => ("INFEASIBLE".into(), "-".into()),
    }
}

pub fn check_feasibility(loaded: &Loaded, stdout: &mut impl Write) -> Result<(), CliError> {
    let settings = loaded.settings()?;
    let (a, b) = loaded.perfect_ab()?;
    if !((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)) {
        return Err(CliError::Validation(format!(
            "a and b must lie in [0, 1], got a = {a}, b = {b}"
        )));
    }
    if a < b {
        return Err(CliError::Validation(format!(
            "control rows need a >= b, got a = {a}, b = {b}"
        )));
    }
    let mut text = String::new();
    for party in [Party::Alice, Party::Bob] {
        let angles = settings.angles(party);
        let phi0 = half_separation(angles[0], angles[1]);
        let phi1 = half_separation(angles[0], angles[1].perpendicular());
        text += &format!(
            "{party:?}: bases {} / {} deg, phi0 = {}, phi1 = {}\n",
            format_number(angles[0].degrees()),
            format_number(angles[1].degrees()),
            format_number(phi0),
            format_number(phi1)
        );
        text += &format!(
            "  {:<26} {:>12}  {:<36} {}\n",
            "row", "probability", "window (I/I_th)", "intensity"
        );
        for row in ControlBehavior::ALL {
            let (window, intensity) = window_text(feasible_intensity_window(row, phi0, phi1));
            text += &format!(
                "  {:<26} {:>12}  {:<36} {}\n",
                row.label(),
                format_number(row.probability(a, b)),
                window,
                intensity
            );
        }
    }
    stdout.write_all(text.as_bytes()).map_err(stdout_error)
}
