//! Ablation presets and the pipeline pieces shared by the command-line tool
//! and the end-to-end tests: calibration, training from a seed, prediction
//! on the collocation lattice and comparison with the reference solution.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{BlockTape, LANES};
use crate::balance::{calibrate, collect_initial_stats, BalanceCoefficients, Calibration, ClassStats, SearchGrid};
use crate::collocation::CollocationSet;
use crate::error::{Error, Result};
use crate::fdm::{mse_report, FdmGrid, MseReport, TemperatureField};
use crate::network::{scaled_boundaries, Architecture, PinnModel};
use crate::physics::{EnvironmentConfig, LayerId, ScaleConfig};
use crate::scalar::Scalar;
use crate::trainer::{train, LossEvaluator, TrainAbort, TrainObserver, TrainOptions, TrainOutcome};

/// Default C1 coefficient of the backward balance.
pub const DEFAULT_ALPHA: f64 = 1e-2;

/// Default number of repeats used to gather calibration statistics.
pub const DEFAULT_CALIBRATION_REPEATS: usize = 50;

/// Combinations of parallel networks, unit rescaling and loss balancing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Parallel networks, rescaled units, calibrated balance.
    M1,
    /// Parallel networks, rescaled units, unit coefficients.
    M2,
    /// Parallel networks, SI units, balance calibrated in SI units.
    M3,
    /// Parallel networks, SI units, unit coefficients.
    M4,
    /// One network across the fabric, rescaled units, calibrated balance.
    M5,
}

/// How a preset obtains its balance coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceMode {
    Unit,
    Calibrated,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::M1, Preset::M2, Preset::M3, Preset::M4, Preset::M5];

    pub fn id(self) -> &'static str {
        match self {
            Preset::M1 => "M1",
            Preset::M2 => "M2",
            Preset::M3 => "M3",
            Preset::M4 => "M4",
            Preset::M5 => "M5",
        }
    }

    pub fn methods(self) -> &'static str {
        match self {
            Preset::M1 => "PSF,FBM,BBM",
            Preset::M2 => "PSF,FBM",
            Preset::M3 => "PSF,BBM",
            Preset::M4 => "PSF",
            Preset::M5 => "FBM,BBM",
        }
    }

    pub fn architecture(self) -> Architecture {
        match self {
            Preset::M5 => Architecture::Single,
            _ => Architecture::Parallel,
        }
    }

    pub fn scale(self) -> ScaleConfig {
        match self {
            Preset::M3 | Preset::M4 => ScaleConfig::SI,
            _ => ScaleConfig::FORWARD_BALANCED,
        }
    }

    pub fn balance(self) -> BalanceMode {
        match self {
            Preset::M2 | Preset::M4 => BalanceMode::Unit,
            _ => BalanceMode::Calibrated,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}` (expected one of M1, M2, M3, M4, M5)")))
    }
}

/// Statistics gathered for calibration and the resulting coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRun {
    pub stats: ClassStats,
    pub calibration: Calibration,
}

/// Collects initial statistics under `scale` and calibrates against them.
pub fn run_calibration(
    env: &EnvironmentConfig,
    grid: &CollocationSet,
    scale: ScaleConfig,
    n_exp: usize,
    seed: u64,
) -> Result<CalibrationRun> {
    let stats = collect_initial_stats(env, grid, scale, n_exp, seed)?;
    let calibration = calibrate(&stats, DEFAULT_ALPHA, &SearchGrid::default())?;
    Ok(CalibrationRun { stats, calibration })
}

/// Balance coefficients of `preset`: unit, or calibrated in the preset's
/// units with `n_exp` repeats starting at `seed`.
pub fn preset_coefficients(
    preset: Preset,
    env: &EnvironmentConfig,
    grid: &CollocationSet,
    n_exp: usize,
    seed: u64,
) -> Result<(BalanceCoefficients, Option<CalibrationRun>)> {
    match preset.balance() {
        BalanceMode::Unit => Ok((BalanceCoefficients::UNIT, None)),
        BalanceMode::Calibrated => {
            let run = run_calibration(env, grid, preset.scale(), n_exp, seed)?;
            Ok((run.calibration.coeffs, Some(run)))
        }
    }
}

/// Kaiming-initialized model shaped for `preset`.
pub fn init_model<T: Scalar>(preset: Preset, env: &EnvironmentConfig, seed: u64) -> PinnModel<T> {
    let scale = preset.scale();
    PinnModel::init(preset.architecture(), seed, scaled_boundaries(env, &scale), scale)
}

/// Trains a fresh `preset` model from `seed` with the given coefficients.
pub fn train_preset(
    preset: Preset,
    env: &EnvironmentConfig,
    grid: &CollocationSet,
    coeffs: &BalanceCoefficients,
    options: &TrainOptions,
    seed: u64,
    observer: &mut dyn TrainObserver<f64>,
) -> std::result::Result<TrainOutcome<f64>, Box<TrainAbort<f64>>> {
    let model = init_model::<f64>(preset, env, seed);
    let evaluator = match LossEvaluator::new(&model, env, grid, coeffs) {
        Ok(ev) => ev,
        Err(error) => {
            return Err(Box::new(TrainAbort {
                error,
                last_good: model,
                records: Vec::new(),
            }))
        }
    };
    train(&evaluator, model, options, observer)
}

/// Predicted temperatures in kelvin on the collocation lattice; interface
/// nodes are evaluated by the network of each adjacent layer.
pub fn predict_field<T: Scalar>(model: &PinnModel<T>, grid: &CollocationSet) -> TemperatureField {
    predict_on_lattice(model, &grid.t_nodes, &grid.x_nodes)
}

/// Predicted temperatures in kelvin at `times × x_mm[layer]` (millimetres).
pub fn predict_on_lattice<T: Scalar>(model: &PinnModel<T>, times: &[f64], x_mm: &[Vec<f64>; 3]) -> TemperatureField {
    let factor = model.scale.millimetre_factor();
    let mut tape = BlockTape::<T>::new();
    let mut xs = Vec::with_capacity(LANES);
    let mut ts = Vec::with_capacity(LANES);
    let values = std::array::from_fn(|l| {
        let net = model.network(LayerId::ALL[l]);
        let points: Vec<(T, T)> = times
            .iter()
            .flat_map(|&t| x_mm[l].iter().map(move |&x| (T::lit(x * factor), T::lit(t))))
            .collect();
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(LANES) {
            xs.clear();
            ts.clear();
            xs.extend(chunk.iter().map(|p| p.0));
            ts.extend(chunk.iter().map(|p| p.1));
            tape.forward(net, &xs, &ts);
            out.extend(tape.outputs()[0][..chunk.len()].iter().map(|v| model.scale.unscale_prediction(*v).as_f64()));
        }
        out
    });
    TemperatureField {
        times: times.to_vec(),
        x_mm: x_mm.clone(),
        values,
        cumulative_influx: None,
    }
}

/// Checks that the layer spans of `model` coincide with those of `field`.
pub fn check_model_lattice<T: Scalar>(model: &PinnModel<T>, field: &TemperatureField) -> Result<()> {
    let factor = model.scale.millimetre_factor();
    for layer in LayerId::ALL {
        let (lo, hi) = model.span(layer);
        let x = &field.x_mm[layer.index()];
        let (Some(first), Some(last)) = (x.first(), x.last()) else {
            return Err(Error::Config(format!("field has no {layer} nodes")));
        };
        let (a, b) = (first * factor, last * factor);
        let tol = 1e-9 * hi.abs().max(1e-300);
        if (a - lo).abs() > tol || (b - hi).abs() > tol {
            return Err(Error::Config(format!(
                "{layer} spans [{a}, {b}] in the field but [{lo}, {hi}] in the model"
            )));
        }
    }
    Ok(())
}

/// Reference solution on the collocation lattice with the default time step.
pub fn reference_solution(env: &EnvironmentConfig, grid: &CollocationSet) -> Result<TemperatureField> {
    let fdm = FdmGrid::reference(env, grid.segments)?;
    crate::fdm::solve_fdm(env, &fdm, None)
}

/// Grid MSE of `model` against `truth`, kK².
pub fn evaluate_model<T: Scalar>(model: &PinnModel<T>, grid: &CollocationSet, truth: &TemperatureField) -> Result<MseReport> {
    mse_report(&predict_field(model, grid), truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collocation::{build_grid, Segments};
    use crate::fdm::{error_field, field_on_grid};

    #[test]
    fn preset_wiring() {
        assert_eq!("m3".parse::<Preset>().unwrap(), Preset::M3);
        assert!("M6".parse::<Preset>().is_err());
        assert_eq!(Preset::M5.architecture(), Architecture::Single);
        assert_eq!(Preset::M4.scale(), ScaleConfig::SI);
        assert_eq!(Preset::M2.balance(), BalanceMode::Unit);
        assert_eq!(Preset::M3.balance(), BalanceMode::Calibrated);
    }

    #[test]
    fn prediction_matches_pointwise_queries() {
        let env = EnvironmentConfig::benchmark();
        let grid = build_grid(&env, Segments::new(3, 4, 5, 6)).unwrap();
        for preset in [Preset::M1, Preset::M4, Preset::M5] {
            let model = init_model::<f64>(preset, &env, 4);
            let field = predict_field(&model, &grid);
            let f = model.scale.millimetre_factor();
            for layer in LayerId::ALL {
                let l = layer.index();
                for (row, &t) in grid.t_nodes.iter().enumerate() {
                    for (col, &x) in grid.x_nodes[l].iter().enumerate() {
                        let want = model.scale.unscale_prediction(model.predict_temperature(layer, x * f, t).unwrap());
                        let got = field.get(layer, row, col);
                        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{preset} {layer} {x} {t}");
                    }
                }
            }
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let env = EnvironmentConfig::benchmark();
        let grid = build_grid(&env, Segments::new(3, 4, 5, 6)).unwrap();
        let model = init_model::<f64>(Preset::M1, &env, 4);
        let field = predict_field(&model, &grid);
        assert_eq!(evaluate_model(&model, &grid, &field).unwrap().total, 0.0);
        assert!(error_field(&field, &field).unwrap().values.iter().flatten().all(|v| *v == 0.0));
        check_model_lattice(&model, &field).unwrap();
        let other = init_model::<f64>(Preset::M4, &env, 4);
        assert!(check_model_lattice(&other, &field).is_ok());
        let mut shifted = field_on_grid(&grid, |_, _, _| 0.0);
        shifted.x_mm[2].push(6.0);
        assert!(check_model_lattice(&model, &shifted).is_err());
    }
}
