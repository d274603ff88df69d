//! Command implementations behind the `thermopinn` binary.

pub mod manifest;
pub mod output;

use std::fmt::Write as _;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thermopinn::balance::parse_coefficients;
use thermopinn::experiment::{
    check_model_lattice, init_model, predict_on_lattice, reference_solution, run_calibration, BalanceMode,
    CalibrationRun, DEFAULT_CALIBRATION_REPEATS,
};
use thermopinn::fdm::{energy_balance, error_field, mse_report, MseReport};
use thermopinn::trainer::{histogram_csv, training_log_csv};
use thermopinn::{
    build_grid, solve_fdm, train, BalanceCoefficients, Error, FdmGrid, LossEvaluator, Model, PinnModel, Preset,
    ProblemConfig, TrainObserver, TrainOptions, TrainOutcome, TrainRecord,
};

use crate::manifest::{sha256_file, RunInputs};
use crate::output::StagedOutput;

/// Failures the user can fix by changing arguments or input files.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

/// Classifies library errors: invalid input is a usage error, the rest are
/// run failures.
fn classify(e: Error) -> anyhow::Error {
    match e {
        Error::Config(_) | Error::Stability(_) | Error::Format { .. } | Error::Domain { .. } => usage(e),
        other => other.into(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "thermopinn", version, about = "Physics-informed networks for heat transfer through layered fabric")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the reference problem with the explicit finite-difference scheme.
    Fdm(FdmArgs),
    /// Gather initial loss statistics and fit the balance coefficients.
    Calibrate(CalibrateArgs),
    /// Train one ablation preset.
    Train(TrainArgs),
    /// Compare a trained model with a reference field.
    Evaluate(EvaluateArgs),
    /// Reference solution, calibration, training and evaluation per horizon.
    SweepTime(SweepArgs),
}

#[derive(Debug, Args)]
pub struct FdmArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Time steps over the horizon (default: 200000 per minute, rounded up
    /// to a multiple of the time segments).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Also write every solver step to `full.bin`.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Preset whose units the statistics are gathered in.
    #[arg(long, default_value = "M1")]
    pub preset: Preset,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_REPEATS)]
    pub n_exp: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub preset: Preset,
    /// Coefficient file (`name,value` lines or a calibration report).
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Calibration repeats when the preset calibrates and no file is given.
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_REPEATS)]
    pub n_exp: usize,
    /// Epochs at which gradient histograms are recorded.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 1000])]
    pub snapshots: Vec<usize>,
    /// Also save the model every this many epochs.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Reference field written by `thermopinn fdm` (`truth.bin`).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Horizons in seconds.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 30.0, 60.0, 120.0])]
    pub horizons: Vec<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_REPEATS)]
    pub n_exp: usize,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Fdm(a) => cmd_fdm(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::SweepTime(a) => cmd_sweep_time(&a),
    }
}

pub fn load_config(path: &Path) -> anyhow::Result<ProblemConfig> {
    if !path.is_file() {
        return Err(usage(format!("config file {} does not exist", path.display())));
    }
    ProblemConfig::load(path).map_err(classify)
}

pub fn cmd_fdm(a: &FdmArgs) -> anyhow::Result<()> {
    let config = load_config(&a.config)?;
    let env = config.env;
    let steps = a.steps.unwrap_or_else(|| FdmGrid::default_steps(env.horizon, &config.segments));
    let grid = FdmGrid::new(&env, config.segments, steps).map_err(classify)?;
    let inputs = RunInputs::new("fdm", &config).with("steps", steps).with("full", a.full);
    let mut out = StagedOutput::new(&a.out, inputs)?;

    let field = if a.full {
        let path = out.path("full.bin")?;
        let mut w = BufWriter::new(std::fs::File::create(&path)?);
        write!(
            w,
            "thermopinn-trajectory 1\nsteps {}\nnodes {}\ndata\n",
            steps + 1,
            grid.n_nodes()
        )?;
        for x in &grid.x_mm {
            w.write_all(&x.to_le_bytes())?;
        }
        let mut sink = |_: usize, t: f64, temps: &[f64]| -> thermopinn::Result<()> {
            w.write_all(&t.to_le_bytes())?;
            for v in temps {
                w.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        let field = solve_fdm(&env, &grid, Some(&mut sink)).map_err(classify)?;
        w.flush()?;
        field
    } else {
        solve_fdm(&env, &grid, None).map_err(classify)?
    };

    let mut bin = Vec::new();
    field.write_binary(&mut bin)?;
    out.write("truth.bin", &bin)?;
    out.write_csv("truth.csv", &field.to_csv("T_K", 1.0))?;

    let (rows, cols) = field.shape();
    let (lo, hi) = field.min_max();
    let fraction = energy_balance(&field, &env).map_err(classify)?;
    let r = grid.fourier.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ");
    out.commit()?;
    println!("{steps} steps, Fourier numbers [{r}]");
    println!("recorded {rows} x {cols} nodes, T in [{lo:.3}, {hi:.3}] K, energy residual fraction {fraction:.3e}");
    Ok(())
}

fn print_calibration(run: &CalibrationRun) {
    let c = &run.calibration;
    println!("alpha = {:.6e}", c.coeffs.alpha);
    println!("beta  = {:.6e}  (IOU {:.4})", c.coeffs.beta, c.beta_fit.iou);
    println!("gamma = {:.6e}  (IOU {:.4})", c.coeffs.gamma, c.gamma_fit.iou);
}

pub fn cmd_calibrate(a: &CalibrateArgs) -> anyhow::Result<()> {
    let config = load_config(&a.config)?;
    if a.preset.balance() == BalanceMode::Unit {
        return Err(usage(format!("preset {} trains with unit coefficients", a.preset)));
    }
    if a.n_exp < 2 {
        return Err(usage(format!("--n-exp must be at least 2, got {}", a.n_exp)));
    }
    let grid = build_grid(&config.env, config.segments).map_err(classify)?;
    let mut inputs = RunInputs::new("calibrate", &config).with("n_exp", a.n_exp);
    inputs.preset = Some(a.preset.to_string());
    inputs.seed = Some(a.seed);
    let mut out = StagedOutput::new(&a.out, inputs)?;
    let run = run_calibration(&config.env, &grid, a.preset.scale(), a.n_exp, a.seed).map_err(classify)?;
    out.write_csv("coefficients.csv", &run.calibration.report_csv(&run.stats))?;
    out.commit()?;
    print_calibration(&run);
    Ok(())
}

fn coefficient_csv(c: &BalanceCoefficients) -> String {
    format!("name,value\nalpha,{:e}\nbeta,{:e}\ngamma,{:e}\n", c.alpha, c.beta, c.gamma)
}

/// Prints progress and stages periodic checkpoints.
struct CliObserver<'a> {
    out: &'a mut StagedOutput,
    every: usize,
}

impl TrainObserver<f64> for CliObserver<'_> {
    fn on_record(&mut self, record: &TrainRecord) -> thermopinn::Result<()> {
        if record.epoch == 1 || record.epoch.is_multiple_of(self.every) {
            eprintln!("epoch {:>6}  loss {:.6e}  ({:.0} s)", record.epoch, record.losses.total, record.wall_time);
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, epoch: usize, model: &Model) -> thermopinn::Result<()> {
        let path = self
            .out
            .path(&format!("checkpoints/epoch_{epoch:06}.ckpt"))
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        model.save(&path)
    }
}

/// Coefficients for `preset`: from `coeffs` when given, else unit or
/// freshly calibrated.
pub fn resolve_coefficients(
    preset: Preset,
    coeffs: Option<&Path>,
    config: &ProblemConfig,
    grid: &thermopinn::CollocationSet,
    n_exp: usize,
    seed: u64,
) -> anyhow::Result<(BalanceCoefficients, Option<CalibrationRun>)> {
    if let Some(path) = coeffs {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
        let c = parse_coefficients(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        return Ok((c, None));
    }
    match preset.balance() {
        BalanceMode::Unit => Ok((BalanceCoefficients::UNIT, None)),
        BalanceMode::Calibrated => {
            if n_exp < 2 {
                return Err(usage(format!("--n-exp must be at least 2, got {n_exp}")));
            }
            let run = run_calibration(&config.env, grid, preset.scale(), n_exp, seed).map_err(classify)?;
            Ok((run.calibration.coeffs, Some(run)))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn train_into(
    out: &mut StagedOutput,
    preset: Preset,
    config: &ProblemConfig,
    grid: &thermopinn::CollocationSet,
    coeffs: &BalanceCoefficients,
    options: &TrainOptions,
    seed: u64,
    prefix: &str,
) -> anyhow::Result<TrainOutcome<f64>> {
    let model = init_model::<f64>(preset, &config.env, seed);
    let evaluator = LossEvaluator::new(&model, &config.env, grid, coeffs).map_err(classify)?;
    let every = (options.epochs / 20).clamp(1, 1000);
    let mut observer = CliObserver { out, every };
    let outcome = train(&evaluator, model, options, &mut observer)
        .map_err(|abort| anyhow::anyhow!("training {preset} failed: {}", abort.error))?;
    let ckpt = out.path(&format!("{prefix}model.ckpt"))?;
    outcome.model.save(&ckpt)?;
    out.write_csv(&format!("{prefix}training_log.csv"), &training_log_csv(&outcome.records))?;
    out.write_csv(&format!("{prefix}gradients.csv"), &histogram_csv(&outcome.snapshots))?;
    Ok(outcome)
}

pub fn cmd_train(a: &TrainArgs) -> anyhow::Result<()> {
    let config = load_config(&a.config)?;
    let grid = build_grid(&config.env, config.segments).map_err(classify)?;
    let (coeffs, calibration) = resolve_coefficients(a.preset, a.coeffs.as_deref(), &config, &grid, a.n_exp, a.seed)?;

    let mut inputs = RunInputs::new("train", &config);
    inputs.preset = Some(a.preset.to_string());
    inputs.seed = Some(a.seed);
    inputs.epochs = Some(a.epochs);
    inputs.coefficients = Some(coeffs.into());
    let snapshots: Vec<usize> = a.snapshots.iter().copied().filter(|&e| e >= 1 && e <= a.epochs).collect();
    inputs = inputs.with("snapshots", format!("{snapshots:?}"));
    if let Some(n) = a.checkpoint_every {
        inputs = inputs.with("checkpoint_every", n);
    }
    match &a.coeffs {
        Some(p) => inputs = inputs.with("coeffs_sha256", sha256_file(p)?),
        None if calibration.is_some() => inputs = inputs.with("n_exp", a.n_exp),
        None => {}
    }

    let mut out = StagedOutput::new(&a.out, inputs)?;
    match &calibration {
        Some(run) => {
            print_calibration(run);
            out.write_csv("coefficients.csv", &run.calibration.report_csv(&run.stats))?
        }
        None => out.write_csv("coefficients.csv", &coefficient_csv(&coeffs))?,
    }
    let options = TrainOptions {
        epochs: a.epochs,
        checkpoint_every: a.checkpoint_every,
        snapshot_epochs: snapshots,
        ..TrainOptions::default()
    };
    let outcome = train_into(&mut out, a.preset, &config, &grid, &coeffs, &options, a.seed, "")?;
    out.commit()?;
    println!("{}: final loss {:.6e} after {} epochs", a.preset, outcome.final_losses.total, a.epochs);
    Ok(())
}

fn mse_csv(r: &MseReport) -> String {
    let mut s = String::from("layer,mse_kK2\n");
    for (name, v) in ["shl", "msr", "lin", "total"].iter().zip(r.per_layer.iter().chain([&r.total])) {
        let _ = writeln!(s, "{name},{v:e}");
    }
    s
}

fn print_mse(r: &MseReport) {
    println!("layer  MSE (kK^2)");
    for (name, v) in ["shl", "msr", "lin", "total"].iter().zip(r.per_layer.iter().chain([&r.total])) {
        println!("{name:<6} {v:.4e}");
    }
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let model = PinnModel::<f64>::load(&a.checkpoint).map_err(|e| usage(format!("{}: {e}", a.checkpoint.display())))?;
    let truth = thermopinn::TemperatureField::load(&a.truth).map_err(|e| usage(format!("{}: {e}", a.truth.display())))?;
    check_model_lattice(&model, &truth).map_err(classify)?;
    let pred = predict_on_lattice(&model, &truth.times, &truth.x_mm);
    let report = mse_report(&pred, &truth).map_err(classify)?;
    let errors = error_field(&pred, &truth).map_err(classify)?;

    let mut config = ProblemConfig::default();
    config.env.horizon = truth.times.last().copied().unwrap_or(0.0);
    config.segments.time = truth.n_times().saturating_sub(1);
    config.segments.layers = std::array::from_fn(|l| truth.x_mm[l].len().saturating_sub(1));
    let inputs = RunInputs::new("evaluate", &config)
        .with("checkpoint_sha256", sha256_file(&a.checkpoint)?)
        .with("truth_sha256", sha256_file(&a.truth)?);
    let mut out = StagedOutput::new(&a.out, inputs)?;
    out.write_csv("mse.csv", &mse_csv(&report))?;
    out.write_csv("error_field.csv", &errors.to_csv("error_kK", 1e-3))?;
    out.commit()?;
    print_mse(&report);
    Ok(())
}

pub fn cmd_sweep_time(a: &SweepArgs) -> anyhow::Result<()> {
    if a.horizons.is_empty() {
        return Err(usage("--horizons must list at least one horizon"));
    }
    if let Some(h) = a.horizons.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(usage(format!("horizons must be positive, got {h}")));
    }
    if a.n_exp < 2 {
        return Err(usage(format!("--n-exp must be at least 2, got {}", a.n_exp)));
    }
    let base = load_config(&a.config)?;
    let horizons = a.horizons.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",");
    let mut inputs = RunInputs::new("sweep-time", &base).with("horizons", &horizons).with("n_exp", a.n_exp);
    inputs.preset = Some(Preset::M1.to_string());
    inputs.seed = Some(a.seed);
    inputs.epochs = Some(a.epochs);
    let mut out = StagedOutput::new(&a.out, inputs)?;

    let mut table = String::from("horizon_s,alpha,beta,gamma,mse_shl,mse_msr,mse_lin,mse_total\n");
    for &h in &a.horizons {
        let mut config = base;
        config.env.horizon = h;
        config.validate().map_err(classify)?;
        eprintln!("horizon {h} s");
        let grid = build_grid(&config.env, config.segments).map_err(classify)?;
        let truth = reference_solution(&config.env, &grid).map_err(classify)?;
        let (coeffs, _) = resolve_coefficients(Preset::M1, None, &config, &grid, a.n_exp, a.seed)?;
        let options = TrainOptions {
            epochs: a.epochs,
            ..TrainOptions::default()
        };
        let prefix = format!("horizon_{h}s/");
        let outcome = train_into(&mut out, Preset::M1, &config, &grid, &coeffs, &options, a.seed, &prefix)?;
        let report = mse_report(&predict_on_lattice(&outcome.model, &truth.times, &truth.x_mm), &truth).map_err(classify)?;
        let [s, m, l] = report.per_layer;
        let _ = writeln!(
            table,
            "{h},{:e},{:e},{:e},{s:e},{m:e},{l:e},{:e}",
            coeffs.alpha, coeffs.beta, coeffs.gamma, report.total
        );
        println!("{h:>6} s  total MSE {:.4e} kK^2", report.total);
    }
    out.write_csv("sweep.csv", &table)?;
    out.commit()?;
    Ok(())
}
