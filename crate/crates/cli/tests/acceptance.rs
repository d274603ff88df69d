//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured values next to the pinned tolerances.
//!
//! Every trained configuration runs three seeds and is scored by the run
//! with the lowest final training loss, so a seed that settles into a
//! spurious low-residual state does not decide the result on its own. All
//! nine criteria run by default; that trains 25 models of 20000 epochs each,
//! roughly eleven hours on one core. Select a subset with
//! `THERMOPINN_ACCEPTANCE=1,2,3`.
//!
//! A failing criterion is reported but does not fail the test binary unless
//! `THERMOPINN_ACCEPTANCE_STRICT=1` is set.

use std::cell::OnceCell;
use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermopinn::autodiff::loss_and_gradient;
use thermopinn::balance::{calibrate, SearchGrid};
use thermopinn::experiment::{evaluate_model, preset_coefficients, reference_solution, train_preset, DEFAULT_ALPHA};
use thermopinn::fdm::energy_balance;
use thermopinn::physics::{residual_direct, term_form};
use thermopinn::{
    backward_params, build_grid, forward_augmented, solve_fdm, steady_state_profile, AffineResidual, BalanceClass,
    ClassStats, DualState, EnvironmentConfig, FdmGrid, LayerId, MseReport, NetworkParams, Preset,
    ResidualTerm, ScaleConfig, Segments, TrainObserver, TrainOptions, TrainRecord,
};

const SEED: u64 = 0;
/// Every trained configuration runs these seeds and keeps the lowest final loss.
const SEEDS: [u64; 3] = [0, 1, 2];
const EPOCHS: usize = 20_000;

/// Training length; `THERMOPINN_ACCEPTANCE_EPOCHS` shortens it for a dry run
/// of the harness, and the summary line then marks the results as such.
fn epochs() -> usize {
    std::env::var("THERMOPINN_ACCEPTANCE_EPOCHS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(EPOCHS)
}
const CALIBRATION_REPEATS: usize = 50;

// Criterion 1
const AUTODIFF_CONFIGS: u64 = 100;
const AUTODIFF_TOL: f64 = 1e-6;
const AUTODIFF_BUDGET: Duration = Duration::from_secs(10);
// Criterion 2
const BALANCE_IDENTITY_TOL: f64 = 1e-12;
// Criterion 3
const STEADY_HORIZON_S: f64 = 600.0;
const STEADY_TOL_K: f64 = 1.0;
const ENERGY_TOL: f64 = 1e-2;
const FDM_BUDGET: Duration = Duration::from_secs(120);
// Criterion 4: class means within one decade of these bands.
const CLASS_BANDS: [(f64, f64); 3] = [(1e6, 1e6), (1e9, 1e10), (1e15, 1e17)];
const STATS_BUDGET: Duration = Duration::from_secs(300);
// Criterion 5
const BETA_BAND: (f64, f64) = (1.0e-4, 1.6e-4);
const GAMMA_BAND: (f64, f64) = (3.5e-8, 6.0e-8);
const TABLE_C1_MAX: f64 = 1.42e6;
const TABLE_C2_MAX: f64 = 8.65e9;
const TABLE_C3_MAX: f64 = 6.28e16;
const PUBLISHED_BETA: f64 = 1.28e-4;
const PUBLISHED_GAMMA: f64 = 4.76e-8;
// Criterion 6
const MSE_BOUND: f64 = 1e-3;
const TRAIN_BUDGET: Duration = Duration::from_secs(30 * 60);
// Criterion 7
const ABLATION_FACTOR: f64 = 10.0;
// Criterion 8
const HORIZONS: [f64; 4] = [10.0, 30.0, 60.0, 120.0];
const PUBLISHED_HORIZON_MSE: [f64; 4] = [1.3214e-5, 7.9984e-5, 1.5024e-4, 1.2199e-3];
const HORIZON_DECADES: f64 = 1.0;
// Criterion 9
const SIGNIFICANT_DIGITS: usize = 6;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

#[derive(Clone, Copy)]
struct TrainedRun {
    seed: u64,
    /// Total training loss after the last update; infinite if training stopped.
    final_loss: f64,
    mse: MseReport,
    elapsed: Duration,
}

/// Runs of one configuration over `SEEDS`, and the one with the lowest final
/// training loss.
#[derive(Clone)]
struct Selection {
    runs: Vec<TrainedRun>,
    chosen: usize,
}

impl Selection {
    fn best(&self) -> &TrainedRun {
        &self.runs[self.chosen]
    }

    fn summary(&self) -> String {
        let cells: Vec<String> = self
            .runs
            .iter()
            .map(|r| format!("seed {} loss {:.3e} mse {:.3e}", r.seed, r.final_loss, r.mse.total))
            .collect();
        format!("[{}] -> seed {}", cells.join("; "), self.best().seed)
    }
}

struct Progress(String);

impl TrainObserver<f64> for Progress {
    fn on_record(&mut self, r: &TrainRecord) -> thermopinn::Result<()> {
        if r.epoch.is_multiple_of(5000) {
            eprintln!("  [{}] epoch {} loss {:.4e} ({:.0} s)", self.0, r.epoch, r.losses.total, r.wall_time);
        }
        Ok(())
    }
}

/// Results shared between criteria.
struct Runs {
    stats: OnceCell<(ClassStats, Duration)>,
    m1: OnceCell<Selection>,
}

impl Runs {
    fn stats(&self) -> &(ClassStats, Duration) {
        self.stats.get_or_init(|| {
            let env = EnvironmentConfig::benchmark();
            let grid = build_grid(&env, Segments::BENCHMARK).unwrap();
            let start = Instant::now();
            let stats = thermopinn::collect_initial_stats(&env, &grid, ScaleConfig::FORWARD_BALANCED, CALIBRATION_REPEATS, SEED)
                .expect("initial statistics");
            (stats, start.elapsed())
        })
    }

    fn m1(&self) -> &Selection {
        self.m1.get_or_init(|| select(Preset::M1, 60.0))
    }
}

/// Same steps as `thermopinn train --seed <seed>`: calibrate with that seed
/// if the preset asks for it, train the full schedule, then compare the
/// final model with the reference solution.
fn run_preset(preset: Preset, horizon: f64, seed: u64) -> TrainedRun {
    let label = format!("{preset} {horizon} s seed {seed}");
    let env = EnvironmentConfig::benchmark().with_horizon(horizon);
    let grid = build_grid(&env, Segments::BENCHMARK).unwrap();
    let truth = reference_solution(&env, &grid).unwrap();
    let start = Instant::now();
    let (coeffs, _) = preset_coefficients(preset, &env, &grid, CALIBRATION_REPEATS, seed).unwrap();
    let options = TrainOptions {
        epochs: epochs(),
        ..TrainOptions::default()
    };
    let (final_loss, mse) = match train_preset(preset, &env, &grid, &coeffs, &options, seed, &mut Progress(label.clone())) {
        Ok(outcome) => (outcome.final_losses.total, evaluate_model(&outcome.model, &grid, &truth).unwrap()),
        Err(abort) => {
            eprintln!("  [{label}] training stopped: {}", abort.error);
            (f64::INFINITY, evaluate_model(&abort.last_good, &grid, &truth).unwrap())
        }
    };
    let run = TrainedRun {
        seed,
        final_loss,
        mse,
        elapsed: start.elapsed(),
    };
    eprintln!(
        "  [{label}] final loss {:.4e}, total MSE {:.4e} kK^2 in {:.1} min",
        run.final_loss,
        run.mse.total,
        run.elapsed.as_secs_f64() / 60.0
    );
    run
}

/// Trains every seed in `SEEDS` and keeps the run with the lowest final
/// training loss; the reference solution plays no part in the choice.
fn select(preset: Preset, horizon: f64) -> Selection {
    let runs: Vec<TrainedRun> = SEEDS.iter().map(|&seed| run_preset(preset, horizon, seed)).collect();
    let chosen = (0..runs.len()).min_by(|&a, &b| runs[a].final_loss.total_cmp(&runs[b].final_loss)).unwrap();
    Selection { runs, chosen }
}

fn random_network(rng: &mut ChaCha8Rng) -> NetworkParams<f64> {
    let mut p = NetworkParams::kaiming(rng);
    for b in p.b_in.iter_mut().chain(p.b_hidden.iter_mut().flatten()) {
        *b = rng.random_range(-0.5..0.5);
    }
    p.b_out = rng.random_range(-0.5..0.5);
    p
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut fwd, mut bwd) = (0.0f64, 0.0f64);
    for cfg in 0..AUTODIFF_CONFIGS {
        let mut rng = ChaCha8Rng::seed_from_u64(90_000 + cfg);
        let p = random_network(&mut rng);
        let (x, t) = (rng.random_range(0.0..5.05), rng.random_range(0.0..3.0));
        let f = |x: f64, t: f64| forward_augmented(&p, x, t).unwrap();
        let d = f(x, t);
        let h = 1e-5;
        let floor = d.value.abs().max(d.d_dx.abs()).max(1e-3);
        for (a, b) in [
            (d.d_dx, (f(x + h, t).value - f(x - h, t).value) / (2.0 * h)),
            (d.d_dt, (f(x, t + h).value - f(x, t - h).value) / (2.0 * h)),
            (d.d2_dx2, (f(x + h, t).d_dx - f(x - h, t).d_dx) / (2.0 * h)),
        ] {
            fwd = fwd.max((a - b).abs() / b.abs().max(floor));
        }

        let batch: Vec<(f64, f64)> = (0..rng.random_range(1..48))
            .map(|_| (rng.random_range(0.0..5.05), rng.random_range(0.0..3.0)))
            .collect();
        let r = AffineResidual {
            value: rng.random_range(-2.0..2.0),
            d_dx: rng.random_range(-2.0..2.0),
            d_dt: rng.random_range(-2.0..2.0),
            d2_dx2: rng.random_range(-2.0..2.0),
            offset: rng.random_range(-1.0..1.0),
        };
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let grad = backward_params(&p, &batch, &r, scale).unwrap().to_flat();
        let theta = p.to_flat();
        let loss = |v: &[f64]| loss_and_gradient(&NetworkParams::from_flat(v).unwrap(), &batch, &r, scale).unwrap().0;
        let (mut num, mut den) = (0.0, 0.0);
        let mut probe = theta.clone();
        for i in 0..theta.len() {
            let h = 1e-6 * theta[i].abs().max(1.0);
            probe[i] = theta[i] + h;
            let up = loss(&probe);
            probe[i] = theta[i] - h;
            let down = loss(&probe);
            probe[i] = theta[i];
            let fd = (up - down) / (2.0 * h);
            num += (grad[i] - fd).powi(2);
            den += fd * fd;
        }
        bwd = bwd.max((num / den.max(1e-300)).sqrt());
    }
    let elapsed = start.elapsed();
    Outcome::new(
        fwd < AUTODIFF_TOL && bwd < AUTODIFF_TOL && elapsed < AUTODIFF_BUDGET,
        format!(
            "autodiff vs central differences at {AUTODIFF_CONFIGS} configurations: derivatives {fwd:.2e}, \
             parameter gradients {bwd:.2e} (< {AUTODIFF_TOL:.0e}); {:.1} s (< {} s)",
            elapsed.as_secs_f64(),
            AUTODIFF_BUDGET.as_secs()
        ),
    )
}

fn criterion_2() -> Outcome {
    let env = EnvironmentConfig::benchmark();
    let (fbm, si) = (ScaleConfig::FORWARD_BALANCED, ScaleConfig::SI);
    // Manufactured fields T(x, t) in kelvin with exact derivatives (x in m).
    let fields: [fn(f64, f64) -> [f64; 4]; 3] = [
        |x, t| {
            let (e, s, c) = ((-0.05 * t).exp(), (900.0 * x).sin(), (900.0 * x).cos());
            [310.15 + 480.0 * s * e, 480.0 * 900.0 * c * e, -0.05 * 480.0 * s * e, -480.0 * 8.1e5 * s * e]
        },
        |x, t| {
            [
                350.0 + 2e5 * x - 3e7 * x * x + 4.0 * t + 1.5e3 * x * t,
                2e5 - 6e7 * x + 1.5e3 * t,
                4.0 + 1.5e3 * x,
                -6e7,
            ]
        },
        |x, _| [1900.0 - 1.2e5 * x, -1.2e5, 0.0, 0.0],
    ];
    let state = |s: &ScaleConfig, v: [f64; 4]| DualState {
        value: v[0] / s.temperature_unit,
        d_dx: v[1] * s.length_unit / s.temperature_unit,
        d_dt: v[2] / s.temperature_unit,
        d2_dx2: v[3] * s.length_unit * s.length_unit / s.temperature_unit,
    };
    let mut worst = 0.0f64;
    let mut checks = 0;
    for (i, left) in fields.iter().enumerate() {
        let right = fields[(i + 1) % fields.len()];
        for x in [1.7e-4, 6e-4, 1.45e-3, 3.3e-3] {
            for t in [0.2, 7.5, 60.0] {
                let phys = [left(x, t), right(x, t)];
                for term in ResidualTerm::ALL {
                    let form = term_form::<f64>(term, &env, &si);
                    let n = form.probes.len();
                    let s_si: Vec<_> = phys[..n].iter().map(|v| state(&si, *v)).collect();
                    let s_fbm: Vec<_> = phys[..n].iter().map(|v| state(&fbm, *v)).collect();
                    let want = residual_direct(term, &s_si, &env, &si);
                    let magnitude: f64 = form
                        .probes
                        .iter()
                        .zip(&s_si)
                        .map(|((_, c), d)| {
                            c.offset.abs()
                                + (c.value * d.value).abs()
                                + (c.d_dx * d.d_dx).abs()
                                + (c.d_dt * d.d_dt).abs()
                                + (c.d2_dx2 * d.d2_dx2).abs()
                        })
                        .sum();
                    for got in [residual_direct(term, &s_fbm, &env, &fbm), term_form::<f64>(term, &env, &fbm).eval(&s_fbm)] {
                        worst = worst.max((got - want).abs() / want.abs().max(1e-3 * magnitude).max(f64::MIN_POSITIVE));
                        checks += 1;
                    }
                }
            }
        }
    }
    Outcome::new(
        worst < BALANCE_IDENTITY_TOL,
        format!("rescaled vs SI residuals on manufactured fields: worst relative deviation {worst:.2e} over {checks} evaluations (< {BALANCE_IDENTITY_TOL:.0e})"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let env = EnvironmentConfig::benchmark().with_horizon(STEADY_HORIZON_S);
    let grid = FdmGrid::reference(&env, Segments::BENCHMARK).unwrap();
    let field = solve_fdm(&env, &grid, None).unwrap();
    let steady = steady_state_profile(&env);
    let last = field.n_times() - 1;
    let mut worst = 0.0f64;
    for layer in LayerId::ALL {
        for (x, v) in field.x_mm[layer.index()].iter().zip(field.layer_row(layer, last)) {
            worst = worst.max((v - steady.temperature(layer, x * 1e-3)).abs());
        }
    }
    let fraction = energy_balance(&field, &env).unwrap();
    let elapsed = start.elapsed();
    Outcome::new(
        worst < STEADY_TOL_K && fraction < ENERGY_TOL && elapsed < FDM_BUDGET,
        format!(
            "{STEADY_HORIZON_S} s reference run: max deviation from steady profile {worst:.3e} K (< {STEADY_TOL_K} K), \
             energy residual fraction {fraction:.2e} (< {ENERGY_TOL:.0e}); {:.1} s (< {} s)",
            elapsed.as_secs_f64(),
            FDM_BUDGET.as_secs()
        ),
    )
}

fn criterion_4(runs: &Runs) -> Outcome {
    let (stats, elapsed) = runs.stats();
    let mut pass = *elapsed < STATS_BUDGET;
    let mut parts = Vec::new();
    for (class, (lo, hi)) in BalanceClass::ALL.into_iter().zip(CLASS_BANDS) {
        let mean = stats.class_mean(class);
        pass &= mean >= lo / 10.0 && mean <= hi * 10.0;
        parts.push(format!("{} {mean:.2e} (in [{:.0e}, {:.0e}])", class.name(), lo / 10.0, hi * 10.0));
    }
    Outcome::new(
        pass,
        format!(
            "initial statistics over {CALIBRATION_REPEATS} repeats: {}; {:.1} s (< {} s)",
            parts.join(", "),
            elapsed.as_secs_f64(),
            STATS_BUDGET.as_secs()
        ),
    )
}

fn criterion_5(runs: &Runs) -> Outcome {
    let (stats, _) = runs.stats();
    let grid = SearchGrid::default();
    let cal = calibrate(stats, DEFAULT_ALPHA, &grid).unwrap();
    let (beta, gamma) = (cal.coeffs.beta, cal.coeffs.gamma);
    let reproduced = (BETA_BAND.0..=BETA_BAND.1).contains(&beta) && (GAMMA_BAND.0..=GAMMA_BAND.1).contains(&gamma);

    // Published class ranges: the extreme printed means of each class.
    let table = ClassStats::from_means({
        use ResidualTerm::*;
        let mut m = [0.0; 12];
        for (t, v) in [
            (OShl, 7.8e5),
            (OMsr, 6.24e5),
            (OLin, 1.2e6),
            (B1ShlMsr, 9.4e5),
            (B1MsrLin, TABLE_C1_MAX),
            (BShl, 8.0e9),
            (B2ShlMsr, TABLE_C2_MAX),
            (B2MsrLin, 4.2e9),
            (BLin, 1.14e8),
            (RShl, 1.3e16),
            (RMsr, TABLE_C3_MAX),
            (RLin, 6.36e14),
        ] {
            m[t.index()] = v;
        }
        m
    });
    let fitted = calibrate(&table, DEFAULT_ALPHA, &grid).unwrap();
    let step = 10f64.powf(grid.step());
    let closed = [
        DEFAULT_ALPHA * (TABLE_C1_MAX / TABLE_C2_MAX).sqrt(),
        DEFAULT_ALPHA * (TABLE_C1_MAX / TABLE_C3_MAX).sqrt(),
    ];
    let got = [fitted.coeffs.beta, fitted.coeffs.gamma];
    let published = [PUBLISHED_BETA, PUBLISHED_GAMMA];
    let mut aligned = true;
    for i in 0..2 {
        aligned &= got[i] / closed[i] <= step && closed[i] / got[i] <= step;
        aligned &= got[i] / published[i] <= step && published[i] / got[i] <= step;
    }
    Outcome::new(
        reproduced && aligned,
        format!(
            "calibration on reproduced statistics: beta {beta:.3e} (in [{:.1e}, {:.1e}]), gamma {gamma:.3e} (in [{:.1e}, {:.1e}]); \
             on published statistics: beta {:.4e}, gamma {:.4e} vs edge alignment {:.4e}, {:.4e} (within one grid step, x{step:.4})",
            BETA_BAND.0, BETA_BAND.1, GAMMA_BAND.0, GAMMA_BAND.1, got[0], got[1], closed[0], closed[1]
        ),
    )
}

fn criterion_6(runs: &Runs) -> Outcome {
    let m1 = runs.m1();
    let best = m1.best();
    let layers_ok = best.mse.per_layer.iter().all(|v| *v <= MSE_BOUND);
    let slowest = m1.runs.iter().map(|r| r.elapsed).max().unwrap();
    Outcome::new(
        best.mse.total <= MSE_BOUND && layers_ok && slowest < TRAIN_BUDGET,
        format!(
            "M1, {} epochs, 60 s, lowest final loss of seeds {SEEDS:?}: total MSE {:.4e} kK^2, \
             per layer [{:.3e}, {:.3e}, {:.3e}] (all <= {MSE_BOUND:.0e}); slowest run {:.1} min (< {} min); runs {}",
            epochs(),
            best.mse.total,
            best.mse.per_layer[0],
            best.mse.per_layer[1],
            best.mse.per_layer[2],
            slowest.as_secs_f64() / 60.0,
            TRAIN_BUDGET.as_secs() / 60,
            m1.summary()
        ),
    )
}

fn criterion_7(runs: &Runs) -> Outcome {
    let m1 = runs.m1().clone();
    let others = [Preset::M2, Preset::M3, Preset::M4, Preset::M5].map(|p| select(p, 60.0));
    let totals = [&m1, &others[0], &others[1], &others[2], &others[3]].map(|s| s.best().mse.total);
    let separated = totals[1..4].iter().all(|t| *t >= ABLATION_FACTOR * totals[0]);
    let between = totals[0] < totals[4] && totals[4] < totals[1];
    let runs_text: Vec<String> = Preset::ALL
        .iter()
        .zip([&m1, &others[0], &others[1], &others[2], &others[3]])
        .map(|(p, s)| format!("{p} {}", s.summary()))
        .collect();
    Outcome::new(
        separated && between,
        format!(
            "ablation total MSE: M1 {:.3e}, M2 {:.3e}, M3 {:.3e}, M4 {:.3e}, M5 {:.3e}; \
             M2-M4 >= {ABLATION_FACTOR}x M1: {separated}, M1 < M5 < M2: {between}; runs {}",
            totals[0],
            totals[1],
            totals[2],
            totals[3],
            totals[4],
            runs_text.join(", ")
        ),
    )
}

fn criterion_8(runs: &Runs) -> Outcome {
    let selections = HORIZONS.map(|h| if h == 60.0 { runs.m1().clone() } else { select(Preset::M1, h) });
    let totals = selections.each_ref().map(|s| s.best().mse.total);
    let monotone = totals.windows(2).all(|w| w[0] <= w[1]);
    let bound = 10f64.powf(HORIZON_DECADES);
    let near = totals.iter().zip(PUBLISHED_HORIZON_MSE).all(|(t, p)| t / p <= bound && p / t <= bound);
    let cells = HORIZONS
        .iter()
        .zip(&selections)
        .zip(PUBLISHED_HORIZON_MSE)
        .map(|((h, s), p)| format!("{h} s {:.3e} (published {p:.3e}) {}", s.best().mse.total, s.summary()))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(
        monotone && near,
        format!("horizon sweep: {cells}; nondecreasing: {monotone}, within {HORIZON_DECADES} decade: {near}"),
    )
}

fn criterion_9(runs: &Runs) -> Outcome {
    let first = *runs.m1().best();
    let second = run_preset(Preset::M1, 60.0, first.seed);
    let fmt = |v: f64| format!("{v:.*e}", SIGNIFICANT_DIGITS - 1);
    let (a, b) = (fmt(first.mse.total), fmt(second.mse.total));
    Outcome::new(
        a == b,
        format!(
            "M1 repeated with seed {}: {a} vs {b} ({SIGNIFICANT_DIGITS} significant digits; bitwise equal: {})",
            first.seed,
            first.mse.total.to_bits() == second.mse.total.to_bits()
        ),
    )
}

fn selected() -> BTreeSet<u32> {
    match std::env::var("THERMOPINN_ACCEPTANCE") {
        Ok(v) if !v.trim().is_empty() && v.trim() != "all" => v
            .split(',')
            .map(|s| s.trim().parse().unwrap_or_else(|_| panic!("bad criterion number `{s}`")))
            .collect(),
        _ => (1..=9).collect(),
    }
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        for i in 1..=9 {
            println!("criterion_{i}: test");
        }
        return ExitCode::SUCCESS;
    }
    let runs = Runs {
        stats: OnceCell::new(),
        m1: OnceCell::new(),
    };
    let mut failed = 0;
    let chosen = selected();
    for &i in &chosen {
        let outcome = match i {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(&runs),
            5 => criterion_5(&runs),
            6 => criterion_6(&runs),
            7 => criterion_7(&runs),
            8 => criterion_8(&runs),
            9 => criterion_9(&runs),
            other => panic!("no criterion {other}"),
        };
        if !outcome.pass {
            failed += 1;
        }
        println!("criterion {i} {} {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    println!("acceptance: {} of {} criteria passed", chosen.len() - failed, chosen.len());
    if epochs() != EPOCHS {
        println!("acceptance: training shortened to {} epochs; trained criteria are not meaningful", epochs());
    }
    let strict = std::env::var("THERMOPINN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
