//! Trains one ablation preset on the benchmark problem and prints the loss
//! and the grid MSE against the reference solution as training proceeds.
//!
//! ```text
//! cargo run --release --example train_preset -- M1 20000 1
//! ```

use std::time::Instant;

use thermopinn::experiment::{evaluate_model, preset_coefficients, reference_solution, train_preset, DEFAULT_CALIBRATION_REPEATS};
use thermopinn::*;

struct Progress<'a> {
    every: usize,
    grid: &'a CollocationSet,
    truth: &'a TemperatureField,
    start: Instant,
}

impl TrainObserver<f64> for Progress<'_> {
    fn on_checkpoint(&mut self, epoch: usize, model: &Model) -> thermopinn::Result<()> {
        let mse = evaluate_model(model, self.grid, self.truth)?;
        println!(
            "epoch {epoch:>6}  mse {:.4e}  [{:.3e} {:.3e} {:.3e}]  {:.0} s",
            mse.total,
            mse.per_layer[0],
            mse.per_layer[1],
            mse.per_layer[2],
            self.start.elapsed().as_secs_f64()
        );
        Ok(())
    }

    fn on_record(&mut self, record: &TrainRecord) -> thermopinn::Result<()> {
        if record.epoch.is_multiple_of(self.every) {
            println!("epoch {:>6}  loss {:.4e}", record.epoch, record.losses.total);
        }
        Ok(())
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset: Preset = args.next().as_deref().unwrap_or("M1").parse()?;
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let env = EnvironmentConfig::benchmark();
    let grid = build_grid(&env, Segments::BENCHMARK)?;
    let truth = reference_solution(&env, &grid)?;
    let (coeffs, _) = preset_coefficients(preset, &env, &grid, DEFAULT_CALIBRATION_REPEATS, seed)?;
    println!("{preset}: alpha {:.3e} beta {:.3e} gamma {:.3e}", coeffs.alpha, coeffs.beta, coeffs.gamma);

    let every = (epochs / 20).max(1);
    let options = TrainOptions { epochs, checkpoint_every: Some(every), ..TrainOptions::default() };
    let mut progress = Progress { every, grid: &grid, truth: &truth, start: Instant::now() };
    let outcome = train_preset(preset, &env, &grid, &coeffs, &options, seed, &mut progress)?;
    let mse = evaluate_model(&outcome.model, &grid, &truth)?;
    println!("final mse {:.4e} per layer {:?}", mse.total, mse.per_layer);
    Ok(())
}
