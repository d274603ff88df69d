//! Composite loss, Adam and the full-batch training loop.
//!
//! The loss is the sum over the twelve residual terms of the mean squared
//! balanced residual on each term's partition. Work is split into fixed
//! chunks of collocation points that may be evaluated in parallel; partial
//! sums are always reduced in chunk order, so results do not depend on the
//! number of threads.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::autodiff::{AffineResidual, BlockTape, LANES};
use crate::balance::BalanceCoefficients;
use crate::collocation::CollocationSet;
use crate::error::{Error, Result};
use crate::network::{NetworkParams, ParamGradient, PinnModel, AFFINE_LAYERS};
use crate::physics::{term_form, EnvironmentConfig, ResidualTerm};
use crate::scalar::Scalar;

/// Collocation points per parallel work item.
const CHUNK: usize = 8 * LANES;

/// Per-term losses at one parameter state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// Mean squared residual, coefficients not applied.
    pub unscaled: [f64; 12],
    /// Mean squared balanced residual.
    pub scaled: [f64; 12],
    /// Sum of the scaled terms.
    pub total: f64,
}

impl LossBreakdown {
    /// Fails on the first non-finite term, in summation order.
    pub fn check_finite(&self, epoch: usize) -> Result<()> {
        for term in ResidualTerm::ALL {
            if !self.scaled[term.index()].is_finite() || !self.unscaled[term.index()].is_finite() {
                return Err(Error::NonFiniteLoss { term: term.id(), epoch });
            }
        }
        Ok(())
    }
}

struct TermPlan<T> {
    term: ResidualTerm,
    /// One affine readout per distinct network slot.
    probes: Vec<(usize, AffineResidual<T>)>,
    xs: Vec<T>,
    ts: Vec<T>,
    k2: T,
}

struct WorkItem {
    term: usize,
    start: usize,
    end: usize,
}

struct Partial<T> {
    term: usize,
    sum_sq: T,
    grads: Vec<(usize, ParamGradient<T>)>,
}

/// Precomputed residual readouts and network-unit coordinates for every
/// term of the composite loss.
pub struct LossEvaluator<T> {
    plans: Vec<TermPlan<T>>,
    work: Vec<WorkItem>,
    n_slots: usize,
}

impl<T: Scalar> LossEvaluator<T> {
    /// Builds the evaluator for models shaped like `model` (architecture and
    /// unit convention); the parameters of `model` are not used.
    pub fn new(
        model: &PinnModel<T>,
        env: &EnvironmentConfig,
        grid: &CollocationSet,
        coeffs: &BalanceCoefficients,
    ) -> Result<Self> {
        coeffs.validate()?;
        let scale = model.scale;
        let mut plans = Vec::with_capacity(12);
        let mut work = Vec::new();
        for term in ResidualTerm::ALL {
            let form = term_form::<T>(term, env, &scale);
            let mut probes: Vec<(usize, AffineResidual<T>)> = Vec::new();
            for (layer, r) in form.probes {
                let slot = model.slot(layer);
                match probes.iter_mut().find(|(s, _)| *s == slot) {
                    Some((_, acc)) => {
                        acc.value += r.value;
                        acc.d_dx += r.d_dx;
                        acc.d_dt += r.d_dt;
                        acc.d2_dx2 += r.d2_dx2;
                        acc.offset += r.offset;
                    }
                    None => probes.push((slot, r)),
                }
            }
            let points = grid.partition(term.domain());
            let xs = points.iter().map(|p| T::lit(scale.from_millimetres(p.0))).collect();
            let ts = points.iter().map(|p| T::lit(p.1)).collect();
            let k = coeffs.for_term(term);
            let mut start = 0;
            while start < points.len() {
                let end = (start + CHUNK).min(points.len());
                work.push(WorkItem {
                    term: term.index(),
                    start,
                    end,
                });
                start = end;
            }
            plans.push(TermPlan {
                term,
                probes,
                xs,
                ts,
                k2: T::lit(k * k),
            });
        }
        Ok(LossEvaluator {
            plans,
            work,
            n_slots: model.nets.len(),
        })
    }

    /// Number of points sampled by `term`.
    pub fn term_len(&self, term: ResidualTerm) -> usize {
        self.plans[term.index()].xs.len()
    }

    fn run(&self, model: &PinnModel<T>, with_grad: bool) -> (LossBreakdown, Vec<ParamGradient<T>>) {
        assert_eq!(model.nets.len(), self.n_slots, "model shape differs from the evaluator's");
        let partials: Vec<Partial<T>> = if rayon::current_num_threads() > 1 {
            self.work
                .par_iter()
                .with_min_len(16)
                .map_init(
                    || (BlockTape::new(), BlockTape::new()),
                    |(tape_a, tape_b), item| self.run_item(model, item, [tape_a, tape_b], with_grad),
                )
                .collect()
        } else {
            let (mut tape_a, mut tape_b) = (BlockTape::new(), BlockTape::new());
            self.work
                .iter()
                .map(|item| self.run_item(model, item, [&mut tape_a, &mut tape_b], with_grad))
                .collect()
        };

        let mut sums = vec![T::zero(); self.plans.len()];
        let mut grads = vec![NetworkParams::zeros(); if with_grad { self.n_slots } else { 0 }];
        for part in partials {
            sums[part.term] += part.sum_sq;
            for (slot, g) in &part.grads {
                grads[*slot].add_scaled(g, T::one());
            }
        }

        let mut unscaled = [0.0; 12];
        let mut scaled = [0.0; 12];
        for (plan, sum) in self.plans.iter().zip(sums) {
            let n = plan.xs.len();
            if n == 0 {
                continue;
            }
            let mean = sum / T::from_usize(n).expect("point count fits scalar");
            unscaled[plan.term.index()] = mean.as_f64();
            scaled[plan.term.index()] = (plan.k2 * mean).as_f64();
        }
        let total = scaled.iter().sum();
        (LossBreakdown { unscaled, scaled, total }, grads)
    }

    fn run_item(
        &self,
        model: &PinnModel<T>,
        item: &WorkItem,
        tapes: [&mut Box<BlockTape<T>>; 2],
        with_grad: bool,
    ) -> Partial<T> {
        let plan = &self.plans[item.term];
        let n = T::from_usize(plan.xs.len()).expect("point count fits scalar");
        let seed_scale = T::lit(2.0) * plan.k2 / n;
        let mut grads: Vec<(usize, ParamGradient<T>)> = if with_grad {
            plan.probes.iter().map(|(s, _)| (*s, NetworkParams::zeros())).collect()
        } else {
            Vec::new()
        };
        let [tape_a, tape_b] = tapes;
        let mut tapes = [tape_a, tape_b];
        let mut sum_sq = T::zero();

        let mut start = item.start;
        while start < item.end {
            let end = (start + LANES).min(item.end);
            let len = end - start;
            let mut r = [T::zero(); LANES];
            for (k, (slot, probe)) in plan.probes.iter().enumerate() {
                let tape = &mut tapes[k];
                tape.forward(&model.nets[*slot], &plan.xs[start..end], &plan.ts[start..end]);
                let out = tape.outputs();
                for p in 0..len {
                    r[p] += probe.value * out[0][p] + probe.d_dx * out[1][p] + probe.d_dt * out[2][p]
                        + probe.d2_dx2 * out[3][p]
                        + probe.offset;
                }
            }
            for v in &r[..len] {
                sum_sq += *v * *v;
            }
            if with_grad {
                let mut g = [T::zero(); LANES];
                for p in 0..len {
                    g[p] = seed_scale * r[p];
                }
                for (k, (_, probe)) in plan.probes.iter().enumerate() {
                    let channels = probe.channels();
                    let mut seeds = [[T::zero(); LANES]; 4];
                    for c in 0..4 {
                        if channels[c] != T::zero() {
                            for p in 0..len {
                                seeds[c][p] = g[p] * channels[c];
                            }
                        }
                    }
                    tapes[k].backward(&model.nets[plan.probes[k].0], &seeds, &mut grads[k].1);
                }
            }
            start = end;
        }
        Partial {
            term: item.term,
            sum_sq,
            grads,
        }
    }

    /// Per-term losses without gradients.
    pub fn evaluate(&self, model: &PinnModel<T>) -> LossBreakdown {
        self.run(model, false).0
    }

    /// Per-term losses and the gradient of the total with respect to every
    /// network's parameters, indexed like `model.nets`.
    pub fn evaluate_with_gradient(&self, model: &PinnModel<T>) -> (LossBreakdown, Vec<ParamGradient<T>>) {
        self.run(model, true)
    }
}

/// Total and per-term composite loss of `model` on `grid`.
pub fn composite_loss<T: Scalar>(
    model: &PinnModel<T>,
    grid: &CollocationSet,
    env: &EnvironmentConfig,
    coeffs: &BalanceCoefficients,
) -> Result<LossBreakdown> {
    let losses = LossEvaluator::new(model, env, grid, coeffs)?.evaluate(model);
    losses.check_finite(0)?;
    Ok(losses)
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments, one pair per network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub m: Vec<NetworkParams<T>>,
    pub v: Vec<NetworkParams<T>>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(model: &PinnModel<T>, config: AdamConfig) -> Self {
        OptimizerState {
            config,
            m: vec![NetworkParams::zeros(); model.nets.len()],
            v: vec![NetworkParams::zeros(); model.nets.len()],
            step: 0,
        }
    }

    /// One bias-corrected Adam update of every parameter of `model`.
    pub fn step(&mut self, model: &mut PinnModel<T>, grads: &[ParamGradient<T>]) {
        assert_eq!(grads.len(), model.nets.len());
        assert_eq!(self.m.len(), model.nets.len());
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let corr1 = T::one() - b1.powi(self.step as i32);
        let corr2 = T::one() - b2.powi(self.step as i32);
        let lr = T::lit(c.lr);
        let eps = T::lit(c.eps);
        for (((net, g), m), v) in model.nets.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let params = net.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut());
            for (((p, &g), m), v) in params {
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                let m_hat = *m / corr1;
                let v_hat = *v / corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Applies one Adam step to `model`.
pub fn adam_step<T: Scalar>(model: &mut PinnModel<T>, grads: &[ParamGradient<T>], state: &mut OptimizerState<T>) {
    state.step(model, grads);
}

/// Loss record of one epoch, taken before that epoch's update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub losses: LossBreakdown,
    /// Seconds since training started.
    pub wall_time: f64,
}

pub const HISTOGRAM_BINS: usize = 64;

/// Edges of the symmetric log-spaced gradient histogram, ascending.
///
/// Each sign has 32 bins: `[0, 1e-10)`, thirty half-decades up to `1e5`, and
/// `[1e5, ∞)`. Exact zeros are not counted.
pub fn histogram_edges() -> [f64; HISTOGRAM_BINS + 1] {
    let mut mags = [0.0; 33];
    for (i, m) in mags.iter_mut().enumerate().take(32).skip(1) {
        *m = 10f64.powf(-10.0 + 0.5 * (i - 1) as f64);
    }
    mags[32] = f64::INFINITY;
    let mut edges = [0.0; HISTOGRAM_BINS + 1];
    for i in 0..=32 {
        edges[32 + i] = mags[i];
        edges[32 - i] = -mags[i];
    }
    edges
}

fn histogram_bin(g: f64) -> Option<usize> {
    if g == 0.0 || g.is_nan() {
        return None;
    }
    let mag = g.abs();
    let k = if mag < 1e-10 {
        0
    } else if mag >= 1e5 {
        31
    } else {
        (((mag.log10() + 10.0) * 2.0).floor() as usize + 1).min(30)
    };
    Some(if g > 0.0 { 32 + k } else { 31 - k })
}

/// Gradient histogram of one affine layer of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientHistogram {
    pub network: &'static str,
    pub layer: usize,
    pub counts: [u64; HISTOGRAM_BINS],
}

impl GradientHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of entries with `|g|` at or above `threshold`, counting whole
    /// bins whose lower magnitude edge is at or above it.
    pub fn mass_beyond(&self, threshold: f64) -> u64 {
        let edges = histogram_edges();
        (0..HISTOGRAM_BINS)
            .filter(|&b| edges[b].abs().min(edges[b + 1].abs()) >= threshold)
            .map(|b| self.counts[b])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSnapshot {
    pub epoch: usize,
    pub histograms: Vec<GradientHistogram>,
}

/// Histograms of the loss gradient for every network and affine layer.
pub fn histogram_gradients<T: Scalar>(model: &PinnModel<T>, grads: &[ParamGradient<T>], epoch: usize) -> GradientSnapshot {
    let mut histograms = Vec::new();
    for (slot, g) in grads.iter().enumerate() {
        for layer in 0..AFFINE_LAYERS {
            let mut counts = [0; HISTOGRAM_BINS];
            for v in g.layer_values(layer) {
                if let Some(b) = histogram_bin(v.as_f64()) {
                    counts[b] += 1;
                }
            }
            histograms.push(GradientHistogram {
                network: model.slot_name(slot),
                layer,
                counts,
            });
        }
    }
    GradientSnapshot { epoch, histograms }
}

/// Gradient histograms of the composite loss at the current parameters.
pub fn gradient_snapshot<T: Scalar>(
    model: &PinnModel<T>,
    grid: &CollocationSet,
    env: &EnvironmentConfig,
    coeffs: &BalanceCoefficients,
    epoch: usize,
) -> Result<GradientSnapshot> {
    let (_, grads) = LossEvaluator::new(model, env, grid, coeffs)?.evaluate_with_gradient(model);
    Ok(histogram_gradients(model, &grads, epoch))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Checkpoint cadence in epochs; `None` disables intermediate checkpoints.
    pub checkpoint_every: Option<usize>,
    /// Epochs at which gradient histograms are taken.
    pub snapshot_epochs: Vec<usize>,
    /// Abort once the total loss exceeds this.
    pub divergence_threshold: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 20_000,
            adam: AdamConfig::default(),
            checkpoint_every: None,
            snapshot_epochs: Vec::new(),
            divergence_threshold: 1e30,
        }
    }
}

/// Hooks invoked by [`train`]. Errors returned from a hook stop training.
pub trait TrainObserver<T> {
    fn on_record(&mut self, _record: &TrainRecord) -> Result<()> {
        Ok(())
    }

    /// Called after the update of `epoch` at the configured cadence.
    fn on_checkpoint(&mut self, _epoch: usize, _model: &PinnModel<T>) -> Result<()> {
        Ok(())
    }
}

impl<T> TrainObserver<T> for () {}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: PinnModel<T>,
    pub records: Vec<TrainRecord>,
    pub snapshots: Vec<GradientSnapshot>,
    /// Losses of the returned model.
    pub final_losses: LossBreakdown,
}

/// Training stopped early; carries the last parameters with a finite loss.
#[derive(Debug)]
pub struct TrainAbort<T> {
    pub error: Error,
    pub last_good: PinnModel<T>,
    pub records: Vec<TrainRecord>,
}

impl<T> std::fmt::Display for TrainAbort<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training aborted after {} epochs: {}", self.records.len(), self.error)
    }
}

impl<T: std::fmt::Debug> std::error::Error for TrainAbort<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Full-batch Adam training of `model` for `options.epochs` epochs.
pub fn train<T: Scalar>(
    evaluator: &LossEvaluator<T>,
    mut model: PinnModel<T>,
    options: &TrainOptions,
    observer: &mut dyn TrainObserver<T>,
) -> std::result::Result<TrainOutcome<T>, Box<TrainAbort<T>>> {
    let started = Instant::now();
    let mut opt = OptimizerState::new(&model, options.adam);
    let mut records = Vec::with_capacity(options.epochs);
    let mut snapshots = Vec::new();
    let mut last_good = model.clone();

    let abort = |error: Error, last_good: PinnModel<T>, records: Vec<TrainRecord>| {
        Box::new(TrainAbort {
            error,
            last_good,
            records,
        })
    };

    for epoch in 1..=options.epochs {
        let (losses, grads) = evaluator.evaluate_with_gradient(&model);
        if let Err(e) = losses.check_finite(epoch) {
            return Err(abort(e, last_good, records));
        }
        if losses.total > options.divergence_threshold {
            let e = Error::Diverged {
                epoch,
                total: losses.total,
            };
            return Err(abort(e, last_good, records));
        }
        let record = TrainRecord {
            epoch,
            losses,
            wall_time: started.elapsed().as_secs_f64(),
        };
        if let Err(e) = observer.on_record(&record) {
            return Err(abort(e, model, records));
        }
        records.push(record);
        if options.snapshot_epochs.contains(&epoch) {
            snapshots.push(histogram_gradients(&model, &grads, epoch));
        }
        last_good.clone_from(&model);
        opt.step(&mut model, &grads);
        if options.checkpoint_every.is_some_and(|n| n > 0 && epoch % n == 0) {
            if let Err(e) = observer.on_checkpoint(epoch, &model) {
                return Err(abort(e, model, records));
            }
        }
    }

    let final_losses = evaluator.evaluate(&model);
    if let Err(e) = final_losses.check_finite(options.epochs) {
        return Err(abort(e, last_good, records));
    }
    Ok(TrainOutcome {
        model,
        records,
        snapshots,
        final_losses,
    })
}

/// Training log as CSV, one row per record.
pub fn training_log_csv(records: &[TrainRecord]) -> String {
    let mut s = String::from("epoch");
    for prefix in ["loss", "scaled"] {
        for term in ResidualTerm::ALL {
            let _ = write!(s, ",{prefix}_{}", term.id());
        }
    }
    s.push_str(",total\n");
    for r in records {
        let _ = write!(s, "{}", r.epoch);
        for v in r.losses.unscaled.iter().chain(&r.losses.scaled) {
            let _ = write!(s, ",{v:e}");
        }
        let _ = writeln!(s, ",{:e}", r.losses.total);
    }
    s
}

/// Gradient histograms as CSV: one row per non-empty bin.
pub fn histogram_csv(snapshots: &[GradientSnapshot]) -> String {
    let edges = histogram_edges();
    let mut s = String::from("epoch,network,layer,bin,bin_lo,bin_hi,count\n");
    for snap in snapshots {
        for h in &snap.histograms {
            for (b, &n) in h.counts.iter().enumerate() {
                if n > 0 {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{:e},{:e},{}",
                        snap.epoch,
                        h.network,
                        h.layer,
                        b,
                        edges[b],
                        edges[b + 1],
                        n
                    );
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collocation::{build_grid, Segments};
    use crate::network::{init_kaiming, scaled_boundaries, Architecture};
    use crate::physics::ScaleConfig;

    fn setup() -> (EnvironmentConfig, CollocationSet) {
        let env = EnvironmentConfig::benchmark();
        let grid = build_grid(&env, Segments::new(5, 7, 20, 30)).unwrap();
        (env, grid)
    }

    #[test]
    fn zero_model_initial_terms() {
        let (env, grid) = setup();
        let scale = ScaleConfig::FORWARD_BALANCED;
        let model = PinnModel::<f64>::zeros(Architecture::Parallel, scaled_boundaries(&env, &scale), scale);
        let l = composite_loss(&model, &grid, &env, &BalanceCoefficients::UNIT).unwrap();
        for t in [ResidualTerm::OShl, ResidualTerm::OMsr, ResidualTerm::OLin] {
            let v = l.unscaled[t.index()];
            assert!((v - 310.15f64.powi(2)).abs() < 1e-6, "{t}: {v}");
        }
        let zero = composite_loss(&model, &grid, &env, &BalanceCoefficients::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(zero.total, 0.0);
    }

    #[test]
    fn total_is_sum_of_scaled_terms() {
        let (env, grid) = setup();
        let model = init_kaiming::<f64>(3, &env, ScaleConfig::FORWARD_BALANCED);
        let c = BalanceCoefficients::new(1e-2, 1.3e-4, 4.7e-8);
        let l = composite_loss(&model, &grid, &env, &c).unwrap();
        let sum: f64 = l.scaled.iter().sum();
        assert_eq!(l.total, sum);
        for t in ResidualTerm::ALL {
            let k = c.for_term(t);
            let want = k * k * l.unscaled[t.index()];
            assert!((l.scaled[t.index()] - want).abs() <= 1e-12 * want.abs());
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let (env, _) = setup();
        let mut model = init_kaiming::<f64>(1, &env, ScaleConfig::FORWARD_BALANCED);
        let before = model.clone();
        let mut grads = vec![NetworkParams::zeros(); 3];
        for (i, g) in grads[0].iter_mut().enumerate() {
            *g = if i % 2 == 0 { 0.5 } else { -3.0 };
        }
        let mut st = OptimizerState::new(&model, AdamConfig::default());
        adam_step(&mut model, &grads, &mut st);
        for (i, (a, b)) in model.nets[0].iter().zip(before.nets[0].iter()).enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!((a - b + sign * 1e-3).abs() < 1e-10);
        }
        assert_eq!(model.nets[1], before.nets[1]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_constant_gradient_is_monotone() {
        let (env, _) = setup();
        let mut model = init_kaiming::<f64>(1, &env, ScaleConfig::FORWARD_BALANCED);
        let mut grads = vec![NetworkParams::zeros(); 3];
        grads[2].b_out = 2.0;
        let mut st = OptimizerState::new(&model, AdamConfig::default());
        let mut prev = model.nets[2].b_out;
        for _ in 0..50 {
            adam_step(&mut model, &grads, &mut st);
            assert!(model.nets[2].b_out < prev);
            prev = model.nets[2].b_out;
        }
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let (env, grid) = setup();
        let model = init_kaiming::<f64>(9, &env, ScaleConfig::FORWARD_BALANCED);
        let ev = LossEvaluator::new(&model, &env, &grid, &BalanceCoefficients::UNIT).unwrap();
        let opts = TrainOptions {
            epochs: 0,
            ..Default::default()
        };
        let out = train(&ev, model.clone(), &opts, &mut ()).unwrap();
        assert_eq!(out.model, model);
        assert!(out.records.is_empty());
    }

    #[test]
    fn divergence_returns_last_good_model() {
        let (env, grid) = setup();
        let model = init_kaiming::<f64>(9, &env, ScaleConfig::FORWARD_BALANCED);
        let ev = LossEvaluator::new(&model, &env, &grid, &BalanceCoefficients::UNIT).unwrap();
        let opts = TrainOptions {
            epochs: 5,
            divergence_threshold: 1.0,
            ..Default::default()
        };
        let abort = train(&ev, model.clone(), &opts, &mut ()).unwrap_err();
        assert!(matches!(abort.error, Error::Diverged { epoch: 1, .. }));
        assert_eq!(abort.last_good, model);
    }

    #[test]
    fn histogram_bins() {
        let e = histogram_edges();
        assert_eq!(e[32], 0.0);
        assert_eq!(e[33], 1e-10);
        assert_eq!(e[63], 1e5);
        assert_eq!(e[0], f64::NEG_INFINITY);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        for g in [3e-12, 1e-10, 2.5e-7, 0.9, 1.0, 7.0, 99999.0, 1e5, 1e300, -4e-3, -1e-20, -1e9] {
            let b = histogram_bin(g).unwrap();
            assert!(e[b] <= g && g < e[b + 1] || (g < 0.0 && e[b] < g && g <= e[b + 1]), "{g} -> {b}");
        }
        assert_eq!(histogram_bin(0.0), None);
    }

    #[test]
    fn zero_coefficients_give_empty_histograms() {
        let (env, grid) = setup();
        let scale = ScaleConfig::FORWARD_BALANCED;
        let model = PinnModel::<f64>::zeros(Architecture::Parallel, scaled_boundaries(&env, &scale), scale);
        let snap = gradient_snapshot(&model, &grid, &env, &BalanceCoefficients::new(0.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(snap.histograms.len(), 15);
        assert!(snap.histograms.iter().all(|h| h.total() == 0));
    }

    #[test]
    fn log_rows_match_records() {
        let (env, grid) = setup();
        let model = init_kaiming::<f64>(2, &env, ScaleConfig::FORWARD_BALANCED);
        let ev = LossEvaluator::new(&model, &env, &grid, &BalanceCoefficients::UNIT).unwrap();
        let opts = TrainOptions {
            epochs: 3,
            snapshot_epochs: vec![2],
            ..Default::default()
        };
        let out = train(&ev, model, &opts, &mut ()).unwrap();
        let csv = training_log_csv(&out.records);
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 26);
        assert_eq!(out.snapshots.len(), 1);
        assert_eq!(out.snapshots[0].histograms[0].total(), 20 + 10);
        assert!(histogram_csv(&out.snapshots).starts_with("epoch,network,layer,bin"));
    }
}
