//! Backward balance: per-class residual scaling and its calibration from
//! loss statistics gathered over repeated initializations.

use std::fmt::Write as _;

use crate::collocation::CollocationSet;
use crate::error::{Error, Result};
use crate::network::{init_kaiming, PinnModel};
use crate::physics::{BalanceClass, EnvironmentConfig, ResidualTerm, ScaleConfig};
use crate::trainer::{LossEvaluator, OptimizerState};

/// Class multipliers applied to residual values before squaring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BalanceCoefficients {
    pub const UNIT: BalanceCoefficients = BalanceCoefficients {
        alpha: 1.0,
        beta: 1.0,
        gamma: 1.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        BalanceCoefficients { alpha, beta, gamma }
    }

    pub fn for_class(&self, class: BalanceClass) -> f64 {
        match class {
            BalanceClass::C1 => self.alpha,
            BalanceClass::C2 => self.beta,
            BalanceClass::C3 => self.gamma,
        }
    }

    pub fn for_term(&self, term: ResidualTerm) -> f64 {
        self.for_class(term.class())
    }

    /// Rejects non-finite or negative coefficients. Zero is allowed so that
    /// individual classes can be switched off.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("balance coefficient {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for BalanceCoefficients {
    fn default() -> Self {
        Self::UNIT
    }
}

/// Residual scaled by its class coefficient.
pub fn apply_balance(term: ResidualTerm, residual: f64, coeffs: &BalanceCoefficients) -> f64 {
    residual * coeffs.for_term(term)
}

/// Closed interval `[lo, hi]` of loss values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn scaled(&self, factor: f64) -> Range {
        Range::new(self.lo * factor, self.hi * factor)
    }
}

/// Intersection length over hull length of two closed intervals.
pub fn iou(a: Range, b: Range) -> f64 {
    let hull = a.hi.max(b.hi) - a.lo.min(b.lo);
    let overlap = (a.hi.min(b.hi) - a.lo.max(b.lo)).max(0.0);
    if hull > 0.0 {
        overlap / hull
    } else if a == b {
        1.0
    } else {
        0.0
    }
}

/// Mean unscaled loss of every residual term over repeated initializations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    /// Indexed like [`ResidualTerm::ALL`].
    pub mean_loss: [f64; 12],
    pub seeds: Vec<u64>,
}

impl ClassStats {
    pub fn from_means(mean_loss: [f64; 12]) -> Self {
        ClassStats {
            mean_loss,
            seeds: Vec::new(),
        }
    }

    /// The set of term means belonging to `class`.
    pub fn class_losses(&self, class: BalanceClass) -> Vec<f64> {
        ResidualTerm::ALL
            .iter()
            .filter(|t| t.class() == class)
            .map(|t| self.mean_loss[t.index()])
            .collect()
    }

    pub fn range(&self, class: BalanceClass) -> Range {
        let v = self.class_losses(class);
        Range::new(v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Mean over the class's terms.
    pub fn class_mean(&self, class: BalanceClass) -> f64 {
        let v = self.class_losses(class);
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Class range after multiplying each residual by `k`.
pub fn scaled_range(stats: &ClassStats, class: BalanceClass, k: f64) -> Range {
    stats.range(class).scaled(k * k)
}

/// Per-term means after one Adam step from each of the given Kaiming seeds.
///
/// Losses are recorded after the step, with unit coefficients.
pub fn collect_stats_for_seeds(
    env: &EnvironmentConfig,
    grid: &CollocationSet,
    scale: ScaleConfig,
    seeds: &[u64],
) -> Result<ClassStats> {
    if seeds.len() < 2 {
        return Err(Error::Config(format!("calibration needs at least 2 repeats, got {}", seeds.len())));
    }
    let mut sums = [0.0; 12];
    let template: PinnModel<f64> = init_kaiming(0, env, scale);
    let evaluator = LossEvaluator::new(&template, env, grid, &BalanceCoefficients::UNIT)?;
    for &seed in seeds {
        let mut model = init_kaiming(seed, env, scale);
        let mut opt = OptimizerState::new(&model, Default::default());
        let (_, grads) = evaluator.evaluate_with_gradient(&model);
        opt.step(&mut model, &grads);
        let after = evaluator.evaluate(&model);
        for term in ResidualTerm::ALL {
            let v = after.unscaled[term.index()];
            if !v.is_finite() {
                return Err(Error::Config(format!(
                    "calibration repeat with seed {seed}: loss term {} is not finite ({v})",
                    term.id()
                )));
            }
            sums[term.index()] += v;
        }
    }
    let n = seeds.len() as f64;
    Ok(ClassStats {
        mean_loss: sums.map(|s| s / n),
        seeds: seeds.to_vec(),
    })
}

/// [`collect_stats_for_seeds`] with seeds `seed, seed + 1, …`.
pub fn collect_initial_stats(
    env: &EnvironmentConfig,
    grid: &CollocationSet,
    scale: ScaleConfig,
    n_exp: usize,
    seed: u64,
) -> Result<ClassStats> {
    let seeds: Vec<u64> = (0..n_exp as u64).map(|i| seed.wrapping_add(i)).collect();
    collect_stats_for_seeds(env, grid, scale, &seeds)
}

/// Log-spaced coefficient scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchGrid {
    pub log10_min: f64,
    pub log10_max: f64,
    pub points: usize,
    /// Points of the local pass spanning one coarse step either side of the
    /// coarse optimum; zero disables it.
    pub refine_points: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid {
            log10_min: -9.0,
            log10_max: 0.0,
            points: 400,
            refine_points: 400,
        }
    }
}

impl SearchGrid {
    /// Coarse step in log10 units.
    pub fn step(&self) -> f64 {
        (self.log10_max - self.log10_min) / (self.points - 1) as f64
    }

    fn coarse(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.log10_min + self.step() * i as f64).collect()
    }
}

/// Outcome of calibrating one class against the reference class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassFit {
    pub coefficient: f64,
    pub iou: f64,
}

/// Calibrated coefficients and the IOUs they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub coeffs: BalanceCoefficients,
    pub beta_fit: ClassFit,
    pub gamma_fit: ClassFit,
}

/// Maximizes `iou(range(alpha·C1), range(k·target))` over `k`, preferring the
/// larger `k` on ties. `alpha` itself is always a candidate.
fn search(reference: Range, target: Range, alpha: f64, grid: &SearchGrid) -> ClassFit {
    let score = |log_k: f64| {
        let k = 10f64.powf(log_k);
        (iou(reference, target.scaled(k * k)), k)
    };
    let better = |cand: (f64, f64), best: (f64, f64)| cand.0 > best.0 || (cand.0 == best.0 && cand.1 > best.1);

    let mut best = (iou(reference, target.scaled(alpha * alpha)), alpha);
    let mut best_log = alpha.log10();
    for log_k in grid.coarse() {
        let cand = score(log_k);
        if better(cand, best) {
            best = cand;
            best_log = log_k;
        }
    }
    if grid.refine_points > 1 {
        let h = grid.step();
        let (lo, hi) = (best_log - h, best_log + h);
        for i in 0..grid.refine_points {
            let log_k = lo + (hi - lo) * i as f64 / (grid.refine_points - 1) as f64;
            let cand = score(log_k);
            if better(cand, best) {
                best = cand;
            }
        }
    }
    ClassFit {
        coefficient: best.1,
        iou: best.0,
    }
}

/// Fixes `alpha` for the C1 terms and picks `beta`, `gamma` by independent
/// one-dimensional IOU maximization against `range(alpha·C1)`.
pub fn calibrate(stats: &ClassStats, alpha: f64, grid: &SearchGrid) -> Result<Calibration> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be finite and > 0, got {alpha}")));
    }
    if grid.points < 2 || grid.log10_min.partial_cmp(&grid.log10_max) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Config(format!("invalid search grid {grid:?}")));
    }
    for class in BalanceClass::ALL {
        let r = stats.range(class);
        if !(r.lo.is_finite() && r.hi.is_finite() && r.lo >= 0.0) {
            return Err(Error::Config(format!("class {class} has invalid range [{}, {}]", r.lo, r.hi)));
        }
        if r.hi == 0.0 {
            return Err(Error::Config(format!("class {class} has an all-zero loss range")));
        }
    }
    let reference = scaled_range(stats, BalanceClass::C1, alpha);
    let beta_fit = search(reference, stats.range(BalanceClass::C2), alpha, grid);
    let gamma_fit = search(reference, stats.range(BalanceClass::C3), alpha, grid);
    Ok(Calibration {
        coeffs: BalanceCoefficients::new(alpha, beta_fit.coefficient, gamma_fit.coefficient),
        beta_fit,
        gamma_fit,
    })
}

impl Calibration {
    /// CSV report: one row per term with its class range and coefficient.
    pub fn report_csv(&self, stats: &ClassStats) -> String {
        let mut s = String::from("term,class,mean_loss,class_range_min,class_range_max,coefficient,iou\n");
        for term in ResidualTerm::ALL {
            let class = term.class();
            let range = stats.range(class);
            let iou = match class {
                BalanceClass::C1 => 1.0,
                BalanceClass::C2 => self.beta_fit.iou,
                BalanceClass::C3 => self.gamma_fit.iou,
            };
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{:e}",
                term.id(),
                class,
                stats.mean_loss[term.index()],
                range.lo,
                range.hi,
                self.coeffs.for_class(class),
                iou
            );
        }
        s
    }
}

/// Reads `alpha`, `beta`, `gamma` back from a calibration report or from a
/// three-line `name,value` file.
pub fn parse_coefficients(text: &str) -> Result<BalanceCoefficients> {
    let mut found: [Option<f64>; 3] = [None; 3];
    let bad = |line: &str| Error::Config(format!("unreadable coefficient line: {line}"));
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields[0] == "term" || fields[0] == "name" {
            continue;
        }
        let (slot, value) = match fields.as_slice() {
            [name, v] => {
                let slot = ["alpha", "beta", "gamma"].iter().position(|n| n == name).ok_or_else(|| bad(line))?;
                (slot, *v)
            }
            [term, _, _, _, _, coeff, _] => {
                let term = ResidualTerm::from_id(term).ok_or_else(|| bad(line))?;
                (term.class().index(), *coeff)
            }
            _ => return Err(bad(line)),
        };
        let v: f64 = value.parse().map_err(|_| bad(line))?;
        found[slot] = Some(v);
    }
    match found {
        [Some(alpha), Some(beta), Some(gamma)] => {
            let c = BalanceCoefficients::new(alpha, beta, gamma);
            c.validate()?;
            Ok(c)
        }
        _ => Err(Error::Config("coefficient file must define alpha, beta and gamma".into())),
    }
}
