//! Explicit finite-difference reference solver, its analytic steady state,
//! and the field containers and error metrics used for evaluation.
//!
//! The discretization is a lumped finite-volume scheme on the node layout of
//! the collocation grid. Every node carries half of each adjacent segment's
//! heat capacity; segments conduct with `k/Δx` of the layer they lie in, so
//! interface nodes balance the fluxes of both half-cells. The outer nodes
//! exchange heat with the gas and the air through their convective films.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::collocation::{uniform_nodes, CollocationSet, Segments};
use crate::error::{Error, Result};
use crate::physics::{EnvironmentConfig, LayerId};

/// Time steps per 60 s of simulated time at the reference resolution.
pub const STEPS_PER_MINUTE: usize = 200_000;

/// Spatial and temporal discretization of the fabric.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmGrid {
    pub segments: Segments,
    pub horizon: f64,
    pub n_steps: usize,
    pub dt: f64,
    /// Node abscissae in mm, interfaces once.
    pub x_mm: Vec<f64>,
    /// Segment length per layer, m.
    pub dx: [f64; 3],
    /// Layer of each segment between consecutive nodes.
    pub segment_layer: Vec<LayerId>,
    /// Discrete Fourier number `k Δt / (C^A Δx²)` per layer.
    pub fourier: [f64; 3],
}

impl FdmGrid {
    /// Smallest step count that is a multiple of the time segments and at
    /// least the reference resolution scaled to `horizon`.
    pub fn default_steps(horizon: f64, segments: &Segments) -> usize {
        let target = (STEPS_PER_MINUTE as f64 * horizon / 60.0).ceil() as usize;
        target.div_ceil(segments.time).max(1) * segments.time
    }

    pub fn new(env: &EnvironmentConfig, segments: Segments, n_steps: usize) -> Result<Self> {
        segments.validate()?;
        env.validate()?;
        if n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        let dt = env.horizon / n_steps as f64;
        let bounds = env.boundaries_mm();
        let mut x_mm = uniform_nodes(bounds[0], bounds[1], segments.layers[0]);
        for l in 1..3 {
            x_mm.extend_from_slice(&uniform_nodes(bounds[l], bounds[l + 1], segments.layers[l])[1..]);
        }
        let dx = std::array::from_fn(|l| env.layers[l].thickness / segments.layers[l] as f64);
        let segment_layer = LayerId::ALL
            .iter()
            .zip(segments.layers)
            .flat_map(|(&id, n)| std::iter::repeat_n(id, n))
            .collect();
        let fourier = std::array::from_fn(|l| {
            let layer = &env.layers[l];
            layer.conductivity * dt / (layer.apparent_heat_capacity() * dx[l] * dx[l])
        });
        let grid = FdmGrid {
            segments,
            horizon: env.horizon,
            n_steps,
            dt,
            x_mm,
            dx,
            segment_layer,
            fourier,
        };
        grid.check_stability(env)?;
        Ok(grid)
    }

    /// Grid with [`FdmGrid::default_steps`] time steps.
    pub fn reference(env: &EnvironmentConfig, segments: Segments) -> Result<Self> {
        Self::new(env, segments, Self::default_steps(env.horizon, &segments))
    }

    pub fn n_nodes(&self) -> usize {
        self.x_mm.len()
    }

    /// Steps between stored rows when recording on the collocation times.
    pub fn record_stride(&self) -> Option<usize> {
        (self.n_steps.is_multiple_of(self.segments.time)).then(|| self.n_steps / self.segments.time)
    }

    fn conductances(&self, env: &EnvironmentConfig) -> Vec<f64> {
        self.segment_layer
            .iter()
            .map(|l| env.layer(*l).conductivity / self.dx[l.index()])
            .collect()
    }

    /// Lumped heat capacity per node, J/(m²·K).
    pub fn capacities(&self, env: &EnvironmentConfig) -> Vec<f64> {
        let mut c = vec![0.0; self.n_nodes()];
        for (s, l) in self.segment_layer.iter().enumerate() {
            let half = 0.5 * env.layer(*l).apparent_heat_capacity() * self.dx[l.index()];
            c[s] += half;
            c[s + 1] += half;
        }
        c
    }

    /// Requires every layer's Fourier number to be at most 1/2 and every
    /// node's explicit update to be a convex combination.
    pub fn check_stability(&self, env: &EnvironmentConfig) -> Result<()> {
        let report = || {
            LayerId::ALL
                .iter()
                .map(|l| format!("{}: r = {:.4}", l.name(), self.fourier[l.index()]))
                .collect::<Vec<_>>()
                .join(", ")
        };
        if !self.fourier.iter().all(|r| *r <= 0.5) {
            return Err(Error::Stability(format!("Fourier number above 1/2 ({})", report())));
        }
        let g = self.conductances(env);
        let c = self.capacities(env);
        let n = self.n_nodes();
        for i in 0..n {
            let mut out = 0.0;
            if i > 0 {
                out += g[i - 1];
            }
            if i + 1 < n {
                out += g[i];
            }
            if i == 0 {
                out += env.h_g;
            }
            if i + 1 == n {
                out += env.h_air;
            }
            let weight = self.dt * out / c[i];
            if weight.is_nan() || weight > 1.0 {
                return Err(Error::Stability(format!(
                    "node {i} at x = {} mm has update weight {weight:.4} > 1 ({})",
                    self.x_mm[i],
                    report()
                )));
            }
        }
        Ok(())
    }
}

/// Temperatures on a time × space lattice, stored per layer so that interface
/// nodes appear in both adjacent layers.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureField {
    pub times: Vec<f64>,
    /// Node abscissae of each layer in mm, both endpoints included.
    pub x_mm: [Vec<f64>; 3],
    /// Row-major `times × x_mm[l]`, kelvin.
    pub values: [Vec<f64>; 3],
    /// Net heat taken up by the fabric since `t = 0` at each row, J/m²,
    /// accumulated on the solver's own time steps.
    pub cumulative_influx: Option<Vec<f64>>,
}

impl TemperatureField {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn layer_row(&self, layer: LayerId, row: usize) -> &[f64] {
        let n = self.x_mm[layer.index()].len();
        &self.values[layer.index()][row * n..(row + 1) * n]
    }

    pub fn get(&self, layer: LayerId, row: usize, col: usize) -> f64 {
        self.layer_row(layer, row)[col]
    }

    /// Shape `(rows, distinct nodes)` with interfaces counted once.
    pub fn shape(&self) -> (usize, usize) {
        (self.n_times(), self.x_mm.iter().map(Vec::len).sum::<usize>() - 2)
    }

    /// Distinct-node row with interfaces once, taken from the left layer.
    pub fn node_row(&self, row: usize) -> Vec<f64> {
        let mut v = self.layer_row(LayerId::Shell, row).to_vec();
        v.extend_from_slice(&self.layer_row(LayerId::Barrier, row)[1..]);
        v.extend_from_slice(&self.layer_row(LayerId::Liner, row)[1..]);
        v
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    fn from_node_rows(times: Vec<f64>, x_mm: &[f64], segments: &Segments, rows: &[Vec<f64>]) -> Self {
        let [n0, n1, _] = segments.layers;
        let spans = [(0, n0), (n0, n0 + n1), (n0 + n1, x_mm.len() - 1)];
        let x = spans.map(|(a, b)| x_mm[a..=b].to_vec());
        let values = spans.map(|(a, b)| rows.iter().flat_map(|r| r[a..=b].iter().copied()).collect());
        TemperatureField {
            times,
            x_mm: x,
            values,
            cumulative_influx: None,
        }
    }

    /// Checks that `other` lives on bitwise the same coordinates.
    pub fn check_same_lattice(&self, other: &TemperatureField) -> Result<()> {
        if self.times != other.times || self.x_mm != other.x_mm {
            return Err(Error::Config("temperature fields are on different grids".into()));
        }
        Ok(())
    }

    /// CSV with columns `t,x_mm,layer,<value_name>`; values are multiplied by
    /// `factor` before printing.
    pub fn to_csv(&self, value_name: &str, factor: f64) -> String {
        let mut s = format!("t,x_mm,layer,{value_name}\n");
        for (row, t) in self.times.iter().enumerate() {
            for layer in LayerId::ALL {
                for (x, v) in self.x_mm[layer.index()].iter().zip(self.layer_row(layer, row)) {
                    let _ = writeln!(s, "{t},{x},{},{:e}", layer.name(), v * factor);
                }
            }
        }
        s
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let dims = self.x_mm.iter().map(|x| x.len().to_string()).collect::<Vec<_>>().join(" ");
        write!(
            w,
            "thermopinn-field 1\ntimes {}\nlayers {dims}\ninflux {}\ndata\n",
            self.times.len(),
            if self.cumulative_influx.is_some() { "yes" } else { "no" }
        )?;
        let mut put = |vals: &[f64]| -> std::io::Result<()> {
            for v in vals {
                w.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        put(&self.times)?;
        for x in &self.x_mm {
            put(x)?;
        }
        for v in &self.values {
            put(v)?;
        }
        if let Some(q) = &self.cumulative_influx {
            put(q)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R, origin: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Format {
            path: origin.to_path_buf(),
            reason,
        };
        let mut r = BufReader::new(r);
        let mut header = Vec::new();
        for _ in 0..5 {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(fail("truncated header".into()));
            }
            header.push(line.trim_end().to_string());
        }
        if header[0] != "thermopinn-field 1" || header[4] != "data" {
            return Err(fail("not a thermopinn field file".into()));
        }
        let field = |line: &str, key: &str| -> Result<Vec<usize>> {
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| fail(format!("expected `{key}` in header, got `{line}`")))?;
            rest.split_whitespace()
                .map(|v| v.parse().map_err(|_| fail(format!("bad number in `{line}`"))))
                .collect()
        };
        let nt = field(&header[1], "times ")?;
        let dims = field(&header[2], "layers ")?;
        if nt.len() != 1 || dims.len() != 3 {
            return Err(fail("malformed dimensions".into()));
        }
        let influx = match header[3].as_str() {
            "influx yes" => true,
            "influx no" => false,
            other => return Err(fail(format!("bad influx line `{other}`"))),
        };
        let nt = nt[0];
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf).map_err(|_| fail("truncated data".into()))?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let times = take(nt)?;
        let x_mm = [take(dims[0])?, take(dims[1])?, take(dims[2])?];
        let values = [take(nt * dims[0])?, take(nt * dims[1])?, take(nt * dims[2])?];
        let cumulative_influx = if influx { Some(take(nt)?) } else { None };
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(fail(format!("{} trailing bytes", rest.len())));
        }
        Ok(TemperatureField {
            times,
            x_mm,
            values,
            cumulative_influx,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(std::fs::File::open(path)?, path)
    }
}

/// Receives every solver state: step index, time and node temperatures.
pub type StepObserver<'a> = &'a mut dyn FnMut(usize, f64, &[f64]) -> Result<()>;

/// Integrates the heat equation from the uniform initial state and records
/// the field on the collocation times by exact index striding.
pub fn solve_fdm(env: &EnvironmentConfig, grid: &FdmGrid, mut observer: Option<StepObserver<'_>>) -> Result<TemperatureField> {
    if grid.horizon != env.horizon {
        return Err(Error::Config(format!(
            "FDM grid horizon {} differs from configuration horizon {}",
            grid.horizon, env.horizon
        )));
    }
    let stride = grid.record_stride().ok_or_else(|| {
        Error::Config(format!(
            "{} time steps are not a multiple of {} time segments",
            grid.n_steps, grid.segments.time
        ))
    })?;
    let times = uniform_nodes(0.0, env.horizon, grid.segments.time);
    let n = grid.n_nodes();
    let g = grid.conductances(env);
    let rate: Vec<f64> = grid.capacities(env).iter().map(|c| grid.dt / c).collect();
    let (h_g, h_air, t_gas, t_air) = (env.h_g, env.h_air, env.tg, env.t0);
    let net_influx = |temp: &[f64]| h_g * (t_gas - temp[0]) - h_air * (temp[n - 1] - t_air);

    let mut temp = vec![env.t0; n];
    let mut flux = vec![0.0; n - 1];
    let mut rows = Vec::with_capacity(times.len());
    let mut influx_rows = Vec::with_capacity(times.len());
    let mut influx = 0.0;
    rows.push(temp.clone());
    influx_rows.push(0.0);
    if let Some(obs) = observer.as_mut() {
        obs(0, 0.0, &temp)?;
    }
    let mut q_prev = net_influx(&temp);
    for step in 1..=grid.n_steps {
        for s in 0..n - 1 {
            flux[s] = g[s] * (temp[s] - temp[s + 1]);
        }
        let q_left = h_g * (t_gas - temp[0]);
        let q_right = h_air * (temp[n - 1] - t_air);
        temp[0] += rate[0] * (q_left - flux[0]);
        for i in 1..n - 1 {
            temp[i] += rate[i] * (flux[i - 1] - flux[i]);
        }
        temp[n - 1] += rate[n - 1] * (flux[n - 2] - q_right);

        let q = net_influx(&temp);
        influx += 0.5 * grid.dt * (q_prev + q);
        q_prev = q;
        if let Some(obs) = observer.as_mut() {
            obs(step, step as f64 * grid.dt, &temp)?;
        }
        if step % stride == 0 {
            if temp.iter().any(|v| !v.is_finite()) {
                return Err(Error::Stability(format!("non-finite temperature at step {step}")));
            }
            rows.push(temp.clone());
            influx_rows.push(influx);
        }
    }
    let mut field = TemperatureField::from_node_rows(times, &grid.x_mm, &grid.segments, &rows);
    field.cumulative_influx = Some(influx_rows);
    Ok(field)
}

/// Steady one-dimensional conduction through the film and layer resistances.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyProfile {
    /// Heat flux through the fabric, W/m².
    pub q: f64,
    /// Temperatures at `[0, L_shl, L_msr, L_fab]`, K.
    pub node_temps: [f64; 4],
    /// Layer boundaries, m.
    pub boundaries: [f64; 4],
    pub conductivity: [f64; 3],
}

pub fn steady_state_profile(env: &EnvironmentConfig) -> SteadyProfile {
    let resistance: f64 = 1.0 / env.h_g + env.layers.iter().map(|l| l.thickness / l.conductivity).sum::<f64>() + 1.0 / env.h_air;
    let q = (env.tg - env.t0) / resistance;
    let mut node_temps = [0.0; 4];
    node_temps[0] = env.tg - q / env.h_g;
    for l in 0..3 {
        node_temps[l + 1] = node_temps[l] - q * env.layers[l].thickness / env.layers[l].conductivity;
    }
    SteadyProfile {
        q,
        node_temps,
        boundaries: env.boundaries(),
        conductivity: env.layers.map(|l| l.conductivity),
    }
}

impl SteadyProfile {
    /// Temperature at depth `x_m` inside `layer`.
    pub fn temperature(&self, layer: LayerId, x_m: f64) -> f64 {
        let i = layer.index();
        self.node_temps[i] - self.q * (x_m - self.boundaries[i]) / self.conductivity[i]
    }
}

/// Mismatch between the change of stored energy and the accumulated net
/// boundary influx, relative to the influx. Returns 0 when both vanish.
///
/// Stored energy uses the lumped capacities of the node layout. The influx
/// is the solver's accumulated value when present, else a trapezoidal
/// integral over the stored rows.
pub fn energy_balance(field: &TemperatureField, env: &EnvironmentConfig) -> Result<f64> {
    let last = field.n_times().checked_sub(1).ok_or(Error::EmptyBatch)?;
    let stored = |row: usize| -> f64 {
        LayerId::ALL
            .iter()
            .map(|&l| {
                let x = &field.x_mm[l.index()];
                let v = field.layer_row(l, row);
                let c = env.layer(l).apparent_heat_capacity();
                x.windows(2)
                    .zip(v.windows(2))
                    .map(|(xw, vw)| c * (xw[1] - xw[0]) * 1e-3 * 0.5 * (vw[0] + vw[1]))
                    .sum::<f64>()
            })
            .sum()
    };
    let influx = match &field.cumulative_influx {
        Some(q) => q[last] - q[0],
        None => {
            let q = |row: usize| {
                let left = field.layer_row(LayerId::Shell, row)[0];
                let right = *field.layer_row(LayerId::Liner, row).last().unwrap();
                env.h_g * (env.tg - left) - env.h_air * (right - env.t0)
            };
            (1..=last)
                .map(|r| 0.5 * (field.times[r] - field.times[r - 1]) * (q(r - 1) + q(r)))
                .sum()
        }
    };
    let gained = stored(last) - stored(0);
    let mismatch = (gained - influx).abs();
    if mismatch == 0.0 {
        return Ok(0.0);
    }
    Ok(mismatch / influx.abs())
}

/// Mean squared temperature errors in kK², per layer (interface nodes in
/// both layers) and over every layer node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseReport {
    pub per_layer: [f64; 3],
    pub total: f64,
}

pub fn mse_report(pred: &TemperatureField, truth: &TemperatureField) -> Result<MseReport> {
    pred.check_same_lattice(truth)?;
    let mut per_layer = [0.0; 3];
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((slot, p), t) in per_layer.iter_mut().zip(&pred.values).zip(&truth.values) {
        let s: f64 = p.iter().zip(t).map(|(p, t)| ((p - t) * 1e-3).powi(2)).sum();
        let n = p.len();
        *slot = s / n as f64;
        sum += s;
        count += n;
    }
    Ok(MseReport {
        per_layer,
        total: sum / count as f64,
    })
}

/// `pred − truth` on the shared lattice, kelvin.
pub fn error_field(pred: &TemperatureField, truth: &TemperatureField) -> Result<TemperatureField> {
    pred.check_same_lattice(truth)?;
    Ok(TemperatureField {
        times: pred.times.clone(),
        x_mm: pred.x_mm.clone(),
        values: std::array::from_fn(|l| pred.values[l].iter().zip(&truth.values[l]).map(|(p, t)| p - t).collect()),
        cumulative_influx: None,
    })
}

/// Empty field on the collocation lattice, to be filled by a predictor.
pub fn field_on_grid(grid: &CollocationSet, fill: impl Fn(LayerId, f64, f64) -> f64) -> TemperatureField {
    let values = std::array::from_fn(|l| {
        let layer = LayerId::ALL[l];
        grid.t_nodes
            .iter()
            .flat_map(|&t| grid.x_nodes[l].iter().map(move |&x| (x, t)))
            .map(|(x, t)| fill(layer, x, t))
            .collect()
    });
    TemperatureField {
        times: grid.t_nodes.clone(),
        x_mm: grid.x_nodes.clone(),
        values,
        cumulative_influx: None,
    }
}
