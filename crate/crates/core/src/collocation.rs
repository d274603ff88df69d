//! Training grid and its partition into the sub-domains sampled by each
//! residual term.
//!
//! Coordinates are stored in millimetres and seconds. Every layer has uniform
//! nodes including both endpoints; interface abscissae are computed once and
//! shared by both adjacent layers.
//!
//! * `initial`: every node of the layer at `t = 0`;
//! * `outer_left` / `outer_right`: `x' = 0` / `x' = L'_fab` at every time node;
//! * `interface`: each interface abscissa at every time node;
//! * `interior`: the remaining nodes with `t > 0`, interface abscissae
//!   included in both adjacent layers.
//!
//! Boundary and interface sets therefore share their `t = 0` points with
//! `initial`.

use crate::error::{Error, Result};
use crate::physics::{EnvironmentConfig, Interface, LayerId, Partition};

/// Segment counts per layer and along time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segments {
    pub layers: [usize; 3],
    pub time: usize,
}

impl Segments {
    pub const BENCHMARK: Segments = Segments {
        layers: [50, 70, 200],
        time: 300,
    };

    pub fn new(shl: usize, msr: usize, lin: usize, time: usize) -> Self {
        Segments {
            layers: [shl, msr, lin],
            time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.iter().chain([&self.time]).any(|&n| n == 0) {
            return Err(Error::Config(format!("segment counts must be positive, got {self:?}")));
        }
        Ok(())
    }

    /// Distinct spatial nodes (interfaces counted once).
    pub fn spatial_nodes(&self) -> usize {
        self.layers.iter().sum::<usize>() + 1
    }

    pub fn time_nodes(&self) -> usize {
        self.time + 1
    }
}

impl Default for Segments {
    fn default() -> Self {
        Self::BENCHMARK
    }
}

/// `n + 1` uniform nodes on `[lo, hi]`; the last node is `hi` exactly.
pub fn uniform_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = hi - lo;
    (0..=n)
        .map(|i| if i == n { hi } else { lo + span * (i as f64) / (n as f64) })
        .collect()
}

/// Partitioned collocation points, `(x' in mm, t in s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub segments: Segments,
    pub horizon: f64,
    /// Layer boundaries `[0, L'_shl, L'_msr, L'_fab]`, mm.
    pub boundaries: [f64; 4],
    /// Spatial nodes of each layer, both endpoints included.
    pub x_nodes: [Vec<f64>; 3],
    pub t_nodes: Vec<f64>,
    pub interior: [Vec<(f64, f64)>; 3],
    pub initial: [Vec<(f64, f64)>; 3],
    pub outer_left: Vec<(f64, f64)>,
    pub outer_right: Vec<(f64, f64)>,
    /// Shell/barrier then barrier/liner.
    pub interface: [Vec<(f64, f64)>; 2],
}

/// Builds the uniform training grid for `env`.
pub fn build_grid(env: &EnvironmentConfig, segments: Segments) -> Result<CollocationSet> {
    segments.validate()?;
    env.validate()?;
    let boundaries = env.boundaries_mm();
    let x_nodes: [Vec<f64>; 3] =
        std::array::from_fn(|l| uniform_nodes(boundaries[l], boundaries[l + 1], segments.layers[l]));
    let t_nodes = uniform_nodes(0.0, env.horizon, segments.time);
    let later = &t_nodes[1..];

    let interior = std::array::from_fn(|l| {
        let xs = &x_nodes[l];
        let xs = match LayerId::ALL[l] {
            LayerId::Shell => &xs[1..],
            LayerId::Barrier => &xs[..],
            LayerId::Liner => &xs[..xs.len() - 1],
        };
        xs.iter()
            .flat_map(|&x| later.iter().map(move |&t| (x, t)))
            .collect()
    });
    let initial = std::array::from_fn(|l| x_nodes[l].iter().map(|&x| (x, 0.0)).collect());
    let at = |x: f64| t_nodes.iter().map(|&t| (x, t)).collect::<Vec<_>>();
    Ok(CollocationSet {
        segments,
        horizon: env.horizon,
        boundaries,
        outer_left: at(boundaries[0]),
        outer_right: at(boundaries[3]),
        interface: [at(boundaries[1]), at(boundaries[2])],
        x_nodes,
        t_nodes,
        interior,
        initial,
    })
}

impl CollocationSet {
    pub fn partition(&self, p: Partition) -> &[(f64, f64)] {
        match p {
            Partition::Interior(l) => &self.interior[l.index()],
            Partition::Initial(l) => &self.initial[l.index()],
            Partition::OuterLeft => &self.outer_left,
            Partition::OuterRight => &self.outer_right,
            Partition::Interface(Interface::ShellBarrier) => &self.interface[0],
            Partition::Interface(Interface::BarrierLiner) => &self.interface[1],
        }
    }

    /// Residual sample count `N_r` summed over layers.
    pub fn n_interior(&self) -> usize {
        self.interior.iter().map(Vec::len).sum()
    }

    /// Initial-condition sample count `N_0` summed over layers.
    pub fn n_initial(&self) -> usize {
        self.initial.iter().map(Vec::len).sum()
    }

    /// Outer-boundary plus interface sample count `N_b`.
    pub fn n_boundary(&self) -> usize {
        self.outer_left.len() + self.outer_right.len() + self.interface.iter().map(Vec::len).sum::<usize>()
    }

    /// Distinct spatial nodes across the fabric, interfaces once, with the
    /// layer that owns them on the left of each interface.
    pub fn distinct_x_nodes(&self) -> Vec<f64> {
        let mut xs = self.x_nodes[0].clone();
        xs.extend_from_slice(&self.x_nodes[1][1..]);
        xs.extend_from_slice(&self.x_nodes[2][1..]);
        xs
    }

    /// Evenly thinned copy keeping every `stride`-th point of each partition.
    pub fn thinned(&self, stride: usize) -> CollocationSet {
        let thin = |v: &Vec<(f64, f64)>| v.iter().step_by(stride.max(1)).copied().collect::<Vec<_>>();
        CollocationSet {
            interior: std::array::from_fn(|l| thin(&self.interior[l])),
            initial: std::array::from_fn(|l| thin(&self.initial[l])),
            outer_left: thin(&self.outer_left),
            outer_right: thin(&self.outer_right),
            interface: [thin(&self.interface[0]), thin(&self.interface[1])],
            ..self.clone()
        }
    }

    /// Whether `(x, t)` lies in the closed span of `layer` and the horizon.
    pub fn contains(&self, layer: LayerId, x: f64, t: f64) -> bool {
        let i = layer.index();
        x >= self.boundaries[i] && x <= self.boundaries[i + 1] && t >= 0.0 && t <= self.horizon
    }
}
