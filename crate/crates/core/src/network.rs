//! Parameter containers for the fixed tanh MLP and the per-layer model built
//! from it, Kaiming initialization and the checkpoint file format.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::forward_augmented;
use crate::error::{Error, Result};
use crate::physics::{EnvironmentConfig, LayerId, ScaleConfig};
use crate::scalar::Scalar;

/// Network inputs: `(x', t)`.
pub const INPUT_DIM: usize = 2;
/// Units per hidden layer.
pub const WIDTH: usize = 10;
/// Number of tanh hidden layers.
pub const HIDDEN_LAYERS: usize = 4;
/// Number of affine layers (hidden layers plus the linear output).
pub const AFFINE_LAYERS: usize = HIDDEN_LAYERS + 1;
/// Scalar parameter count of one network.
pub const PARAM_COUNT: usize =
    WIDTH * INPUT_DIM + WIDTH + (HIDDEN_LAYERS - 1) * (WIDTH * WIDTH + WIDTH) + WIDTH + 1;

/// Weights and biases of one `2 → 10 → 10 → 10 → 10 → 1` tanh MLP.
///
/// Weight rows are indexed by the receiving unit: `w_hidden[l][j][i]` connects
/// unit `i` of hidden layer `l` to unit `j` of hidden layer `l + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    pub w_in: [[T; INPUT_DIM]; WIDTH],
    pub b_in: [T; WIDTH],
    pub w_hidden: [[[T; WIDTH]; WIDTH]; HIDDEN_LAYERS - 1],
    pub b_hidden: [[T; WIDTH]; HIDDEN_LAYERS - 1],
    pub w_out: [T; WIDTH],
    pub b_out: T,
}

impl<T: Scalar> NetworkParams<T> {
    pub fn zeros() -> Self {
        let z = T::zero();
        NetworkParams {
            w_in: [[z; INPUT_DIM]; WIDTH],
            b_in: [z; WIDTH],
            w_hidden: [[[z; WIDTH]; WIDTH]; HIDDEN_LAYERS - 1],
            b_hidden: [[z; WIDTH]; HIDDEN_LAYERS - 1],
            w_out: [z; WIDTH],
            b_out: z,
        }
    }

    /// Kaiming-normal weights (`std = sqrt(2 / fan_in)`) and zero biases.
    pub fn kaiming<R: rand::Rng>(rng: &mut R) -> Self {
        let mut p = Self::zeros();
        let draw = |fan_in: usize, rng: &mut R| -> T {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z * (2.0 / fan_in as f64).sqrt())
        };
        for row in p.w_in.iter_mut() {
            for w in row.iter_mut() {
                *w = draw(INPUT_DIM, rng);
            }
        }
        for layer in p.w_hidden.iter_mut() {
            for row in layer.iter_mut() {
                for w in row.iter_mut() {
                    *w = draw(WIDTH, rng);
                }
            }
        }
        for w in p.w_out.iter_mut() {
            *w = draw(WIDTH, rng);
        }
        p
    }

    /// All parameters in declared field order.
    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        self.w_in
            .iter()
            .flatten()
            .chain(self.b_in.iter())
            .chain(self.w_hidden.iter().flatten().flatten())
            .chain(self.b_hidden.iter().flatten())
            .chain(self.w_out.iter())
            .chain(std::iter::once(&self.b_out))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.w_in
            .iter_mut()
            .flatten()
            .chain(self.b_in.iter_mut())
            .chain(self.w_hidden.iter_mut().flatten().flatten())
            .chain(self.b_hidden.iter_mut().flatten())
            .chain(self.w_out.iter_mut())
            .chain(std::iter::once(&mut self.b_out))
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.iter().copied().collect()
    }

    pub fn from_flat(values: &[T]) -> Result<Self> {
        if values.len() != PARAM_COUNT {
            return Err(Error::Config(format!(
                "expected {PARAM_COUNT} parameters, got {}",
                values.len()
            )));
        }
        let mut p = Self::zeros();
        for (dst, src) in p.iter_mut().zip(values) {
            *dst = *src;
        }
        Ok(p)
    }

    /// `self += other * k`, elementwise.
    pub fn add_scaled(&mut self, other: &Self, k: T) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += *b * k;
        }
    }

    /// Weights and biases of affine layer `layer` (0 = input layer, 4 = output).
    pub fn layer_values(&self, layer: usize) -> Vec<T> {
        match layer {
            0 => self.w_in.iter().flatten().chain(self.b_in.iter()).copied().collect(),
            l if l < AFFINE_LAYERS - 1 => self.w_hidden[l - 1]
                .iter()
                .flatten()
                .chain(self.b_hidden[l - 1].iter())
                .copied()
                .collect(),
            l if l == AFFINE_LAYERS - 1 => {
                self.w_out.iter().chain(std::iter::once(&self.b_out)).copied().collect()
            }
            _ => panic!("layer index {layer} out of range"),
        }
    }

    /// Fails with the name of the first tensor holding a non-finite entry.
    pub fn check_finite(&self, owner: &str) -> Result<()> {
        fn bad<'a, T: Scalar>(mut vals: impl Iterator<Item = &'a T>) -> bool {
            vals.any(|v| !v.is_finite())
        }
        let fail = |tensor: String| Err(Error::NonFinite { tensor });
        if bad(self.w_in.iter().flatten()) {
            return fail(format!("{owner}.w_in"));
        }
        if bad(self.b_in.iter()) {
            return fail(format!("{owner}.b_in"));
        }
        for l in 0..HIDDEN_LAYERS - 1 {
            if bad(self.w_hidden[l].iter().flatten()) {
                return fail(format!("{owner}.w_hidden[{l}]"));
            }
            if bad(self.b_hidden[l].iter()) {
                return fail(format!("{owner}.b_hidden[{l}]"));
            }
        }
        if bad(self.w_out.iter()) {
            return fail(format!("{owner}.w_out"));
        }
        if !self.b_out.is_finite() {
            return fail(format!("{owner}.b_out"));
        }
        Ok(())
    }
}

/// Gradient of a scalar loss with respect to one network's parameters.
pub type ParamGradient<T> = NetworkParams<T>;

/// How the temperature field is split across networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// One independent network per fabric layer.
    Parallel,
    /// A single network spanning the whole fabric.
    Single,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Parallel => "parallel",
            Architecture::Single => "single",
        }
    }

    pub fn network_count(self) -> usize {
        match self {
            Architecture::Parallel => 3,
            Architecture::Single => 1,
        }
    }
}

/// Trainable temperature model plus the metadata needed to query it.
///
/// With [`Architecture::Parallel`] the networks are the shell, barrier and
/// liner sub-networks, in that order, with no shared parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnModel<T> {
    pub architecture: Architecture,
    pub nets: Vec<NetworkParams<T>>,
    pub scale: ScaleConfig,
    /// Layer boundaries `[0, L_shl, L_msr, L_fab]` in network length units.
    pub boundaries: [f64; 4],
    pub seed: Option<u64>,
}

/// Three-network model of the parallel solving framework.
pub type ParallelModel<T> = PinnModel<T>;

/// Layer boundaries of `env` in the network units of `scale`, mapped from the
/// millimetre grid so that grid points and spans agree bit for bit.
pub fn scaled_boundaries(env: &EnvironmentConfig, scale: &ScaleConfig) -> [f64; 4] {
    env.boundaries_mm().map(|x| scale.from_millimetres(x))
}

/// Kaiming-initialized three-network model; each sub-network draws from its
/// own ChaCha stream of the seeded generator.
pub fn init_kaiming<T: Scalar>(seed: u64, env: &EnvironmentConfig, scale: ScaleConfig) -> PinnModel<T> {
    PinnModel::init(Architecture::Parallel, seed, scaled_boundaries(env, &scale), scale)
}

impl<T: Scalar> PinnModel<T> {
    pub fn init(architecture: Architecture, seed: u64, boundaries: [f64; 4], scale: ScaleConfig) -> Self {
        let nets = (0..architecture.network_count())
            .map(|stream| {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                rng.set_stream(stream as u64);
                NetworkParams::kaiming(&mut rng)
            })
            .collect();
        PinnModel {
            architecture,
            nets,
            scale,
            boundaries,
            seed: Some(seed),
        }
    }

    pub fn zeros(architecture: Architecture, boundaries: [f64; 4], scale: ScaleConfig) -> Self {
        PinnModel {
            architecture,
            nets: vec![NetworkParams::zeros(); architecture.network_count()],
            scale,
            boundaries,
            seed: None,
        }
    }

    /// Index into `nets` of the network that represents `layer`.
    pub fn slot(&self, layer: LayerId) -> usize {
        match self.architecture {
            Architecture::Parallel => layer.index(),
            Architecture::Single => 0,
        }
    }

    pub fn network(&self, layer: LayerId) -> &NetworkParams<T> {
        &self.nets[self.slot(layer)]
    }

    pub fn network_mut(&mut self, layer: LayerId) -> &mut NetworkParams<T> {
        let s = self.slot(layer);
        &mut self.nets[s]
    }

    pub fn shl(&self) -> &NetworkParams<T> {
        self.network(LayerId::Shell)
    }

    pub fn msr(&self) -> &NetworkParams<T> {
        self.network(LayerId::Barrier)
    }

    pub fn lin(&self) -> &NetworkParams<T> {
        self.network(LayerId::Liner)
    }

    /// Name used in diagnostics and CSV output for network slot `slot`.
    pub fn slot_name(&self, slot: usize) -> &'static str {
        match self.architecture {
            Architecture::Parallel => LayerId::ALL[slot].name(),
            Architecture::Single => "all",
        }
    }

    pub fn span(&self, layer: LayerId) -> (f64, f64) {
        let i = layer.index();
        (self.boundaries[i], self.boundaries[i + 1])
    }

    /// Predicted temperature in network units (kK under forward balance).
    pub fn predict_temperature(&self, layer: LayerId, x_scaled: T, t: T) -> Result<T> {
        let (lo, hi) = self.span(layer);
        let x = x_scaled.as_f64();
        if !(x >= lo && x <= hi) {
            return Err(Error::Domain {
                layer: layer.name(),
                x,
                lo,
                hi,
            });
        }
        Ok(forward_augmented(self.network(layer), x_scaled, t)?.value)
    }

    pub fn check_finite(&self) -> Result<()> {
        for (slot, net) in self.nets.iter().enumerate() {
            net.check_finite(self.slot_name(slot))?;
        }
        Ok(())
    }

    /// Writes the checkpoint format: a text header followed by the parameters
    /// of every network as little-endian `f64` in declared field order.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "thermopinn-checkpoint 1")?;
        writeln!(w, "architecture {}", self.architecture.name())?;
        writeln!(w, "networks {}", self.nets.len())?;
        match self.seed {
            Some(s) => writeln!(w, "seed {s}")?,
            None => writeln!(w, "seed none")?,
        }
        writeln!(w, "length_unit {:?}", self.scale.length_unit)?;
        writeln!(w, "temperature_unit {:?}", self.scale.temperature_unit)?;
        writeln!(
            w,
            "boundaries {:?} {:?} {:?} {:?}",
            self.boundaries[0], self.boundaries[1], self.boundaries[2], self.boundaries[3]
        )?;
        writeln!(
            w,
            "shapes w_in={WIDTH}x{INPUT_DIM} b_in={WIDTH} w_hidden={}x{WIDTH}x{WIDTH} b_hidden={}x{WIDTH} w_out=1x{WIDTH} b_out=1",
            HIDDEN_LAYERS - 1,
            HIDDEN_LAYERS - 1
        )?;
        writeln!(w, "params_per_network {PARAM_COUNT}")?;
        writeln!(w, "data")?;
        for net in &self.nets {
            for v in net.iter() {
                w.write_all(&v.as_f64().to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: R, origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: origin.to_path_buf(),
            reason,
        };
        let mut reader = BufReader::new(r);
        let mut header = Vec::new();
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Err(bad("missing data marker".into()));
            }
            let line = line.trim_end().to_string();
            if line == "data" {
                break;
            }
            header.push(line);
        }
        if header.first().map(String::as_str) != Some("thermopinn-checkpoint 1") {
            return Err(bad("not a version-1 checkpoint".into()));
        }
        let field = |key: &str| -> Result<&str> {
            header
                .iter()
                .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix(' ')))
                .ok_or_else(|| bad(format!("missing header field `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            field(key)?
                .parse::<f64>()
                .map_err(|e| bad(format!("field `{key}`: {e}")))
        };
        let architecture = match field("architecture")? {
            "parallel" => Architecture::Parallel,
            "single" => Architecture::Single,
            other => return Err(bad(format!("unknown architecture `{other}`"))),
        };
        let count: usize = field("networks")?
            .parse()
            .map_err(|e| bad(format!("field `networks`: {e}")))?;
        if count != architecture.network_count() {
            return Err(bad(format!("{count} networks for {} architecture", architecture.name())));
        }
        let seed = match field("seed")? {
            "none" => None,
            s => Some(s.parse().map_err(|e| bad(format!("field `seed`: {e}")))?),
        };
        let per: usize = field("params_per_network")?
            .parse()
            .map_err(|e| bad(format!("field `params_per_network`: {e}")))?;
        if per != PARAM_COUNT {
            return Err(bad(format!("{per} parameters per network, expected {PARAM_COUNT}")));
        }
        let b: Vec<f64> = field("boundaries")?
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("field `boundaries`: {e}")))?;
        let boundaries: [f64; 4] = b
            .try_into()
            .map_err(|_| bad("`boundaries` needs 4 values".into()))?;
        let scale = ScaleConfig {
            length_unit: num("length_unit")?,
            temperature_unit: num("temperature_unit")?,
        };
        let mut nets = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            let mut flat = Vec::with_capacity(PARAM_COUNT);
            for _ in 0..PARAM_COUNT {
                reader
                    .read_exact(&mut buf)
                    .map_err(|_| bad("truncated parameter data".into()))?;
                flat.push(T::lit(f64::from_le_bytes(buf)));
            }
            nets.push(NetworkParams::from_flat(&flat)?);
        }
        if reader.read(&mut buf)? != 0 {
            return Err(bad("trailing bytes after parameter data".into()));
        }
        let model = PinnModel {
            architecture,
            nets,
            scale,
            boundaries,
            seed,
        };
        model.check_finite()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_checkpoint(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_checkpoint(f, path)
    }
}
