//! Derivative-augmented evaluation of the fixed tanh MLP.
//!
//! Each layer propagates the tuple `(f, ∂f/∂x', ∂f/∂t, ∂²f/∂x'²)` in closed
//! form, so the network value and the input derivatives needed by the heat
//! residuals come out of one forward sweep. Parameter gradients of a loss
//! built from any of those four channels are obtained by reverse accumulation
//! through the same recurrences.
//!
//! Two evaluation paths exist: [`forward_augmented`] for single points, and
//! [`BlockTape`], which processes up to [`LANES`] points at a time in
//! structure-of-arrays layout and is what training uses.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::network::{NetworkParams, ParamGradient, HIDDEN_LAYERS, WIDTH};
use crate::scalar::Scalar;

/// Network output and its input derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualState<T> {
    pub value: T,
    /// ∂/∂x' per scaled length unit.
    pub d_dx: T,
    /// ∂/∂t per second.
    pub d_dt: T,
    /// ∂²/∂x'².
    pub d2_dx2: T,
}

impl<T: Scalar> DualState<T> {
    pub fn zero() -> Self {
        DualState {
            value: T::zero(),
            d_dx: T::zero(),
            d_dt: T::zero(),
            d2_dx2: T::zero(),
        }
    }

    /// The four states with a single unit entry.
    pub fn unit_basis() -> [Self; 4] {
        let (o, z) = (T::one(), T::zero());
        [
            DualState { value: o, d_dx: z, d_dt: z, d2_dx2: z },
            DualState { value: z, d_dx: o, d_dt: z, d2_dx2: z },
            DualState { value: z, d_dx: z, d_dt: o, d2_dx2: z },
            DualState { value: z, d_dx: z, d_dt: z, d2_dx2: o },
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d_dx.is_finite() && self.d_dt.is_finite() && self.d2_dx2.is_finite()
    }
}

/// Residual that is affine in one network's [`DualState`]:
/// `offset + value·f + d_dx·f_x + d_dt·f_t + d2_dx2·f_xx`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AffineResidual<T> {
    pub value: T,
    pub d_dx: T,
    pub d_dt: T,
    pub d2_dx2: T,
    pub offset: T,
}

impl<T: Scalar> AffineResidual<T> {
    pub fn zero() -> Self {
        AffineResidual {
            value: T::zero(),
            d_dx: T::zero(),
            d_dt: T::zero(),
            d2_dx2: T::zero(),
            offset: T::zero(),
        }
    }

    #[inline]
    pub fn apply(&self, d: &DualState<T>) -> T {
        self.offset + self.value * d.value + self.d_dx * d.d_dx + self.d_dt * d.d_dt + self.d2_dx2 * d.d2_dx2
    }

    /// Coefficients on the four channels, in [`DualState`] field order.
    #[inline]
    pub fn channels(&self) -> [T; 4] {
        [self.value, self.d_dx, self.d_dt, self.d2_dx2]
    }
}

/// Evaluates the network at `(x_scaled, t)` along with its input derivatives.
pub fn forward_augmented<T: Scalar>(params: &NetworkParams<T>, x_scaled: T, t: T) -> Result<DualState<T>> {
    if !x_scaled.is_finite() {
        return Err(Error::NonFinite { tensor: "input x'".into() });
    }
    if !t.is_finite() {
        return Err(Error::NonFinite { tensor: "input t".into() });
    }
    params.check_finite("params")?;
    Ok(forward_point(params, x_scaled, t))
}

/// Unchecked single-point forward pass.
pub(crate) fn forward_point<T: Scalar>(params: &NetworkParams<T>, x: T, t: T) -> DualState<T> {
    let two = T::lit(2.0);
    let mut a = [T::zero(); WIDTH];
    let mut ax = [T::zero(); WIDTH];
    let mut at = [T::zero(); WIDTH];
    let mut axx = [T::zero(); WIDTH];
    let activate = |z: T, zx: T, zt: T, zxx: T| {
        let mut v = [z];
        T::tanh_block(&mut v);
        let v = v[0];
        let s = T::one() - v * v;
        let vx = s * zx;
        (v, vx, s * zt, s * zxx - two * v * vx * zx)
    };
    for j in 0..WIDTH {
        let w = params.w_in[j];
        let z = w[0] * x + w[1] * t + params.b_in[j];
        (a[j], ax[j], at[j], axx[j]) = activate(z, w[0], w[1], T::zero());
    }
    for l in 0..HIDDEN_LAYERS - 1 {
        let (mut na, mut nax, mut nat, mut naxx) = ([T::zero(); WIDTH], [T::zero(); WIDTH], [T::zero(); WIDTH], [T::zero(); WIDTH]);
        for j in 0..WIDTH {
            let row = &params.w_hidden[l][j];
            let (mut z, mut zx, mut zt, mut zxx) = (params.b_hidden[l][j], T::zero(), T::zero(), T::zero());
            for i in 0..WIDTH {
                z += row[i] * a[i];
                zx += row[i] * ax[i];
                zt += row[i] * at[i];
                zxx += row[i] * axx[i];
            }
            (na[j], nax[j], nat[j], naxx[j]) = activate(z, zx, zt, zxx);
        }
        (a, ax, at, axx) = (na, nax, nat, naxx);
    }
    let mut out = DualState {
        value: params.b_out,
        ..DualState::zero()
    };
    for i in 0..WIDTH {
        let w = params.w_out[i];
        out.value += w * a[i];
        out.d_dx += w * ax[i];
        out.d_dt += w * at[i];
        out.d2_dx2 += w * axx[i];
    }
    out
}

/// Number of points processed together by [`BlockTape`].
pub const LANES: usize = 32;

const _: () = assert!(LANES == 32, "lane_sum is written for 32 lanes");

type Lane<T> = [T; LANES];

#[derive(Clone)]
struct LayerTrace<T> {
    a: [Lane<T>; WIDTH],
    ax: [Lane<T>; WIDTH],
    at: [Lane<T>; WIDTH],
    axx: [Lane<T>; WIDTH],
    zx: [Lane<T>; WIDTH],
    zxx: [Lane<T>; WIDTH],
}

impl<T: Scalar> LayerTrace<T> {
    fn zeros() -> Self {
        let z = [[T::zero(); LANES]; WIDTH];
        LayerTrace {
            a: z,
            ax: z,
            at: z,
            axx: z,
            zx: z,
            zxx: z,
        }
    }
}

/// Pairwise sum of the lanes: halves are added elementwise until one value
/// remains, so the order is fixed and independent of the data.
#[inline(always)]
fn lane_sum<T: Scalar>(v: &Lane<T>) -> T {
    #[inline(always)]
    fn fold<T: Scalar, const N: usize, const H: usize>(v: &[T; N]) -> [T; H] {
        std::array::from_fn(|k| v[k] + v[k + H])
    }
    let h: [T; 16] = fold(v);
    let h: [T; 8] = fold(&h);
    let h: [T; 4] = fold(&h);
    let h: [T; 2] = fold(&h);
    h[0] + h[1]
}

/// `out[j] = Σ_i w[j][i] · v[i]`, lane by lane.
#[inline(always)]
fn matvec<T: Scalar>(w: &[[T; WIDTH]; WIDTH], v: &[Lane<T>; WIDTH], out: &mut [Lane<T>; WIDTH]) {
    for j in 0..WIDTH {
        let mut acc = [T::zero(); LANES];
        for i in 0..WIDTH {
            let wji = w[j][i];
            for p in 0..LANES {
                acc[p] = wji.mul_add(v[i][p], acc[p]);
            }
        }
        out[j] = acc;
    }
}

/// `out[i] = Σ_j w[j][i] · v[j]`, lane by lane.
#[inline(always)]
fn matvec_transposed<T: Scalar>(w: &[[T; WIDTH]; WIDTH], v: &[Lane<T>; WIDTH], out: &mut [Lane<T>; WIDTH]) {
    for i in 0..WIDTH {
        let mut acc = [T::zero(); LANES];
        for j in 0..WIDTH {
            let wji = w[j][i];
            for p in 0..LANES {
                acc[p] = wji.mul_add(v[j][p], acc[p]);
            }
        }
        out[i] = acc;
    }
}

/// Forward trace of one network over a block of up to [`LANES`] points,
/// retained for reverse accumulation.
///
/// Unused lanes are evaluated at `(0, 0)`; callers must give them zero seeds.
#[derive(Clone)]
pub struct BlockTape<T> {
    len: usize,
    x: Lane<T>,
    t: Lane<T>,
    layers: [LayerTrace<T>; HIDDEN_LAYERS],
    out: [Lane<T>; 4],
    /// Pre-activation scratch for the value and time channels.
    z: [Lane<T>; WIDTH],
    zt: [Lane<T>; WIDTH],
    /// Two adjoint buffers used alternately from layer to layer.
    adj: [[[Lane<T>; WIDTH]; 4]; 2],
}

impl<T: Scalar> BlockTape<T> {
    pub fn new() -> Box<Self> {
        Box::new(BlockTape {
            len: 0,
            x: [T::zero(); LANES],
            t: [T::zero(); LANES],
            layers: std::array::from_fn(|_| LayerTrace::zeros()),
            out: [[T::zero(); LANES]; 4],
            z: [[T::zero(); LANES]; WIDTH],
            zt: [[T::zero(); LANES]; WIDTH],
            adj: [[[[T::zero(); LANES]; WIDTH]; 4]; 2],
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Output channels `[value, d_dx, d_dt, d2_dx2]`, one lane per point.
    pub fn outputs(&self) -> &[[T; LANES]; 4] {
        &self.out
    }

    pub fn state(&self, p: usize) -> DualState<T> {
        DualState {
            value: self.out[0][p],
            d_dx: self.out[1][p],
            d_dt: self.out[2][p],
            d2_dx2: self.out[3][p],
        }
    }

    /// Runs the augmented forward pass on `xs.len() <= LANES` points.
    pub fn forward(&mut self, params: &NetworkParams<T>, xs: &[T], ts: &[T]) {
        assert_eq!(xs.len(), ts.len());
        assert!(xs.len() <= LANES);
        self.len = xs.len();
        self.x = [T::zero(); LANES];
        self.t = [T::zero(); LANES];
        self.x[..xs.len()].copy_from_slice(xs);
        self.t[..ts.len()].copy_from_slice(ts);

        let two = T::lit(2.0);
        let first = &mut self.layers[0];
        for j in 0..WIDTH {
            let [wx, wt] = params.w_in[j];
            let b = params.b_in[j];
            let mut act = [T::zero(); LANES];
            for p in 0..LANES {
                act[p] = wx * self.x[p] + wt * self.t[p] + b;
            }
            T::tanh_block(&mut act);
            for p in 0..LANES {
                let a = act[p];
                let s = T::one() - a * a;
                let ax = s * wx;
                first.a[j][p] = a;
                first.ax[j][p] = ax;
                first.at[j][p] = s * wt;
                first.axx[j][p] = -(two * a * ax * wx);
                first.zx[j][p] = wx;
                first.zxx[j][p] = T::zero();
            }
        }

        for l in 1..HIDDEN_LAYERS {
            let (done, rest) = self.layers.split_at_mut(l);
            let prev = &done[l - 1];
            let cur = &mut rest[0];
            let w = &params.w_hidden[l - 1];
            let bias = &params.b_hidden[l - 1];
            let (z, zt) = (&mut self.z, &mut self.zt);
            matvec(w, &prev.a, z);
            matvec(w, &prev.ax, &mut cur.zx);
            matvec(w, &prev.at, zt);
            matvec(w, &prev.axx, &mut cur.zxx);
            for j in 0..WIDTH {
                let mut act = z[j];
                for v in act.iter_mut() {
                    *v += bias[j];
                }
                T::tanh_block(&mut act);
                for p in 0..LANES {
                    let a = act[p];
                    let s = T::one() - a * a;
                    let zx = cur.zx[j][p];
                    let ax = s * zx;
                    cur.a[j][p] = a;
                    cur.ax[j][p] = ax;
                    cur.at[j][p] = s * zt[j][p];
                    cur.axx[j][p] = s * cur.zxx[j][p] - two * a * ax * zx;
                }
            }
        }

        let last = &self.layers[HIDDEN_LAYERS - 1];
        let mut out = [[T::zero(); LANES]; 4];
        out[0] = [params.b_out; LANES];
        for i in 0..WIDTH {
            let w = params.w_out[i];
            for p in 0..LANES {
                out[0][p] += w * last.a[i][p];
                out[1][p] += w * last.ax[i][p];
                out[2][p] += w * last.at[i][p];
                out[3][p] += w * last.axx[i][p];
            }
        }
        self.out = out;
    }

    /// Accumulates into `grad` the parameter gradient of a loss whose
    /// derivatives with respect to the four output channels are `seeds`.
    pub fn backward(&mut self, params: &NetworkParams<T>, seeds: &[[T; LANES]; 4], grad: &mut ParamGradient<T>) {
        let (two, three, four) = (T::lit(2.0), T::lit(3.0), T::lit(4.0));

        let last = &self.layers[HIDDEN_LAYERS - 1];
        let mut cur = 0;
        for i in 0..WIDTH {
            let mut acc = [T::zero(); LANES];
            for p in 0..LANES {
                acc[p] = seeds[0][p] * last.a[i][p]
                    + seeds[1][p] * last.ax[i][p]
                    + seeds[2][p] * last.at[i][p]
                    + seeds[3][p] * last.axx[i][p];
            }
            grad.w_out[i] += lane_sum(&acc);
            let w = params.w_out[i];
            for c in 0..4 {
                for p in 0..LANES {
                    self.adj[cur][c][i][p] = w * seeds[c][p];
                }
            }
        }
        grad.b_out += lane_sum(&seeds[0]);

        for l in (0..HIDDEN_LAYERS).rev() {
            // Adjoints of the pre-activation channels (z, zx, zt, zxx).
            let tr = &self.layers[l];
            let (lo, hi) = self.adj.split_at_mut(1);
            let (adj, next) = if cur == 0 { (&mut lo[0], &mut hi[0]) } else { (&mut hi[0], &mut lo[0]) };
            for j in 0..WIDTH {
                for p in 0..LANES {
                    let a = tr.a[j][p];
                    let s = T::one() - a * a;
                    let ax = tr.ax[j][p];
                    let zx = tr.zx[j][p];
                    let ga = adj[0][j][p];
                    let gx = adj[1][j][p];
                    let gt = adj[2][j][p];
                    let gxx = adj[3][j][p];
                    let d_axx_dz = -(two * a * s * tr.zxx[j][p]) - two * s * (T::one() - three * a * a) * zx * zx;
                    adj[0][j][p] = ga * s - two * a * (gx * ax + gt * tr.at[j][p]) + gxx * d_axx_dz;
                    adj[1][j][p] = gx * s - four * a * ax * gxx;
                    adj[2][j][p] = gt * s;
                    adj[3][j][p] = gxx * s;
                }
            }

            if l == 0 {
                for j in 0..WIDTH {
                    let mut gx_acc = [T::zero(); LANES];
                    let mut gt_acc = [T::zero(); LANES];
                    for p in 0..LANES {
                        gx_acc[p] = adj[0][j][p] * self.x[p] + adj[1][j][p];
                        gt_acc[p] = adj[0][j][p] * self.t[p] + adj[2][j][p];
                    }
                    grad.w_in[j][0] += lane_sum(&gx_acc);
                    grad.w_in[j][1] += lane_sum(&gt_acc);
                    grad.b_in[j] += lane_sum(&adj[0][j]);
                }
                break;
            }

            let prev = &self.layers[l - 1];
            let w = &params.w_hidden[l - 1];
            let gw = &mut grad.w_hidden[l - 1];
            let gb = &mut grad.b_hidden[l - 1];
            let prev_channels = [&prev.a, &prev.ax, &prev.at, &prev.axx];
            for j in 0..WIDTH {
                gb[j] += lane_sum(&adj[0][j]);
                for i in 0..WIDTH {
                    let mut acc = [T::zero(); LANES];
                    for c in 0..4 {
                        let (g, v) = (&adj[c][j], &prev_channels[c][i]);
                        for p in 0..LANES {
                            acc[p] = g[p].mul_add(v[p], acc[p]);
                        }
                    }
                    gw[j][i] += lane_sum(&acc);
                }
            }
            for c in 0..4 {
                matvec_transposed(w, &adj[c], &mut next[c]);
            }
            cur = 1 - cur;
        }
    }
}

/// Mean of `(scale · r)²` over `batch` and its parameter gradient, where `r`
/// is the affine residual of the network's augmented output.
pub fn loss_and_gradient<T: Scalar>(
    params: &NetworkParams<T>,
    batch: &[(T, T)],
    residual: &AffineResidual<T>,
    scale: T,
) -> Result<(T, ParamGradient<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    params.check_finite("params")?;
    let n = T::from_usize(batch.len()).expect("batch size fits scalar");
    let k2 = scale * scale;
    let coeffs = residual.channels();
    let mut grad = NetworkParams::zeros();
    let mut loss = T::zero();
    let mut tape = BlockTape::new();
    let mut xs = Vec::with_capacity(LANES);
    let mut ts = Vec::with_capacity(LANES);
    for (b, chunk) in batch.chunks(LANES).enumerate() {
        xs.clear();
        ts.clear();
        xs.extend(chunk.iter().map(|p| p.0));
        ts.extend(chunk.iter().map(|p| p.1));
        tape.forward(params, &xs, &ts);
        let mut seeds = [[T::zero(); LANES]; 4];
        for p in 0..chunk.len() {
            let r = residual.apply(&tape.state(p));
            if !r.is_finite() {
                return Err(Error::NonFiniteIntermediate { index: b * LANES + p });
            }
            loss += k2 * r * r;
            let g = T::lit(2.0) * k2 * r / n;
            for c in 0..4 {
                seeds[c][p] = g * coeffs[c];
            }
        }
        tape.backward(params, &seeds, &mut grad);
    }
    Ok((loss / n, grad))
}

/// Gradient of the mean squared scaled residual with respect to every
/// network parameter.
pub fn backward_params<T: Scalar>(
    params: &NetworkParams<T>,
    batch: &[(T, T)],
    residual: &AffineResidual<T>,
    scale: T,
) -> Result<ParamGradient<T>> {
    loss_and_gradient(params, batch, residual, scale).map(|(_, g)| g)
}
