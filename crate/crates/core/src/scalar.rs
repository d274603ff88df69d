//! Floating-point abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Bundle of bounds required of the scalar type used by the networks, the
/// residual evaluators and the finite-difference reference solver.
///
/// Implemented for `f32` and `f64`. The solver defaults to `f64` (see the
/// aliases at the crate root); the loss statistics span many orders of
/// magnitude, so `f32` is only suitable for inference and for
/// cross-precision checks.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline(always)]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting and serialization.
    #[inline(always)]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Elementwise hyperbolic tangent of a block, in place.
    #[inline(always)]
    fn tanh_block<const N: usize>(z: &mut [Self; N]) {
        for v in z.iter_mut() {
            *v = v.tanh();
        }
    }
}

impl Scalar for f32 {}

impl Scalar for f64 {
    /// Branch-free so that the loop vectorizes; within a few ulp of
    /// `f64::tanh` over the whole real line.
    #[inline(always)]
    fn tanh_block<const N: usize>(z: &mut [f64; N]) {
        for v in z.iter_mut() {
            *v = tanh_f64(*v);
        }
    }
}

/// `exp(y) - 1` for `y` in `[-60, 0]`: Cody-Waite reduction `y = k ln 2 + r`
/// and a degree-13 Taylor polynomial for `expm1(r)` on `|r| <= ln(2)/2`.
#[inline(always)]
fn expm1_nonpositive(y: f64) -> f64 {
    const SHIFTER: f64 = 6755399441055744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let kf = y * std::f64::consts::LOG2_E + SHIFTER;
    let k_bits = kf.to_bits() as i64 - SHIFTER.to_bits() as i64;
    let k = kf - SHIFTER;
    let r = (y - k * LN2_HI) - k * LN2_LO;
    let mut q = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
    ] {
        q = q * r + c;
    }
    // expm1(r) = r q; then exp(y) - 1 = 2^k expm1(r) + (2^k - 1).
    let two_k = f64::from_bits(((k_bits + 1023) << 52) as u64);
    two_k * (r * q) + (two_k - 1.0)
}

#[inline(always)]
fn tanh_f64(z: f64) -> f64 {
    let x = z.abs().min(20.0);
    let m = expm1_nonpositive(-2.0 * x);
    let t = -m / (2.0 + m);
    if z.is_nan() {
        z
    } else {
        t.copysign(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        assert_eq!(<f64 as Scalar>::lit(0.31015), 0.31015);
        assert_eq!(<f32 as Scalar>::lit(2.0), 2.0f32);
        assert_eq!(<f32 as Scalar>::lit(0.5).as_f64(), 0.5);
    }

    #[test]
    fn block_tanh_matches_libm() {
        let mut worst = 0.0f64;
        let mut z = [0.0f64; 64];
        for step in 0..20_000 {
            for (i, v) in z.iter_mut().enumerate() {
                *v = (step as f64 * 64.0 + i as f64) * 1e-5 - 6.4;
            }
            let want = z.map(f64::tanh);
            f64::tanh_block(&mut z);
            for (a, b) in z.iter().zip(want) {
                worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
            }
        }
        assert!(worst < 4.0 * f64::EPSILON, "worst relative error {worst:e}");
        let mut edge = [0.0, -0.0, 1e-300, -1e-12, 19.0, 25.0, -800.0, f64::INFINITY];
        let want = edge.map(f64::tanh);
        f64::tanh_block(&mut edge);
        for (a, b) in edge.iter().zip(want) {
            assert!((a - b).abs() <= 2.0 * f64::EPSILON * b.abs(), "{a} vs {b}");
        }
        let mut nan = [f64::NAN; 4];
        f64::tanh_block(&mut nan);
        assert!(nan.iter().all(|v| v.is_nan()));
    }
}
