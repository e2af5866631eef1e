//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + ndarray::ScalarOperand
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }

    /// `exp(-e)` for `0 ≤ e ≤ 700`.
    #[inline(always)]
    fn exp_neg(e: Self) -> Self {
        (-e).exp()
    }
}

impl Real for f32 {}

impl Real for f64 {
    #[inline(always)]
    fn exp_neg(e: f64) -> f64 {
        exp_neg_f64(e)
    }
}

/// Branch-free `exp(-e)` (relative error below 1e-15 on `[0, 700]`).
#[inline(always)]
pub fn exp_neg_f64(e: f64) -> f64 {
    const MAGIC: f64 = 6_755_399_441_055_744.0;
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const K: [f64; 14] = [
        1.0,
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5_040.0,
        1.0 / 40_320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    let x = -e;
    let t = x * std::f64::consts::LOG2_E + MAGIC;
    let k = t - MAGIC;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = K[13];
    for &c in K[..13].iter().rev() {
        p = p * r + c;
    }
    let n = t.to_bits().wrapping_sub(MAGIC.to_bits());
    p * f64::from_bits(n.wrapping_add(1023) << 52)
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal CDF.
pub fn norm_cdf<T: Real>(x: T) -> T {
    T::lit(standard_normal().cdf(x.as_f64()))
}

/// Standard normal quantile function. `p` must lie in (0, 1).
pub fn norm_quantile<T: Real>(p: T) -> T {
    T::lit(standard_normal().inverse_cdf(p.as_f64()))
}

/// Standard normal CDF in plain `f64`; hot loops call this directly.
#[inline]
pub fn phi(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_neg_matches_std() {
        let mut worst: f64 = 0.0;
        for i in 0..700_001 {
            let e = i as f64 * 0.001;
            let rel = (exp_neg_f64(e) / (-e).exp() - 1.0).abs();
            worst = worst.max(rel);
        }
        assert!(worst < 1e-15, "{worst}");
        assert_eq!(exp_neg_f64(0.0), 1.0);
        assert_eq!(<f32 as Real>::exp_neg(1.0), (-1.0f32).exp());
    }

    #[test]
    fn quantile_matches_known_values() {
        assert!((norm_quantile(0.9f64) - 1.281_551_565_544_6).abs() < 1e-9);
        assert!((norm_quantile(0.3f64) + 0.524_400_512_708_041).abs() < 1e-9);
        assert_eq!(norm_quantile(0.5f64), 0.0);
    }

    #[test]
    fn cdf_round_trip() {
        for &x in &[-3.0f64, -1.0, 0.0, 0.4, 2.5] {
            assert!((norm_quantile(norm_cdf(x)) - x).abs() < 1e-8);
            assert!((phi(x) - norm_cdf(x)).abs() < 1e-14);
        }
    }
}
