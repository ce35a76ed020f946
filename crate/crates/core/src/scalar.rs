//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All assembly, eigensolver and expansion code is written against [`Real`],
//! so the same pipeline runs in `f32`, `f64` or double-double
//! ([`Dd`](crate::Dd)). The double-double path exists because some of the
//! quantities compared near the spectral edge differ by less than `1e-13`,
//! which is below what an `f64` dense eigensolve of a spectral
//! differentiation matrix can resolve.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

use crate::dd::Dd;

/// Real field used by the numerical core.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Short name used in reports ("f64", "dd", ...).
    const NAME: &'static str;

    /// Unit roundoff of the arithmetic.
    fn unit_roundoff() -> Self;

    /// `(cos 2πt, sin 2πt)` with the argument given in turns.
    ///
    /// Every trigonometric evaluation in the crate has this form (Fourier
    /// modes, Bloch phases), so implementations only need to be accurate on
    /// a reduced argument.
    fn cos_sin_turns(turns: Self) -> (Self, Self);

    /// Converts an `f64` literal or configuration value.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    /// Converts an index or count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable")
    }

    /// Lossy conversion for reporting.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Scales an `f64`-calibrated tolerance to this precision. Tolerances are
    /// never tightened below the `f64` value, only loosened for coarser types.
    #[inline]
    fn tol(base: f64) -> Self {
        let ratio = (Self::unit_roundoff().to_f64_lossy() / f64::EPSILON * 2.0).max(1.0);
        Self::of(base * ratio)
    }

    /// `e^{2πi t}`.
    #[inline]
    fn cis_turns(turns: Self) -> Complex<Self> {
        let (c, s) = Self::cos_sin_turns(turns);
        Complex::new(c, s)
    }
}

/// Splits `t` into a quadrant index and a remainder in `[-1/8, 1/8]` turns.
fn reduce_turns<T: Real>(turns: T) -> (i64, T) {
    let r = turns - turns.round();
    let quarter = (r * T::of(4.0)).round();
    let rem = r - quarter / T::of(4.0);
    (quarter.to_i64().unwrap_or(0).rem_euclid(4), rem)
}

fn rotate_quadrant<T: Real>(q: i64, c: T, s: T) -> (T, T) {
    match q {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

macro_rules! impl_real_native {
    ($t:ty, $name:expr) => {
        impl Real for $t {
            const NAME: &'static str = $name;

            fn unit_roundoff() -> Self {
                <$t>::EPSILON / 2.0
            }

            fn cos_sin_turns(turns: Self) -> (Self, Self) {
                let (q, rem) = reduce_turns(turns);
                let (s, c) = (rem * <$t as FloatConst>::TAU()).sin_cos();
                rotate_quadrant(q, c, s)
            }
        }
    };
}

impl_real_native!(f32, "f32");
impl_real_native!(f64, "f64");

impl Real for Dd {
    const NAME: &'static str = "dd";

    fn unit_roundoff() -> Self {
        // 2^-104
        Dd::new(4.930380657631324e-32)
    }

    // twofloat's sin/cos stop at about 1e-17; expand the reduced argument
    // directly.
    fn cos_sin_turns(turns: Self) -> (Self, Self) {
        let (q, rem) = reduce_turns(turns);
        let a = rem * <Dd as FloatConst>::TAU();
        let a2 = a * a;
        let tiny = Dd::new(1e-34);

        let mut sin = a;
        let mut term = a;
        let mut k = 1.0;
        loop {
            term = -term * a2 / Dd::new((k + 1.0) * (k + 2.0));
            sin += term;
            k += 2.0;
            if term.abs() < tiny {
                break;
            }
        }
        let mut cos = Dd::new(1.0);
        let mut term = Dd::new(1.0);
        let mut k = 0.0;
        loop {
            term = -term * a2 / Dd::new((k + 1.0) * (k + 2.0));
            cos += term;
            k += 2.0;
            if term.abs() < tiny {
                break;
            }
        }
        rotate_quadrant(q, cos, sin)
    }
}

/// Squared modulus without the `hypot` detour.
#[inline]
pub fn abs2<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Modulus.
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    abs2(z).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd_err(a: Dd, b: Dd) -> f64 {
        (a - b).abs().to_f64_lossy()
    }

    #[test]
    fn quarter_turns_are_exact() {
        assert_eq!(f64::cos_sin_turns(0.25), (0.0, 1.0));
        assert_eq!(f64::cos_sin_turns(-0.5), (-1.0, 0.0));
        assert_eq!(f64::cos_sin_turns(3.0), (1.0, 0.0));
    }

    #[test]
    fn double_double_trig_is_accurate() {
        let one = Dd::new(1.0);
        for k in 1..50 {
            let t = Dd::new(k as f64) / Dd::new(37.0);
            let (c, s) = Dd::cos_sin_turns(t);
            assert!(dd_err(c * c + s * s, one) < 1e-30);
        }
        // cos(2π/6) = 1/2, sin(2π/12) = 1/2
        let (c, _) = Dd::cos_sin_turns(one / Dd::new(6.0));
        assert!(dd_err(c, Dd::new(0.5)) < 1e-31);
        let (_, s) = Dd::cos_sin_turns(one / Dd::new(12.0));
        assert!(dd_err(s, Dd::new(0.5)) < 1e-31);
        // sin(2π/8)² = 1/2
        let (_, s) = Dd::cos_sin_turns(one / Dd::new(8.0));
        assert!(dd_err(s * s, Dd::new(0.5)) < 1e-31);
    }

    #[test]
    fn tolerances_scale_with_precision() {
        assert_eq!(f64::tol(1e-10), 1e-10);
        assert_eq!(Dd::tol(1e-10).to_f64_lossy(), 1e-10);
        assert!(f32::tol(1e-10) > 1e-3);
    }
}
