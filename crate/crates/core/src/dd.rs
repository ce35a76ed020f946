//! Double-double scalar.
//!
//! Thin wrapper over [`twofloat::TwoFloat`] that keeps its addition,
//! multiplication and square root but replaces division and `f64`
//! conversion: in twofloat 0.8 the quotient of two double-doubles is only
//! accurate to `f64` precision and `FromPrimitive::from_f64` truncates to an
//! integer.

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use twofloat::TwoFloat;

/// Double-double real number (about 32 significant decimal digits).
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Dd(pub TwoFloat);

impl Dd {
    #[inline]
    pub fn new(x: f64) -> Self {
        Dd(<TwoFloat as From<f64>>::from(x))
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.0.lo()
    }
}

impl From<f64> for Dd {
    #[inline]
    fn from(x: f64) -> Self {
        Dd(<TwoFloat as From<f64>>::from(x))
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // enough digits to round-trip the leading word, plus the tail
        if self.lo() == 0.0 {
            write!(f, "{:e}", self.hi())
        } else {
            write!(f, "{:e}{:+e}", self.hi(), self.lo())
        }
    }
}

fn quotient(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    // long division with three f64 partial quotients
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

macro_rules! binop {
    ($tr:ident, $f:ident, $atr:ident, $af:ident, $body:expr) => {
        impl $tr for Dd {
            type Output = Dd;
            #[inline]
            fn $f(self, rhs: Dd) -> Dd {
                let g: fn(TwoFloat, TwoFloat) -> TwoFloat = $body;
                Dd(g(self.0, rhs.0))
            }
        }
        impl $atr for Dd {
            #[inline]
            fn $af(&mut self, rhs: Dd) {
                *self = $tr::$f(*self, rhs);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign, |a, b| a + b);
binop!(Sub, sub, SubAssign, sub_assign, |a, b| a - b);
binop!(Mul, mul, MulAssign, mul_assign, |a, b| a * b);
binop!(Div, div, DivAssign, div_assign, quotient);
binop!(Rem, rem, RemAssign, rem_assign, |a, b| {
    let q = Float::trunc(quotient(a, b));
    a - q * b
});

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd(-self.0)
    }
}

impl Zero for Dd {
    fn zero() -> Self {
        Dd(<TwoFloat as From<f64>>::from(0.0))
    }
    fn is_zero(&self) -> bool {
        self.hi() == 0.0
    }
}

impl One for Dd {
    fn one() -> Self {
        Dd(<TwoFloat as From<f64>>::from(1.0))
    }
}

impl Num for Dd {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Dd::new)
    }
}

impl ToPrimitive for Dd {
    fn to_i64(&self) -> Option<i64> {
        self.0.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.hi() + self.lo())
    }
}

impl FromPrimitive for Dd {
    fn from_i64(n: i64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n - hi as i64) as f64;
        Some(Dd(TwoFloat::new_add(hi, lo)))
    }
    fn from_u64(n: u64) -> Option<Self> {
        let hi = n as f64;
        let lo = n.wrapping_sub(hi as u64) as i64 as f64;
        Some(Dd(TwoFloat::new_add(hi, lo)))
    }
    fn from_f64(x: f64) -> Option<Self> {
        Some(Dd::new(x))
    }
}

impl NumCast for Dd {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        n.to_f64().map(Dd::new)
    }
}

impl FloatConst for Dd {
    fn E() -> Self {
        Dd(TwoFloat::E())
    }
    fn FRAC_1_PI() -> Self {
        Dd(TwoFloat::FRAC_1_PI())
    }
    fn FRAC_1_SQRT_2() -> Self {
        Dd(TwoFloat::FRAC_1_SQRT_2())
    }
    fn FRAC_2_PI() -> Self {
        Dd(TwoFloat::FRAC_2_PI())
    }
    fn FRAC_2_SQRT_PI() -> Self {
        Dd(TwoFloat::FRAC_2_SQRT_PI())
    }
    fn FRAC_PI_2() -> Self {
        Dd(TwoFloat::FRAC_PI_2())
    }
    fn FRAC_PI_3() -> Self {
        Dd(TwoFloat::FRAC_PI_3())
    }
    fn FRAC_PI_4() -> Self {
        Dd(TwoFloat::FRAC_PI_4())
    }
    fn FRAC_PI_6() -> Self {
        Dd(TwoFloat::FRAC_PI_6())
    }
    fn FRAC_PI_8() -> Self {
        Dd(TwoFloat::FRAC_PI_8())
    }
    fn LN_10() -> Self {
        Dd(TwoFloat::LN_10())
    }
    fn LN_2() -> Self {
        Dd(TwoFloat::LN_2())
    }
    fn LOG10_E() -> Self {
        Dd(TwoFloat::LOG10_E())
    }
    fn LOG2_E() -> Self {
        Dd(TwoFloat::LOG2_E())
    }
    fn PI() -> Self {
        Dd(TwoFloat::PI())
    }
    fn SQRT_2() -> Self {
        Dd(TwoFloat::SQRT_2())
    }
    fn TAU() -> Self {
        Dd(TwoFloat::TAU())
    }
}

macro_rules! delegate_unary {
    ($($f:ident),*) => {
        $(
            #[inline]
            fn $f(self) -> Self {
                Dd(Float::$f(self.0))
            }
        )*
    };
}

macro_rules! delegate_pred {
    ($($f:ident),*) => {
        $(
            #[inline]
            fn $f(self) -> bool {
                Float::$f(self.0)
            }
        )*
    };
}

macro_rules! delegate_const {
    ($($f:ident),*) => {
        $(
            #[inline]
            fn $f() -> Self {
                Dd(<TwoFloat as Float>::$f())
            }
        )*
    };
}

impl Float for Dd {
    delegate_const!(nan, infinity, neg_infinity, neg_zero, min_value, min_positive_value, max_value);
    delegate_pred!(is_nan, is_infinite, is_finite, is_normal, is_sign_positive, is_sign_negative);
    delegate_unary!(
        floor, ceil, round, trunc, fract, abs, signum, sqrt, exp, exp2, ln, log2, log10, cbrt, sin,
        cos, tan, asin, acos, atan, exp_m1, ln_1p, sinh, cosh, tanh, asinh, acosh, atanh
    );

    fn epsilon() -> Self {
        Dd::new(4.930380657631324e-32)
    }

    fn classify(self) -> FpCategory {
        Float::classify(self.0)
    }

    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }

    fn recip(self) -> Self {
        Dd::one() / self
    }

    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { self.recip() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Dd::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    fn powf(self, n: Self) -> Self {
        Dd(Float::powf(self.0, n.0))
    }

    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }

    fn max(self, other: Self) -> Self {
        match self.partial_cmp(&other) {
            Some(Ordering::Less) => other,
            _ if other.is_nan() => self,
            _ if self.is_nan() => other,
            _ => self,
        }
    }

    fn min(self, other: Self) -> Self {
        match self.partial_cmp(&other) {
            Some(Ordering::Greater) => other,
            _ if other.is_nan() => self,
            _ if self.is_nan() => other,
            _ => self,
        }
    }

    fn abs_sub(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            Dd::zero()
        }
    }

    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }

    fn atan2(self, other: Self) -> Self {
        Dd(Float::atan2(self.0, other.0))
    }

    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }

    fn integer_decode(self) -> (u64, i16, i8) {
        Float::integer_decode(self.0)
    }
}
