//! Scalar traits shared by jets, formal series and the expression evaluator.
//!
//! `Scalar` covers the field operations plus the few extras the jet algebra
//! needs (exact rational embedding, square roots of constant terms, a size
//! measure for tolerances). It is implemented for `f32`, `f64`, `Ratio<i64>`,
//! `BigRational` and `Complex` over any of these.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, Signed, ToPrimitive};

pub trait Scalar: Clone + Debug + PartialEq + Num + Neg<Output = Self> + Send + Sync + 'static {
    /// Exact embedding of `num/den`.
    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_int(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }

    /// Absolute value as an `f64`, used for tolerances and reporting.
    fn magnitude(&self) -> f64;

    /// Square root when it exists in the scalar type.
    fn try_sqrt(&self) -> Option<Self>;
}

/// Scalars with an imaginary unit. Formal series and the Moyal product need it.
pub trait ComplexScalar: Scalar {
    type Real: Scalar + PartialOrd;

    fn i() -> Self;
    fn from_real(r: Self::Real) -> Self;
    fn re(&self) -> Self::Real;
    fn im(&self) -> Self::Real;
    fn conj(&self) -> Self;
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_ratio(num: i64, den: i64) -> Self {
                num as $t / den as $t
            }
            fn magnitude(&self) -> f64 {
                self.abs() as f64
            }
            fn try_sqrt(&self) -> Option<Self> {
                if *self >= 0.0 {
                    Some(self.sqrt())
                } else {
                    None
                }
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

fn isqrt_exact_i64(n: i64) -> Option<i64> {
    if n < 0 {
        return None;
    }
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    (r * r == n).then_some(r)
}

impl Scalar for Ratio<i64> {
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }
    fn magnitude(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
    fn try_sqrt(&self) -> Option<Self> {
        let n = isqrt_exact_i64(*self.numer())?;
        let d = isqrt_exact_i64(*self.denom())?;
        Some(Ratio::new(n, d))
    }
}

fn isqrt_exact_big(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(BigInt::from(num), BigInt::from(den))
    }
    fn magnitude(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
    fn try_sqrt(&self) -> Option<Self> {
        let n = isqrt_exact_big(self.numer())?;
        let d = isqrt_exact_big(self.denom())?;
        Some(Ratio::new(n, d))
    }
}

impl<T> Scalar for Complex<T>
where
    T: Scalar,
{
    fn from_ratio(num: i64, den: i64) -> Self {
        Complex::new(T::from_ratio(num, den), T::zero())
    }
    fn magnitude(&self) -> f64 {
        self.re.magnitude().hypot(self.im.magnitude())
    }
    fn try_sqrt(&self) -> Option<Self> {
        if self.im.is_zero() {
            self.re.try_sqrt().map(|r| Complex::new(r, T::zero()))
        } else {
            None
        }
    }
}

impl<T> ComplexScalar for Complex<T>
where
    T: Scalar + PartialOrd,
{
    type Real = T;

    fn i() -> Self {
        Complex::new(T::zero(), T::one())
    }
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }
    fn re(&self) -> T {
        self.re.clone()
    }
    fn im(&self) -> T {
        self.im.clone()
    }
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
}

/// Rational constant type used by the expression AST.
pub type Rational = Ratio<i64>;
