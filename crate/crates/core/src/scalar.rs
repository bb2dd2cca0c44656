//! Scalar abstraction shared by the algebraic layers.
//!
//! Polynomials, tensors, certificates and the simplex solver are written once
//! against [`Scalar`] and instantiated with `f64` for numerics or
//! [`BigRational`] when a computation must be exact. The dense eigensolver only
//! makes sense over floating point and asks for [`Real`] instead.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{Float, Num, One, Signed, ToPrimitive, Zero};

/// Exact rationals.
pub type Rational = BigRational;

/// Ordered field element.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    /// True when arithmetic is exact (no rounding).
    const EXACT: bool;

    fn from_f64(x: f64) -> Self;

    fn from_i64(x: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Square root, when it is representable in this type.
    fn sqrt_checked(&self) -> Option<Self>;

    /// Magnitude below which a pivot candidate is treated as zero.
    /// Zero for exact types.
    fn pivot_tol() -> Self;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    fn from_i128(x: i128) -> Self {
        Self::from_f64(x as f64)
    }

    /// `values = numerators / denominator` with `i64` numerators whose absolute
    /// sum stays below `2^62`, for exact integer hypercube sums. `None` for
    /// inexact types or when the numerators do not fit.
    fn scaled_integers(_values: &[Self]) -> Option<(Vec<i64>, Self)> {
        None
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

/// Floating-point scalar.
pub trait Real: Scalar + Float + Copy {}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_f64(x: f64) -> Self {
        x
    }

    fn from_i64(x: i64) -> Self {
        x as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn sqrt_checked(&self) -> Option<Self> {
        if *self < 0.0 {
            None
        } else {
            Some(f64::sqrt(*self))
        }
    }

    fn pivot_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn from_i64(x: i64) -> Self {
        x as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn sqrt_checked(&self) -> Option<Self> {
        if *self < 0.0 {
            None
        } else {
            Some(f32::sqrt(*self))
        }
    }

    fn pivot_tol() -> Self {
        1e-5
    }
}

impl Real for f64 {}
impl Real for f32 {}

impl Scalar for BigRational {
    const EXACT: bool = true;

    /// Exact conversion of the binary value; panics on NaN or infinity.
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }

    fn from_i64(x: i64) -> Self {
        BigRational::from_integer(BigInt::from(x))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // Very large numerators/denominators: fall back to a scaled ratio.
            let n = self.numer().to_f64().unwrap_or(f64::INFINITY);
            let d = self.denom().to_f64().unwrap_or(f64::INFINITY);
            n / d
        })
    }

    fn sqrt_checked(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        if self.is_zero() {
            return Some(self.clone());
        }
        let n = self.numer().sqrt();
        let d = self.denom().sqrt();
        if &(&n * &n) == self.numer() && &(&d * &d) == self.denom() {
            Some(BigRational::new(n, d))
        } else {
            None
        }
    }

    fn pivot_tol() -> Self {
        BigRational::zero()
    }

    fn from_i128(x: i128) -> Self {
        BigRational::from_integer(BigInt::from(x))
    }

    fn scaled_integers(values: &[Self]) -> Option<(Vec<i64>, Self)> {
        let den = values
            .iter()
            .fold(BigInt::one(), |l, v| l.lcm(v.denom()));
        let mut total: i128 = 0;
        let mut out = Vec::with_capacity(values.len());
        for v in values {
            let k = (v.numer() * (&den / v.denom())).to_i64()?;
            total += (k as i128).abs();
            out.push(k);
        }
        (total < 1i128 << 62).then(|| (out, BigRational::from_integer(den)))
    }
}

/// `x` converted into `T`; shorthand for literals in generic code.
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x)
}
