//! Scalar abstraction: the whole pipeline (DAG evaluation, LP models, the
//! simplex engine) is generic over the arithmetic it runs in. `f64` gives the
//! fast path; `BigRational` gives exact certification, since every model we
//! build has integer data.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Clone + Num + Signed + PartialOrd + Display + Debug + Send + Sync + 'static
{
    /// Exact arithmetic: comparisons use zero tolerances and the solver
    /// defaults to Bland's rule.
    const EXACT: bool;

    fn from_int(v: i64) -> Self;

    /// Exact conversion from an `f64` where representable.
    fn from_f64(v: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    /// Default primal feasibility tolerance.
    fn feas_tol() -> Self;
    /// Default reduced-cost (optimality) tolerance.
    fn opt_tol() -> Self;
    /// Smallest pivot magnitude accepted in ratio tests and factorization.
    fn pivot_tol() -> Self;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn from_f64(v: f64) -> Option<Self> {
        Some(v)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn feas_tol() -> Self {
        1e-7
    }

    fn opt_tol() -> Self {
        1e-6
    }

    fn pivot_tol() -> Self {
        1e-8
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_f64(v: f64) -> Option<Self> {
        <BigRational as FromPrimitive>::from_f64(v)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn feas_tol() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }

    fn opt_tol() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }

    fn pivot_tol() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_roundtrip() {
        let half = <BigRational as Scalar>::from_f64(0.5).unwrap();
        assert_eq!(Scalar::to_f64(&half), 0.5);
        assert_eq!(
            BigRational::from_int(3) * half,
            <BigRational as Scalar>::from_f64(1.5).unwrap()
        );
    }

    #[test]
    fn float_tolerances_positive() {
        assert!(f64::feas_tol() > 0.0);
        assert!(f64::opt_tol() > 0.0);
        assert!(<BigRational as Scalar>::feas_tol() == BigRational::from_int(0));
    }
}
