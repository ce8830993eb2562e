//! Small self-contained dense and sparse linear algebra.
//!
//! Only what the discretization needs: row-major dense matrices, CSR
//! matrices, LU/Cholesky, symmetric eigenvalues, singular values,
//! complex Schur/QR, a fill-reducing sparse LDLᵀ and a pivoted band LU.

mod band;
mod csr;
mod dense;
mod eig;
mod frontal;
mod ldl;
mod schur;

pub use band::BandLu;
pub use csr::CsrMatrix;
pub use dense::{cholesky, DenseMatrix, Lu};
pub use eig::{singular_values, symmetric_eigenvalues};
pub use frontal::{FrontalLdl, FrontalTree};
pub use ldl::{nested_dissection_order, SparseLdl, SymbolicLdl};
pub use schur::{complex_schur, householder_qr, ComplexSchur};

use core::fmt::Debug;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Field scalar used by the generic kernels: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    /// Modulus.
    fn abs(self) -> f64;
    fn conj(self) -> Self;
    fn re(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn abs(self) -> f64 {
        num_traits::Float::abs(self)
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn abs(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
}

/// Euclidean norm of a slice.
pub fn norm2<T: Scalar>(v: &[T]) -> f64 {
    let mut scale = 0.0f64;
    let mut ssq = 1.0f64;
    for x in v {
        let a = x.abs();
        if a > 0.0 {
            if scale < a {
                ssq = 1.0 + ssq * (scale / a) * (scale / a);
                scale = a;
            } else {
                ssq += (a / scale) * (a / scale);
            }
        }
    }
    scale * num_traits::Float::sqrt(ssq)
}

/// Max-modulus norm of a slice.
pub fn norm_inf<T: Scalar>(v: &[T]) -> f64 {
    v.iter()
        .fold(0.0, |m, x| if x.abs() > m { x.abs() } else { m })
}
