//! Norms, dual norms and query-error bounds for forms on the hypercube, each
//! reported as an interval whose two sides carry re-checkable witnesses.
//!
//! The algebraic core (polynomials, tensors, certificates, the simplex solver)
//! is generic over [`Scalar`]; the aliases below fix it to `f64` or to exact
//! rationals.

pub mod cert;
pub mod error;
pub mod linalg;
pub mod matnorms;
pub mod numopt;
pub mod poly;
pub mod queryerror;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod witness;

pub use cert::{CbCertificate, CertifiedInterval};
pub use error::{Error, Result};
pub use linalg::{Matrix, SparseMatrix};
pub use poly::{MultiIndex, Partition, Polynomial};
pub use scalar::{Rational, Real, Scalar};
pub use tensor::Tensor;

pub type PolyF64 = Polynomial<f64>;
pub type PolyQ = Polynomial<Rational>;
pub type TensorF64 = Tensor<f64>;
pub type TensorQ = Tensor<Rational>;
pub type CertF64 = CbCertificate<f64>;
pub type CertQ = CbCertificate<Rational>;
pub type MatrixF64 = Matrix<f64>;
pub type MatrixQ = Matrix<Rational>;
