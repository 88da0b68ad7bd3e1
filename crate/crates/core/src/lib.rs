//! Natural exponential families with polynomial variance functions.
//!
//! The crate builds simple cubic families from simple quadratic ones and
//! checks three equivalent characterizations of the cubic class on any
//! family given by a cumulant function or a variance function:
//!
//! * a Monge-Ampère identity for `det k''` ([`verifier::monge_ampere_fit`]),
//! * a first-order identity for the variance function
//!   ([`verifier::trace_identity_residual`]),
//! * equality of two prior families under the mean map
//!   ([`verifier::prior_pushforward_check`]).
//!
//! Exact polynomial algebra ([`poly`], [`cubic`], [`ode`]) is generic over
//! [`Scalar`], so it runs on `f64`, `f32` or exact rationals. Everything
//! that needs Newton solves or quadrature works in `f64`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod catalog;
pub mod cubic;
pub mod descriptor;
pub mod error;
pub mod legendre;
pub mod nef;
pub mod ode;
pub mod poly;
pub mod priors;
pub mod quadrature;
pub mod scalar;
pub mod verifier;

pub use error::{NefError, Result};
pub use nef::{
    affine_image, jorgensen_power, pairing, Covector, Cumulant, CumulantEval, CumulantFamily, Domain,
    FamilyDescriptor, Provenance, VarianceModel, Vector, Window,
};
pub use scalar::{rational, Scalar};

pub use num_rational::BigRational;
pub use nalgebra;

/// Polynomial with `f64` coefficients.
pub type Poly64 = poly::Polynomial<f64>;
/// Polynomial with exact rational coefficients.
pub type PolyQ = poly::Polynomial<BigRational>;
pub type PolyMatrix64 = poly::PolyMatrix<f64>;
pub type PolyMatrixQ = poly::PolyMatrix<BigRational>;
pub type OdeParams64 = ode::OdeParams<f64>;
pub type OdeParamsQ = ode::OdeParams<BigRational>;
