//! Vectors, domains, cumulant functions, variance functions and the
//! affine and power operations on families.

pub mod cumulant;
pub mod domain;
pub mod family;
pub mod variance;
pub mod vector;

pub use cumulant::{Cumulant, CumulantEval, CumulantFamily, NumericCumulant};
pub use domain::{domain_beta, BetaDomain, Domain, DomainKind, DomainRepr, Window};
pub use family::{affine_image, jorgensen_power, AffineCumulant, FamilyDescriptor, Provenance};
pub use variance::{VarianceModel, VarianceRepr, MAX_VARIANCE_DEGREE};
pub use vector::{pairing, Covector, Vector};
