use serde::{Deserialize, Serialize};

use crate::error::{NefError, Result};

/// A point of the mean space `E` (means, prior locations, the constant `a`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

/// A point of the dual space `E*` (canonical parameters, the covector `beta`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Covector(Vec<f64>);

macro_rules! coords_newtype {
    ($ty:ident) => {
        impl $ty {
            pub fn new(coords: Vec<f64>) -> Result<Self> {
                if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
                    return Err(NefError::invalid(format!(
                        concat!(stringify!($ty), " has a non-finite entry {}"),
                        bad
                    )));
                }
                Ok($ty(coords))
            }

            pub fn zeros(n: usize) -> Self {
                $ty(vec![0.0; n])
            }

            /// The `i`-th basis element.
            pub fn unit(n: usize, i: usize) -> Self {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                $ty(v)
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn is_zero(&self) -> bool {
                self.0.iter().all(|&c| c == 0.0)
            }
        }

        impl std::ops::Deref for $ty {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

coords_newtype!(Vector);
coords_newtype!(Covector);

/// The duality bracket `<theta, x>`.
pub fn pairing(theta: &Covector, x: &Vector) -> Result<f64> {
    if theta.dim() != x.dim() {
        return Err(NefError::invalid(format!(
            "pairing a covector of dimension {} with a vector of dimension {}",
            theta.dim(),
            x.dim()
        )));
    }
    Ok(dot(theta, x))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
