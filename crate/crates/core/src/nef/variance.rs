use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::domain::Domain;
use crate::error::{NefError, Result};
use crate::poly::PolyMatrix;

/// Highest total degree allowed in a polynomial variance function.
pub const MAX_VARIANCE_DEGREE: usize = 3;

pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub enum VarianceRepr {
    Polynomial(PolyMatrix<f64>),
    /// Evaluator for variance functions outside the polynomial class.
    Numeric { label: String, eval: MatrixFn },
}

/// A variance function `m -> V(m)` with its mean domain.
#[derive(Clone)]
pub struct VarianceModel {
    dim: usize,
    mean_domain: Domain,
    repr: VarianceRepr,
}

impl fmt::Debug for VarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            VarianceRepr::Polynomial(p) => f
                .debug_struct("VarianceModel")
                .field("dim", &self.dim)
                .field("matrix", p)
                .field("mean_domain", &self.mean_domain)
                .finish(),
            VarianceRepr::Numeric { label, .. } => write!(f, "VarianceModel(numeric: {label})"),
        }
    }
}

impl VarianceModel {
    /// Polynomial model; rejects degree above 3 and asymmetric matrices.
    pub fn polynomial(matrix: PolyMatrix<f64>, mean_domain: Domain) -> Result<Self> {
        let n = matrix.size();
        if n == 0 {
            return Err(NefError::Validation("variance matrix is empty".into()));
        }
        if matrix.nvars() != n || mean_domain.dim() != n {
            return Err(NefError::Validation(format!(
                "variance of size {n} in {} variables on a domain of dimension {}",
                matrix.nvars(),
                mean_domain.dim()
            )));
        }
        if matrix.degree() > MAX_VARIANCE_DEGREE {
            return Err(NefError::Validation(format!(
                "variance has degree {} > {MAX_VARIANCE_DEGREE}",
                matrix.degree()
            )));
        }
        if !matrix.is_symmetric() {
            return Err(NefError::Validation("variance matrix is not symmetric".into()));
        }
        Ok(VarianceModel {
            dim: n,
            mean_domain,
            repr: VarianceRepr::Polynomial(matrix),
        })
    }

    pub fn numeric(
        label: impl Into<String>,
        dim: usize,
        eval: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        mean_domain: Domain,
    ) -> Result<Self> {
        if mean_domain.dim() != dim {
            return Err(NefError::invalid("numeric variance and domain differ in dimension"));
        }
        Ok(VarianceModel {
            dim,
            mean_domain,
            repr: VarianceRepr::Numeric {
                label: label.into(),
                eval: Arc::new(eval),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean_domain(&self) -> &Domain {
        &self.mean_domain
    }

    pub fn repr(&self) -> &VarianceRepr {
        &self.repr
    }

    pub fn polynomial_matrix(&self) -> Option<&PolyMatrix<f64>> {
        match &self.repr {
            VarianceRepr::Polynomial(p) => Some(p),
            VarianceRepr::Numeric { .. } => None,
        }
    }

    pub fn degree(&self) -> Option<usize> {
        self.polynomial_matrix().map(|p| p.degree())
    }

    pub fn with_domain(&self, mean_domain: Domain) -> Result<Self> {
        if mean_domain.dim() != self.dim {
            return Err(NefError::invalid("replacement domain has the wrong dimension"));
        }
        Ok(VarianceModel {
            mean_domain,
            ..self.clone()
        })
    }

    /// `V(m)`; does not check domain membership.
    pub fn eval(&self, m: &[f64]) -> Result<DMatrix<f64>> {
        if m.len() != self.dim {
            return Err(NefError::invalid(format!(
                "mean of dimension {} for a variance of dimension {}",
                m.len(),
                self.dim
            )));
        }
        Ok(match &self.repr {
            VarianceRepr::Polynomial(p) => p.eval_f64(m),
            VarianceRepr::Numeric { eval, .. } => eval(m),
        })
    }

    /// `dV/dm_k` at `m`: exact for polynomials, central differences with
    /// step `1e-5 * max(1, |m_k|)` otherwise.
    pub fn derivative(&self, m: &[f64], k: usize) -> Result<DMatrix<f64>> {
        match &self.repr {
            VarianceRepr::Polynomial(p) => Ok(p.derivative(k).eval_f64(m)),
            VarianceRepr::Numeric { eval, .. } => {
                let h = 1e-5 * m[k].abs().max(1.0);
                let mut mp = m.to_vec();
                let mut mm = m.to_vec();
                mp[k] += h;
                mm[k] -= h;
                Ok((eval(&mp) - eval(&mm)) / (2.0 * h))
            }
        }
    }

    /// `V'(m)(u)`, the directional derivative along `u`.
    pub fn directional_derivative(&self, m: &[f64], u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for k in 0..self.dim {
            if u[k] != 0.0 {
                out += self.derivative(m, k)? * u[k];
            }
        }
        Ok(out)
    }

    /// Smallest eigenvalue of `V` over the grid; positive for a valid model.
    pub fn min_eigenvalue(&self, grid: &[Vec<f64>]) -> Result<f64> {
        let mut min = f64::INFINITY;
        for m in grid {
            let v = self.eval(m)?;
            min = min.min(v.symmetric_eigenvalues().min());
        }
        Ok(min)
    }
}
