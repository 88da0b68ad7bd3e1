use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cumulant::{check_member, Cumulant, CumulantEval, CumulantFamily};
use super::domain::Domain;
use super::variance::{VarianceModel, VarianceRepr};
use super::vector::Vector;
use crate::descriptor::CumulantSpec;
use crate::error::{NefError, Result};
use crate::poly::{PolyMatrix, Polynomial};

/// Where a descriptor came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine_map: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine_shift: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
}

/// A natural exponential family given by its cumulant function, its
/// variance function, or both.
#[derive(Clone)]
pub struct FamilyDescriptor {
    pub name: String,
    cumulant: Option<CumulantFamily>,
    variance: Option<VarianceModel>,
    pub provenance: Provenance,
}

impl fmt::Debug for FamilyDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FamilyDescriptor")
            .field("name", &self.name)
            .field("cumulant", &self.cumulant)
            .field("variance", &self.variance)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl FamilyDescriptor {
    pub fn new(
        name: impl Into<String>,
        cumulant: Option<CumulantFamily>,
        variance: Option<VarianceModel>,
        provenance: Provenance,
    ) -> Result<Self> {
        let dim = match (&cumulant, &variance) {
            (None, None) => {
                return Err(NefError::Validation(
                    "a family needs a cumulant function or a variance function".into(),
                ))
            }
            (Some(k), Some(v)) if k.dim() != v.dim() => {
                return Err(NefError::Validation(format!(
                    "cumulant of dimension {} with variance of dimension {}",
                    k.dim(),
                    v.dim()
                )))
            }
            (Some(k), _) => k.dim(),
            (None, Some(v)) => v.dim(),
        };
        if dim == 0 {
            return Err(NefError::Validation("dimension must be positive".into()));
        }
        Ok(FamilyDescriptor {
            name: name.into(),
            cumulant,
            variance,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        match (&self.cumulant, &self.variance) {
            (Some(k), _) => k.dim(),
            (None, Some(v)) => v.dim(),
            (None, None) => unreachable!("constructor requires one representation"),
        }
    }

    pub fn cumulant(&self) -> Option<&CumulantFamily> {
        self.cumulant.as_ref()
    }

    pub fn require_cumulant(&self) -> Result<&dyn Cumulant> {
        self.cumulant
            .as_deref()
            .ok_or_else(|| NefError::invalid(format!("family `{}` has no cumulant function", self.name)))
    }

    pub fn variance(&self) -> Option<&VarianceModel> {
        self.variance.as_ref()
    }

    pub fn require_variance(&self) -> Result<&VarianceModel> {
        self.variance
            .as_ref()
            .ok_or_else(|| NefError::invalid(format!("family `{}` has no variance model", self.name)))
    }

    /// The variance model's domain when present, otherwise the cumulant's.
    pub fn mean_domain(&self) -> &Domain {
        match (&self.variance, &self.cumulant) {
            (Some(v), _) => v.mean_domain(),
            (None, Some(k)) => k.mean_domain(),
            (None, None) => unreachable!("constructor requires one representation"),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Cumulant `theta -> scale * k(A^T theta) + <theta, b>`.
///
/// Covers affine images of a family (`scale = 1`) and convolution powers
/// (`A = I`, `b = 0`).
#[derive(Debug)]
pub struct AffineCumulant {
    base: CumulantFamily,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    shift: DVector<f64>,
    scale: f64,
    theta_domain: Domain,
    mean_domain: Domain,
    spec: Option<CumulantSpec>,
}

impl AffineCumulant {
    fn new(base: CumulantFamily, a: DMatrix<f64>, shift: DVector<f64>, scale: f64) -> Result<Self> {
        let n = base.dim();
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| NefError::invalid("affine map is singular"))?;
        let identity = a == DMatrix::identity(n, n);
        let theta_domain = if identity {
            base.theta_domain().clone()
        } else {
            Domain::preimage(base.theta_domain().clone(), rows(&a.transpose()), vec![0.0; n])?
        };
        // m = scale * A k'(A^T theta) + b  <=>  k' = A^-1 (m - b) / scale
        let m_map = &a_inv / scale;
        let m_off = -(&m_map * &shift);
        let mean_domain = Domain::preimage(
            base.mean_domain().clone(),
            rows(&m_map),
            m_off.as_slice().to_vec(),
        )?;
        let spec = base.spec().map(|b| {
            if identity && shift.iter().all(|&v| v == 0.0) {
                CumulantSpec::Power {
                    base: Box::new(b),
                    lambda: scale,
                }
            } else {
                CumulantSpec::Affine {
                    base: Box::new(b),
                    matrix: rows(&a),
                    shift: shift.as_slice().to_vec(),
                }
            }
        });
        Ok(AffineCumulant {
            base,
            a,
            a_inv,
            shift,
            scale,
            theta_domain,
            mean_domain,
            spec,
        })
    }

    pub fn affine(base: CumulantFamily, a: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        Self::new(base, a, shift, 1.0)
    }

    pub fn power(base: CumulantFamily, lambda: f64) -> Result<Self> {
        let n = base.dim();
        Self::new(base, DMatrix::identity(n, n), DVector::zeros(n), lambda)
    }
}

impl Cumulant for AffineCumulant {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn theta_domain(&self) -> &Domain {
        &self.theta_domain
    }

    fn mean_domain(&self) -> &Domain {
        &self.mean_domain
    }

    fn eval(&self, theta: &[f64]) -> Result<CumulantEval> {
        check_member(&self.theta_domain, theta)?;
        let t = DVector::from_column_slice(theta);
        let inner = self.a.transpose() * &t;
        let ev = self.base.eval(inner.as_slice())?;
        Ok(CumulantEval {
            value: self.scale * ev.value + t.dot(&self.shift),
            gradient: &self.a * ev.gradient * self.scale + &self.shift,
            hessian: &self.a * ev.hessian * self.a.transpose() * self.scale,
        })
    }

    fn closed_form(&self) -> bool {
        self.base.closed_form()
    }

    fn inverse_hint(&self, m: &[f64]) -> Option<Vec<f64>> {
        let inner = &self.a_inv * (DVector::from_column_slice(m) - &self.shift) / self.scale;
        let phi = DVector::from_vec(self.base.inverse_hint(inner.as_slice())?);
        Some((self.a_inv.transpose() * phi).as_slice().to_vec())
    }

    fn spec(&self) -> Option<CumulantSpec> {
        self.spec.clone()
    }
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// `scale * A V(A_inv (m - b)) A^T` for a variance model.
fn transform_variance(
    v: &VarianceModel,
    a: &DMatrix<f64>,
    a_inv: &DMatrix<f64>,
    shift: &DVector<f64>,
    scale: f64,
    mean_domain: Domain,
) -> Result<VarianceModel> {
    let n = v.dim();
    match v.repr() {
        VarianceRepr::Polynomial(p) => {
            let off = -(a_inv * shift);
            let inner = p.map_entries(|e| e.compose_affine(&rows(a_inv), off.as_slice()))?;
            let a_poly = PolyMatrix::from_fn(n, |i, j| Polynomial::constant(n, a[(i, j)] * scale));
            let at_poly = PolyMatrix::from_fn(n, |i, j| Polynomial::constant(n, a[(j, i)]));
            VarianceModel::polynomial(a_poly.matmul(&inner).matmul(&at_poly), mean_domain)
        }
        VarianceRepr::Numeric { label, eval } => {
            let eval = Arc::clone(eval);
            let (a, a_inv, shift) = (a.clone(), a_inv.clone(), shift.clone());
            VarianceModel::numeric(
                format!("affine image of {label}"),
                n,
                move |m| {
                    let inner = &a_inv * (DVector::from_column_slice(m) - &shift);
                    &a * eval(inner.as_slice()) * a.transpose() * scale
                },
                mean_domain,
            )
        }
    }
}

/// Image of a family under `x -> A x + b`: `V_new(m) = A V(A^-1 (m - b)) A^T`
/// and `k_new(theta) = k(A^T theta) + <theta, b>`.
pub fn affine_image(fam: &FamilyDescriptor, a_map: &DMatrix<f64>, b_shift: &Vector) -> Result<FamilyDescriptor> {
    let n = fam.dim();
    if a_map.nrows() != n || a_map.ncols() != n || b_shift.dim() != n {
        return Err(NefError::invalid(format!("affine map must be {n}x{n} with a shift of length {n}")));
    }
    let a_inv = a_map
        .clone()
        .try_inverse()
        .filter(|_| a_map.determinant().abs() > 1e-300)
        .ok_or_else(|| NefError::invalid("affine map is singular"))?;
    let shift = DVector::from_column_slice(b_shift);
    if *a_map == DMatrix::identity(n, n) && b_shift.is_zero() {
        return Ok(fam.clone());
    }
    let cumulant = match fam.cumulant() {
        Some(k) => Some(Arc::new(AffineCumulant::affine(Arc::clone(k), a_map.clone(), shift.clone())?) as CumulantFamily),
        None => None,
    };
    let variance = match fam.variance() {
        Some(v) => {
            let off = -(&a_inv * &shift);
            let dom = Domain::preimage(v.mean_domain().clone(), rows(&a_inv), off.as_slice().to_vec())?;
            Some(transform_variance(v, a_map, &a_inv, &shift, 1.0, dom)?)
        }
        None => None,
    };
    let mut provenance = fam.provenance.clone();
    provenance.base_family.get_or_insert_with(|| fam.name.clone());
    provenance.affine_map = Some(rows(a_map));
    provenance.affine_shift = Some(b_shift.to_vec());
    FamilyDescriptor::new(format!("affine({})", fam.name), cumulant, variance, provenance)
}

/// Convolution power: `V_lam(m) = lam V(m / lam)` on `lam M_F`, `k_lam = lam k`.
pub fn jorgensen_power(fam: &FamilyDescriptor, lam: f64) -> Result<FamilyDescriptor> {
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(NefError::invalid(format!("power must be positive, got {lam}")));
    }
    if lam == 1.0 {
        return Ok(fam.clone());
    }
    let n = fam.dim();
    let cumulant = match fam.cumulant() {
        Some(k) => Some(Arc::new(AffineCumulant::power(Arc::clone(k), lam)?) as CumulantFamily),
        None => None,
    };
    let variance = match fam.variance() {
        Some(v) => {
            let a_inv = DMatrix::identity(n, n) / lam;
            let dom = Domain::preimage(v.mean_domain().clone(), rows(&a_inv), vec![0.0; n])?;
            Some(transform_variance(v, &DMatrix::identity(n, n), &a_inv, &DVector::zeros(n), lam, dom)?)
        }
        None => None,
    };
    let mut provenance = fam.provenance.clone();
    provenance.base_family.get_or_insert_with(|| fam.name.clone());
    provenance.power = Some(provenance.power.unwrap_or(1.0) * lam);
    FamilyDescriptor::new(format!("power({}, {lam})", fam.name), cumulant, variance, provenance)
}
