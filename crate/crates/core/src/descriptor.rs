//! JSON form of family descriptors.
//!
//! ```json
//! {
//!   "name": "poisson",
//!   "dimension": 1,
//!   "cumulant": {"kind": "poisson"},
//!   "variance": {
//!     "entries": [{"row": 0, "col": 0, "terms": [{"exponents": [1], "coeff": 1.0}]}],
//!     "mean_domain": {"kind": "box", "lower": [0.0], "upper": [null], "window": {...}}
//!   },
//!   "provenance": {}
//! }
//! ```
//!
//! Rows and columns are zero-based. Only the upper triangle needs to be
//! given; if both `(i, j)` and `(j, i)` appear they must be equal.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, Kind};
use crate::cubic::{self, CubicConstructionParams};
use crate::error::{NefError, Result};
use crate::legendre;
use crate::nef::{affine_image, jorgensen_power, Covector, DomainRepr, FamilyDescriptor, Provenance, VarianceModel, Vector};
use crate::poly::{PolyMatrix, Polynomial};

fn one() -> f64 {
    1.0
}

/// Serializable recipe for a cumulant function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CumulantSpec {
    Normal {
        #[serde(default = "one")]
        variance: f64,
    },
    Poisson {},
    Gamma {
        #[serde(default = "one")]
        shape: f64,
    },
    Binomial {
        #[serde(default = "one")]
        trials: f64,
    },
    NegativeBinomial {
        #[serde(default = "one")]
        shape: f64,
    },
    HyperbolicCosine {
        #[serde(default = "one")]
        shape: f64,
    },
    InverseGaussian {
        #[serde(default = "one")]
        shape: f64,
    },
    Product {
        parts: Vec<CumulantSpec>,
    },
    /// `θ -> k(A^T θ) + <θ, shift>`.
    Affine {
        base: Box<CumulantSpec>,
        matrix: Vec<Vec<f64>>,
        shift: Vec<f64>,
    },
    /// `θ -> λ k(θ)`.
    Power {
        base: Box<CumulantSpec>,
        lambda: f64,
    },
    CubicTransform {
        base: Box<CumulantSpec>,
        beta: Vec<f64>,
        #[serde(default)]
        k0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda0: Option<Vec<f64>>,
    },
    /// One-dimensional family rebuilt from `V(m) = Σ coefficients[i] m^i`.
    FromVariance {
        coefficients: Vec<f64>,
        lower: Option<f64>,
        upper: Option<f64>,
        window: [f64; 2],
        anchor: f64,
    },
}

impl CumulantSpec {
    /// Builds the family, attaching the matching variance model whenever
    /// one is known in closed form.
    pub fn build(&self) -> Result<FamilyDescriptor> {
        match self {
            CumulantSpec::Normal { variance } => catalog::build_with(Kind::Normal, *variance),
            CumulantSpec::Poisson {} => catalog::build_with(Kind::Poisson, 1.0),
            CumulantSpec::Gamma { shape } => catalog::build_with(Kind::Gamma, *shape),
            CumulantSpec::Binomial { trials } => catalog::build_with(Kind::Binomial, *trials),
            CumulantSpec::NegativeBinomial { shape } => catalog::build_with(Kind::NegativeBinomial, *shape),
            CumulantSpec::HyperbolicCosine { shape } => catalog::build_with(Kind::HyperbolicCosine, *shape),
            CumulantSpec::InverseGaussian { shape } => catalog::build_with(Kind::InverseGaussian, *shape),
            CumulantSpec::Product { parts } => {
                let parts = parts.iter().map(|p| p.build()).collect::<Result<Vec<_>>>()?;
                catalog::product_family(&parts)
            }
            CumulantSpec::Affine { base, matrix, shift } => {
                let fam = base.build()?;
                let n = fam.dim();
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(NefError::invalid(format!("affine matrix must be {n}x{n}")));
                }
                let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                affine_image(&fam, &a, &Vector::new(shift.clone())?)
            }
            CumulantSpec::Power { base, lambda } => jorgensen_power(&base.build()?, *lambda),
            CumulantSpec::CubicTransform { base, beta, k0, lambda0 } => {
                let fam = base.build()?;
                let lambda0 = match lambda0 {
                    Some(l) => Vector::new(l.clone())?,
                    None => Vector::zeros(fam.dim()),
                };
                let params = CubicConstructionParams::new(Covector::new(beta.clone())?, *k0, lambda0)?;
                cubic::cubic_family(&fam, &params)
            }
            CumulantSpec::FromVariance {
                coefficients,
                lower,
                upper,
                window,
                anchor,
            } => catalog::from_variance(
                "from-variance",
                coefficients,
                *lower,
                *upper,
                (window[0], window[1]),
                *anchor,
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryJson {
    pub row: usize,
    pub col: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceJson {
    pub entries: Vec<EntryJson>,
    pub mean_domain: DomainRepr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorJson {
    pub name: String,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulant: Option<CumulantSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceJson>,
    #[serde(default)]
    pub provenance: Provenance,
}

/// Parses and validates a descriptor. Schema problems are reported as
/// [`NefError::Parse`] with the JSON path; violated invariants as
/// [`NefError::Validation`].
pub fn parse_descriptor(text: &str) -> Result<FamilyDescriptor> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let json: DescriptorJson = serde_path_to_error::deserialize(de).map_err(|e| NefError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    from_json(&json)
}

pub fn from_json(json: &DescriptorJson) -> Result<FamilyDescriptor> {
    let n = json.dimension;
    if n == 0 {
        return Err(NefError::Validation("dimension must be positive".into()));
    }
    let built = json.cumulant.as_ref().map(|c| c.build()).transpose().map_err(as_validation)?;
    if let Some(b) = &built {
        if b.dim() != n {
            return Err(NefError::Validation(format!(
                "cumulant has dimension {} but the descriptor says {n}",
                b.dim()
            )));
        }
    }
    let variance = match &json.variance {
        Some(v) => Some(variance_from_json(v, n)?),
        None => built.as_ref().and_then(|b| b.variance().cloned()),
    };
    let fam = FamilyDescriptor::new(
        json.name.clone(),
        built.as_ref().and_then(|b| b.cumulant().cloned()),
        variance,
        json.provenance.clone(),
    )?;
    if json.variance.is_some() && fam.cumulant().is_some() {
        check_coherence(&fam)?;
    }
    Ok(fam)
}

fn as_validation(e: NefError) -> NefError {
    match e {
        NefError::InvalidArgument(m) => NefError::Validation(m),
        other => other,
    }
}

fn variance_from_json(v: &VarianceJson, n: usize) -> Result<VarianceModel> {
    let domain = v.mean_domain.to_domain().map_err(as_validation)?;
    if domain.dim() != n {
        return Err(NefError::Validation(format!(
            "mean domain has dimension {} but the descriptor says {n}",
            domain.dim()
        )));
    }
    let mut given: BTreeMap<(usize, usize), Polynomial<f64>> = BTreeMap::new();
    for (idx, e) in v.entries.iter().enumerate() {
        if e.row >= n || e.col >= n {
            return Err(NefError::Validation(format!(
                "variance.entries[{idx}]: position ({}, {}) outside a {n}x{n} matrix",
                e.row, e.col
            )));
        }
        let terms = e
            .terms
            .iter()
            .map(|t| {
                if t.exponents.len() != n {
                    return Err(NefError::Validation(format!(
                        "variance.entries[{idx}]: exponent list {:?} does not have length {n}",
                        t.exponents
                    )));
                }
                if !t.coeff.is_finite() {
                    return Err(NefError::Validation(format!("variance.entries[{idx}]: coefficient is not finite")));
                }
                Ok((t.exponents.clone(), t.coeff))
            })
            .collect::<Result<Vec<_>>>()?;
        let p = Polynomial::from_terms(n, terms).map_err(as_validation)?;
        if given.insert((e.row, e.col), p).is_some() {
            return Err(NefError::Validation(format!(
                "variance entry ({}, {}) is given twice",
                e.row, e.col
            )));
        }
    }
    let matrix = PolyMatrix::from_fn(n, |i, j| {
        given
            .get(&(i, j))
            .or_else(|| given.get(&(j, i)))
            .cloned()
            .unwrap_or_else(|| Polynomial::zero(n))
    });
    VarianceModel::polynomial(matrix, domain)
}

/// Compares the variance model with `k''(ψ(m))` on a coarse grid.
fn check_coherence(fam: &FamilyDescriptor) -> Result<()> {
    let v = fam.require_variance()?;
    let points = if fam.dim() == 1 { 7 } else { 3 };
    for m in fam.mean_domain().grid(points, 0.1) {
        let from_k = legendre::variance_at_cumulant(fam, &m)?;
        let stated = v.eval(&m)?;
        let scale = from_k.abs().max().max(1e-300);
        let diff = (&from_k - &stated).abs().max() / scale;
        if diff > 1e-6 {
            return Err(NefError::Validation(format!(
                "variance model disagrees with the cumulant at m = {m:?} (relative difference {diff:e})"
            )));
        }
    }
    Ok(())
}

pub fn to_json(fam: &FamilyDescriptor) -> Result<DescriptorJson> {
    let cumulant = match fam.cumulant() {
        Some(k) => Some(
            k.spec()
                .ok_or_else(|| NefError::invalid(format!("cumulant of `{}` has no serializable form", fam.name)))?,
        ),
        None => None,
    };
    let variance = match fam.variance() {
        Some(v) => {
            let p = v
                .polynomial_matrix()
                .ok_or_else(|| NefError::invalid("numeric variance models cannot be written as JSON"))?;
            let entries = p
                .entries()
                .filter(|(i, j, e)| i <= j && !e.is_zero())
                .map(|(i, j, e)| EntryJson {
                    row: i,
                    col: j,
                    terms: e
                        .terms()
                        .map(|(ex, c)| TermJson {
                            exponents: ex.clone(),
                            coeff: *c,
                        })
                        .collect(),
                })
                .collect();
            Some(VarianceJson {
                entries,
                mean_domain: DomainRepr::from_domain(v.mean_domain())?,
            })
        }
        None => None,
    };
    Ok(DescriptorJson {
        name: fam.name.clone(),
        dimension: fam.dim(),
        cumulant,
        variance,
        provenance: fam.provenance.clone(),
    })
}

pub fn serialize_descriptor(fam: &FamilyDescriptor) -> Result<String> {
    serde_json::to_string_pretty(&to_json(fam)?).map_err(|e| NefError::Internal(e.to_string()))
}
