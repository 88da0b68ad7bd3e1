//! Closed-form cumulant functions of the named real families, products of
//! them, and families reconstructed from a variance polynomial alone.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::descriptor::CumulantSpec;
use crate::error::{NefError, Result};
use crate::nef::cumulant::check_member;
use crate::nef::{Cumulant, CumulantEval, CumulantFamily, Domain, FamilyDescriptor, Provenance, VarianceModel, Window};
use crate::poly::{PolyMatrix, Polynomial};
use crate::quadrature::adaptive_simpson;

/// Named real parameters of a catalog entry.
pub type Params = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Normal,
    Poisson,
    Gamma,
    Binomial,
    NegativeBinomial,
    HyperbolicCosine,
    InverseGaussian,
}

/// Registry row: id, optional shape parameter and its default.
#[derive(Clone, Copy, Debug)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub kind: Kind,
    pub param: Option<&'static str>,
    pub default: f64,
    pub summary: &'static str,
}

pub const ENTRIES: [CatalogEntry; 7] = [
    CatalogEntry {
        id: "normal",
        kind: Kind::Normal,
        param: Some("variance"),
        default: 1.0,
        summary: "k = s θ²/2 on ℝ, V(m) = s",
    },
    CatalogEntry {
        id: "poisson",
        kind: Kind::Poisson,
        param: None,
        default: 1.0,
        summary: "k = exp θ on ℝ, V(m) = m on (0, ∞)",
    },
    CatalogEntry {
        id: "gamma",
        kind: Kind::Gamma,
        param: Some("shape"),
        default: 1.0,
        summary: "k = -p log(-θ) on θ < 0, V(m) = m²/p on (0, ∞)",
    },
    CatalogEntry {
        id: "binomial",
        kind: Kind::Binomial,
        param: Some("trials"),
        default: 1.0,
        summary: "k = N log(1 + exp θ) on ℝ, V(m) = m - m²/N on (0, N)",
    },
    CatalogEntry {
        id: "negative-binomial",
        kind: Kind::NegativeBinomial,
        param: Some("shape"),
        default: 1.0,
        summary: "k = -r log(1 - exp θ) on θ < 0, V(m) = m + m²/r on (0, ∞)",
    },
    CatalogEntry {
        id: "hyperbolic-cosine",
        kind: Kind::HyperbolicCosine,
        param: Some("shape"),
        default: 1.0,
        summary: "k = -p log cos θ on |θ| < π/2, V(m) = p + m²/p on ℝ",
    },
    CatalogEntry {
        id: "inverse-gaussian",
        kind: Kind::InverseGaussian,
        param: Some("shape"),
        default: 1.0,
        summary: "k = -p sqrt(-2θ) on θ < 0, V(m) = m³/p² on (0, ∞)",
    },
];

pub fn ids() -> Vec<&'static str> {
    ENTRIES.iter().map(|e| e.id).collect()
}

pub fn entry(id: &str) -> Result<&'static CatalogEntry> {
    ENTRIES
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| NefError::NotFound(format!("no catalog family `{id}` (known: {})", ids().join(", "))))
}

/// Closed-form cumulant of one of the named one-dimensional families.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    kind: Kind,
    param: f64,
    theta_domain: Domain,
    mean_domain: Domain,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl ClosedForm {
    pub fn new(kind: Kind, param: f64) -> Result<Self> {
        validate_param(kind, param)?;
        let (lo, hi, win): (Option<f64>, Option<f64>, (f64, f64)) = match kind {
            Kind::Normal | Kind::Poisson | Kind::Binomial => (None, None, (-3.0, 3.0)),
            Kind::Gamma | Kind::NegativeBinomial => (None, Some(0.0), (-3.0, -0.2)),
            Kind::HyperbolicCosine => (Some(-FRAC_PI_2), Some(FRAC_PI_2), (-1.2, 1.2)),
            Kind::InverseGaussian => (None, Some(0.0), (-3.0, -0.05)),
        };
        let win = if kind == Kind::Poisson { (-2.0, 2.0) } else { win };
        let theta_domain = Domain::interval(lo, hi, win)?;
        let (mlo, mhi) = match kind {
            Kind::Normal | Kind::HyperbolicCosine => (None, None),
            Kind::Binomial => (Some(0.0), Some(param)),
            _ => (Some(0.0), None),
        };
        let mut cf = ClosedForm {
            kind,
            param,
            theta_domain: theta_domain.clone(),
            mean_domain: theta_domain,
        };
        // every k' here is increasing, so the mean window is the image of the θ window
        let mwin = (cf.derivs(win.0).1, cf.derivs(win.1).1);
        cf.mean_domain = Domain::interval(mlo, mhi, mwin)?;
        Ok(cf)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// `(k, k', k'')` at `t`, assuming `t` is in the domain.
    fn derivs(&self, t: f64) -> (f64, f64, f64) {
        let p = self.param;
        match self.kind {
            Kind::Normal => (0.5 * p * t * t, p * t, p),
            Kind::Poisson => {
                let e = t.exp();
                (e, e, e)
            }
            Kind::Gamma => (-p * (-t).ln(), -p / t, p / (t * t)),
            Kind::Binomial => {
                let softplus = t.max(0.0) + (-t.abs()).exp().ln_1p();
                let s = sigmoid(t);
                (p * softplus, p * s, p * s * (1.0 - s))
            }
            Kind::NegativeBinomial => {
                let one_minus = -t.exp_m1();
                let e = t.exp();
                (-p * (-e).ln_1p(), p * e / one_minus, p * e / (one_minus * one_minus))
            }
            Kind::HyperbolicCosine => {
                let c = t.cos();
                (-p * c.ln(), p * t.tan(), p / (c * c))
            }
            Kind::InverseGaussian => {
                let u = -2.0 * t;
                (-p * u.sqrt(), p / u.sqrt(), p / (u * u.sqrt()))
            }
        }
    }

    /// The matching variance polynomial, coefficients in increasing degree.
    pub fn variance_coeffs(&self) -> Vec<f64> {
        let p = self.param;
        match self.kind {
            Kind::Normal => vec![p],
            Kind::Poisson => vec![0.0, 1.0],
            Kind::Gamma => vec![0.0, 0.0, 1.0 / p],
            Kind::Binomial => vec![0.0, 1.0, -1.0 / p],
            Kind::NegativeBinomial => vec![0.0, 1.0, 1.0 / p],
            Kind::HyperbolicCosine => vec![p, 0.0, 1.0 / p],
            Kind::InverseGaussian => vec![0.0, 0.0, 0.0, 1.0 / (p * p)],
        }
    }
}

impl Cumulant for ClosedForm {
    fn dim(&self) -> usize {
        1
    }

    fn theta_domain(&self) -> &Domain {
        &self.theta_domain
    }

    fn mean_domain(&self) -> &Domain {
        &self.mean_domain
    }

    fn eval(&self, theta: &[f64]) -> Result<CumulantEval> {
        check_member(&self.theta_domain, theta)?;
        let (k, g, h) = self.derivs(theta[0]);
        Ok(CumulantEval {
            value: k,
            gradient: DVector::from_element(1, g),
            hessian: DMatrix::from_element(1, 1, h),
        })
    }

    fn inverse_hint(&self, m: &[f64]) -> Option<Vec<f64>> {
        let (p, x) = (self.param, m[0]);
        if !self.mean_domain.contains(m) {
            return None;
        }
        let t = match self.kind {
            Kind::Normal => x / p,
            Kind::Poisson => x.ln(),
            Kind::Gamma => -p / x,
            Kind::Binomial => (x / (p - x)).ln(),
            Kind::NegativeBinomial => (x / (p + x)).ln(),
            Kind::HyperbolicCosine => (x / p).atan(),
            Kind::InverseGaussian => -p * p / (2.0 * x * x),
        };
        t.is_finite().then(|| vec![t])
    }

    fn spec(&self) -> Option<CumulantSpec> {
        let p = self.param;
        Some(match self.kind {
            Kind::Normal => CumulantSpec::Normal { variance: p },
            Kind::Poisson => CumulantSpec::Poisson {},
            Kind::Gamma => CumulantSpec::Gamma { shape: p },
            Kind::Binomial => CumulantSpec::Binomial { trials: p },
            Kind::NegativeBinomial => CumulantSpec::NegativeBinomial { shape: p },
            Kind::HyperbolicCosine => CumulantSpec::HyperbolicCosine { shape: p },
            Kind::InverseGaussian => CumulantSpec::InverseGaussian { shape: p },
        })
    }
}

fn validate_param(kind: Kind, p: f64) -> Result<()> {
    if !p.is_finite() {
        return Err(NefError::invalid(format!("parameter must be finite, got {p}")));
    }
    let ok = match kind {
        Kind::Poisson => p == 1.0,
        Kind::Binomial => p >= 1.0 && p.fract() == 0.0,
        Kind::NegativeBinomial => p >= 1.0,
        _ => p > 0.0,
    };
    if ok {
        Ok(())
    } else {
        let need = match kind {
            Kind::Binomial => "an integer >= 1",
            Kind::NegativeBinomial => "a real >= 1",
            Kind::Poisson => "absent",
            _ => "positive",
        };
        Err(NefError::invalid(format!("parameter for {kind:?} must be {need}, got {p}")))
    }
}

/// Descriptor for a catalog id with optional named parameters.
pub fn build(id: &str, params: &Params) -> Result<FamilyDescriptor> {
    let e = entry(id)?;
    for key in params.keys() {
        if Some(key.as_str()) != e.param {
            return Err(NefError::invalid(format!(
                "`{id}` does not take parameter `{key}`{}",
                e.param.map(|p| format!(" (expected `{p}`)")).unwrap_or_default()
            )));
        }
    }
    let value = e.param.and_then(|p| params.get(p).copied()).unwrap_or(e.default);
    build_kind(e, value)
}

fn build_kind(e: &CatalogEntry, value: f64) -> Result<FamilyDescriptor> {
    let cf = ClosedForm::new(e.kind, value)?;
    let matrix = PolyMatrix::from_fn(1, |_, _| Polynomial::univariate(&cf.variance_coeffs()));
    let variance = VarianceModel::polynomial(matrix, cf.mean_domain.clone())?;
    let name = match e.param {
        Some(p) if value != e.default => format!("{}({p}={value})", e.id),
        _ => e.id.to_string(),
    };
    FamilyDescriptor::new(
        name,
        Some(Arc::new(cf) as CumulantFamily),
        Some(variance),
        Provenance::default(),
    )
}

/// Descriptor for a closed-form kind with an explicit parameter.
pub(crate) fn build_with(kind: Kind, value: f64) -> Result<FamilyDescriptor> {
    let e = ENTRIES.iter().find(|e| e.kind == kind).expect("every kind has an entry");
    build_kind(e, value)
}

/// `k(θ) = Σ k_i(θ_i)` over one-dimensional parts.
#[derive(Debug)]
pub struct ProductCumulant {
    parts: Vec<CumulantFamily>,
    theta_domain: Domain,
    mean_domain: Domain,
}

impl ProductCumulant {
    pub fn new(parts: Vec<CumulantFamily>) -> Result<Self> {
        if parts.is_empty() {
            return Err(NefError::invalid("product of no families"));
        }
        if parts.iter().any(|p| p.dim() != 1) {
            return Err(NefError::invalid("product parts must be one-dimensional"));
        }
        let theta_domain = Domain::product(parts.iter().map(|p| p.theta_domain().clone()).collect())?;
        let mean_domain = Domain::product(parts.iter().map(|p| p.mean_domain().clone()).collect())?;
        Ok(ProductCumulant {
            parts,
            theta_domain,
            mean_domain,
        })
    }
}

impl Cumulant for ProductCumulant {
    fn dim(&self) -> usize {
        self.parts.len()
    }

    fn theta_domain(&self) -> &Domain {
        &self.theta_domain
    }

    fn mean_domain(&self) -> &Domain {
        &self.mean_domain
    }

    fn eval(&self, theta: &[f64]) -> Result<CumulantEval> {
        check_member(&self.theta_domain, theta)?;
        let n = self.parts.len();
        let mut out = CumulantEval {
            value: 0.0,
            gradient: DVector::zeros(n),
            hessian: DMatrix::zeros(n, n),
        };
        for (i, p) in self.parts.iter().enumerate() {
            let ev = p.eval(&theta[i..=i])?;
            out.value += ev.value;
            out.gradient[i] = ev.gradient[0];
            out.hessian[(i, i)] = ev.hessian[(0, 0)];
        }
        Ok(out)
    }

    fn closed_form(&self) -> bool {
        self.parts.iter().all(|p| p.closed_form())
    }

    fn inverse_hint(&self, m: &[f64]) -> Option<Vec<f64>> {
        self.parts
            .iter()
            .zip(m)
            .map(|(p, x)| p.inverse_hint(std::slice::from_ref(x)).map(|h| h[0]))
            .collect()
    }

    fn spec(&self) -> Option<CumulantSpec> {
        let parts = self.parts.iter().map(|p| p.spec()).collect::<Option<Vec<_>>>()?;
        Some(CumulantSpec::Product { parts })
    }
}

/// Product of one-dimensional families: block-diagonal variance, product
/// domains.
pub fn product_family(parts: &[FamilyDescriptor]) -> Result<FamilyDescriptor> {
    if parts.is_empty() {
        return Err(NefError::invalid("product_family needs at least one part"));
    }
    let n = parts.len();
    let mut cumulants = Vec::with_capacity(n);
    for p in parts {
        if p.dim() != 1 {
            return Err(NefError::invalid(format!("part `{}` is not one-dimensional", p.name)));
        }
        let k = p
            .cumulant()
            .ok_or_else(|| NefError::invalid(format!("part `{}` has no cumulant function", p.name)))?;
        cumulants.push(Arc::clone(k));
    }
    let cumulant = ProductCumulant::new(cumulants)?;
    let mean_domain = Domain::product(parts.iter().map(|p| p.mean_domain().clone()).collect())?;
    let polys: Option<Vec<&Polynomial<f64>>> = parts
        .iter()
        .map(|p| p.variance().and_then(|v| v.polynomial_matrix()).map(|m| m.get(0, 0)))
        .collect();
    let variance = match polys {
        Some(polys) => {
            let lifted = polys
                .iter()
                .enumerate()
                .map(|(i, v)| v.substitute(&[Polynomial::variable(n, i)]))
                .collect::<Result<Vec<_>>>()?;
            let matrix = PolyMatrix::from_fn(n, |i, j| {
                if i == j {
                    lifted[i].clone()
                } else {
                    Polynomial::zero(n)
                }
            });
            Some(VarianceModel::polynomial(matrix, mean_domain)?)
        }
        None if parts.iter().all(|p| p.variance().is_some()) => {
            let models: Vec<VarianceModel> = parts.iter().map(|p| p.variance().unwrap().clone()).collect();
            Some(VarianceModel::numeric(
                "product",
                n,
                move |m| {
                    DMatrix::from_fn(n, n, |i, j| {
                        if i == j {
                            models[i].eval(&m[i..=i]).map(|v| v[(0, 0)]).unwrap_or(f64::NAN)
                        } else {
                            0.0
                        }
                    })
                },
                mean_domain,
            )?)
        }
        None => None,
    };
    let names: Vec<&str> = parts.iter().map(|p| p.name.as_str()).collect();
    FamilyDescriptor::new(
        format!("product({})", names.join(", ")),
        Some(Arc::new(cumulant) as CumulantFamily),
        variance,
        Provenance::default(),
    )
}

/// One-dimensional family reconstructed from a positive variance
/// polynomial: `ψ(m) = ∫_{m*}^m ds / V(s)` and `k(ψ(m)) = ∫_{m*}^m s ds / V(s)`.
#[derive(Clone)]
pub struct FromVariance {
    inner: Arc<VarianceIntegrals>,
    theta_domain: Domain,
    mean_domain: Domain,
}

impl fmt::Debug for FromVariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FromVariance({:?})", self.inner.coeffs)
    }
}

struct VarianceIntegrals {
    coeffs: Vec<f64>,
    poly: Polynomial<f64>,
    lower: Option<f64>,
    upper: Option<f64>,
    window: (f64, f64),
    anchor: f64,
}

const QUAD_REL: f64 = 1e-13;
const QUAD_ABS: f64 = 1e-15;

impl VarianceIntegrals {
    fn v(&self, m: f64) -> f64 {
        self.poly.eval_f64(&[m])
    }

    fn integral(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        adaptive_simpson(f, a, b, QUAD_REL, QUAD_ABS)
            .map_err(|e| NefError::invalid(format!("integral of 1/V on [{a}, {b}]: {e}")))
    }

    fn psi_between(&self, a: f64, b: f64) -> Result<f64> {
        self.integral(|s| 1.0 / self.v(s), a, b)
    }

    fn kpsi(&self, m: f64) -> Result<f64> {
        self.integral(|s| s / self.v(s), self.anchor, m)
    }

    fn in_mean_domain(&self, m: f64) -> bool {
        m.is_finite() && self.lower.is_none_or(|l| m > l) && self.upper.is_none_or(|u| m < u)
    }

    /// A bracket `(lo, ψ(lo), hi, ψ(hi))` with `ψ(lo) <= θ <= ψ(hi)`.
    fn bracket(&self, theta: f64) -> Result<(f64, f64, f64, f64)> {
        let outside = || NefError::invalid(format!("θ = {theta} is outside the canonical domain"));
        let (mut lo, mut hi) = self.window;
        let mut psi_lo = self.psi_between(self.anchor, lo)?;
        let mut psi_hi = self.psi_between(self.anchor, hi)?;
        let mut steps = 0;
        while psi_lo > theta {
            let next = match self.lower {
                Some(b) => b + 0.25 * (lo - b),
                None => lo - 2.0 * (hi - lo),
            };
            if !self.in_mean_domain(next) || next == lo || steps > 120 {
                return Err(outside());
            }
            psi_lo += self.psi_between(lo, next)?;
            lo = next;
            steps += 1;
        }
        steps = 0;
        while psi_hi < theta {
            let next = match self.upper {
                Some(b) => b - 0.25 * (b - hi),
                None => hi + 2.0 * (hi - lo),
            };
            if !self.in_mean_domain(next) || next == hi || steps > 120 {
                return Err(outside());
            }
            psi_hi += self.psi_between(hi, next)?;
            hi = next;
            steps += 1;
        }
        Ok((lo, psi_lo, hi, psi_hi))
    }

    /// Solves `ψ(m) = θ` by safeguarded Newton inside a bracket.
    fn mean_of(&self, theta: f64) -> Result<f64> {
        let (mut lo, psi_lo, mut hi, psi_hi) = self.bracket(theta)?;
        if psi_lo == theta {
            return Ok(lo);
        }
        if psi_hi == theta {
            return Ok(hi);
        }
        // secant start, then Newton with ψ' = 1/V
        let mut m = lo + (theta - psi_lo) / (psi_hi - psi_lo) * (hi - lo);
        if !(m > lo && m < hi) {
            m = 0.5 * (lo + hi);
        }
        let mut psi_m = self.psi_between(self.anchor, m)?;
        for _ in 0..200 {
            let f = psi_m - theta;
            // ψ is accumulated piecewise by quadrature, so f stalls a few
            // ulps above zero
            if f.abs() <= 64.0 * f64::EPSILON * theta.abs().max(1.0) {
                return Ok(m);
            }
            if f > 0.0 {
                hi = m;
            } else {
                lo = m;
            }
            let mut next = m - f * self.v(m);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - m).abs() <= 4.0 * f64::EPSILON * m.abs().max(1.0) || hi - lo <= f64::EPSILON * m.abs() {
                return Ok(next);
            }
            psi_m += self.psi_between(m, next)?;
            m = next;
        }
        if (psi_m - theta).abs() <= 1e-12 * theta.abs().max(1.0) {
            return Ok(m);
        }
        Err(NefError::Convergence {
            best: vec![m],
            residual: (psi_m - theta).abs(),
            iterations: 200,
        })
    }
}

impl FromVariance {
    /// `coeffs` are the coefficients of `V` in increasing degree; `V` must
    /// be positive on the sampling window, which lies inside `(lower, upper)`.
    pub fn new(coeffs: &[f64], lower: Option<f64>, upper: Option<f64>, window: (f64, f64), anchor: f64) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(NefError::invalid("variance coefficients must be finite and nonempty"));
        }
        let mean_domain = Domain::interval(lower, upper, window)?;
        if !(anchor >= window.0 && anchor <= window.1) {
            return Err(NefError::invalid(format!("anchor {anchor} must lie in the window")));
        }
        let poly = Polynomial::univariate(coeffs);
        let inner = VarianceIntegrals {
            coeffs: coeffs.to_vec(),
            poly,
            lower,
            upper,
            window,
            anchor,
        };
        for m in Window::new(vec![window.0], vec![window.1])?.grid(101) {
            if !(inner.v(m[0]) > 0.0) {
                return Err(NefError::Validation(format!("V({}) is not positive", m[0])));
            }
        }
        let theta_window = Window::new(
            vec![inner.psi_between(anchor, window.0)?],
            vec![inner.psi_between(anchor, window.1)?],
        )?;
        let inner = Arc::new(inner);
        let probe = Arc::clone(&inner);
        let theta_domain = Domain::implicit(
            "ψ(M_F)",
            theta_window,
            Arc::new(move |t: &[f64]| probe.bracket(t[0]).is_ok()),
        );
        Ok(FromVariance {
            inner,
            theta_domain,
            mean_domain,
        })
    }

    pub fn variance_polynomial(&self) -> &Polynomial<f64> {
        &self.inner.poly
    }
}

impl Cumulant for FromVariance {
    fn dim(&self) -> usize {
        1
    }

    fn theta_domain(&self) -> &Domain {
        &self.theta_domain
    }

    fn mean_domain(&self) -> &Domain {
        &self.mean_domain
    }

    fn eval(&self, theta: &[f64]) -> Result<CumulantEval> {
        if theta.len() != 1 {
            return Err(NefError::invalid("reconstructed families are one-dimensional"));
        }
        let m = self.inner.mean_of(theta[0])?;
        Ok(CumulantEval {
            value: self.inner.kpsi(m)?,
            gradient: DVector::from_element(1, m),
            hessian: DMatrix::from_element(1, 1, self.inner.v(m)),
        })
    }

    fn closed_form(&self) -> bool {
        false
    }

    fn spec(&self) -> Option<CumulantSpec> {
        let i = &self.inner;
        Some(CumulantSpec::FromVariance {
            coefficients: i.coeffs.clone(),
            lower: i.lower,
            upper: i.upper,
            window: [i.window.0, i.window.1],
            anchor: i.anchor,
        })
    }
}

/// Family with the given variance polynomial; the variance model is
/// polynomial when the degree is at most 3 and numeric otherwise.
pub fn from_variance(
    name: impl Into<String>,
    coeffs: &[f64],
    lower: Option<f64>,
    upper: Option<f64>,
    window: (f64, f64),
    anchor: f64,
) -> Result<FamilyDescriptor> {
    let k = FromVariance::new(coeffs, lower, upper, window, anchor)?;
    let poly = k.variance_polynomial().clone();
    let mean_domain = k.mean_domain.clone();
    let variance = if poly.degree() <= crate::nef::MAX_VARIANCE_DEGREE {
        VarianceModel::polynomial(PolyMatrix::from_fn(1, |_, _| poly.clone()), mean_domain)?
    } else {
        VarianceModel::numeric(
            format!("V = {poly}"),
            1,
            move |m| DMatrix::from_element(1, 1, poly.eval_f64(m)),
            mean_domain,
        )?
    };
    FamilyDescriptor::new(name, Some(Arc::new(k) as CumulantFamily), Some(variance), Provenance::default())
}

/// `V(m) = m⁴` on `(0, ∞)`: a valid family outside the cubic class.
pub fn quartic() -> Result<FamilyDescriptor> {
    from_variance("quartic", &[0.0, 0.0, 0.0, 0.0, 1.0], Some(0.0), None, (0.5, 3.0), 1.0)
}
