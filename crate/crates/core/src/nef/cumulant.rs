use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::domain::Domain;
use crate::error::{NefError, Result};

/// `k`, `k'` and `k''` at one canonical parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// A strictly convex cumulant function on an open domain of `E*`.
pub trait Cumulant: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn theta_domain(&self) -> &Domain;

    /// Image of the canonical domain under the mean map.
    fn mean_domain(&self) -> &Domain;

    fn eval(&self, theta: &[f64]) -> Result<CumulantEval>;

    fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.eval(theta)?.value)
    }

    fn gradient(&self, theta: &[f64]) -> Result<DVector<f64>> {
        Ok(self.eval(theta)?.gradient)
    }

    fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.eval(theta)?.hessian)
    }

    /// Whether derivatives are exact rather than finite differences.
    fn closed_form(&self) -> bool {
        true
    }

    /// A good starting point for solving `k'(θ) = m`, when the family can
    /// compute one cheaply.
    fn inverse_hint(&self, _m: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Serializable description, when one exists.
    fn spec(&self) -> Option<crate::descriptor::CumulantSpec> {
        None
    }
}

pub type CumulantFamily = Arc<dyn Cumulant>;

pub(crate) fn check_member(domain: &Domain, theta: &[f64]) -> Result<()> {
    if theta.len() != domain.dim() {
        return Err(NefError::invalid(format!(
            "point of dimension {} for a domain of dimension {}",
            theta.len(),
            domain.dim()
        )));
    }
    if !domain.contains(theta) {
        return Err(NefError::invalid(format!("{theta:?} is outside the domain")));
    }
    Ok(())
}

fn fd_step(x: f64, base: f64) -> f64 {
    base * x.abs().max(1.0)
}

/// Central difference with one Richardson level,
/// `(4 D(h/2) - D(h)) / 3`.
fn richardson<F>(f: &F, x: &[f64], i: usize, h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let central = |h: f64| -> Result<f64> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        Ok((f(&xp)? - f(&xm)?) / (2.0 * h))
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Gradient of `f` by Richardson-extrapolated central differences with
/// step `cbrt(eps) * max(1, |x_i|)`.
pub fn numeric_gradient<F>(f: F, x: &[f64]) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let base = f64::EPSILON.cbrt();
    let g = (0..x.len())
        .map(|i| richardson(&f, x, i, fd_step(x[i], base)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(g))
}

/// Jacobian of a vector map, column `j` holding `d g / d x_j`.
pub fn numeric_jacobian<G>(g: G, x: &[f64]) -> Result<DMatrix<f64>>
where
    G: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let n = x.len();
    let base = f64::EPSILON.cbrt();
    let probe = g(x)?;
    let mut jac = DMatrix::zeros(probe.len(), n);
    for j in 0..n {
        let h = fd_step(x[j], base);
        let central = |h: f64| -> Result<DVector<f64>> {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            Ok((g(&xp)? - g(&xm)?) / (2.0 * h))
        };
        let col = (central(0.5 * h)? * 4.0 - central(h)?) / 3.0;
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Hessian of a scalar function from function values only, second
/// differences with step `eps^(1/4) * max(1, |x_i|)` and one Richardson level.
pub fn numeric_hessian<F>(f: F, x: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let base = f64::EPSILON.powf(0.25);
    let f0 = f(x)?;
    let second = |i: usize, j: usize, hi: f64, hj: f64| -> Result<f64> {
        let at = |si: f64, sj: f64| -> Result<f64> {
            let mut p = x.to_vec();
            p[i] += si * hi;
            p[j] += sj * hj;
            f(&p)
        };
        if i == j {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += hi;
            xm[i] -= hi;
            Ok((f(&xp)? - 2.0 * f0 + f(&xm)?) / (hi * hi))
        } else {
            Ok((at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?) / (4.0 * hi * hj))
        }
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let hi = fd_step(x[i], base);
            let hj = fd_step(x[j], base);
            let coarse = second(i, j, hi, hj)?;
            let fine = second(i, j, 0.5 * hi, 0.5 * hj)?;
            let v = (4.0 * fine - coarse) / 3.0;
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Cumulant known only through its values; derivatives are finite
/// differences.
#[derive(Clone)]
pub struct NumericCumulant {
    label: String,
    k: ScalarFn,
    theta_domain: Domain,
    mean_domain: Domain,
}

impl fmt::Debug for NumericCumulant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NumericCumulant({})", self.label)
    }
}

impl NumericCumulant {
    pub fn new(
        label: impl Into<String>,
        k: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        theta_domain: Domain,
        mean_domain: Domain,
    ) -> Result<Self> {
        if theta_domain.dim() != mean_domain.dim() {
            return Err(NefError::invalid("canonical and mean domains differ in dimension"));
        }
        Ok(NumericCumulant {
            label: label.into(),
            k: Arc::new(k),
            theta_domain,
            mean_domain,
        })
    }

    fn k_checked(&self, theta: &[f64]) -> Result<f64> {
        check_member(&self.theta_domain, theta)?;
        let v = (self.k)(theta);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NefError::invalid(format!("cumulant is not finite at {theta:?}")))
        }
    }
}

impl Cumulant for NumericCumulant {
    fn dim(&self) -> usize {
        self.theta_domain.dim()
    }

    fn theta_domain(&self) -> &Domain {
        &self.theta_domain
    }

    fn mean_domain(&self) -> &Domain {
        &self.mean_domain
    }

    fn eval(&self, theta: &[f64]) -> Result<CumulantEval> {
        let value = self.k_checked(theta)?;
        let f = |x: &[f64]| self.k_checked(x);
        Ok(CumulantEval {
            value,
            gradient: numeric_gradient(f, theta)?,
            hessian: numeric_hessian(f, theta)?,
        })
    }

    fn closed_form(&self) -> bool {
        false
    }
}

/// Largest violation of the cumulant invariants over `grid`: returns
/// `(max relative gradient error, max relative Hessian error, min eigenvalue)`.
pub fn invariant_report(k: &dyn Cumulant, grid: &[Vec<f64>]) -> Result<(f64, f64, f64)> {
    let mut grad_err: f64 = 0.0;
    let mut hess_err: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for theta in grid {
        let ev = k.eval(theta)?;
        let g_fd = numeric_gradient(|x| k.value(x), theta)?;
        let h_fd = numeric_jacobian(|x| k.gradient(x), theta)?;
        grad_err = grad_err.max(rel_diff(ev.gradient.as_slice(), g_fd.as_slice()));
        hess_err = hess_err.max(rel_diff(ev.hessian.as_slice(), h_fd.as_slice()));
        let sym = (&ev.hessian + ev.hessian.transpose()) * 0.5;
        min_eig = min_eig.min(sym.symmetric_eigenvalues().min());
    }
    Ok((grad_err, hess_err, min_eig))
}

pub(crate) fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}
