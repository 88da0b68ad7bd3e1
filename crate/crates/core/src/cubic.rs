//! The twisted transform taking simple quadratic families to simple cubic
//! ones, at the level of variance functions and of cumulant functions.
//!
//! For a quadratic variance `V1` and a nonzero covector `β`,
//!
//! ```text
//! V(m) = (1 + <β, m>) (I + m βᵀ) V1(m / (1 + <β, m>)) (I + β mᵀ)
//! ```
//!
//! and `V1` is recovered from `V` by the same formula with `-β`. Both maps
//! are computed exactly: `s^D V1(m / s)` is a polynomial for `D >= deg V1`,
//! and the leftover power of `s = 1 + <β, m>` is divided out exactly.

use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::descriptor::CumulantSpec;
use crate::error::{NefError, Result};
use crate::legendre::{self, NewtonConfig};
use crate::nef::cumulant::check_member;
use crate::nef::domain::{domain_beta, Domain, Window};
use crate::nef::{Covector, Cumulant, CumulantEval, CumulantFamily, FamilyDescriptor, VarianceModel, Vector};
use crate::poly::{PolyMatrix, Polynomial};
use crate::scalar::Scalar;

/// `β` and the free constants `(k0, λ0)` of the cumulant-level map. The
/// constants `(k1, θ1)` of the inverse map are derived.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicConstructionParams {
    pub beta: Covector,
    pub k0: f64,
    pub lambda0: Vector,
}

impl CubicConstructionParams {
    pub fn new(beta: Covector, k0: f64, lambda0: Vector) -> Result<Self> {
        if beta.is_zero() {
            return Err(NefError::invalid("β must be nonzero"));
        }
        if lambda0.dim() != beta.dim() {
            return Err(NefError::invalid("λ0 and β differ in dimension"));
        }
        if !k0.is_finite() {
            return Err(NefError::invalid("k0 must be finite"));
        }
        Ok(CubicConstructionParams { beta, k0, lambda0 })
    }

    /// `k0 = 0`, `λ0 = 0`.
    pub fn with_beta(beta: Covector) -> Result<Self> {
        let n = beta.dim();
        Self::new(beta, 0.0, Vector::zeros(n))
    }

    pub fn k1(&self) -> f64 {
        -self.k0
    }

    /// `θ1 = -λ0 - β k0`.
    pub fn theta1(&self) -> Vector {
        let v = self
            .lambda0
            .iter()
            .zip(self.beta.iter())
            .map(|(l, b)| -l - b * self.k0)
            .collect();
        Vector::new(v).expect("finite inputs give finite output")
    }

    /// Parameters of the inverse map: `(-β, k1, θ1)`.
    pub fn inverse(&self) -> CubicConstructionParams {
        CubicConstructionParams {
            beta: Covector::new(self.beta.iter().map(|b| -b).collect()).expect("finite"),
            k0: self.k1(),
            lambda0: self.theta1(),
        }
    }
}

fn twist<T: Scalar>(v: &PolyMatrix<T>, beta: &[T], homog: usize) -> Result<PolyMatrix<T>> {
    let n = v.size();
    if beta.len() != n || v.nvars() != n {
        return Err(NefError::invalid(format!(
            "β of length {} for a {n}x{n} variance in {} variables",
            beta.len(),
            v.nvars()
        )));
    }
    if beta.iter().all(|b| b.is_zero()) {
        return Err(NefError::invalid("β must be nonzero"));
    }
    let s = Polynomial::linear(T::one(), beta);
    let h = v.map_entries(|e| e.homogenize_with(&s, homog))?;
    let coords: Vec<Polynomial<T>> = (0..n).map(|i| Polynomial::variable(n, i)).collect();
    let l = PolyMatrix::identity_plus_outer(&coords, beta);
    let mut w = l.matmul(&h).matmul(&l.transpose());
    for _ in 1..homog {
        w = w.map_entries(|e| e.div_unit_linear(&s))?;
    }
    Ok(w.pruned())
}

/// Forward transform on polynomial matrices; `deg V1 <= 2`.
pub fn forward_matrix<T: Scalar>(v1: &PolyMatrix<T>, beta: &[T]) -> Result<PolyMatrix<T>> {
    if v1.degree() > 2 {
        return Err(NefError::invalid(format!(
            "forward transform needs a variance of degree <= 2, got {}",
            v1.degree()
        )));
    }
    twist(v1, beta, 2)
}

/// Inverse transform on polynomial matrices; `deg V <= 3`.
pub fn inverse_matrix<T: Scalar>(v: &PolyMatrix<T>, beta: &[T]) -> Result<PolyMatrix<T>> {
    if v.degree() > 3 {
        return Err(NefError::invalid(format!(
            "inverse transform needs a variance of degree <= 3, got {}",
            v.degree()
        )));
    }
    let neg: Vec<T> = beta.iter().map(|b| -b.clone()).collect();
    twist(v, &neg, 3)
}

fn beta_domain(base: &Domain, beta: &[f64]) -> Result<Domain> {
    let bd = domain_beta(base, beta)?;
    match bd.empty_warning {
        Some(w) => Err(NefError::EmptyDomain(w)),
        None => Ok(bd.domain),
    }
}

fn polynomial_of(v: &VarianceModel) -> Result<&PolyMatrix<f64>> {
    v.polynomial_matrix()
        .ok_or_else(|| NefError::invalid("the transform needs a polynomial variance model"))
}

/// The simple cubic variance built from `V1` and `β`, on `(M_F1)_β`.
pub fn forward_variance(v1: &VarianceModel, beta: &Covector) -> Result<VarianceModel> {
    if beta.dim() != v1.dim() {
        return Err(NefError::invalid("β and the variance differ in dimension"));
    }
    let matrix = forward_matrix(polynomial_of(v1)?, beta)?;
    VarianceModel::polynomial(matrix, beta_domain(v1.mean_domain(), beta)?)
}

/// Recovers `V1` from `V` on `(M_F)_{-β}`.
pub fn inverse_variance(v: &VarianceModel, beta: &Covector) -> Result<VarianceModel> {
    if beta.dim() != v.dim() {
        return Err(NefError::invalid("β and the variance differ in dimension"));
    }
    let matrix = inverse_matrix(polynomial_of(v)?, beta)?;
    let neg: Vec<f64> = beta.iter().map(|b| -b).collect();
    VarianceModel::polynomial(matrix, beta_domain(v.mean_domain(), &neg)?)
}

/// A cached solve: `λ`, the base parameter `θ` and the base evaluation.
type Solved = (Vec<f64>, DVector<f64>, CumulantEval);

/// Solver for `λ = θ - β k_ν(θ) - λ0` restricted to `1 - <β, k_ν'(θ)> > 0`.
struct ImplicitMap {
    base: CumulantFamily,
    beta: DVector<f64>,
    lambda0: DVector<f64>,
    /// `θ` and `λ(θ)` samples used to seed Newton, stored row-major.
    table_theta: Vec<f64>,
    table_lambda: Vec<f64>,
    /// Most recent solve; membership tests and evaluations usually ask
    /// for the same `λ` back to back.
    last: Mutex<Option<Solved>>,
}

const SOLVE_TOL: f64 = 1e-13;
const JACOBIAN_FLOOR: f64 = 1e-12;

impl ImplicitMap {
    fn lambda_of(&self, theta: &DVector<f64>, value: f64) -> DVector<f64> {
        theta - &self.beta * value - &self.lambda0
    }

    fn jacobian_factor(&self, ev: &CumulantEval) -> f64 {
        1.0 - self.beta.dot(&ev.gradient)
    }

    fn seed(&self, lam: &[f64]) -> Result<DVector<f64>> {
        let n = lam.len();
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, row) in self.table_lambda.chunks_exact(n).enumerate() {
            let d: f64 = row.iter().zip(lam).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        if best.1 == usize::MAX {
            return Err(NefError::EmptyDomain("no admissible base parameter".into()));
        }
        Ok(DVector::from_column_slice(&self.table_theta[best.1 * n..(best.1 + 1) * n]))
    }

    fn solve(&self, lam: &[f64]) -> Result<(DVector<f64>, CumulantEval)> {
        if let Some((l, t, ev)) = self.last.lock().expect("solver cache poisoned").as_ref() {
            if l.as_slice() == lam {
                return Ok((t.clone(), ev.clone()));
            }
        }
        let out = self.solve_uncached(lam)?;
        *self.last.lock().expect("solver cache poisoned") = Some((lam.to_vec(), out.0.clone(), out.1.clone()));
        Ok(out)
    }

    fn solve_uncached(&self, lam: &[f64]) -> Result<(DVector<f64>, CumulantEval)> {
        let target = DVector::from_column_slice(lam);
        let scale = target.amax().max(1.0);
        let dom = self.base.theta_domain();
        let mut theta = self.seed(lam)?;
        let mut ev = self.base.eval(theta.as_slice())?;
        let mut g = self.lambda_of(&theta, ev.value) - &target;
        let mut polished = false;
        for iter in 0..100 {
            let converged = g.amax() <= SOLVE_TOL * scale;
            if converged && polished {
                break;
            }
            let s = self.jacobian_factor(&ev);
            if s <= JACOBIAN_FLOOR {
                return Err(NefError::Singularity {
                    at: theta.as_slice().to_vec(),
                    detail: format!("implicit Jacobian degenerates, 1 - <β, k'(θ)> = {s:e}"),
                });
            }
            // (I - β k'ᵀ)^-1 by Sherman-Morrison
            let step = -(&g + &self.beta * (ev.gradient.dot(&g) / s));
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand = &theta + &step * t;
                if dom.contains(cand.as_slice()) {
                    if let Ok(cev) = self.base.eval(cand.as_slice()) {
                        let cg = self.lambda_of(&cand, cev.value) - &target;
                        if self.jacobian_factor(&cev) > JACOBIAN_FLOOR
                            && (cg.norm() < g.norm() || (converged && cg.norm() <= g.norm()))
                        {
                            accepted = Some((cand, cev, cg));
                            break;
                        }
                    }
                }
                if converged {
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((c, cev, cg)) => {
                    theta = c;
                    ev = cev;
                    g = cg;
                }
                None if converged => break,
                None => {
                    return Err(NefError::Convergence {
                        best: theta.as_slice().to_vec(),
                        residual: g.amax(),
                        iterations: iter + 1,
                    })
                }
            }
            polished = converged;
        }
        if g.amax() > SOLVE_TOL * scale {
            return Err(NefError::Convergence {
                best: theta.as_slice().to_vec(),
                residual: g.amax(),
                iterations: 100,
            });
        }
        Ok((theta, ev))
    }
}

/// Cumulant of the transformed family: `k_μ(λ) = k_ν(θ) - k0` where
/// `λ = θ - β k_ν(θ) - λ0`.
pub struct CubicCumulant {
    map: Arc<ImplicitMap>,
    params: CubicConstructionParams,
    theta_domain: Domain,
    mean_domain: Domain,
}

impl fmt::Debug for CubicCumulant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CubicCumulant")
            .field("base", &self.map.base)
            .field("params", &self.params)
            .finish()
    }
}

impl CubicCumulant {
    pub fn new(base: CumulantFamily, params: CubicConstructionParams) -> Result<Self> {
        let n = base.dim();
        if params.beta.dim() != n {
            return Err(NefError::invalid("β and the base family differ in dimension"));
        }
        let beta = DVector::from_column_slice(&params.beta);
        let lambda0 = DVector::from_column_slice(&params.lambda0);
        let per_axis = match n {
            1 => 401,
            2 => 41,
            3 => 11,
            _ => 5,
        };
        let mut table_theta = Vec::new();
        let mut table_lambda = Vec::new();
        let mut inner_lams = Vec::new();
        for t in base.theta_domain().grid(per_axis, 0.0) {
            let Ok(ev) = base.eval(&t) else { continue };
            let s = 1.0 - beta.dot(&ev.gradient);
            if s < 0.05 {
                continue;
            }
            let theta = DVector::from_vec(t);
            let lam = &theta - &beta * ev.value - &lambda0;
            if s >= 0.25 {
                inner_lams.push(lam.as_slice().to_vec());
            }
            table_theta.extend_from_slice(theta.as_slice());
            table_lambda.extend_from_slice(lam.as_slice());
        }
        if table_theta.is_empty() {
            return Err(NefError::EmptyDomain(format!(
                "no sampled base parameter has 1 - <β, k'(θ)> > 0 for β = {:?}",
                params.beta.as_slice()
            )));
        }
        let hull_src: Vec<Vec<f64>> = if inner_lams.is_empty() {
            table_lambda.chunks_exact(n).map(|l| l.to_vec()).collect()
        } else {
            inner_lams
        };
        let window = hull(&hull_src);
        let mean_domain = beta_domain(base.mean_domain(), &params.beta)?;
        let map = Arc::new(ImplicitMap {
            base,
            beta,
            lambda0,
            table_theta,
            table_lambda,
            last: Mutex::new(None),
        });
        let probe = Arc::clone(&map);
        let theta_domain = Domain::implicit(
            "λ(Θ) on 1 - <β, k'(θ)> > 0",
            window,
            Arc::new(move |lam: &[f64]| probe.solve(lam).is_ok()),
        );
        Ok(CubicCumulant {
            map,
            params,
            theta_domain,
            mean_domain,
        })
    }

    pub fn params(&self) -> &CubicConstructionParams {
        &self.params
    }

    /// The base parameter `θ` with `λ(θ) = lam`.
    pub fn base_parameter(&self, lam: &[f64]) -> Result<Vec<f64>> {
        Ok(self.map.solve(lam)?.0.as_slice().to_vec())
    }
}

fn hull(points: &[Vec<f64>]) -> Window {
    let n = points[0].len();
    let mut lo = points[0].clone();
    let mut hi = points[0].clone();
    for p in points {
        for i in 0..n {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    for i in 0..n {
        if lo[i] == hi[i] {
            lo[i] -= 1e-3;
            hi[i] += 1e-3;
        }
    }
    Window::new(lo, hi).expect("hull of finite points")
}

impl Cumulant for CubicCumulant {
    fn dim(&self) -> usize {
        self.map.base.dim()
    }

    fn theta_domain(&self) -> &Domain {
        &self.theta_domain
    }

    fn mean_domain(&self) -> &Domain {
        &self.mean_domain
    }

    fn eval(&self, lam: &[f64]) -> Result<CumulantEval> {
        if lam.len() != self.dim() {
            check_member(&self.theta_domain, lam)?;
        }
        let (theta, ev) = self.map.solve(lam)?;
        let s = self.map.jacobian_factor(&ev);
        if s <= JACOBIAN_FLOOR {
            return Err(NefError::Singularity {
                at: theta.as_slice().to_vec(),
                detail: format!("implicit Jacobian degenerates, 1 - <β, k'(θ)> = {s:e}"),
            });
        }
        let n = self.dim();
        let m = &ev.gradient / s;
        let left = DMatrix::identity(n, n) + &m * self.map.beta.transpose();
        let hessian = &left * &ev.hessian * left.transpose() / s;
        Ok(CumulantEval {
            value: ev.value - self.params.k0,
            gradient: m,
            hessian,
        })
    }

    fn closed_form(&self) -> bool {
        self.map.base.closed_form()
    }

    /// `ψ_μ(m)` from the base: `M = m / (1 + <β, m>)`, `θ = ψ_ν(M)`.
    fn inverse_hint(&self, m: &[f64]) -> Option<Vec<f64>> {
        let beta = &self.map.beta;
        let s = 1.0 + beta.iter().zip(m).map(|(b, x)| b * x).sum::<f64>();
        if !(s > 0.0) {
            return None;
        }
        let big_m: Vec<f64> = m.iter().map(|x| x / s).collect();
        let base = self.map.base.as_ref();
        let start = legendre::default_start(base, &big_m).ok()?;
        let theta = legendre::newton_solve(base, &big_m, &start, &NewtonConfig::default()).ok()?;
        let value = base.value(&theta).ok()?;
        let theta = DVector::from_vec(theta);
        Some(self.map.lambda_of(&theta, value).as_slice().to_vec())
    }

    fn spec(&self) -> Option<CumulantSpec> {
        let lambda0 = (!self.params.lambda0.is_zero()).then(|| self.params.lambda0.to_vec());
        Some(CumulantSpec::CubicTransform {
            base: Box::new(self.map.base.spec()?),
            beta: self.params.beta.to_vec(),
            k0: self.params.k0,
            lambda0,
        })
    }
}

/// `(k_μ(λ), k_μ'(λ), k_μ''(λ))` for the transformed cumulant.
pub fn transformed_cumulant_eval(
    base: &CumulantFamily,
    params: &CubicConstructionParams,
    lam: &Covector,
) -> Result<CumulantEval> {
    CubicCumulant::new(Arc::clone(base), params.clone())?.eval(lam)
}

/// The transformed family: cumulant from the implicit map when the base
/// has one, variance from the forward transform when the base variance is
/// polynomial.
pub fn cubic_family(base: &FamilyDescriptor, params: &CubicConstructionParams) -> Result<FamilyDescriptor> {
    if params.beta.dim() != base.dim() {
        return Err(NefError::invalid("β and the base family differ in dimension"));
    }
    let cumulant = match base.cumulant() {
        Some(k) => Some(Arc::new(CubicCumulant::new(Arc::clone(k), params.clone())?) as CumulantFamily),
        None => None,
    };
    let variance = match base.variance() {
        Some(v) if v.polynomial_matrix().is_some() => Some(forward_variance(v, &params.beta)?),
        _ => None,
    };
    let mut provenance = base.provenance.clone();
    provenance.base_family = Some(base.name.clone());
    provenance.beta = Some(params.beta.to_vec());
    let name = format!("cubic({}, β={:?})", base.name, params.beta.as_slice());
    FamilyDescriptor::new(name, cumulant, variance, provenance)
}

/// The inverse construction: family whose forward transform by `β` is `fam`.
pub fn inverse_family(fam: &FamilyDescriptor, params: &CubicConstructionParams) -> Result<FamilyDescriptor> {
    let inv = params.inverse();
    let cumulant = match fam.cumulant() {
        Some(k) => Some(Arc::new(CubicCumulant::new(Arc::clone(k), inv.clone())?) as CumulantFamily),
        None => None,
    };
    let variance = match fam.variance() {
        Some(v) if v.polynomial_matrix().is_some() => Some(inverse_variance(v, &params.beta)?),
        _ => None,
    };
    let mut provenance = fam.provenance.clone();
    provenance.base_family = Some(fam.name.clone());
    provenance.beta = Some(inv.beta.to_vec());
    let name = format!("cubic-inverse({}, β={:?})", fam.name, params.beta.as_slice());
    FamilyDescriptor::new(name, cumulant, variance, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build, Params};
    use crate::scalar::rational;
    use num_rational::BigRational;

    fn uni(c: &[f64]) -> PolyMatrix<f64> {
        PolyMatrix::from_fn(1, |_, _| Polynomial::univariate(c))
    }

    #[test]
    fn one_dimensional_examples() {
        let v = forward_matrix(&uni(&[1.0]), &[1.0]).unwrap();
        assert_eq!(v.get(0, 0).univariate_coeffs(), vec![1.0, 3.0, 3.0, 1.0]);
        let v = forward_matrix(&uni(&[0.0, 1.0]), &[1.0]).unwrap();
        assert_eq!(v.get(0, 0).univariate_coeffs(), vec![0.0, 1.0, 2.0, 1.0]);
        let back = inverse_matrix(&v, &[1.0]).unwrap();
        assert_eq!(back.get(0, 0).univariate_coeffs(), vec![0.0, 1.0]);
    }

    #[test]
    fn exact_rational_round_trip() {
        let q = |n, d| rational(n, d);
        let v1: PolyMatrix<BigRational> = PolyMatrix::from_fn(1, |_, _| {
            Polynomial::univariate(&[q(1, 3), q(-2, 7), q(5, 11)])
        });
        let beta = [q(3, 5)];
        let v = forward_matrix(&v1, &beta).unwrap();
        assert_eq!(v.degree(), 3);
        assert_eq!(inverse_matrix(&v, &beta).unwrap(), v1);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(forward_matrix(&uni(&[0.0, 0.0, 0.0, 1.0]), &[1.0]).is_err());
        assert!(forward_matrix(&uni(&[1.0]), &[0.0]).is_err());
        assert!(CubicConstructionParams::with_beta(Covector::zeros(2)).is_err());
    }

    #[test]
    fn poisson_cumulant_matches_forward_variance() {
        let p = build("poisson", &Params::new()).unwrap();
        let params = CubicConstructionParams::with_beta(Covector::new(vec![1.0]).unwrap()).unwrap();
        let fam = cubic_family(&p, &params).unwrap();
        let k = fam.cumulant().unwrap();
        let v = fam.variance().unwrap();
        for theta in [-2.5_f64, -1.5, -0.9, -0.5, -0.3] {
            let lam = theta - theta.exp();
            let ev = k.eval(&[lam]).unwrap();
            let m = ev.gradient[0];
            assert!((m - theta.exp() / (1.0 - theta.exp())).abs() < 1e-12);
            let want = v.eval(&[m]).unwrap()[(0, 0)];
            assert!((ev.hessian[(0, 0)] - want).abs() < 1e-9 * want, "{} vs {want}", ev.hessian[(0, 0)]);
        }
    }

    #[test]
    fn origin_is_fixed_for_normal_base() {
        let normal = build("normal", &Params::new()).unwrap();
        let params = CubicConstructionParams::with_beta(Covector::new(vec![0.7]).unwrap()).unwrap();
        let ev = transformed_cumulant_eval(normal.cumulant().unwrap(), &params, &Covector::zeros(1)).unwrap();
        assert!(ev.value.abs() < 1e-15);
        assert!(ev.gradient[0].abs() < 1e-15);
    }

    #[test]
    fn inverse_parameters() {
        let p = CubicConstructionParams::new(
            Covector::new(vec![1.0, -2.0]).unwrap(),
            0.5,
            Vector::new(vec![0.1, 0.2]).unwrap(),
        )
        .unwrap();
        let inv = p.inverse();
        assert_eq!(inv.beta.as_slice(), &[-1.0, 2.0]);
        assert_eq!(inv.k0, -0.5);
        assert_eq!(inv.lambda0.as_slice(), &[-0.6, 0.8]);
        let back = inv.inverse();
        assert_eq!(back.beta, p.beta);
        assert_eq!(back.k0, p.k0);
        assert!(back.lambda0.iter().zip(p.lambda0.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
    }
}
