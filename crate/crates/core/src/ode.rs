//! The one-dimensional cubic variance equation
//!
//! ```text
//! (1 + βm) V'(m) - 3β V(m) = (a + bm)(1 + βm)
//! ```
//!
//! whose solutions are `V = λu³ - (b/β²)u² + ((b - βa)/(2β²))u` with
//! `u = 1 + βm`.

use serde::Serialize;

use crate::error::{NefError, Result};
use crate::poly::Polynomial;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdeParams<T> {
    pub beta: T,
    pub a: T,
    pub b: T,
    pub lam: T,
}

impl<T: Scalar> OdeParams<T> {
    pub fn new(beta: T, a: T, b: T, lam: T) -> Result<Self> {
        if beta.is_zero() {
            return Err(NefError::invalid("β must be nonzero"));
        }
        Ok(OdeParams { beta, a, b, lam })
    }
}

/// Closed-form solution; `nonvariance` is set when `V <= 0` on the whole
/// real line, so no interval can carry it as a variance function.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicSolution<T> {
    pub poly: Polynomial<T>,
    pub nonvariance: bool,
}

fn u_poly<T: Scalar>(beta: &T) -> Polynomial<T> {
    Polynomial::linear(T::one(), std::slice::from_ref(beta))
}

/// `(1 + βm)V' - 3βV - (a + bm)(1 + βm)`.
pub fn ode_residual<T: Scalar>(v: &Polynomial<T>, beta: &T, a: &T, b: &T) -> Polynomial<T> {
    let u = u_poly(beta);
    let rhs = &Polynomial::linear(a.clone(), std::slice::from_ref(b)) * &u;
    let lhs = &(&u * &v.derivative(0)) - &v.scale(&(T::from_i64_exact(3) * beta.clone()));
    &lhs - &rhs
}

pub fn solve_closed_form<T: Scalar>(p: &OdeParams<T>) -> Result<CubicSolution<T>> {
    if p.beta.is_zero() {
        return Err(NefError::invalid("β must be nonzero"));
    }
    let two = T::from_i64_exact(2);
    let beta2 = p.beta.clone() * p.beta.clone();
    let c2 = -(p.b.clone() / beta2.clone());
    let c1 = (p.b.clone() - p.beta.clone() * p.a.clone()) / (two * beta2);
    let u = u_poly(&p.beta);
    let poly = &(&u.pow(3).scale(&p.lam) + &u.pow(2).scale(&c2)) + &u.scale(&c1);
    let res = ode_residual(&poly, &p.beta, &p.a, &p.b);
    let scale = poly.max_abs_coeff();
    if res.terms().any(|(_, c)| !c.is_negligible(&scale)) {
        return Err(NefError::Internal("closed form does not satisfy the equation".into()));
    }
    // with λ = 0, V = c2 u² + c1 u is nonpositive everywhere iff c2 <= 0 and c1 = 0
    let nonvariance = p.lam.is_zero() && c2 <= T::zero() && c1.is_zero();
    Ok(CubicSolution { poly, nonvariance })
}

/// Coefficients of `V` in powers of `u = 1 + βm`, lowest first.
pub fn rebase<T: Scalar>(v: &Polynomial<T>, beta: &T) -> Result<Vec<T>> {
    if v.nvars() != 1 {
        return Err(NefError::invalid("rebase needs a univariate polynomial"));
    }
    if beta.is_zero() {
        return Err(NefError::invalid("β must be nonzero"));
    }
    let inv = T::one() / beta.clone();
    // m = (u - 1) / β
    let m_of_u = Polynomial::linear(-inv.clone(), &[inv]);
    let mut d = v.substitute(&[m_of_u])?.univariate_coeffs();
    d.resize(4.max(d.len()), T::zero());
    Ok(d)
}

/// The unique solution parameters reproducing `V`, or `None` when `V` has
/// a nonzero `(1 + βm)⁰` component.
pub fn match_cubic_to_ode<T: Scalar>(v: &Polynomial<T>, beta: &T) -> Result<Option<OdeParams<T>>> {
    if v.nvars() != 1 {
        return Err(NefError::invalid("the equation is one-dimensional"));
    }
    if v.degree() > 3 {
        return Err(NefError::invalid(format!("degree {} exceeds 3", v.degree())));
    }
    let d = rebase(v, beta)?;
    let scale = v.max_abs_coeff();
    if !d[0].is_negligible(&scale) {
        return Ok(None);
    }
    let beta2 = beta.clone() * beta.clone();
    let b = -(beta2.clone() * d[2].clone());
    let a = (b.clone() - T::from_i64_exact(2) * beta2 * d[1].clone()) / beta.clone();
    Ok(Some(OdeParams {
        beta: beta.clone(),
        a,
        b,
        lam: d[3].clone(),
    }))
}

/// RK4 trajectory together with the closed form it should reproduce.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub points: Vec<(f64, f64)>,
    /// `λ` fixed by the initial condition.
    pub lam: f64,
    /// Largest deviation from the closed form over the samples.
    pub max_error: f64,
}

/// Number of RK4 steps over the span.
pub const RK4_STEPS: usize = 2048;

/// `λ` such that the closed form passes through `(m0, v0)`.
pub fn lambda_from_initial(beta: f64, a: f64, b: f64, m0: f64, v0: f64) -> Result<f64> {
    let u0 = 1.0 + beta * m0;
    if u0 == 0.0 {
        return Err(NefError::Singularity {
            at: vec![m0],
            detail: "1 + βm vanishes at the initial point".into(),
        });
    }
    let c2 = -b / (beta * beta);
    let c1 = (b - beta * a) / (2.0 * beta * beta);
    Ok((v0 - c2 * u0 * u0 - c1 * u0) / (u0 * u0 * u0))
}

/// Integrates `V' = (3βV + (a + bm)(1 + βm)) / (1 + βm)` from `(m0, v0)`
/// to `m_end` with classic RK4.
pub fn integrate_numeric(beta: f64, a: f64, b: f64, m0: f64, v0: f64, m_end: f64) -> Result<Trajectory> {
    if beta == 0.0 {
        return Err(NefError::invalid("β must be nonzero"));
    }
    if ![beta, a, b, m0, v0, m_end].iter().all(|x| x.is_finite()) || m0 == m_end {
        return Err(NefError::invalid("span must be finite and nondegenerate"));
    }
    let u0 = 1.0 + beta * m0;
    let u1 = 1.0 + beta * m_end;
    if u0 == 0.0 || u1 == 0.0 || u0.signum() != u1.signum() {
        return Err(NefError::Singularity {
            at: vec![-1.0 / beta],
            detail: format!("the span [{m0}, {m_end}] meets the singular point m = {}", -1.0 / beta),
        });
    }
    let f = |m: f64, v: f64| (3.0 * beta * v + (a + b * m) * (1.0 + beta * m)) / (1.0 + beta * m);
    let lam = lambda_from_initial(beta, a, b, m0, v0)?;
    let exact = solve_closed_form(&OdeParams::new(beta, a, b, lam)?)?.poly;
    let h = (m_end - m0) / RK4_STEPS as f64;
    let mut points = Vec::with_capacity(RK4_STEPS + 1);
    let (mut m, mut v) = (m0, v0);
    points.push((m, v));
    let mut max_error: f64 = 0.0;
    for i in 1..=RK4_STEPS {
        let k1 = f(m, v);
        let k2 = f(m + 0.5 * h, v + 0.5 * h * k1);
        let k3 = f(m + 0.5 * h, v + 0.5 * h * k2);
        let k4 = f(m + h, v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        m = m0 + i as f64 * h;
        max_error = max_error.max((v - exact.eval_f64(&[m])).abs());
        points.push((m, v));
    }
    Ok(Trajectory { points, lam, max_error })
}
