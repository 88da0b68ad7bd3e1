//! Sparse multivariate polynomials keyed by exponent multi-index, and
//! square matrices of them.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{NefError, Result};
use crate::scalar::Scalar;

/// Exponent multi-index `(e_1, .., e_n)` of the monomial `m_1^e_1 .. m_n^e_n`.
pub type Exponent = Vec<u32>;

/// A polynomial in `nvars` variables. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<T> {
    nvars: usize,
    terms: BTreeMap<Exponent, T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, T::one())
    }

    /// The coordinate function `m_i`.
    pub fn variable(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, T::one());
        p
    }

    /// `c0 + sum_i coeffs[i] * m_i`.
    pub fn linear(c0: T, coeffs: &[T]) -> Self {
        let n = coeffs.len();
        let mut p = Self::constant(n, c0);
        for (i, c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            p.add_term(e, c.clone());
        }
        p
    }

    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, T)>,
    {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(NefError::invalid(format!(
                    "exponent {e:?} has {} entries, expected {nvars}",
                    e.len()
                )));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    /// Univariate polynomial from ascending coefficients `c0, c1, ..`.
    pub fn univariate(coeffs: &[T]) -> Self {
        let mut p = Self::zero(1);
        for (k, c) in coeffs.iter().enumerate() {
            p.add_term(vec![k as u32], c.clone());
        }
        p
    }

    /// Dense ascending coefficients of a univariate polynomial.
    pub fn univariate_coeffs(&self) -> Vec<T> {
        assert_eq!(self.nvars, 1, "univariate_coeffs on a multivariate polynomial");
        let mut out = vec![T::zero(); self.degree() + 1];
        for (e, c) in &self.terms {
            out[e[0] as usize] = c.clone();
        }
        out
    }

    fn add_term(&mut self, e: Exponent, c: T) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(v) => {
                *v = v.clone() + c;
                if v.is_zero() {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &T)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: &[u32]) -> T {
        self.terms.get(e).cloned().unwrap_or_else(T::zero)
    }

    pub fn max_abs_coeff(&self) -> T {
        self.terms
            .values()
            .map(|c| c.abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn eval(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.nvars);
        let mut acc = T::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    term = term * xi.clone();
                }
            }
            acc = acc + term;
        }
        acc
    }

    /// Floating-point evaluation regardless of the coefficient type.
    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(e, c)| {
                c.to_f64_lossy()
                    * x.iter()
                        .zip(e)
                        .map(|(xi, &k)| xi.powi(k as i32))
                        .product::<f64>()
            })
            .sum()
    }

    /// Partial derivative with respect to `m_i`.
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.add_term(e2, c.clone() * T::from_i64_exact(e[i] as i64));
        }
        out
    }

    pub fn scale(&self, k: &T) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.clone() * k.clone());
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.nvars);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Terms of total degree exactly `k`.
    pub fn homogeneous_part(&self, k: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e.iter().sum::<u32>() as usize == k {
                out.add_term(e.clone(), c.clone());
            }
        }
        out
    }

    /// Replaces `m_i` by `args[i]`.
    pub fn substitute(&self, args: &[Polynomial<T>]) -> Result<Self> {
        if args.len() != self.nvars {
            return Err(NefError::invalid(format!(
                "substitute: {} arguments for {} variables",
                args.len(),
                self.nvars
            )));
        }
        let out_vars = args.first().map(|a| a.nvars).unwrap_or(0);
        if args.iter().any(|a| a.nvars != out_vars) {
            return Err(NefError::invalid("substitute: arguments disagree on variable count"));
        }
        let mut out = Polynomial::zero(out_vars);
        for (e, c) in &self.terms {
            let mut term = Polynomial::constant(out_vars, c.clone());
            for (arg, &k) in args.iter().zip(e) {
                if k > 0 {
                    term = &term * &arg.pow(k);
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// `x -> p(A x + c)`.
    pub fn compose_affine(&self, a: &[Vec<T>], c: &[T]) -> Result<Self> {
        if a.len() != self.nvars || c.len() != self.nvars {
            return Err(NefError::invalid("compose_affine: shape mismatch"));
        }
        let args: Vec<_> = a
            .iter()
            .zip(c)
            .map(|(row, ci)| Polynomial::linear(ci.clone(), row))
            .collect();
        self.substitute(&args)
    }

    /// `sum_e c_e m^e s^(degree - |e|)`, i.e. `s^degree * p(m / s)`.
    pub fn homogenize_with(&self, s: &Polynomial<T>, degree: usize) -> Result<Self> {
        if self.degree() > degree {
            return Err(NefError::invalid(format!(
                "polynomial of degree {} cannot be homogenized to degree {degree}",
                self.degree()
            )));
        }
        let mut powers = vec![Polynomial::one(self.nvars)];
        for k in 1..=degree {
            let next = &powers[k - 1] * s;
            powers.push(next);
        }
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            let d = e.iter().sum::<u32>() as usize;
            let mut mono = Polynomial::zero(self.nvars);
            mono.add_term(e.clone(), c.clone());
            out = &out + &(&mono * &powers[degree - d]);
        }
        Ok(out)
    }

    /// Exact quotient by `s = 1 + l(m)` with `l` linear and homogeneous.
    ///
    /// Solves `q_k = p_k - l q_(k-1)` degree by degree; the division is exact
    /// iff the top-degree remainder `p_d - l q_(d-1)` vanishes.
    pub fn div_unit_linear(&self, s: &Polynomial<T>) -> Result<Self> {
        if s.nvars != self.nvars || s.degree() > 1 || !s.coeff(&vec![0; self.nvars]).is_one() {
            return Err(NefError::invalid("divisor must have the form 1 + <beta, m>"));
        }
        let l = s.homogeneous_part(1);
        let d = self.degree();
        let mut q = Polynomial::zero(self.nvars);
        let mut prev = Polynomial::zero(self.nvars);
        for k in 0..d {
            let qk = &self.homogeneous_part(k) - &(&l * &prev);
            q = &q + &qk;
            prev = qk;
        }
        let rem = &self.homogeneous_part(d) - &(&l * &prev);
        let scale = self.max_abs_coeff();
        if rem.terms.values().any(|c| !c.is_negligible(&scale)) {
            return Err(NefError::invalid(format!(
                "polynomial is not divisible by 1 + <beta, m> (remainder of degree {d})"
            )));
        }
        Ok(q)
    }

    /// Drops coefficients that are negligible next to the largest one.
    pub fn pruned(&self) -> Self {
        let scale = self.max_abs_coeff();
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            if !c.is_negligible(&scale) {
                out.add_term(e.clone(), c.clone());
            }
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Polynomial<U> {
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), f(c));
        }
        out
    }

    pub fn to_f64(&self) -> Polynomial<f64> {
        self.map(|c| c.to_f64_lossy())
    }

    /// Largest coefficient-wise absolute difference, in f64.
    pub fn max_coeff_diff(&self, other: &Polynomial<T>) -> f64 {
        (self - other)
            .terms
            .values()
            .map(|c| c.to_f64_lossy().abs())
            .fold(0.0, f64::max)
    }
}

impl<'a, T: Scalar> Add<&'a Polynomial<T>> for &'a Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: &'a Polynomial<T>) -> Polynomial<T> {
        assert_eq!(self.nvars, rhs.nvars, "adding polynomials in different variables");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl<'a, T: Scalar> Sub<&'a Polynomial<T>> for &'a Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: &'a Polynomial<T>) -> Polynomial<T> {
        assert_eq!(self.nvars, rhs.nvars, "subtracting polynomials in different variables");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl<'a, T: Scalar> Mul<&'a Polynomial<T>> for &'a Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: &'a Polynomial<T>) -> Polynomial<T> {
        assert_eq!(self.nvars, rhs.nvars, "multiplying polynomials in different variables");
        let mut out = Polynomial::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Exponent = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1.clone() * c2.clone());
            }
        }
        out
    }
}

impl<T: Scalar> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        self.map(|c| -c.clone())
    }
}

impl<T: Scalar + fmt::Display> fmt::Display for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*m{}", i + 1)?,
                    _ => write!(f, "*m{}^{k}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

/// Square matrix of polynomials, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix<T> {
    size: usize,
    entries: Vec<Polynomial<T>>,
}

impl<T: Scalar> PolyMatrix<T> {
    pub fn from_fn(size: usize, f: impl Fn(usize, usize) -> Polynomial<T>) -> Self {
        let entries = (0..size * size).map(|k| f(k / size, k % size)).collect();
        PolyMatrix { size, entries }
    }

    pub fn identity(size: usize, nvars: usize) -> Self {
        Self::from_fn(size, |i, j| {
            if i == j {
                Polynomial::one(nvars)
            } else {
                Polynomial::zero(nvars)
            }
        })
    }

    /// `I + u v^T` for polynomial column `u` and scalar row `v`.
    pub fn identity_plus_outer(u: &[Polynomial<T>], v: &[T]) -> Self {
        let n = u.len();
        let nvars = u.first().map(|p| p.nvars()).unwrap_or(n);
        Self::from_fn(n, |i, j| {
            let mut p = u[i].scale(&v[j]);
            if i == j {
                p = &p + &Polynomial::one(nvars);
            }
            p
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nvars(&self) -> usize {
        self.entries.first().map(|p| p.nvars()).unwrap_or(self.size)
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial<T> {
        &self.entries[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Polynomial<T>) {
        self.entries[i * self.size + j] = p;
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Polynomial<T>)> {
        let n = self.size;
        self.entries.iter().enumerate().map(move |(k, p)| (k / n, k % n, p))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.size, |i, j| self.get(j, i).clone())
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        let scale = self
            .entries
            .iter()
            .map(|p| p.max_abs_coeff())
            .fold(T::zero(), |a, b| if b > a { b } else { a });
        (0..self.size).all(|i| {
            (0..i).all(|j| {
                (self.get(i, j) - self.get(j, i))
                    .terms()
                    .all(|(_, c)| c.is_negligible(&scale))
            })
        })
    }

    pub fn matmul(&self, rhs: &PolyMatrix<T>) -> Self {
        assert_eq!(self.size, rhs.size);
        let nvars = self.nvars();
        Self::from_fn(self.size, |i, j| {
            (0..self.size).fold(Polynomial::zero(nvars), |acc, k| {
                &acc + &(self.get(i, k) * rhs.get(k, j))
            })
        })
    }

    pub fn map_entries(&self, f: impl Fn(&Polynomial<T>) -> Result<Polynomial<T>>) -> Result<Self> {
        let entries = self.entries.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(PolyMatrix {
            size: self.size,
            entries,
        })
    }

    /// Entrywise partial derivative with respect to `m_k`.
    pub fn derivative(&self, k: usize) -> Self {
        Self::from_fn(self.size, |i, j| self.get(i, j).derivative(k))
    }

    pub fn eval_f64(&self, m: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |i, j| self.get(i, j).eval_f64(m))
    }

    pub fn to_f64(&self) -> PolyMatrix<f64> {
        PolyMatrix {
            size: self.size,
            entries: self.entries.iter().map(|p| p.to_f64()).collect(),
        }
    }

    pub fn max_coeff_diff(&self, other: &PolyMatrix<T>) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.max_coeff_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn pruned(&self) -> Self {
        PolyMatrix {
            size: self.size,
            entries: self.entries.iter().map(|p| p.pruned()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;
    use num_rational::BigRational;

    fn uni(c: &[f64]) -> Polynomial<f64> {
        Polynomial::univariate(c)
    }

    #[test]
    fn arithmetic_and_eval() {
        let p = uni(&[1.0, 1.0]);
        let cube = p.pow(3);
        assert_eq!(cube.univariate_coeffs(), vec![1.0, 3.0, 3.0, 1.0]);
        assert_eq!(cube.eval(&[2.0]), 27.0);
        assert_eq!(cube.derivative(0).univariate_coeffs(), vec![3.0, 6.0, 3.0]);
        assert!((&cube - &cube).is_zero());
    }

    #[test]
    fn multivariate_degree_and_coeff() {
        let m1 = Polynomial::<f64>::variable(2, 0);
        let m2 = Polynomial::<f64>::variable(2, 1);
        let p = &(&m1 * &m2) * &m2;
        assert_eq!(p.degree(), 3);
        assert_eq!(p.coeff(&[1, 2]), 1.0);
        assert_eq!(p.eval_f64(&[2.0, 3.0]), 18.0);
    }

    #[test]
    fn exact_division_by_unit_linear() {
        let s = Polynomial::linear(rational(1, 1), &[rational(2, 1), rational(-1, 3)]);
        let q = Polynomial::from_terms(
            2,
            vec![
                (vec![0, 0], rational(5, 1)),
                (vec![1, 1], rational(-7, 2)),
                (vec![0, 2], rational(1, 9)),
            ],
        )
        .unwrap();
        let p = &s * &q;
        assert_eq!(p.div_unit_linear(&s).unwrap(), q);
        let not_multiple = &p + &Polynomial::variable(2, 0);
        assert!(not_multiple.div_unit_linear(&s).is_err());
    }

    #[test]
    fn homogenize_matches_definition() {
        // s^2 * p(m/s) with p = 1 + m + m^2 and s = 1 + m gives (1+m)^2 + m(1+m) + m^2
        let p = uni(&[1.0, 1.0, 1.0]);
        let s = uni(&[1.0, 1.0]);
        let h = p.homogenize_with(&s, 2).unwrap();
        assert_eq!(h.univariate_coeffs(), vec![1.0, 3.0, 3.0]);
        assert!(p.homogenize_with(&s, 1).is_err());
    }

    #[test]
    fn affine_composition() {
        let p = uni(&[0.0, 0.0, 0.0, 1.0]);
        let shifted = p.compose_affine(&[vec![1.0]], &[-2.0]).unwrap();
        assert_eq!(shifted.univariate_coeffs(), vec![-8.0, 12.0, -6.0, 1.0]);
    }

    #[test]
    fn rational_polynomials_convert() {
        let p: Polynomial<BigRational> = Polynomial::univariate(&[rational(1, 2), rational(-3, 4)]);
        assert_eq!(p.to_f64().univariate_coeffs(), vec![0.5, -0.75]);
        assert_eq!(p.to_string(), "1/2 + -3/4*m1");
    }

    #[test]
    fn symmetric_matrix_detection() {
        let m1 = Polynomial::<f64>::variable(2, 0);
        let mut a = PolyMatrix::identity(2, 2);
        a.set(0, 1, m1.clone());
        assert!(!a.is_symmetric());
        a.set(1, 0, m1);
        assert!(a.is_symmetric());
    }
}
