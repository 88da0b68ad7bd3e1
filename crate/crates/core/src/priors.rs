//! Prior families on the canonical domain (`Π`) and on the mean domain
//! (`Π*`, `Π̃`), their normalizing constants, the image of `Π` under the
//! mean map, and the hyperparameter maps relating `Π` and `Π̃`.

use std::cell::RefCell;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{NefError, Result};
use crate::legendre::{default_start, newton_solve, NewtonConfig};
use crate::nef::vector::dot;
use crate::nef::{Covector, Domain, FamilyDescriptor, Vector, Window};
use crate::quadrature::{adaptive_simpson, tensor_gauss_legendre};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum PriorFamily {
    Pi,
    PiStar,
    PiTilde { beta: Covector },
}

/// A member of one of the three prior families.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriorSpec {
    pub family: PriorFamily,
    pub t: f64,
    pub m0: Vector,
}

impl PriorSpec {
    pub fn new(family: PriorFamily, t: f64, m0: Vector, fam: &FamilyDescriptor) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(NefError::invalid(format!("t must be positive, got {t}")));
        }
        if m0.dim() != fam.dim() {
            return Err(NefError::invalid(format!(
                "m0 has dimension {} for a family of dimension {}",
                m0.dim(),
                fam.dim()
            )));
        }
        if !fam.mean_domain().contains(&m0) {
            return Err(NefError::invalid(format!("m0 = {:?} is outside the mean domain", m0.as_slice())));
        }
        if let PriorFamily::PiTilde { beta } = &family {
            if beta.dim() != fam.dim() || beta.is_zero() {
                return Err(NefError::invalid("Π̃ needs a nonzero β of the family's dimension"));
            }
            let grid = fam.mean_domain().grid(grid_points(fam.dim()), 0.0);
            if !grid.iter().any(|m| 1.0 + dot(beta, m) != 0.0) {
                return Err(NefError::EmptyDomain("1 + <β, m> vanishes on the whole mean window".into()));
            }
        }
        Ok(PriorSpec { family, t, m0 })
    }
}

fn grid_points(n: usize) -> usize {
    match n {
        1 => 25,
        2 => 9,
        _ => 5,
    }
}

/// Settings for normalizing-constant quadrature. One-dimensional integrals
/// use adaptive Simpson, higher dimensions composite Gauss-Legendre with
/// `points_per_axis` nodes per panel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub points_per_axis: usize,
    pub rel_tol: f64,
    /// Cap on how many times the integration box may grow.
    pub max_expansions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            points_per_axis: 8,
            rel_tol: 1e-9,
            max_expansions: 40,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 8 {
            return Err(NefError::invalid("quadrature needs at least 8 points per axis"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(NefError::invalid("rel_tol must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn scheme(&self, n: usize) -> &'static str {
        if n == 1 {
            "adaptive-simpson"
        } else {
            "tensor-gauss-legendre"
        }
    }
}

/// The constants `(a, b, c)` of the Monge-Ampère identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OmegaParams {
    pub a: Vector,
    pub b: f64,
    pub c: f64,
}

impl OmegaParams {
    pub fn new(a: Vector, b: f64, c: f64) -> Result<Self> {
        if !b.is_finite() || !c.is_finite() {
            return Err(NefError::invalid("b and c must be finite"));
        }
        Ok(OmegaParams { a, b, c })
    }

    pub fn zero(n: usize) -> Self {
        OmegaParams {
            a: Vector::zeros(n),
            b: 0.0,
            c: 0.0,
        }
    }
}

/// `ψ(m)`, `k(ψ(m))` and `log det V(m)` at one mean.
#[derive(Clone, Debug)]
pub(crate) struct MeanTerms {
    pub theta: Vec<f64>,
    pub k: f64,
    pub log_det_v: f64,
}

pub(crate) fn log_det_spd(h: &DMatrix<f64>) -> Result<f64> {
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| NefError::Internal("variance matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub(crate) fn mean_terms(fam: &FamilyDescriptor, m: &[f64], warm: Option<&[f64]>) -> Result<MeanTerms> {
    let k = fam.require_cumulant()?;
    let cfg = NewtonConfig::default();
    let theta = match warm {
        Some(w) => newton_solve(k, m, w, &cfg).or_else(|_| newton_solve(k, m, &default_start(k, m)?, &cfg))?,
        None => newton_solve(k, m, &default_start(k, m)?, &cfg)?,
    };
    let ev = k.eval(&theta)?;
    let log_det_v = log_det_spd(&ev.hessian)?;
    Ok(MeanTerms {
        theta,
        k: ev.value,
        log_det_v,
    })
}

/// `t(<m0, θ> - k(θ))` evaluated from precomputed terms.
pub(crate) fn pi_star_from(t: f64, m0: &[f64], mt: &MeanTerms) -> f64 {
    t * (dot(m0, &mt.theta) - mt.k)
}

/// `log |1 + <β, m>|^{-(n+2)}`; `None` where the factor vanishes.
pub(crate) fn tilde_correction(beta: &[f64], m: &[f64]) -> Option<f64> {
    let s = 1.0 + dot(beta, m);
    (s != 0.0).then(|| -((m.len() + 2) as f64) * s.abs().ln())
}

/// Unnormalized log-density; `-inf` outside the support.
///
/// Π̃ uses `|1 + <β, m>|` so that families whose mean domain lies where
/// the factor is negative are handled the same way as the positive side.
pub fn log_density(spec: &PriorSpec, fam: &FamilyDescriptor, point: &[f64]) -> Result<f64> {
    let n = fam.dim();
    if point.len() != n {
        return Err(NefError::invalid(format!("point of dimension {} for a family of dimension {n}", point.len())));
    }
    match &spec.family {
        PriorFamily::Pi => {
            let k = fam.require_cumulant()?;
            if !k.theta_domain().contains(point) {
                return Ok(f64::NEG_INFINITY);
            }
            Ok(spec.t * (dot(&spec.m0, point) - k.value(point)?))
        }
        PriorFamily::PiStar | PriorFamily::PiTilde { .. } => {
            if !fam.mean_domain().contains(point) {
                return Ok(f64::NEG_INFINITY);
            }
            let correction = match &spec.family {
                PriorFamily::PiTilde { beta } => match tilde_correction(beta, point) {
                    Some(c) => c,
                    None => return Ok(f64::NEG_INFINITY),
                },
                _ => 0.0,
            };
            let mt = mean_terms(fam, point, None)?;
            Ok(pi_star_from(spec.t, &spec.m0, &mt) + correction)
        }
    }
}

/// Log-density of the image of `π_{t,m0}` under `k'`:
/// `t(<m0, ψ(m)> - k(ψ(m))) - log det V(m)`.
pub fn pushforward_log_density(fam: &FamilyDescriptor, t: f64, m0: &[f64], m: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(NefError::invalid(format!("t must be positive, got {t}")));
    }
    if m.len() != fam.dim() || m0.len() != fam.dim() {
        return Err(NefError::invalid("dimension mismatch"));
    }
    if !fam.mean_domain().contains(m) {
        return Ok(f64::NEG_INFINITY);
    }
    let mt = mean_terms(fam, m, None)?;
    Ok(pi_star_from(t, m0, &mt) - mt.log_det_v)
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalizerReport {
    /// `log ∫ exp(log_density)`.
    pub log_mass: f64,
    /// `C = 1 / mass`.
    pub constant: f64,
    pub scheme: &'static str,
    /// Box the integral finally covered.
    pub region: Window,
    pub expansions: usize,
}

/// Integrates `exp(logf)` over `domain`, growing the box from the domain's
/// window until the added shell contributes less than `rel_tol`.
pub fn log_integral<F>(logf: F, domain: &Domain, quad: &QuadratureConfig) -> Result<NormalizerReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    quad.validate()?;
    let n = domain.dim();
    let (hard_lo, hard_hi) = domain.hard_bounds();
    let failure: RefCell<Option<NefError>> = RefCell::new(None);
    let eval = |x: &[f64], shift: f64| -> f64 {
        if !domain.contains(x) {
            return 0.0;
        }
        match logf(x) {
            Ok(v) => (v - shift).exp(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let peak = |w: &Window| -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for x in w.grid(grid_points(n)) {
            if domain.contains(&x) {
                best = best.max(logf(&x)?);
            }
        }
        Ok(best)
    };
    // In one dimension only the two new end pieces are integrated and added
    // to the interior mass: re-integrating the whole box with coarse panels
    // can step over a narrow peak. `known` floors the absolute tolerance.
    let integrate = |inner: Option<&Window>, w: &Window, shift: f64, known: f64| -> Result<f64> {
        let value = if n == 1 {
            let abs_tol = (quad.rel_tol * 0.1 * known).max(1e-300);
            let piece = |a: f64, b: f64| adaptive_simpson(|x| eval(&[x], shift), a, b, quad.rel_tol * 0.1, abs_tol);
            match inner {
                Some(i) => piece(w.lower[0], i.lower[0]).and_then(|l| Ok(known + l + piece(i.upper[0], w.upper[0])?)),
                None => piece(w.lower[0], w.upper[0]),
            }
        } else {
            tensor_rule(&|x: &[f64]| eval(x, shift), w, quad)
        };
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        value
    };

    let mut region = domain.window().clone();
    let mut shift = peak(&region)?;
    if !shift.is_finite() {
        return Err(NefError::NonNormalizable("density is zero or infinite on the whole window".into()));
    }
    let mut mass = integrate(None, &region, shift, 0.0)?;
    for step in 1..=quad.max_expansions {
        let next = grow(&region, &hard_lo, &hard_hi);
        let new_peak = peak(&next)?;
        if new_peak > shift + 50.0 {
            mass *= (shift - new_peak).exp();
            shift = new_peak;
        }
        let next_mass = integrate(Some(&region), &next, shift, mass)?;
        if !next_mass.is_finite() {
            return Err(NefError::NonNormalizable("integral overflowed while growing the box".into()));
        }
        let shell = (next_mass - mass).abs();
        region = next;
        mass = next_mass;
        if shell <= quad.rel_tol * mass && mass > 0.0 {
            let log_mass = mass.ln() + shift;
            return Ok(NormalizerReport {
                log_mass,
                constant: (-log_mass).exp(),
                scheme: quad.scheme(n),
                region,
                expansions: step,
            });
        }
    }
    Err(NefError::NonNormalizable(format!(
        "boundary shell still contributes after {} expansions (mass estimate {:e})",
        quad.max_expansions,
        mass.ln() + shift
    )))
}

/// Box grown away from its center: sides with a finite hard bound move a
/// quarter of the remaining distance closer, the others by one width.
fn grow(w: &Window, lo: &[Option<f64>], hi: &[Option<f64>]) -> Window {
    let widths = w.widths();
    let lower = (0..w.dim())
        .map(|i| match lo[i] {
            Some(b) => b + 0.25 * (w.lower[i] - b),
            None => w.lower[i] - widths[i],
        })
        .collect();
    let upper = (0..w.dim())
        .map(|i| match hi[i] {
            Some(b) => b - 0.25 * (b - w.upper[i]),
            None => w.upper[i] + widths[i],
        })
        .collect();
    Window { lower, upper }
}

/// Composite Gauss-Legendre with panel doubling until two successive
/// refinements agree.
fn tensor_rule<F: Fn(&[f64]) -> f64>(f: &F, w: &Window, quad: &QuadratureConfig) -> Result<f64> {
    const MAX_NODES: usize = 1 << 18;
    let n = w.dim();
    let mut panels = 2;
    let mut prev = tensor_gauss_legendre(f, w, panels, quad.points_per_axis);
    loop {
        panels *= 2;
        if (panels * quad.points_per_axis).pow(n as u32) > MAX_NODES {
            return Err(NefError::NonNormalizable(format!(
                "tensor rule did not settle below {MAX_NODES} nodes (last estimate {prev:e})"
            )));
        }
        let cur = tensor_gauss_legendre(f, w, panels, quad.points_per_axis);
        if !cur.is_finite() {
            return Err(NefError::NonNormalizable("integrand is not finite".into()));
        }
        if (cur - prev).abs() <= 0.1 * quad.rel_tol * cur.abs() {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// Normalizing constant of a prior, integrating over `Θ` for `Π` and over
/// the mean domain otherwise.
pub fn normalizer(spec: &PriorSpec, fam: &FamilyDescriptor, quad: &QuadratureConfig) -> Result<NormalizerReport> {
    let domain = match spec.family {
        PriorFamily::Pi => fam.require_cumulant()?.theta_domain().clone(),
        _ => fam.mean_domain().clone(),
    };
    log_integral(|x| log_density(spec, fam, x), &domain, quad)
}

/// Total mass of the pushforward density over the mean domain.
pub fn pushforward_mass(fam: &FamilyDescriptor, t: f64, m0: &[f64], quad: &QuadratureConfig) -> Result<NormalizerReport> {
    log_integral(|m| pushforward_log_density(fam, t, m0, m), fam.mean_domain(), quad)
}

/// Whether `(t, m0)` lies in `Ω = {t > b, (t m0 + a)/(t - b) ∈ M_F}`.
pub fn omega_contains(p: &OmegaParams, t: f64, m0: &[f64], mean_domain: &Domain) -> bool {
    if !(t > p.b) || m0.len() != p.a.dim() {
        return false;
    }
    let m1: Vec<f64> = m0.iter().zip(p.a.iter()).map(|(m, a)| (t * m + a) / (t - p.b)).collect();
    mean_domain.contains(&m1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapDirection {
    /// `(t - b, (t m0 + a)/(t - b))`.
    PsiSide,
    /// `(t + b, (t m0 - a)/(t + b))`.
    KprimeSide,
}

pub fn param_map(direction: MapDirection, t: f64, m0: &[f64], p: &OmegaParams) -> Result<(f64, Vec<f64>)> {
    if m0.len() != p.a.dim() {
        return Err(NefError::invalid("m0 and a have different dimensions"));
    }
    let (t1, sign) = match direction {
        MapDirection::PsiSide => (t - p.b, 1.0),
        MapDirection::KprimeSide => (t + p.b, -1.0),
    };
    if !(t1 > 0.0) {
        return Err(NefError::invalid(format!("mapped t = {t1} is not positive")));
    }
    let m1 = m0.iter().zip(p.a.iter()).map(|(m, a)| (t * m + sign * a) / t1).collect();
    Ok((t1, m1))
}

/// Convenience: `Π̃` spec with the given `β`.
pub fn pi_tilde(beta: Covector, t: f64, m0: Vector, fam: &FamilyDescriptor) -> Result<PriorSpec> {
    PriorSpec::new(PriorFamily::PiTilde { beta }, t, m0, fam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use std::f64::consts::PI;

    fn fam(id: &str) -> FamilyDescriptor {
        catalog::build(id, &Default::default()).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn log_density_examples() {
        let normal = fam("normal");
        let pi = PriorSpec::new(PriorFamily::Pi, 1.0, v(&[0.0]), &normal).unwrap();
        assert!((log_density(&pi, &normal, &[1.5]).unwrap() + 1.125).abs() < 1e-14);
        let poisson = fam("poisson");
        let star = PriorSpec::new(PriorFamily::PiStar, 2.0, v(&[1.0]), &poisson).unwrap();
        assert!((log_density(&star, &poisson, &[1.0]).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(log_density(&star, &poisson, &[-1.0]).unwrap(), f64::NEG_INFINITY);
        let beta = Covector::new(vec![0.7]).unwrap();
        let tilde = pi_tilde(beta, 2.0, v(&[1.0]), &normal).unwrap();
        let star = PriorSpec::new(PriorFamily::PiStar, 2.0, v(&[1.0]), &normal).unwrap();
        assert_eq!(log_density(&tilde, &normal, &[0.0]).unwrap(), log_density(&star, &normal, &[0.0]).unwrap());
    }

    #[test]
    fn spec_invariants() {
        let poisson = fam("poisson");
        assert!(PriorSpec::new(PriorFamily::Pi, 0.0, v(&[1.0]), &poisson).is_err());
        assert!(PriorSpec::new(PriorFamily::Pi, 1.0, v(&[-1.0]), &poisson).is_err());
        assert!(pi_tilde(Covector::zeros(1), 1.0, v(&[1.0]), &poisson).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let poisson = fam("poisson");
        assert!((pushforward_log_density(&poisson, 1.0, &[1.0], &[1.0]).unwrap() + 1.0).abs() < 1e-12);
        let ig = fam("inverse-gaussian");
        assert!((pushforward_log_density(&ig, 1.0, &[1.0], &[1.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_normalizer() {
        let normal = fam("normal");
        for (t, m0) in [(1.0, 0.0), (2.5, 0.7), (0.4, -1.2)] {
            let spec = PriorSpec::new(PriorFamily::Pi, t, v(&[m0]), &normal).unwrap();
            let r = normalizer(&spec, &normal, &QuadratureConfig::default()).unwrap();
            let expect = 0.5 * (2.0 * PI / t).ln() + 0.5 * t * m0 * m0;
            assert!((r.log_mass - expect).abs() < 1e-8, "{t} {m0}: {} vs {expect}", r.log_mass);
        }
    }

    #[test]
    fn omega_and_maps() {
        let pos = Domain::interval(Some(0.0), None, (0.1, 5.0)).unwrap();
        let zero = OmegaParams::zero(1);
        assert!(omega_contains(&zero, 1.0, &[2.0], &pos));
        assert!(!omega_contains(&zero, 1.0, &[-2.0], &pos));
        let p = OmegaParams::new(v(&[1.0]), 1.0, 0.0).unwrap();
        assert!(!omega_contains(&p, 0.5, &[3.0], &pos));
        assert!(omega_contains(&p, 2.0, &[0.0], &pos));
        let (t1, m1) = param_map(MapDirection::KprimeSide, 2.0, &[1.0], &p).unwrap();
        assert_eq!(t1, 3.0);
        assert!((m1[0] - 1.0 / 3.0).abs() < 1e-15);
        let (t1, m1) = param_map(MapDirection::PsiSide, 5.0, &[2.0], &p).unwrap();
        let (t2, m2) = param_map(MapDirection::KprimeSide, t1, &m1, &p).unwrap();
        assert!((t2 - 5.0).abs() < 1e-12 && (m2[0] - 2.0).abs() < 1e-12);
        assert!(param_map(MapDirection::PsiSide, 1.0, &[2.0], &p).is_err());
    }
}
