//! Inversion of the mean map `θ -> k'(θ)` and quantities in the mean
//! parametrization: `ψ(m)`, `V(m) = k''(ψ(m))` and `k(ψ(m))`.

use nalgebra::{DMatrix, DVector};

use crate::error::{NefError, Result};
use crate::nef::{Covector, Cumulant, FamilyDescriptor, Vector};

#[derive(Clone, Debug, PartialEq)]
pub enum InitStrategy {
    DomainCenter,
    UserSupplied(Vec<f64>),
    /// Used by sweeps: each solve starts from the previous solution.
    ContinuationFromNeighbor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    pub max_iters: usize,
    /// Stop when `‖k'(θ) - m‖∞ <= tol * max(1, ‖m‖∞)`.
    pub tol: f64,
    /// Backtracking factor.
    pub damping: f64,
    pub max_halvings: usize,
    pub init: InitStrategy,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iters: 100,
            tol: 1e-12,
            damping: 0.5,
            max_halvings: 40,
            init: InitStrategy::DomainCenter,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(NefError::invalid(format!("Newton tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(NefError::invalid("max_iters must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(NefError::invalid(format!("damping must lie in (0, 1), got {}", self.damping)));
        }
        Ok(())
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn solve_linear(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    h.clone()
        .cholesky()
        .map(|c| c.solve(rhs))
        .or_else(|| h.clone().lu().solve(rhs))
        .filter(|d| d.iter().all(|v| v.is_finite()))
}

/// Starting point used when no warm start is available: the center of
/// the canonical window, or else the coarse-grid node whose mean is
/// closest to `m`.
pub fn default_start(k: &dyn Cumulant, m: &[f64]) -> Result<Vec<f64>> {
    let dom = k.theta_domain();
    if let Some(h) = k.inverse_hint(m).filter(|h| dom.contains(h)) {
        return Ok(h);
    }
    let center = dom.window().center();
    if dom.contains(&center) {
        return Ok(center);
    }
    let per_axis = match k.dim() {
        1 => 17,
        2 => 7,
        _ => 4,
    };
    let target = DVector::from_column_slice(m);
    dom.grid(per_axis, 0.05)
        .into_iter()
        .filter_map(|t| {
            let g = k.gradient(&t).ok()?;
            Some(((g - &target).norm(), t))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, t)| t)
        .ok_or_else(|| NefError::EmptyDomain("no point of the canonical window is usable".into()))
}

/// Damped Newton for `k'(θ) = m` started at `start`.
pub fn newton_solve(k: &dyn Cumulant, m: &[f64], start: &[f64], cfg: &NewtonConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dom = k.theta_domain();
    if !dom.contains(start) {
        return Err(NefError::invalid(format!("Newton start {start:?} is outside the canonical domain")));
    }
    let target = DVector::from_column_slice(m);
    let scale = inf_norm(&target).max(1.0);
    let mut theta = DVector::from_column_slice(start);
    let mut ev = k.eval(theta.as_slice())?;
    let mut resid = &ev.gradient - &target;
    let mut polished = false;
    for iter in 0..cfg.max_iters {
        let converged = inf_norm(&resid) <= cfg.tol * scale;
        if converged && polished {
            return Ok(theta.as_slice().to_vec());
        }
        let step = solve_linear(&ev.hessian, &(-&resid)).ok_or_else(|| NefError::Singularity {
            at: theta.as_slice().to_vec(),
            detail: "k'' is singular".into(),
        })?;
        let mut t = 1.0;
        let mut accepted = None;
        let mut any_inside = false;
        for _ in 0..=cfg.max_halvings {
            let cand = &theta + &step * t;
            if dom.contains(cand.as_slice()) {
                if let Ok(cev) = k.eval(cand.as_slice()) {
                    any_inside = true;
                    let cres = &cev.gradient - &target;
                    let better = cres.norm() < resid.norm() || (converged && cres.norm() <= resid.norm());
                    if better {
                        accepted = Some((cand, cev, cres));
                        break;
                    }
                }
            }
            if converged {
                // the polishing step is a single full Newton step
                break;
            }
            t *= cfg.damping;
        }
        match accepted {
            Some((c, cev, cres)) => {
                theta = c;
                ev = cev;
                resid = cres;
            }
            None if converged => return Ok(theta.as_slice().to_vec()),
            None if !any_inside => {
                return Err(NefError::DomainEscape {
                    point: (&theta + &step * t).as_slice().to_vec(),
                })
            }
            None => {
                return Err(NefError::Convergence {
                    best: theta.as_slice().to_vec(),
                    residual: inf_norm(&resid),
                    iterations: iter + 1,
                })
            }
        }
        if converged {
            polished = true;
        }
    }
    if inf_norm(&resid) <= cfg.tol * scale {
        return Ok(theta.as_slice().to_vec());
    }
    Err(NefError::Convergence {
        best: theta.as_slice().to_vec(),
        residual: inf_norm(&resid),
        iterations: cfg.max_iters,
    })
}

fn check_mean(fam: &FamilyDescriptor, m: &[f64]) -> Result<()> {
    if m.len() != fam.dim() {
        return Err(NefError::invalid(format!(
            "mean of dimension {} for a family of dimension {}",
            m.len(),
            fam.dim()
        )));
    }
    if !fam.mean_domain().contains(m) {
        return Err(NefError::invalid(format!("{m:?} is outside the mean domain")));
    }
    Ok(())
}

/// `ψ(m)`, the canonical parameter with mean `m`.
pub fn invert_mean_map(fam: &FamilyDescriptor, m: &Vector, cfg: &NewtonConfig) -> Result<Covector> {
    check_mean(fam, m)?;
    let k = fam.require_cumulant()?;
    let start = match &cfg.init {
        InitStrategy::UserSupplied(s) => s.clone(),
        _ => default_start(k, m)?,
    };
    Covector::new(newton_solve(k, m, &start, cfg)?)
}

pub(crate) fn psi(fam: &FamilyDescriptor, m: &[f64]) -> Result<Vec<f64>> {
    Ok(invert_mean_map(fam, &Vector::new(m.to_vec())?, &NewtonConfig::default())?.into_inner())
}

/// `ψ` along a sequence of means, warm-starting each solve from the
/// previous solution and falling back to a cold start if that fails.
pub fn invert_sweep(fam: &FamilyDescriptor, means: &[Vec<f64>], cfg: &NewtonConfig) -> Result<Vec<Vec<f64>>> {
    let k = fam.require_cumulant()?;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(means.len());
    for m in means {
        check_mean(fam, m)?;
        let warm = match (&cfg.init, out.last()) {
            (InitStrategy::UserSupplied(s), None) => Some(s.clone()),
            (_, Some(prev)) => Some(prev.clone()),
            _ => None,
        };
        let solved = match warm {
            Some(s) => newton_solve(k, m, &s, cfg).or_else(|_| newton_solve(k, m, &default_start(k, m)?, cfg)),
            None => newton_solve(k, m, &default_start(k, m)?, cfg),
        }?;
        out.push(solved);
    }
    Ok(out)
}

/// `k''(ψ(m))`; needs a cumulant function.
pub fn variance_at_cumulant(fam: &FamilyDescriptor, m: &[f64]) -> Result<DMatrix<f64>> {
    let theta = psi(fam, m)?;
    fam.require_cumulant()?.hessian(&theta)
}

/// `V(m)`: `k''(ψ(m))` when a cumulant is present, else the variance model.
pub fn variance_at(fam: &FamilyDescriptor, m: &Vector) -> Result<DMatrix<f64>> {
    check_mean(fam, m)?;
    if fam.cumulant().is_some() {
        variance_at_cumulant(fam, m)
    } else {
        fam.require_variance()?.eval(m)
    }
}

/// `k(ψ(m))`.
pub fn cumulant_at_mean(fam: &FamilyDescriptor, m: &Vector) -> Result<f64> {
    let theta = invert_mean_map(fam, m, &NewtonConfig::default())?;
    fam.require_cumulant()?.value(&theta)
}

/// Central-difference Jacobian of `ψ` at `m` with step `1e-5 max(1, |m_j|)`.
pub fn psi_jacobian(fam: &FamilyDescriptor, m: &Vector, cfg: &NewtonConfig) -> Result<DMatrix<f64>> {
    let n = m.dim();
    let center = invert_mean_map(fam, m, cfg)?.into_inner();
    let warm = NewtonConfig {
        init: InitStrategy::UserSupplied(center),
        ..cfg.clone()
    };
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = 1e-5 * m[j].abs().max(1.0);
        let mut mp = m.to_vec();
        let mut mm = m.to_vec();
        mp[j] += h;
        mm[j] -= h;
        let tp = invert_mean_map(fam, &Vector::new(mp)?, &warm)?;
        let tm = invert_mean_map(fam, &Vector::new(mm)?, &warm)?;
        for i in 0..n {
            jac[(i, j)] = (tp[i] - tm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build, Params};

    fn fam(id: &str) -> FamilyDescriptor {
        build(id, &Params::new()).unwrap()
    }

    fn v(x: f64) -> Vector {
        Vector::new(vec![x]).unwrap()
    }

    #[test]
    fn closed_form_inverses() {
        let cfg = NewtonConfig::default();
        assert!((invert_mean_map(&fam("normal"), &v(1.7), &cfg).unwrap()[0] - 1.7).abs() < 1e-14);
        assert!((invert_mean_map(&fam("poisson"), &v(2.0), &cfg).unwrap()[0] - 2f64.ln()).abs() < 1e-13);
        assert!((invert_mean_map(&fam("inverse-gaussian"), &v(1.0), &cfg).unwrap()[0] + 0.5).abs() < 1e-13);
    }

    #[test]
    fn variance_and_cumulant_at_mean() {
        assert!((variance_at(&fam("normal"), &v(0.3)).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((variance_at(&fam("poisson"), &v(3.0)).unwrap()[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((variance_at(&fam("inverse-gaussian"), &v(2.0)).unwrap()[(0, 0)] - 8.0).abs() < 1e-10);
        assert!(cumulant_at_mean(&fam("normal"), &v(0.0)).unwrap().abs() < 1e-15);
        assert!((cumulant_at_mean(&fam("poisson"), &v(2.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!((cumulant_at_mean(&fam("inverse-gaussian"), &v(1.0)).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_means_need_backtracking() {
        let cfg = NewtonConfig::default();
        let g = fam("gamma");
        let t = invert_mean_map(&g, &v(50.0), &cfg).unwrap();
        assert!((t[0] + 1.0 / 50.0).abs() < 1e-15);
        let p = fam("poisson");
        let t = invert_mean_map(&p, &v(1e-4), &cfg).unwrap();
        assert!((t[0] - 1e-4_f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_domain_mean_and_bad_config() {
        let cfg = NewtonConfig::default();
        assert!(matches!(
            invert_mean_map(&fam("poisson"), &v(-1.0), &cfg),
            Err(NefError::InvalidArgument(_))
        ));
        let bad = NewtonConfig { damping: 1.0, ..cfg };
        assert!(invert_mean_map(&fam("poisson"), &v(1.0), &bad).is_err());
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let cfg = NewtonConfig {
            max_iters: 1,
            init: InitStrategy::UserSupplied(vec![0.0]),
            ..NewtonConfig::default()
        };
        match invert_mean_map(&fam("poisson"), &v(1e3), &cfg) {
            Err(NefError::Convergence { best, residual, .. }) => {
                assert_eq!(best.len(), 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }
}
