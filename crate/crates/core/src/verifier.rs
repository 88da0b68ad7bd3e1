//! Numerical checks of the three equivalent characterizations of simple
//! cubic families, plus the β search and the overall classification.
//!
//! * P1: `det k''(θ) = |1 + <β, k'(θ)>|^{n+2} exp(<a, θ> + b k(θ) + c)`.
//! * P2: `Σᵢ [V'(m)(eᵢ)] eᵢ* - (n+2)/(1 + <β, m>) V(m)β = a + bm`.
//! * P3: the image of `π_{t,m0}` under `k'` is `π̃_{t+b, (t m0 - a)/(t+b)}`.
//!
//! With `β = 0` ("quadratic mode") P1 and P2 reduce to the identities of
//! simple quadratic families and P3 is not applicable.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{NefError, Result};
use crate::legendre::{invert_sweep, variance_at_cumulant, NewtonConfig};
use crate::nef::cumulant::check_member;
use crate::nef::vector::dot;
use crate::nef::{Covector, FamilyDescriptor, VarianceModel, Vector};
use crate::ode::{match_cubic_to_ode, solve_closed_form};
use crate::poly::Polynomial;
use crate::priors::{log_det_spd, mean_terms, param_map, pi_star_from, tilde_correction, MapDirection, OmegaParams};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            p1: 1e-6,
            p2: 1e-6,
            p3: 1e-4,
        }
    }
}

/// Fitted constants and the worst deviation from the fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub a: Vec<f64>,
    pub b: f64,
    /// Not determined by P2.
    pub c: Option<f64>,
    pub residual: f64,
    pub grid_size: usize,
    pub tolerance: f64,
    pub pass: bool,
    /// Absolute deviation at each grid point, for CSV output.
    #[serde(skip)]
    pub point_residuals: Vec<(Vec<f64>, f64)>,
}

impl FitResult {
    fn new(a: Vec<f64>, b: f64, c: Option<f64>, point_residuals: Vec<(Vec<f64>, f64)>, tol: f64) -> Self {
        let residual = point_residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max);
        let residual = if point_residuals.iter().any(|(_, r)| r.is_nan()) {
            f64::INFINITY
        } else {
            residual
        };
        FitResult {
            a,
            b,
            c,
            residual,
            grid_size: point_residuals.len(),
            tolerance: tol,
            pass: residual < tol,
            point_residuals,
        }
    }
}

/// `1 + <β, m>` over the points; all must share one sign and stay away
/// from zero.
fn twist_factors(beta: Option<&[f64]>, means: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(beta) = beta.filter(|b| b.iter().any(|&x| x != 0.0)) else {
        return Ok(vec![1.0; means.len()]);
    };
    let s: Vec<f64> = means.iter().map(|m| 1.0 + dot(beta, m)).collect();
    if let Some(i) = s.iter().position(|v| v.abs() <= 1e-12) {
        return Err(NefError::invalid(format!("1 + <β, m> vanishes at m = {:?}", means[i])));
    }
    if s.iter().any(|v| v.signum() != s[0].signum()) {
        return Err(NefError::invalid("1 + <β, m> changes sign over the grid"));
    }
    Ok(s)
}

/// Least squares with column equilibration; a numerically rank-deficient
/// design is reported as a degenerate grid.
fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if x.nrows() < x.ncols() {
        return Err(NefError::DegenerateGrid(format!(
            "{} equations for {} unknowns",
            x.nrows(),
            x.ncols()
        )));
    }
    let scales: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).amax()).collect();
    if scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(NefError::DegenerateGrid("a regressor vanishes on the grid".into()));
    }
    let mut xs = x.clone();
    for (j, s) in scales.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = xs.svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-10 * sv.max() {
        return Err(NefError::DegenerateGrid("regressors are linearly dependent on the grid".into()));
    }
    let mut coef = svd.solve(y, 0.0).map_err(|e| NefError::Internal(e.to_string()))?;
    for (j, s) in scales.iter().enumerate() {
        coef[j] /= s;
    }
    Ok(coef)
}

/// P1 on a grid of canonical parameters. `beta = None` (or zero) fits the
/// quadratic identity `det k'' = exp(<a, θ> + b k + c)`.
pub fn monge_ampere_fit(
    fam: &FamilyDescriptor,
    beta: Option<&Covector>,
    theta_grid: &[Vec<f64>],
    tol: f64,
) -> Result<FitResult> {
    let k = fam.require_cumulant()?;
    let n = fam.dim();
    if let Some(b) = beta {
        if b.dim() != n {
            return Err(NefError::invalid("β has the wrong dimension"));
        }
    }
    if theta_grid.len() < n + 3 {
        return Err(NefError::DegenerateGrid(format!(
            "{} grid points, need at least {}",
            theta_grid.len(),
            n + 3
        )));
    }
    let mut evals = Vec::with_capacity(theta_grid.len());
    for th in theta_grid {
        check_member(k.theta_domain(), th)?;
        evals.push(k.eval(th)?);
    }
    let means: Vec<Vec<f64>> = evals.iter().map(|e| e.gradient.as_slice().to_vec()).collect();
    let s = twist_factors(beta.map(|b| b.as_slice()), &means)?;
    let weight = (n + 2) as f64;
    let mut y = DVector::zeros(theta_grid.len());
    let mut x = DMatrix::zeros(theta_grid.len(), n + 2);
    for (i, (th, ev)) in theta_grid.iter().zip(&evals).enumerate() {
        y[i] = log_det_spd(&ev.hessian)? - weight * s[i].abs().ln();
        x[(i, 0)] = 1.0;
        for j in 0..n {
            x[(i, 1 + j)] = th[j];
        }
        x[(i, n + 1)] = ev.value;
    }
    let coef = lstsq(&x, &y)?;
    let fitted = &x * &coef;
    let residuals = theta_grid
        .iter()
        .enumerate()
        .map(|(i, th)| (th.clone(), (y[i] - fitted[i]).abs()))
        .collect();
    Ok(FitResult::new(
        coef.rows(1, n).iter().copied().collect(),
        coef[n + 1],
        Some(coef[0]),
        residuals,
        tol,
    ))
}

/// P2 on a grid of means. A zero `beta` gives the quadratic identity
/// `Σᵢ [V'(m)(eᵢ)] eᵢ* = a + bm`.
pub fn trace_identity_residual(v: &VarianceModel, beta: &Covector, mean_grid: &[Vec<f64>], tol: f64) -> Result<FitResult> {
    let n = v.dim();
    if beta.dim() != n {
        return Err(NefError::invalid("β has the wrong dimension"));
    }
    if let Some(m) = mean_grid.iter().find(|m| m.len() != n || !v.mean_domain().contains(m)) {
        return Err(NefError::invalid(format!("grid point {m:?} is outside the mean domain")));
    }
    let s = twist_factors(Some(beta.as_slice()), mean_grid)?;
    let bvec = DVector::from_column_slice(beta);
    let rows = mean_grid.len() * n;
    let mut x = DMatrix::zeros(rows, n + 1);
    let mut y = DVector::zeros(rows);
    for (p, m) in mean_grid.iter().enumerate() {
        let vm = v.eval(m)?;
        let mut l = -(vm * &bvec) * ((n + 2) as f64 / s[p]);
        for i in 0..n {
            let d = v.derivative(m, i)?;
            for j in 0..n {
                l[j] += d[(j, i)];
            }
        }
        for j in 0..n {
            let r = p * n + j;
            x[(r, j)] = 1.0;
            x[(r, n)] = m[j];
            y[r] = l[j];
        }
    }
    let coef = lstsq(&x, &y)?;
    let fitted = &x * &coef;
    let residuals = mean_grid
        .iter()
        .enumerate()
        .map(|(p, m)| {
            let worst = (0..n).map(|j| (y[p * n + j] - fitted[p * n + j]).abs()).fold(0.0, f64::max);
            (m.clone(), worst)
        })
        .collect();
    Ok(FitResult::new(coef.rows(0, n).iter().copied().collect(), coef[n], None, residuals, tol))
}

/// P3: for each `(t, m0)` the log-ratio of the pushforward density to the
/// matching `π̃` density must be constant in `m`. The reported `c` is minus
/// the mean log-ratio, which equals the P1 constant.
pub fn prior_pushforward_check(
    fam: &FamilyDescriptor,
    beta: &Covector,
    p: &OmegaParams,
    samples: &[(f64, Vec<f64>)],
    mean_grid: &[Vec<f64>],
    tol: f64,
) -> Result<FitResult> {
    let n = fam.dim();
    if beta.dim() != n || beta.is_zero() {
        return Err(NefError::invalid("P3 needs a nonzero β of the family's dimension"));
    }
    if samples.is_empty() {
        return Err(NefError::invalid("P3 needs at least one hyperparameter sample"));
    }
    if mean_grid.is_empty() {
        return Err(NefError::EmptyDomain("no grid point in the mean domain".into()));
    }
    twist_factors(Some(beta.as_slice()), mean_grid)?;
    let mut terms = Vec::with_capacity(mean_grid.len());
    let mut corrections = Vec::with_capacity(mean_grid.len());
    for m in mean_grid {
        if !fam.mean_domain().contains(m) {
            return Err(NefError::invalid(format!("grid point {m:?} is outside the mean domain")));
        }
        let warm = terms.last().map(|t: &crate::priors::MeanTerms| t.theta.clone());
        terms.push(mean_terms(fam, m, warm.as_deref())?);
        corrections.push(tilde_correction(beta, m).unwrap_or(f64::NAN));
    }
    let mut worst = vec![0.0_f64; mean_grid.len()];
    let mut all = Vec::new();
    let mut range_max: f64 = 0.0;
    for (t, m0) in samples {
        let (t1, m1) = param_map(MapDirection::KprimeSide, *t, m0, p)?;
        if !(*t > 0.0) || !fam.mean_domain().contains(m0) || !fam.mean_domain().contains(&m1) {
            return Err(NefError::invalid(format!(
                "sample (t = {t}, m0 = {m0:?}) maps outside the admissible set"
            )));
        }
        let d: Vec<f64> = terms
            .iter()
            .zip(&corrections)
            .map(|(mt, corr)| pi_star_from(*t, m0, mt) - mt.log_det_v - (pi_star_from(t1, &m1, mt) + corr))
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        range_max = range_max.max(hi - lo);
        for (w, di) in worst.iter_mut().zip(&d) {
            *w = w.max((di - mean).abs());
        }
        all.extend(d);
    }
    let c = -all.iter().sum::<f64>() / all.len() as f64;
    let mut fit = FitResult::new(
        p.a.to_vec(),
        p.b,
        Some(c),
        mean_grid.iter().cloned().zip(worst).collect(),
        tol,
    );
    // the residual is the spread of D, not the deviation from its mean
    fit.residual = if range_max.is_nan() { f64::INFINITY } else { range_max };
    fit.pass = fit.residual < tol;
    Ok(fit)
}

/// `|V'(m)(V(m)α)γ - V'(m)(V(m)γ)α|`, the max-norm of the difference.
pub fn symmetry_check(v: &VarianceModel, m: &[f64], alpha: &Covector, gamma: &Covector) -> Result<f64> {
    let n = v.dim();
    if m.len() != n || alpha.dim() != n || gamma.dim() != n {
        return Err(NefError::invalid("dimension mismatch"));
    }
    let vm = v.eval(m)?;
    let al = DVector::from_column_slice(alpha);
    let ga = DVector::from_column_slice(gamma);
    let lhs = v.directional_derivative(m, &(&vm * &al))? * &ga;
    let rhs = v.directional_derivative(m, &(&vm * &ga))? * &al;
    Ok((lhs - rhs).amax())
}

/// Real roots of a polynomial with coefficients in increasing degree,
/// multiple roots reported once.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|x| x.abs() <= 1e-14 * scale) {
        c.pop();
    }
    let eval = |x: f64| c.iter().rev().fold(0.0, |acc, ci| acc * x + ci);
    let magnitude = |x: f64| c.iter().rev().fold(0.0, |acc, ci| acc * x.abs() + ci.abs());
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    let dc: Vec<f64> = (1..=deg).map(|i| i as f64 * c[i]).collect();
    let deval = |x: f64| dc.iter().rev().fold(0.0, |acc, ci| acc * x + ci);
    let critical = real_roots(&dc);
    let bound = 1.0 + c[..deg].iter().map(|x| (x / c[deg]).abs()).fold(0.0, f64::max);
    let mut roots = Vec::new();
    // points bounding monotone pieces, with multiple roots pinned to zero
    let mut knots = vec![(-bound, eval(-bound))];
    for &x in &critical {
        let fx = eval(x);
        if fx.abs() <= 1e-12 * magnitude(x) {
            roots.push(x);
            knots.push((x, 0.0));
        } else {
            knots.push((x, fx));
        }
    }
    knots.push((bound, eval(bound)));
    for w in knots.windows(2) {
        let ((mut lo, flo), (mut hi, fhi)) = (w[0], w[1]);
        if flo * fhi >= 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if eval(mid) * flo > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..3 {
            let d = deval(r);
            if d != 0.0 {
                r -= eval(r) / d;
            }
        }
        roots.push(r);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10);
    roots
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-10);
    v
}

/// `{-1/r : r a nonzero real root of V}` together with `extra`.
pub fn beta_candidates(v: &VarianceModel, extra: &[f64]) -> Result<Vec<f64>> {
    if v.dim() != 1 {
        return Err(NefError::invalid("β candidates from roots need a one-dimensional family"));
    }
    let p = v
        .polynomial_matrix()
        .ok_or_else(|| NefError::invalid("β candidates need a polynomial variance"))?;
    let mut out: Vec<f64> = real_roots(&p.get(0, 0).univariate_coeffs())
        .into_iter()
        .filter(|r| r.abs() > 1e-12)
        .map(|r| -1.0 / r)
        .collect();
    out.extend_from_slice(extra);
    Ok(dedup_sorted(out))
}

/// Which β values `classify` tries besides quadratic mode.
#[derive(Clone, Debug, PartialEq)]
pub enum BetaChoice {
    /// Root-derived candidates in one dimension, the construction β
    /// recorded in the provenance, and probes at `±1` for cubic or
    /// non-polynomial one-dimensional families with no other candidate.
    Auto,
    Given(Vec<Covector>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PropertySet {
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
}

impl Default for PropertySet {
    fn default() -> Self {
        PropertySet {
            p1: true,
            p2: true,
            p3: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub tolerances: Tolerances,
    pub grid_points: usize,
    pub shrink: f64,
    pub betas: BetaChoice,
    pub properties: PropertySet,
    /// Number of `(t, m0)` samples for P3.
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            tolerances: Tolerances::default(),
            grid_points: 25,
            shrink: 0.05,
            betas: BetaChoice::Auto,
            properties: PropertySet::default(),
            samples: 5,
            seed: 0,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        if ![t.p1, t.p2, t.p3].iter().all(|x| *x > 0.0 && x.is_finite()) {
            return Err(NefError::invalid("tolerances must be positive"));
        }
        if self.grid_points < 4 {
            return Err(NefError::invalid("grid needs at least 4 points per axis"));
        }
        if !(0.0..0.5).contains(&self.shrink) {
            return Err(NefError::invalid("shrink must lie in [0, 0.5)"));
        }
        if self.samples == 0 {
            return Err(NefError::invalid("need at least one P3 sample"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PropertyOutcome {
    Evaluated(FitResult),
    Error { message: String },
    NotApplicable { reason: String },
    Skipped,
}

impl PropertyOutcome {
    /// `Some(pass)` for attempted properties; errors count as failures.
    pub fn verdict(&self) -> Option<bool> {
        match self {
            PropertyOutcome::Evaluated(f) => Some(f.pass),
            PropertyOutcome::Error { .. } => Some(false),
            _ => None,
        }
    }

    pub fn fit(&self) -> Option<&FitResult> {
        match self {
            PropertyOutcome::Evaluated(f) => Some(f),
            _ => None,
        }
    }

    fn from_result(r: Result<FitResult>) -> Self {
        match r {
            Ok(f) => PropertyOutcome::Evaluated(f),
            Err(e) => PropertyOutcome::Error { message: e.to_string() },
        }
    }
}

/// Membership in the solution set of the one-dimensional equation: the
/// variance polynomial against the closed form for the reported constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdeCheck {
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub lam: f64,
    pub coefficient_error: f64,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum BetaUsed {
    Mode(String),
    Beta(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Attempt {
    pub beta: BetaUsed,
    /// Candidate came from probing rather than from the roots of V.
    pub probe: bool,
    pub p1: PropertyOutcome,
    pub p2: PropertyOutcome,
    pub p3: PropertyOutcome,
    pub pass: bool,
    pub agreement: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ode: Option<OdeCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictReport {
    pub family: String,
    pub dimension: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub grid_points: usize,
    pub grid_size: usize,
    pub beta_used: Option<BetaUsed>,
    pub pass: bool,
    /// Every attempt's attempted properties agree.
    pub agreement: bool,
    pub p1: PropertyOutcome,
    pub p2: PropertyOutcome,
    pub p3: PropertyOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ode: Option<OdeCheck>,
    pub attempts: Vec<Attempt>,
}

pub const QUADRATIC_MODE: &str = "quadratic-mode";

/// Variance used by P2: the family's model, or `k''(ψ(m))` when only a
/// cumulant is known.
fn variance_for(fam: &FamilyDescriptor) -> Result<VarianceModel> {
    if let Some(v) = fam.variance() {
        return Ok(v.clone());
    }
    let f = fam.clone();
    let n = fam.dim();
    VarianceModel::numeric(
        format!("k''(psi(m)) of {}", fam.name),
        n,
        move |m| variance_at_cumulant(&f, m).unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN)),
        fam.mean_domain().clone(),
    )
}

/// `(t, m0)` samples for P3: `m0` drawn from the grid, `t` doubled until
/// the mapped hyperparameters are admissible.
pub fn pushforward_samples(
    fam: &FamilyDescriptor,
    p: &OmegaParams,
    mean_grid: &[Vec<f64>],
    count: usize,
    seed: u64,
) -> Vec<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if mean_grid.is_empty() {
        return out;
    }
    for i in 0..count {
        let m0 = mean_grid[rng.gen_range(0..mean_grid.len())].clone();
        let mut t = (1u64 << (i % 5)) as f64;
        for _ in 0..40 {
            let ok = param_map(MapDirection::KprimeSide, t, &m0, p)
                .map(|(_, m1)| fam.mean_domain().contains(&m1))
                .unwrap_or(false);
            if ok {
                out.push((t, m0));
                break;
            }
            t *= 2.0;
        }
    }
    out
}

struct Workspace {
    fam: FamilyDescriptor,
    variance: Result<VarianceModel>,
    means: Vec<Vec<f64>>,
    thetas: Result<Vec<Vec<f64>>>,
}

fn run_attempt(ws: &Workspace, beta: Option<&Covector>, probe: bool, cfg: &VerifyConfig) -> Attempt {
    let n = ws.fam.dim();
    let props = cfg.properties;
    let tol = &cfg.tolerances;
    let p1 = if !props.p1 {
        PropertyOutcome::Skipped
    } else if ws.fam.cumulant().is_none() {
        PropertyOutcome::NotApplicable {
            reason: "no cumulant function".into(),
        }
    } else {
        PropertyOutcome::from_result(
            ws.thetas
                .clone()
                .and_then(|th| monge_ampere_fit(&ws.fam, beta, &th, tol.p1)),
        )
    };
    let zero = Covector::zeros(n);
    let p2 = if !props.p2 {
        PropertyOutcome::Skipped
    } else {
        PropertyOutcome::from_result(
            ws.variance
                .clone()
                .and_then(|v| trace_identity_residual(&v, beta.unwrap_or(&zero), &ws.means, tol.p2)),
        )
    };
    let p3 = match beta {
        _ if !props.p3 => PropertyOutcome::Skipped,
        None => PropertyOutcome::NotApplicable {
            reason: "quadratic mode".into(),
        },
        Some(_) if ws.fam.cumulant().is_none() => PropertyOutcome::NotApplicable {
            reason: "no cumulant function".into(),
        },
        Some(b) => {
            let estimate = p2.fit().or(p1.fit()).map(|f| (f.a.clone(), f.b));
            PropertyOutcome::from_result(match estimate {
                None => Err(NefError::invalid("no estimate of (a, b) from P1 or P2")),
                Some((a, bb)) => Vector::new(a)
                    .and_then(|a| OmegaParams::new(a, bb, 0.0))
                    .and_then(|om| {
                        let samples = pushforward_samples(&ws.fam, &om, &ws.means, cfg.samples, cfg.seed);
                        prior_pushforward_check(&ws.fam, b, &om, &samples, &ws.means, tol.p3)
                    }),
            })
        }
    };
    let verdicts: Vec<bool> = [&p1, &p2, &p3].iter().filter_map(|p| p.verdict()).collect();
    let pass = !verdicts.is_empty() && verdicts.iter().all(|&v| v);
    let agreement = verdicts.windows(2).all(|w| w[0] == w[1]);
    let ode = if pass && n == 1 {
        ode_check(ws.variance.as_ref().ok(), beta, p2.fit())
    } else {
        None
    };
    Attempt {
        beta: match beta {
            None => BetaUsed::Mode(QUADRATIC_MODE.into()),
            Some(b) => BetaUsed::Beta(b.to_vec()),
        },
        probe,
        p1,
        p2,
        p3,
        pass,
        agreement,
        ode,
    }
}

/// Compares the variance polynomial with the solution of the equation for
/// the fitted `(a, b)`. In quadratic mode the solution is the `β → 0`
/// limit `λ + am + bm²/2`.
fn ode_check(v: Option<&VarianceModel>, beta: Option<&Covector>, p2: Option<&FitResult>) -> Option<OdeCheck> {
    let poly = v?.polynomial_matrix()?.get(0, 0).clone();
    if poly.degree() > 3 {
        return None;
    }
    let fit = p2?;
    let (fa, fb) = (fit.a[0], fit.b);
    match beta {
        None => {
            let lam = poly.coeff(&[0]);
            let limit = Polynomial::univariate(&[lam, fa, 0.5 * fb]);
            let err = poly.max_coeff_diff(&limit);
            Some(OdeCheck {
                beta: 0.0,
                a: fa,
                b: fb,
                lam,
                coefficient_error: err,
                matches: err < 1e-9,
            })
        }
        Some(b) => {
            let beta = b[0];
            match match_cubic_to_ode(&poly, &beta) {
                Ok(Some(params)) => {
                    let closed = solve_closed_form(&params).ok()?.poly;
                    let err = poly.max_coeff_diff(&closed);
                    let fit_gap = (params.a - fa).abs().max((params.b - fb).abs());
                    Some(OdeCheck {
                        beta,
                        a: params.a,
                        b: params.b,
                        lam: params.lam,
                        coefficient_error: err,
                        matches: err < 1e-9 && fit_gap < 1e-6,
                    })
                }
                _ => Some(OdeCheck {
                    beta,
                    a: fa,
                    b: fb,
                    lam: f64::NAN,
                    coefficient_error: f64::INFINITY,
                    matches: false,
                }),
            }
        }
    }
}

/// Candidate β values in the order they are tried, each flagged as probe
/// or not.
fn candidates(fam: &FamilyDescriptor, cfg: &VerifyConfig, grid: &[Vec<f64>]) -> Result<Vec<(Covector, bool)>> {
    let n = fam.dim();
    let mut found: Vec<Vec<f64>> = match &cfg.betas {
        BetaChoice::Given(list) => {
            if let Some(b) = list.iter().find(|b| b.dim() != n || b.is_zero()) {
                return Err(NefError::invalid(format!(
                    "β {:?} must be nonzero of dimension {n}",
                    b.as_slice()
                )));
            }
            list.iter().map(|b| b.to_vec()).collect()
        }
        BetaChoice::Auto => {
            let mut v: Vec<Vec<f64>> = Vec::new();
            if n == 1 {
                if let Some(var) = fam.variance().filter(|v| v.polynomial_matrix().is_some()) {
                    v.extend(beta_candidates(var, &[])?.into_iter().map(|b| vec![b]));
                }
            }
            if let Some(b) = fam.provenance.beta.clone().filter(|b| b.len() == n && b.iter().any(|x| *x != 0.0)) {
                v.push(b);
            }
            v
        }
    };
    found.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    found.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-10));
    let mut out: Vec<(Covector, bool)> = found
        .into_iter()
        .map(|b| Covector::new(b).map(|c| (c, false)))
        .collect::<Result<_>>()?;
    let needs_probe = cfg.betas == BetaChoice::Auto
        && n == 1
        && out.is_empty()
        && fam.variance().and_then(|v| v.degree()).is_none_or(|d| d >= 3);
    if needs_probe {
        for b in [-1.0, 1.0] {
            if twist_factors(Some(&[b]), grid).is_ok() {
                out.push((Covector::new(vec![b])?, true));
            }
        }
    }
    Ok(out)
}

/// Runs quadratic mode and every β candidate, and reports the first
/// passing attempt (quadratic mode first, then β in increasing order).
pub fn classify(fam: &FamilyDescriptor, cfg: &VerifyConfig) -> Result<VerdictReport> {
    cfg.validate()?;
    let means = fam.mean_domain().grid(cfg.grid_points, cfg.shrink);
    if means.len() < fam.dim() + 3 {
        return Err(NefError::DegenerateGrid(format!(
            "only {} grid points fall inside the mean domain",
            means.len()
        )));
    }
    let thetas = match fam.cumulant() {
        Some(_) => invert_sweep(fam, &means, &NewtonConfig::default()),
        None => Err(NefError::invalid("no cumulant function")),
    };
    let ws = Workspace {
        fam: fam.clone(),
        variance: variance_for(fam),
        means,
        thetas,
    };
    let cands = candidates(fam, cfg, &ws.means)?;
    let mut attempts = vec![run_attempt(&ws, None, false, cfg)];
    for (b, probe) in &cands {
        attempts.push(run_attempt(&ws, Some(b), *probe, cfg));
    }
    let chosen = attempts.iter().position(|a| a.pass);
    let shown = &attempts[chosen.unwrap_or(0)];
    Ok(VerdictReport {
        family: fam.name.clone(),
        dimension: fam.dim(),
        seed: cfg.seed,
        tolerances: cfg.tolerances.clone(),
        grid_points: cfg.grid_points,
        grid_size: ws.means.len(),
        beta_used: chosen.map(|i| attempts[i].beta.clone()),
        pass: chosen.is_some(),
        agreement: attempts.iter().all(|a| a.agreement),
        p1: shown.p1.clone(),
        p2: shown.p2.clone(),
        p3: shown.p3.clone(),
        ode: shown.ode.clone(),
        attempts,
    })
}

/// Largest symmetry residual over `count` random `(m, α, γ)` drawn from
/// the mean grid and the unit cube.
pub fn random_symmetry_residual(v: &VarianceModel, count: usize, seed: u64) -> Result<f64> {
    let grid = v.mean_domain().grid(9, 0.05);
    if grid.is_empty() {
        return Err(NefError::EmptyDomain("no grid point in the mean domain".into()));
    }
    let n = v.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let m = &grid[rng.gen_range(0..grid.len())];
        let alpha = Covector::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let gamma = Covector::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        worst = worst.max(symmetry_check(v, m, &alpha, &gamma)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::cubic::{cubic_family, CubicConstructionParams};

    fn fam(id: &str) -> FamilyDescriptor {
        catalog::build(id, &Default::default()).unwrap()
    }

    fn poly_variance(c: &[f64], lo: f64, hi: f64) -> VarianceModel {
        let m = crate::poly::PolyMatrix::from_fn(1, |_, _| Polynomial::univariate(c));
        VarianceModel::polynomial(m, crate::nef::Domain::interval(Some(lo), None, (lo + 1.0, hi)).unwrap()).unwrap()
    }

    #[test]
    fn roots_with_multiplicity() {
        assert_eq!(real_roots(&[1.0, 3.0, 3.0, 1.0]), vec![-1.0]);
        let r = real_roots(&[0.0, 1.0, 2.0, 1.0]);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 1.0).abs() < 1e-12 && r[1].abs() < 1e-12);
        assert!(real_roots(&[1.0]).is_empty());
        assert!(real_roots(&[1.0, 0.0, 1.0]).is_empty());
        let r = real_roots(&[-6.0, 11.0, -6.0, 1.0]);
        assert!(r.iter().zip([1.0, 2.0, 3.0]).all(|(a, b)| (a - b).abs() < 1e-12), "{r:?}");
    }

    #[test]
    fn candidates_from_roots() {
        assert_eq!(beta_candidates(&poly_variance(&[1.0, 3.0, 3.0, 1.0], 0.0, 3.0), &[]).unwrap(), vec![1.0]);
        assert_eq!(beta_candidates(&poly_variance(&[0.0, 1.0, 2.0, 1.0], 0.0, 3.0), &[]).unwrap(), vec![1.0]);
        assert!(beta_candidates(&poly_variance(&[1.0], 0.0, 3.0), &[]).unwrap().is_empty());
        assert_eq!(
            beta_candidates(&poly_variance(&[1.0], 0.0, 3.0), &[2.0, 2.0 + 1e-12]).unwrap(),
            vec![2.0]
        );
    }

    #[test]
    fn trace_identity_examples() {
        let b1 = Covector::new(vec![1.0]).unwrap();
        let grid: Vec<Vec<f64>> = (0..=20).map(|i| vec![1.0 + i as f64 / 20.0]).collect();
        let f = trace_identity_residual(&poly_variance(&[1.0, 3.0, 3.0, 1.0], 0.0, 3.0), &b1, &grid, 1e-6).unwrap();
        assert!(f.pass && f.a[0].abs() < 1e-10 && f.b.abs() < 1e-10);
        let f = trace_identity_residual(&poly_variance(&[0.0, 1.0, 2.0, 1.0], 0.0, 3.0), &b1, &grid, 1e-6).unwrap();
        assert!(f.residual < 1e-10 && (f.a[0] - 1.0).abs() < 1e-10 && (f.b - 1.0).abs() < 1e-10);
        let f = trace_identity_residual(&poly_variance(&[0.0, 0.0, 0.0, 1.0], 0.0, 3.0), &b1, &grid, 1e-6).unwrap();
        assert!(!f.pass);
        let neg = vec![vec![-1.0]];
        assert!(trace_identity_residual(&poly_variance(&[1.0], -5.0, 3.0), &b1, &neg, 1e-6).is_err());
    }

    #[test]
    fn monge_ampere_quadratic_normal() {
        let normal = fam("normal");
        let grid: Vec<Vec<f64>> = (0..25).map(|i| vec![-2.0 + i as f64 / 6.0]).collect();
        let f = monge_ampere_fit(&normal, None, &grid, 1e-7).unwrap();
        assert!(f.pass && f.a[0].abs() < 1e-10 && f.b.abs() < 1e-10 && f.c.unwrap().abs() < 1e-10);
        assert!(matches!(
            monge_ampere_fit(&normal, None, &grid[..3], 1e-7),
            Err(NefError::DegenerateGrid(_))
        ));
    }

    #[test]
    fn symmetry_trivial_cases() {
        let v = poly_variance(&[0.0, 1.0, 2.0, 1.0], 0.0, 3.0);
        let a = Covector::new(vec![0.3]).unwrap();
        let g = Covector::new(vec![-1.1]).unwrap();
        assert!(symmetry_check(&v, &[1.5], &a, &g).unwrap() < 1e-14);
        assert_eq!(symmetry_check(&v, &[1.5], &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn classify_poisson_transform() {
        let base = fam("poisson");
        let f = cubic_family(&base, &CubicConstructionParams::with_beta(Covector::new(vec![1.0]).unwrap()).unwrap())
            .unwrap();
        let r = classify(&f, &VerifyConfig::default()).unwrap();
        assert!(r.pass && r.agreement, "{r:#?}");
        assert_eq!(r.beta_used, Some(BetaUsed::Beta(vec![1.0])));
        let fit = r.p2.fit().unwrap();
        assert!((fit.a[0] - 1.0).abs() < 1e-8 && (fit.b - 1.0).abs() < 1e-8);
        assert!(r.ode.as_ref().unwrap().matches);
    }
}
