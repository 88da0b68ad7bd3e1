//! The nine acceptance criteria. Each prints one `PASS`/`FAIL` line with
//! the measured figure; the test fails if any criterion does.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neflab::battery::{default_battery, run_battery, run_entry, EntryKind, SYMMETRY_SAMPLES};
use neflab::catalog::{self, Params};
use neflab::cubic::{cubic_family, forward_matrix, inverse_matrix, CubicConstructionParams};
use neflab::legendre::{invert_mean_map, invert_sweep, psi_jacobian, variance_at, NewtonConfig};
use neflab::ode::{integrate_numeric, match_cubic_to_ode, ode_residual, solve_closed_form, OdeParams};
use neflab::poly::{PolyMatrix, Polynomial};
use neflab::priors::{
    normalizer, param_map, pushforward_mass, MapDirection, OmegaParams, PriorFamily, PriorSpec, QuadratureConfig,
};
use neflab::verifier::{
    beta_candidates, classify, monge_ampere_fit, prior_pushforward_check, pushforward_samples,
    random_symmetry_residual, BetaChoice, BetaUsed, PropertySet, VerifyConfig,
};
use neflab::{Covector, FamilyDescriptor, Poly64, Vector};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn catalog_family(id: &str) -> FamilyDescriptor {
    catalog::build(id, &Params::new()).unwrap()
}

fn mean_grid(fam: &FamilyDescriptor, per_axis: usize) -> Vec<Vec<f64>> {
    fam.mean_domain().grid(per_axis, 0.05)
}

fn duality_engine() -> Outcome {
    let cfg = NewtonConfig::default();
    let (mut worst_psi, mut worst_jac) = (0.0_f64, 0.0_f64);
    for id in catalog::ids() {
        let fam = catalog_family(id);
        let k = fam.require_cumulant().map_err(err)?;
        for theta in k.theta_domain().grid(25, 0.05) {
            let m = Vector::new(k.gradient(&theta).map_err(err)?.as_slice().to_vec()).map_err(err)?;
            let back = invert_mean_map(&fam, &m, &cfg).map_err(|e| format!("{id}: {e}"))?;
            worst_psi = worst_psi.max((back[0] - theta[0]).abs());
            let v = variance_at(&fam, &m).map_err(err)?;
            let j = psi_jacobian(&fam, &m, &cfg).map_err(err)?;
            let off = (v * j - DMatrix::identity(1, 1)).amax();
            worst_jac = worst_jac.max(off);
        }
    }
    check(
        worst_psi < 1e-9 && worst_jac < 1e-6,
        format!("max |ψ(k'(θ)) - θ| = {worst_psi:.2e}, max |V Jψ - I| = {worst_jac:.2e}"),
    )
}

fn quadratic_determinant() -> Outcome {
    let mut worst = 0.0_f64;
    for e in default_battery().map_err(err)?.into_iter().filter(|e| e.kind == EntryKind::Morris) {
        let means = mean_grid(&e.family, 25);
        let thetas = invert_sweep(&e.family, &means, &NewtonConfig::default()).map_err(err)?;
        let fit = monge_ampere_fit(&e.family, None, &thetas, 1e-7).map_err(|x| format!("{}: {x}", e.id))?;
        if !fit.pass {
            return Err(format!("{} residual {:.2e}", e.id, fit.residual));
        }
        worst = worst.max(fit.residual);
    }
    check(worst < 1e-7, format!("six Morris families, max residual {worst:.2e}"))
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let x = rng.gen_range(-1.0..1.0);
            m[i * n + j] = x;
            m[j * n + i] = x;
        }
    }
    m
}

/// Random simple quadratic model `V1(m) = C + Σ m_k B_k + a m mᵀ` with a
/// diagonally dominant `C`. For n = 1 every quadratic has this shape.
fn random_quadratic(rng: &mut ChaCha8Rng, n: usize) -> PolyMatrix<f64> {
    let mut c = random_symmetric(rng, n);
    for i in 0..n {
        c[i * n + i] = 2.0 + n as f64 + rng.gen_range(0.0..1.0);
    }
    let b: Vec<Vec<f64>> = (0..n).map(|_| random_symmetric(rng, n)).collect();
    let a = rng.gen_range(-1.0..1.0);
    PolyMatrix::from_fn(n, |i, j| {
        let mut terms = vec![(vec![0; n], c[i * n + j])];
        for (k, bk) in b.iter().enumerate() {
            let mut e = vec![0; n];
            e[k] = 1;
            terms.push((e, bk[i * n + j]));
        }
        let mut e = vec![0; n];
        e[i] += 1;
        e[j] += 1;
        terms.push((e, a));
        Polynomial::from_terms(n, terms).unwrap()
    })
}

fn cubic_construction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_coeff, mut worst_det) = (0.0_f64, 0.0_f64);
    for trial in 0..50 {
        let n = 1 + trial % 2;
        let v1 = random_quadratic(&mut rng, n);
        let beta: Vec<f64> = (0..n)
            .map(|_| {
                let x: f64 = rng.gen_range(0.2..1.5);
                if rng.gen_bool(0.5) {
                    -x
                } else {
                    x
                }
            })
            .collect();
        let v = forward_matrix(&v1, &beta).map_err(err)?;
        let back = inverse_matrix(&v, &beta).map_err(err)?;
        for (i, j, p) in v1.entries() {
            worst_coeff = worst_coeff.max(p.max_coeff_diff(back.get(i, j)));
        }
        let box_grid = neflab::nef::Window::new(vec![-1.0; n], vec![1.0; n]).unwrap().grid(7);
        for m in box_grid {
            let s = 1.0 + beta.iter().zip(&m).map(|(b, x)| b * x).sum::<f64>();
            if s.abs() < 0.2 {
                continue;
            }
            let big_m: Vec<f64> = m.iter().map(|x| x / s).collect();
            let base = v1.eval_f64(&big_m);
            let lhs = v.eval_f64(&m).determinant();
            let rhs = s.powi(n as i32 + 2) * base.determinant();
            let scale = s.abs().powi(n as i32 + 2) * base.norm().powi(n as i32);
            worst_det = worst_det.max((lhs - rhs).abs() / scale);
        }
    }
    check(
        worst_coeff < 1e-12 && worst_det < 1e-9,
        format!("50 models, round trip {worst_coeff:.2e}, determinant identity {worst_det:.2e}"),
    )
}

fn construction_sufficiency() -> Outcome {
    let pp = catalog::product_family(&[catalog_family("poisson"), catalog_family("poisson")]).map_err(err)?;
    let mut worst = 0.0_f64;
    for (name, base, beta) in [
        ("normal", catalog_family("normal"), vec![1.0]),
        ("poisson", catalog_family("poisson"), vec![1.0]),
        ("product-poisson", pp, vec![1.0, 0.0]),
    ] {
        let beta = Covector::new(beta).map_err(err)?;
        let fam = cubic_family(&base, &CubicConstructionParams::with_beta(beta.clone()).map_err(err)?).map_err(err)?;
        let cfg = VerifyConfig {
            betas: BetaChoice::Given(vec![beta]),
            properties: PropertySet {
                p1: true,
                p2: false,
                p3: false,
            },
            ..VerifyConfig::default()
        };
        let report = classify(&fam, &cfg).map_err(err)?;
        let fit = report.attempts[1]
            .p1
            .fit()
            .ok_or_else(|| format!("{name}: P1 was not evaluated"))?;
        if !fit.pass {
            return Err(format!("{name}: P1 residual {:.2e}", fit.residual));
        }
        worst = worst.max(fit.residual);
    }
    check(worst < 1e-6, format!("three forward images, max P1 residual {worst:.2e}"))
}

fn equivalence() -> Outcome {
    let started = Instant::now();
    let report = run_battery(&VerifyConfig::default()).map_err(err)?;
    let attempts: usize = report.rows.iter().map(|r| r.attempts.len()).sum();
    let disagreeing: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| !r.agreement || r.attempts.iter().any(|a| !a.agreement))
        .map(|r| r.id.as_str())
        .collect();
    let unexpected: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| r.pass != r.expected_pass)
        .map(|r| r.id.as_str())
        .collect();
    check(
        disagreeing.is_empty() && unexpected.is_empty() && report.rows.len() == 12,
        format!(
            "12 families, {attempts} attempts, disagreeing {disagreeing:?}, unexpected verdicts {unexpected:?}, {:.2}s",
            started.elapsed().as_secs_f64()
        ),
    )
}

fn cubic_characterization() -> Outcome {
    let cfg = VerifyConfig::default();
    let mut checked = 0;
    let mut worst = 0.0_f64;
    for e in default_battery().map_err(err)?.into_iter().filter(|e| e.family.dim() == 1) {
        let (_, report) = run_entry(&e, &cfg);
        let report = report.ok_or_else(|| format!("{}: classify failed", e.id))?;
        if !report.pass {
            continue;
        }
        let v = e.family.require_variance().map_err(err)?;
        let poly = v.polynomial_matrix().ok_or_else(|| format!("{}: variance is not polynomial", e.id))?;
        if poly.degree() > 3 {
            return Err(format!("{} passes with degree {}", e.id, poly.degree()));
        }
        let ode = report.ode.ok_or_else(|| format!("{}: no ODE comparison", e.id))?;
        if !ode.matches {
            return Err(format!("{}: closed form differs by {:.2e}", e.id, ode.coefficient_error));
        }
        worst = worst.max(ode.coefficient_error);
        checked += 1;
    }

    let cube = Poly64::univariate(&[0.0, 0.0, 0.0, 1.0]);
    let raw = catalog_family("inverse-gaussian");
    let raw_report = classify(&raw, &cfg).map_err(err)?;
    if raw_report.pass || raw_report.attempts.iter().any(|a| a.pass) {
        return Err("m³ passed an attempt".into());
    }
    let raw_v = raw.require_variance().map_err(err)?;
    for b in beta_candidates(raw_v, &[]).map_err(err)?.into_iter().chain([-1.0, 1.0]) {
        if match_cubic_to_ode(&cube, &b).map_err(err)?.is_some() {
            return Err(format!("m³ matches the equation for β = {b}"));
        }
    }

    let shifted = default_battery()
        .map_err(err)?
        .into_iter()
        .find(|e| e.kind == EntryKind::ShiftedCubic)
        .ok_or("no shifted entry")?;
    let report = classify(&shifted.family, &cfg).map_err(err)?;
    let ode = report.ode.clone().ok_or("(m - 1)³ has no ODE comparison")?;
    let ok = report.pass
        && report.beta_used == Some(BetaUsed::Beta(vec![-1.0]))
        && ode.a.abs() < 1e-9
        && ode.b.abs() < 1e-9
        && ode.matches;
    check(
        ok && checked >= 9,
        format!(
            "{checked} passing families match the closed form (max {worst:.2e}); m³ fails; (m-1)³ passes with β=-1, a={:.1e}, b={:.1e}",
            ode.a, ode.b
        ),
    )
}

fn prior_machinery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_map = 0.0_f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=3);
        let a = Vector::new((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let b = rng.gen_range(-1.0..1.0);
        let p = OmegaParams::new(a, b, 0.0).map_err(err)?;
        let t = rng.gen_range(1.5..6.0);
        let m0: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (t1, m1) = param_map(MapDirection::PsiSide, t, &m0, &p).map_err(err)?;
        let (t2, m2) = param_map(MapDirection::KprimeSide, t1, &m1, &p).map_err(err)?;
        worst_map = worst_map.max((t2 - t).abs());
        for (x, y) in m2.iter().zip(&m0) {
            worst_map = worst_map.max((x - y).abs());
        }
    }

    let quad = QuadratureConfig::default();
    let mut worst_mass = 0.0_f64;
    for (id, t, m0) in [("normal", 2.0, 0.5), ("poisson", 2.0, 1.0), ("gamma", 3.0, 1.5), ("binomial", 4.0, 0.4)] {
        let fam = catalog_family(id);
        let m0v = Vector::new(vec![m0]).unwrap();
        let pi = PriorSpec::new(PriorFamily::Pi, t, m0v, &fam).map_err(err)?;
        let a = normalizer(&pi, &fam, &quad).map_err(|e| format!("{id}: {e}"))?;
        let b = pushforward_mass(&fam, t, &[m0], &quad).map_err(|e| format!("{id}: {e}"))?;
        worst_mass = worst_mass.max(((a.log_mass - b.log_mass).exp() - 1.0).abs());
    }

    let fam = default_battery()
        .map_err(err)?
        .into_iter()
        .find(|e| e.id == "cubic-normal")
        .ok_or("no cubic-normal")?
        .family;
    let expected = Poly64::univariate(&[1.0, 3.0, 3.0, 1.0]);
    let v = fam.require_variance().map_err(err)?.polynomial_matrix().ok_or("not polynomial")?;
    if v.get(0, 0).max_coeff_diff(&expected) > 1e-12 {
        return Err("cubic-normal is not (1 + m)³".into());
    }
    let beta = Covector::new(vec![1.0]).unwrap();
    let zero = OmegaParams::zero(1);
    let grid = mean_grid(&fam, 25);
    let samples = pushforward_samples(&fam, &zero, &grid, 5, 0);
    let fit = prior_pushforward_check(&fam, &beta, &zero, &samples, &grid, 1e-6).map_err(err)?;

    check(
        worst_map < 1e-12 && worst_mass <= 2.0 * quad.rel_tol && fit.pass && samples.len() == 5,
        format!(
            "map round trip {worst_map:.2e}, mass gap {worst_mass:.2e} (tol {:.0e}), (1+m)³ log-ratio spread {:.2e} over {} samples",
            2.0 * quad.rel_tol,
            fit.residual,
            samples.len()
        ),
    )
}

fn ode_module() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_rk4, mut worst_res) = (0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let beta: f64 = sign * rng.gen_range(0.2..2.0);
        let a = rng.gen_range(-2.0..2.0);
        let b = rng.gen_range(-2.0..2.0);
        let u0: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.5..2.0);
        let u1 = u0 * rng.gen_range(0.5..2.0);
        let m0 = (u0 - 1.0) / beta;
        let m1 = (u1 - 1.0) / beta;
        if (m1 - m0).abs() < 1e-3 {
            continue;
        }
        let v0 = rng.gen_range(0.1..2.0);
        let traj = integrate_numeric(beta, a, b, m0, v0, m1).map_err(err)?;
        worst_rk4 = worst_rk4.max(traj.max_error);
        let lam = rng.gen_range(-2.0..2.0);
        let sol = solve_closed_form(&OdeParams::new(beta, a, b, lam).map_err(err)?).map_err(err)?;
        worst_res = worst_res.max(ode_residual(&sol.poly, &beta, &a, &b).max_abs_coeff());
    }
    check(
        worst_rk4 < 1e-8 && worst_res < 1e-10,
        format!("100 draws, RK4 sup-error {worst_rk4:.2e}, closed-form residual {worst_res:.2e}"),
    )
}

fn multivariate_symmetry() -> Outcome {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for e in default_battery().map_err(err)?.into_iter().filter(|e| e.family.dim() == 2) {
        let v = e.family.require_variance().map_err(err)?;
        let r = random_symmetry_residual(v, SYMMETRY_SAMPLES, 0).map_err(err)?;
        worst = worst.max(r);
        count += 1;
    }
    check(
        count > 0 && worst < 1e-10,
        format!("{count} two-dimensional families, {SYMMETRY_SAMPLES} samples, max residual {worst:.2e}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("duality engine", duality_engine),
        ("quadratic determinant property", quadratic_determinant),
        ("cubic construction round trip", cubic_construction),
        ("construction sufficiency (P1)", construction_sufficiency),
        ("equivalence over the battery", equivalence),
        ("one-dimensional cubic characterization", cubic_characterization),
        ("prior machinery", prior_machinery),
        ("ODE module", ode_module),
        ("multivariate symmetry", multivariate_symmetry),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match &outcome {
            Ok(d) => println!("criterion {} PASS  {name}: {d} [{secs:.2}s]", i + 1),
            Err(d) => {
                println!("criterion {} FAIL  {name}: {d} [{secs:.2}s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
