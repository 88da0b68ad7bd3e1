use proptest::prelude::*;

use neflab::catalog::{self, Params};
use neflab::cubic::{forward_matrix, inverse_matrix};
use neflab::legendre::{invert_mean_map, NewtonConfig};
use neflab::nef::domain::domain_beta;
use neflab::ode::{match_cubic_to_ode, solve_closed_form, OdeParams};
use neflab::poly::{PolyMatrix, Polynomial};
use neflab::priors::{log_integral, param_map, MapDirection, OmegaParams, QuadratureConfig};
use neflab::quadrature::adaptive_simpson;
use neflab::{rational, BigRational, Domain, Vector};

fn nonzero() -> impl Strategy<Value = i64> {
    prop_oneof![-4i64..=-1, 1i64..=4]
}

fn q(n: i64, d: i64) -> BigRational {
    rational(n, d)
}

/// Exact simple quadratic `C + Σ m_k B_k + a m mᵀ` in two variables.
fn simple_quadratic(c: [i64; 3], b: [[i64; 3]; 2], a: i64) -> PolyMatrix<BigRational> {
    let sym = |v: [i64; 3], i: usize, j: usize| v[i + j];
    PolyMatrix::from_fn(2, |i, j| {
        let mut e = vec![0u32; 2];
        e[i] += 1;
        e[j] += 1;
        Polynomial::from_terms(
            2,
            vec![
                (vec![0, 0], q(sym(c, i, j), 1)),
                (vec![1, 0], q(sym(b[0], i, j), 1)),
                (vec![0, 1], q(sym(b[1], i, j), 1)),
                (e, q(a, 1)),
            ],
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_then_inverse_is_exact_in_one_variable(
        c in prop::array::uniform3(-5i64..=5),
        bn in nonzero(),
        bd in 1i64..=3,
    ) {
        let coeffs: Vec<BigRational> = c.iter().map(|&x| q(x, 1)).collect();
        let v1 = PolyMatrix::from_fn(1, |_, _| Polynomial::univariate(&coeffs));
        let beta = [q(bn, bd)];
        let v = forward_matrix(&v1, &beta).unwrap();
        prop_assert!(v.degree() <= 3);
        prop_assert_eq!(inverse_matrix(&v, &beta).unwrap(), v1.pruned());
    }

    #[test]
    fn forward_then_inverse_is_exact_for_simple_quadratics(
        c in prop::array::uniform3(-3i64..=3),
        b0 in prop::array::uniform3(-3i64..=3),
        b1 in prop::array::uniform3(-3i64..=3),
        a in -2i64..=2,
        beta in prop::array::uniform2(-3i64..=3),
    ) {
        prop_assume!(beta != [0, 0]);
        let v1 = simple_quadratic(c, [b0, b1], a);
        let beta = [q(beta[0], 2), q(beta[1], 2)];
        let v = forward_matrix(&v1, &beta).unwrap();
        prop_assert!(v.is_symmetric());
        prop_assert_eq!(inverse_matrix(&v, &beta).unwrap(), v1.pruned());
    }

    #[test]
    fn closed_form_is_matched_back_exactly(
        bn in nonzero(), bd in 1i64..=3, a in -6i64..=6, b in -6i64..=6, lam in -6i64..=6,
    ) {
        let p = OdeParams::new(q(bn, bd), q(a, 2), q(b, 3), q(lam, 1)).unwrap();
        let sol = solve_closed_form(&p).unwrap();
        prop_assert_eq!(match_cubic_to_ode(&sol.poly, &p.beta).unwrap(), Some(p));
    }

    #[test]
    fn param_maps_are_mutually_inverse(
        t in 0.5f64..8.0,
        m0 in prop::collection::vec(-5.0f64..5.0, 1..4),
        b in -0.4f64..0.4,
        shift in -3.0f64..3.0,
    ) {
        let n = m0.len();
        let p = OmegaParams::new(Vector::new(vec![shift; n]).unwrap(), b, 0.0).unwrap();
        let (t1, m1) = param_map(MapDirection::KprimeSide, t, &m0, &p).unwrap();
        let (t2, m2) = param_map(MapDirection::PsiSide, t1, &m1, &p).unwrap();
        prop_assert!((t2 - t).abs() < 1e-12);
        for (x, y) in m2.iter().zip(&m0) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_inverts_the_mean_map(idx in 0usize..7, u in 0.05f64..0.95) {
        let id = catalog::ids()[idx];
        let fam = catalog::build(id, &Params::new()).unwrap();
        let k = fam.require_cumulant().unwrap();
        let w = k.theta_domain().window();
        let theta = w.lower[0] + u * (w.upper[0] - w.lower[0]);
        let m = k.gradient(&[theta]).unwrap()[0];
        let back = invert_mean_map(&fam, &Vector::new(vec![m]).unwrap(), &NewtonConfig::default()).unwrap();
        prop_assert!((back[0] - theta).abs() < 1e-9, "{}: {} vs {}", id, back[0], theta);
    }

    #[test]
    fn beta_domain_membership_matches_its_definition(beta in -2.0f64..2.0, m in -5.0f64..5.0) {
        prop_assume!(beta.abs() > 0.05);
        let base = Domain::interval(Some(0.0), None, (0.1, 5.0)).unwrap();
        let bd = domain_beta(&base, &[beta]).unwrap();
        let s = 1.0 + beta * m;
        let expected = s > 0.0 && m / s > 0.0;
        prop_assert_eq!(bd.domain.contains(&[m]), expected);
    }

    #[test]
    fn simpson_is_exact_on_cubics(c in prop::array::uniform4(-3.0f64..3.0), a in -2.0f64..0.0, w in 0.5f64..3.0) {
        let b = a + w;
        let f = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
        let anti = |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0;
        let got = adaptive_simpson(f, a, b, 1e-12, 1e-14).unwrap();
        prop_assert!((got - (anti(b) - anti(a))).abs() < 1e-10);
    }

    #[test]
    fn gaussian_log_mass_is_analytic(mu in -3.0f64..3.0, sigma in 0.2f64..3.0) {
        let dom = Domain::interval(None, None, (-1.0, 1.0)).unwrap();
        let logf = |x: &[f64]| Ok(-0.5 * ((x[0] - mu) / sigma).powi(2));
        let rep = log_integral(logf, &dom, &QuadratureConfig::default()).unwrap();
        let exact = (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
        prop_assert!((rep.log_mass - exact).abs() < 1e-8, "{} vs {}", rep.log_mass, exact);
    }
}
