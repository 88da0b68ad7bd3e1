//! Oracle checks for the cubic construction against known closed forms.

use neflab::catalog::{self, Params};
use neflab::cubic::{cubic_family, forward_matrix, inverse_family, CubicConstructionParams};
use neflab::descriptor::{parse_descriptor, serialize_descriptor};
use neflab::legendre::{invert_mean_map, NewtonConfig};
use neflab::poly::{PolyMatrix, Polynomial};
use neflab::verifier::trace_identity_residual;
use neflab::{jorgensen_power, rational, BigRational, Covector, FamilyDescriptor, Vector};

fn fam(id: &str) -> FamilyDescriptor {
    catalog::build(id, &Params::new()).unwrap()
}

fn q(c: &[i64]) -> PolyMatrix<BigRational> {
    let coeffs: Vec<BigRational> = c.iter().map(|&x| rational(x, 1)).collect();
    PolyMatrix::from_fn(1, |_, _| Polynomial::univariate(&coeffs))
}

fn beta(b: &[f64]) -> CubicConstructionParams {
    CubicConstructionParams::with_beta(Covector::new(b.to_vec()).unwrap()).unwrap()
}

/// With β = 1 the Morris variances map onto Letac-Mora cubics:
/// normal to inverse-Gaussian type, Poisson to Abel, gamma to Ressel,
/// negative binomial to Takács, hyperbolic cosine to large arcsine.
#[test]
fn morris_images_are_letac_mora_variances() {
    let one = [rational(1, 1)];
    let cases: [(&[i64], &[i64]); 6] = [
        (&[1], &[1, 3, 3, 1]),
        (&[0, 1], &[0, 1, 2, 1]),
        (&[0, 0, 1], &[0, 0, 1, 1]),
        (&[0, 1, 1], &[0, 1, 3, 2]),
        (&[0, 1, -1], &[0, 1, 1]),
        (&[1, 0, 1], &[1, 3, 4, 2]),
    ];
    for (v1, expected) in cases {
        let v = forward_matrix(&q(v1), &one).unwrap();
        assert_eq!(v, q(expected), "V1 = {v1:?}");
    }
}

#[test]
fn transformed_cumulant_reproduces_the_polynomial_variance() {
    let cfg = NewtonConfig::default();
    for (id, b) in [("normal", 1.0), ("poisson", 0.5), ("gamma", 1.0), ("negative-binomial", 0.7), ("hyperbolic-cosine", -0.5)] {
        let f = cubic_family(&fam(id), &beta(&[b])).unwrap();
        let k = f.require_cumulant().unwrap();
        let v = f.require_variance().unwrap();
        for m in f.mean_domain().grid(9, 0.1) {
            let lam = invert_mean_map(&f, &Vector::new(m.clone()).unwrap(), &cfg).unwrap();
            let ev = k.eval(&lam).unwrap();
            assert!((ev.gradient[0] - m[0]).abs() <= 1e-9 * m[0].abs().max(1.0), "{id} k' at {m:?}");
            let poly = v.eval(&m).unwrap()[(0, 0)];
            let rel = (ev.hessian[(0, 0)] - poly).abs() / poly.abs();
            assert!(rel < 1e-8, "{id}: k'' = {} vs V = {poly} at {m:?}", ev.hessian[(0, 0)]);
        }
    }
}

#[test]
fn inverse_construction_recovers_the_base_cumulant() {
    let base = fam("poisson");
    let params = CubicConstructionParams::new(Covector::new(vec![0.5]).unwrap(), 0.3, Vector::new(vec![0.2]).unwrap()).unwrap();
    let cubic = cubic_family(&base, &params).unwrap();
    let back = inverse_family(&cubic, &params).unwrap();
    let v = back.require_variance().unwrap().polynomial_matrix().unwrap().get(0, 0).clone();
    assert!(v.max_coeff_diff(&Polynomial::univariate(&[0.0, 1.0])) < 1e-12);
    let k0 = base.require_cumulant().unwrap();
    let k1 = back.require_cumulant().unwrap();
    for theta in [-1.5, -0.5, 0.0, 0.5] {
        let a = k0.eval(&[theta]).unwrap();
        let b = k1.eval(&[theta]).unwrap();
        assert!((a.value - b.value).abs() < 1e-9, "k at {theta}: {} vs {}", a.value, b.value);
        assert!((a.gradient[0] - b.gradient[0]).abs() < 1e-9);
        assert!((a.hessian[(0, 0)] - b.hessian[(0, 0)]).abs() < 1e-8);
    }
}

#[test]
fn convolution_power_scales_the_variance() {
    let g = jorgensen_power(&fam("gamma"), 3.0).unwrap();
    let v = g.require_variance().unwrap();
    for m in [0.5, 1.0, 4.0] {
        assert!((v.eval(&[m]).unwrap()[(0, 0)] - m * m / 3.0).abs() < 1e-12);
    }
    let p = jorgensen_power(&fam("poisson"), 2.5).unwrap();
    assert!((p.require_variance().unwrap().eval(&[1.7]).unwrap()[(0, 0)] - 1.7).abs() < 1e-12);
    let b = jorgensen_power(&fam("binomial"), 4.0).unwrap();
    assert!(b.mean_domain().contains(&[3.5]));
    assert!(!b.mean_domain().contains(&[4.5]));
}

#[test]
fn cubic_descriptors_round_trip_through_json() {
    let pp = catalog::product_family(&[fam("poisson"), fam("poisson")]).unwrap();
    for (base, b) in [(fam("poisson"), vec![0.5]), (pp, vec![1.0, 0.5])] {
        let f = cubic_family(&base, &beta(&b)).unwrap();
        let back = parse_descriptor(&serialize_descriptor(&f).unwrap()).unwrap();
        assert_eq!(back.dim(), f.dim());
        for m in f.mean_domain().grid(4, 0.1) {
            let a = f.require_variance().unwrap().eval(&m).unwrap();
            let c = back.require_variance().unwrap().eval(&m).unwrap();
            assert!((a - c).amax() < 1e-12);
            assert_eq!(f.mean_domain().contains(&m), back.mean_domain().contains(&m));
        }
        let k = f.require_cumulant().unwrap();
        let kb = back.require_cumulant().unwrap();
        for lam in k.theta_domain().grid(3, 0.2) {
            assert!((k.value(&lam).unwrap() - kb.value(&lam).unwrap()).abs() < 1e-10);
        }
    }
}

/// `(1 + m)V' - 3V = (a + bm)(1 + m)`: `V = m(1 + m)²` gives `a = b = 1`,
/// `V = (1 + m)³` gives `a = b = 0`.
#[test]
fn trace_identity_recovers_the_equation_coefficients() {
    let b = Covector::new(vec![1.0]).unwrap();
    for (id, a_exp, b_exp) in [("poisson", 1.0, 1.0), ("normal", 0.0, 0.0)] {
        let f = cubic_family(&fam(id), &beta(&[1.0])).unwrap();
        let v = f.require_variance().unwrap();
        let fit = trace_identity_residual(v, &b, &f.mean_domain().grid(15, 0.05), 1e-9).unwrap();
        assert!(fit.pass, "{id}: residual {}", fit.residual);
        assert!((fit.a[0] - a_exp).abs() < 1e-9 && (fit.b - b_exp).abs() < 1e-9, "{id}: a = {:?}, b = {}", fit.a, fit.b);
    }
}
