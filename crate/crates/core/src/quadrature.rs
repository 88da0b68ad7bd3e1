//! One-dimensional adaptive Simpson and tensor Gauss-Legendre rules.

use std::f64::consts::PI;

use crate::error::{NefError, Result};
use crate::nef::domain::Window;

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson with Richardson correction. Fails if the recursion
/// bottoms out before meeting the tolerance, which is how endpoint
/// singularities show up.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    // coarse pass to size the tolerance and avoid missing narrow peaks
    let panels = 32;
    let h = (hi - lo) / panels as f64;
    let mut pieces = Vec::with_capacity(panels);
    let mut rough = 0.0;
    for i in 0..panels {
        let x0 = lo + i as f64 * h;
        let x1 = if i + 1 == panels { hi } else { x0 + h };
        let xm = 0.5 * (x0 + x1);
        let (f0, fm, f1) = (f(x0), f(xm), f(x1));
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        rough += whole.abs();
        pieces.push((x0, x1, f0, fm, f1, whole));
    }
    let tol = (rel_tol * rough).max(abs_tol) / panels as f64;
    let mut total = 0.0;
    let mut ok = true;
    for (x0, x1, f0, fm, f1, whole) in pieces {
        total += recurse(&f, x0, x1, f0, fm, f1, whole, tol, MAX_DEPTH, &mut ok);
    }
    if !total.is_finite() {
        return Err(NefError::NonNormalizable(format!(
            "integral over [{lo}, {hi}] is not finite"
        )));
    }
    if !ok {
        return Err(NefError::NonNormalizable(format!(
            "adaptive quadrature on [{lo}, {hi}] did not reach tolerance (singular integrand?)"
        )));
    }
    Ok(sign * total)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    ok: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        *ok = false;
        return f64::NAN;
    }
    if depth == 0 || (m - a) <= f64::EPSILON * a.abs().max(1.0) {
        if delta.abs() > 15.0 * tol {
            *ok = false;
        }
        return left + right + delta / 15.0;
    }
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn_1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn_1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite tensor Gauss-Legendre over a window: `panels` subintervals per
/// axis, `points` nodes per subinterval.
pub fn tensor_gauss_legendre<F>(f: &F, window: &Window, panels: usize, points: usize) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let (xs, ws) = gauss_legendre(points);
    let n = window.dim();
    let axes: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|i| {
            let h = (window.upper[i] - window.lower[i]) / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let c = window.lower[i] + (p as f64 + 0.5) * h;
                    xs.iter()
                        .zip(&ws)
                        .map(move |(x, w)| (c + 0.5 * h * x, 0.5 * h * w))
                })
                .collect()
        })
        .collect();
    let per_axis = panels * points;
    let total = per_axis.pow(n as u32);
    let mut sum = 0.0;
    let mut point = vec![0.0; n];
    for mut idx in 0..total {
        let mut weight = 1.0;
        for i in (0..n).rev() {
            let (x, w) = axes[i][idx % per_axis];
            point[i] = x;
            weight *= w;
            idx /= per_axis;
        }
        sum += weight * f(&point);
    }
    sum
}
