//! Open subsets of `E` or `E*` given by a membership test and a finite
//! sampling window.
//!
//! Canonical domains and mean domains are arbitrary open sets, so every
//! domain carries a bounding box (`Window`) used for grids and quadrature;
//! points of the window that fail `contains` are rejected.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::vector::dot;
use crate::error::{NefError, Result};

/// Finite axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(NefError::invalid("window bounds have different lengths"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !l.is_finite() || !u.is_finite() || l >= u)
        {
            return Err(NefError::invalid(format!(
                "window must be finite and nondegenerate, got {lower:?}..{upper:?}"
            )));
        }
        Ok(Window { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    /// Window scaled by `factor` about its center.
    pub fn scaled(&self, factor: f64) -> Window {
        let c = self.center();
        let w = self.widths();
        Window {
            lower: c.iter().zip(&w).map(|(c, w)| c - 0.5 * factor * w).collect(),
            upper: c.iter().zip(&w).map(|(c, w)| c + 0.5 * factor * w).collect(),
        }
    }

    /// Window with `frac` of its width removed from each side.
    pub fn shrunk(&self, frac: f64) -> Window {
        let w = self.widths();
        Window {
            lower: self.lower.iter().zip(&w).map(|(l, w)| l + frac * w).collect(),
            upper: self.upper.iter().zip(&w).map(|(u, w)| u - frac * w).collect(),
        }
    }

    /// Tensor grid with `points` nodes per axis, endpoints included.
    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                if points == 1 {
                    return vec![0.5 * (self.lower[i] + self.upper[i])];
                }
                (0..points)
                    .map(|k| {
                        let s = k as f64 / (points - 1) as f64;
                        self.lower[i] + s * (self.upper[i] - self.lower[i])
                    })
                    .collect()
            })
            .collect();
        let total = points.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; n];
                for (i, axis) in axes.iter().enumerate().rev() {
                    p[i] = axis[idx % points];
                    idx /= points;
                }
                p
            })
            .collect()
    }

    fn hull(points: &[Vec<f64>]) -> Option<Window> {
        let first = points.first()?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for p in points {
            for i in 0..p.len() {
                lower[i] = lower[i].min(p[i]);
                upper[i] = upper[i].max(p[i]);
            }
        }
        for i in 0..lower.len() {
            if lower[i] == upper[i] {
                let pad = 1e-3 * lower[i].abs().max(1.0);
                lower[i] -= pad;
                upper[i] += pad;
            }
        }
        Some(Window { lower, upper })
    }
}

pub type MembershipFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Box,
    HalfspaceIntersection,
    PredicateWithBoundingBox,
}

#[derive(Clone)]
pub enum Domain {
    /// Open box; `None` bounds are infinite.
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
        window: Window,
    },
    /// `{x : <normal_k, x> + offset_k > 0 for all k}`.
    Halfspaces {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        window: Window,
    },
    /// `{x : A x + c in base}` with `A` invertible.
    Preimage {
        base: std::boxed::Box<Domain>,
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        window: Window,
    },
    /// `{m : 1 + <beta, m> > 0 and m / (1 + <beta, m>) in base}`.
    BetaImage {
        base: std::boxed::Box<Domain>,
        beta: Vec<f64>,
        window: Window,
    },
    /// Cartesian product of lower-dimensional domains.
    Product { parts: Vec<Domain>, window: Window },
    /// Opaque membership test, e.g. solvability of an implicit equation.
    Implicit {
        label: String,
        test: MembershipFn,
        window: Window,
    },
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Box { lower, upper, .. } => write!(f, "Box({lower:?}, {upper:?})"),
            Domain::Halfspaces { normals, offsets, .. } => {
                write!(f, "Halfspaces({normals:?}, {offsets:?})")
            }
            Domain::Preimage { base, matrix, offset, .. } => {
                write!(f, "Preimage({base:?}, {matrix:?}, {offset:?})")
            }
            Domain::BetaImage { base, beta, .. } => write!(f, "BetaImage({base:?}, {beta:?})"),
            Domain::Product { parts, .. } => write!(f, "Product({parts:?})"),
            Domain::Implicit { label, .. } => write!(f, "Implicit({label})"),
        }
    }
}

impl Domain {
    /// Open interval `(lower, upper)` sampled on `[window.0, window.1]`.
    pub fn interval(lower: Option<f64>, upper: Option<f64>, window: (f64, f64)) -> Result<Self> {
        Self::boxed(vec![lower], vec![upper], Window::new(vec![window.0], vec![window.1])?)
    }

    pub fn boxed(lower: Vec<Option<f64>>, upper: Vec<Option<f64>>, window: Window) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != window.dim() {
            return Err(NefError::invalid("box bounds and window differ in dimension"));
        }
        for i in 0..lower.len() {
            if let (Some(l), Some(u)) = (lower[i], upper[i]) {
                if l >= u {
                    return Err(NefError::invalid(format!("empty box side {l} >= {u}")));
                }
            }
            let inside_lo = lower[i].is_none_or(|l| window.lower[i] >= l);
            let inside_hi = upper[i].is_none_or(|u| window.upper[i] <= u);
            if !inside_lo || !inside_hi {
                return Err(NefError::invalid("box window extends past the box bounds"));
            }
        }
        Ok(Domain::Box { lower, upper, window })
    }

    pub fn halfspaces(normals: Vec<Vec<f64>>, offsets: Vec<f64>, window: Window) -> Result<Self> {
        if normals.len() != offsets.len() || normals.iter().any(|n| n.len() != window.dim()) {
            return Err(NefError::invalid("halfspace normals, offsets and window disagree"));
        }
        Ok(Domain::Halfspaces { normals, offsets, window })
    }

    /// `{x : A x + c in base}`; the window is the exact image of the base
    /// window under `y -> A^-1 (y - c)`.
    pub fn preimage(base: Domain, matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let n = base.dim();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) || offset.len() != n {
            return Err(NefError::invalid("preimage map does not match the domain dimension"));
        }
        let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
        let inv = a
            .try_inverse()
            .ok_or_else(|| NefError::invalid("preimage map is singular"))?;
        let c = DVector::from_column_slice(&offset);
        let corners: Vec<Vec<f64>> = corners(base.window())
            .into_iter()
            .map(|y| (&inv * (DVector::from_vec(y) - &c)).as_slice().to_vec())
            .collect();
        let window = Window::hull(&corners).expect("a window has corners");
        Ok(Domain::Preimage {
            base: std::boxed::Box::new(base),
            matrix,
            offset,
            window,
        })
    }

    pub fn product(parts: Vec<Domain>) -> Result<Self> {
        if parts.is_empty() {
            return Err(NefError::invalid("product of no domains"));
        }
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for p in &parts {
            lower.extend_from_slice(&p.window().lower);
            upper.extend_from_slice(&p.window().upper);
        }
        Ok(Domain::Product {
            parts,
            window: Window { lower, upper },
        })
    }

    pub fn implicit(label: impl Into<String>, window: Window, test: MembershipFn) -> Self {
        Domain::Implicit {
            label: label.into(),
            test,
            window,
        }
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            Domain::Box { .. } => DomainKind::Box,
            Domain::Halfspaces { .. } => DomainKind::HalfspaceIntersection,
            _ => DomainKind::PredicateWithBoundingBox,
        }
    }

    pub fn window(&self) -> &Window {
        match self {
            Domain::Box { window, .. }
            | Domain::Halfspaces { window, .. }
            | Domain::Preimage { window, .. }
            | Domain::BetaImage { window, .. }
            | Domain::Product { window, .. }
            | Domain::Implicit { window, .. } => window,
        }
    }

    pub fn dim(&self) -> usize {
        self.window().dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::Box { lower, upper, .. } => x.iter().enumerate().all(|(i, &v)| {
                lower[i].is_none_or(|l| v > l) && upper[i].is_none_or(|u| v < u)
            }),
            Domain::Halfspaces { normals, offsets, .. } => normals
                .iter()
                .zip(offsets)
                .all(|(nrm, c)| dot(nrm, x) + c > 0.0),
            Domain::Preimage { base, matrix, offset, .. } => {
                let y: Vec<f64> = matrix
                    .iter()
                    .zip(offset)
                    .map(|(row, c)| dot(row, x) + c)
                    .collect();
                base.contains(&y)
            }
            Domain::BetaImage { base, beta, .. } => {
                let s = 1.0 + dot(beta, x);
                s > 0.0 && base.contains(&x.iter().map(|v| v / s).collect::<Vec<_>>())
            }
            Domain::Product { parts, .. } => {
                let mut offset = 0;
                parts.iter().all(|p| {
                    let d = p.dim();
                    let ok = p.contains(&x[offset..offset + d]);
                    offset += d;
                    ok
                })
            }
            Domain::Implicit { test, .. } => test(x),
        }
    }

    /// Finite bounds of the domain itself where known; `None` means
    /// unknown or infinite in that direction.
    pub fn hard_bounds(&self) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
        match self {
            Domain::Box { lower, upper, .. } => (lower.clone(), upper.clone()),
            Domain::Product { parts, .. } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for p in parts {
                    let (l, h) = p.hard_bounds();
                    lo.extend(l);
                    hi.extend(h);
                }
                (lo, hi)
            }
            _ => (vec![None; self.dim()], vec![None; self.dim()]),
        }
    }

    /// Grid over the window shrunk by `shrink` per side, keeping members only.
    pub fn grid(&self, points_per_axis: usize, shrink: f64) -> Vec<Vec<f64>> {
        self.window()
            .shrunk(shrink)
            .grid(points_per_axis)
            .into_iter()
            .filter(|p| self.contains(p))
            .collect()
    }

    pub fn is_serializable(&self) -> bool {
        match self {
            Domain::Implicit { .. } => false,
            Domain::Preimage { base, .. } | Domain::BetaImage { base, .. } => base.is_serializable(),
            Domain::Product { parts, .. } => parts.iter().all(|p| p.is_serializable()),
            _ => true,
        }
    }
}

fn corners(w: &Window) -> Vec<Vec<f64>> {
    let n = w.dim();
    (0..1usize << n)
        .map(|mask| {
            (0..n)
                .map(|i| if mask >> i & 1 == 1 { w.upper[i] } else { w.lower[i] })
                .collect()
        })
        .collect()
}

/// Result of [`domain_beta`]: the transformed domain plus a warning when no
/// sample of the base window mapped into it.
#[derive(Clone, Debug)]
pub struct BetaDomain {
    pub domain: Domain,
    pub empty_warning: Option<String>,
}

/// `(M)_beta = {m : 1 + <beta, m> > 0 and m / (1 + <beta, m>) in M}`.
///
/// The window is found by sampling the base window: a base point `M` with
/// `1 - <beta, M> > 0` corresponds to `m = M / (1 - <beta, M>)`. Samples with
/// `1 - <beta, M>` below a floor are skipped so that the window stays away
/// from the blow-up at `1 - <beta, M> = 0`.
pub fn domain_beta(base: &Domain, beta: &[f64]) -> Result<BetaDomain> {
    if beta.len() != base.dim() {
        return Err(NefError::invalid("beta and domain differ in dimension"));
    }
    if beta.iter().all(|&b| b == 0.0) {
        return Err(NefError::invalid("beta must be nonzero"));
    }
    let n = base.dim();
    let per_axis = match n {
        1 => 401,
        2 => 61,
        3 => 17,
        _ => 7,
    };
    let samples = base.window().grid(per_axis);
    let mut hull = None;
    for floor in [0.25, 0.1, 0.01] {
        let mapped: Vec<Vec<f64>> = samples
            .iter()
            .filter(|p| base.contains(p))
            .filter_map(|p| {
                let s = 1.0 - dot(beta, p);
                (s >= floor).then(|| p.iter().map(|v| v / s).collect())
            })
            .collect();
        if let Some(w) = Window::hull(&mapped) {
            hull = Some(w);
            break;
        }
    }
    let (window, empty_warning) = match hull {
        Some(w) => (w, None),
        None => (
            base.window().clone(),
            Some(format!(
                "no point of the base window satisfies 1 - <beta, M> > 0 for beta = {beta:?}"
            )),
        ),
    };
    Ok(BetaDomain {
        domain: Domain::BetaImage {
            base: std::boxed::Box::new(base.clone()),
            beta: beta.to_vec(),
            window,
        },
        empty_warning,
    })
}

/// Serializable form of [`Domain`]. Windows of derived domains are
/// recomputed on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainRepr {
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
        window: Window,
    },
    Halfspaces {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        window: Window,
    },
    Preimage {
        base: std::boxed::Box<DomainRepr>,
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    BetaImage {
        base: std::boxed::Box<DomainRepr>,
        beta: Vec<f64>,
    },
    Product {
        parts: Vec<DomainRepr>,
    },
}

impl DomainRepr {
    pub fn from_domain(d: &Domain) -> Result<Self> {
        Ok(match d {
            Domain::Box { lower, upper, window } => DomainRepr::Box {
                lower: lower.clone(),
                upper: upper.clone(),
                window: window.clone(),
            },
            Domain::Halfspaces { normals, offsets, window } => DomainRepr::Halfspaces {
                normals: normals.clone(),
                offsets: offsets.clone(),
                window: window.clone(),
            },
            Domain::Preimage { base, matrix, offset, .. } => DomainRepr::Preimage {
                base: std::boxed::Box::new(Self::from_domain(base)?),
                matrix: matrix.clone(),
                offset: offset.clone(),
            },
            Domain::BetaImage { base, beta, .. } => DomainRepr::BetaImage {
                base: std::boxed::Box::new(Self::from_domain(base)?),
                beta: beta.clone(),
            },
            Domain::Product { parts, .. } => DomainRepr::Product {
                parts: parts.iter().map(Self::from_domain).collect::<Result<_>>()?,
            },
            Domain::Implicit { label, .. } => {
                return Err(NefError::invalid(format!(
                    "implicit domain `{label}` has no serializable form"
                )))
            }
        })
    }

    pub fn to_domain(&self) -> Result<Domain> {
        match self {
            DomainRepr::Box { lower, upper, window } => {
                Window::new(window.lower.clone(), window.upper.clone())?;
                Domain::boxed(lower.clone(), upper.clone(), window.clone())
            }
            DomainRepr::Halfspaces { normals, offsets, window } => {
                Window::new(window.lower.clone(), window.upper.clone())?;
                Domain::halfspaces(normals.clone(), offsets.clone(), window.clone())
            }
            DomainRepr::Preimage { base, matrix, offset } => {
                Domain::preimage(base.to_domain()?, matrix.clone(), offset.clone())
            }
            DomainRepr::BetaImage { base, beta } => {
                let bd = domain_beta(&base.to_domain()?, beta)?;
                Ok(bd.domain)
            }
            DomainRepr::Product { parts } => {
                Domain::product(parts.iter().map(|p| p.to_domain()).collect::<Result<_>>()?)
            }
        }
    }
}
