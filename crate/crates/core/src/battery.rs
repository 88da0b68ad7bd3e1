//! The standard twelve-family test battery and its agreement matrix.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::catalog::{self, Params};
use crate::cubic::{cubic_family, CubicConstructionParams};
use crate::error::Result;
use crate::nef::{affine_image, Covector, FamilyDescriptor, Vector};
use crate::verifier::{classify, random_symmetry_residual, BetaUsed, VerdictReport, VerifyConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    Morris,
    ConstructedCubic,
    ShiftedCubic,
    RawCubic,
    Quartic,
}

#[derive(Clone, Debug)]
pub struct BatteryEntry {
    pub id: String,
    pub kind: EntryKind,
    pub family: FamilyDescriptor,
    /// Verdict the theory predicts.
    pub expect_pass: bool,
}

fn with_param(id: &str, key: &str, value: f64) -> Result<FamilyDescriptor> {
    let mut p = Params::new();
    p.insert(key.to_string(), value);
    catalog::build(id, &p)
}

fn covector(c: &[f64]) -> Result<Covector> {
    Covector::new(c.to_vec())
}

/// Six Morris families, three forward transforms, `(m - 1)³`, `m³` and
/// the quartic family.
pub fn default_battery() -> Result<Vec<BatteryEntry>> {
    let morris = |id: &str, fam: FamilyDescriptor| BatteryEntry {
        id: id.to_string(),
        kind: EntryKind::Morris,
        family: fam,
        expect_pass: true,
    };
    let none = Params::new();
    let normal = catalog::build("normal", &none)?;
    let poisson = catalog::build("poisson", &none)?;
    let ig = catalog::build("inverse-gaussian", &none)?;
    let pp = catalog::product_family(&[poisson.clone(), poisson.clone()])?.with_name("poisson x poisson");

    let mut out = vec![
        morris("normal", normal.clone()),
        morris("poisson", poisson.clone()),
        morris("gamma", catalog::build("gamma", &none)?),
        morris("binomial", with_param("binomial", "trials", 4.0)?),
        morris("negative-binomial", with_param("negative-binomial", "shape", 2.0)?),
        morris("hyperbolic-cosine", catalog::build("hyperbolic-cosine", &none)?),
    ];
    for (id, base, beta) in [
        ("cubic-normal", &normal, vec![1.0]),
        ("cubic-poisson", &poisson, vec![1.0]),
        ("cubic-product-poisson", &pp, vec![1.0, 0.0]),
    ] {
        let fam = cubic_family(base, &CubicConstructionParams::with_beta(covector(&beta)?)?)?;
        out.push(BatteryEntry {
            id: id.to_string(),
            kind: EntryKind::ConstructedCubic,
            family: fam.with_name(id),
            expect_pass: true,
        });
    }
    let shifted = affine_image(&ig, &DMatrix::identity(1, 1), &Vector::new(vec![1.0])?)?;
    out.push(BatteryEntry {
        id: "shifted-inverse-gaussian".into(),
        kind: EntryKind::ShiftedCubic,
        family: shifted.with_name("shifted-inverse-gaussian"),
        expect_pass: true,
    });
    out.push(BatteryEntry {
        id: "inverse-gaussian".into(),
        kind: EntryKind::RawCubic,
        family: ig,
        expect_pass: false,
    });
    out.push(BatteryEntry {
        id: "quartic".into(),
        kind: EntryKind::Quartic,
        family: catalog::quartic()?,
        expect_pass: false,
    });
    Ok(out)
}

/// One line of the agreement matrix.
#[derive(Clone, Debug, Serialize)]
pub struct BatteryRow {
    pub id: String,
    pub kind: EntryKind,
    pub dimension: usize,
    pub pass: bool,
    pub expected_pass: bool,
    pub agreement: bool,
    pub beta_used: Option<BetaUsed>,
    /// `[P1, P2, P3]` verdicts per attempt, `None` where not attempted.
    pub attempts: Vec<AttemptRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttemptRow {
    pub beta: BetaUsed,
    pub verdicts: [Option<bool>; 3],
    pub agreement: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BatteryReport {
    pub seed: u64,
    pub rows: Vec<BatteryRow>,
    pub all_agree: bool,
    pub all_expected: bool,
}

/// Number of random `(m, α, γ)` triples for the symmetry check.
pub const SYMMETRY_SAMPLES: usize = 20;

pub fn run_entry(entry: &BatteryEntry, cfg: &VerifyConfig) -> (BatteryRow, Option<VerdictReport>) {
    let symmetry = if entry.family.dim() >= 2 {
        entry
            .family
            .variance()
            .and_then(|v| random_symmetry_residual(v, SYMMETRY_SAMPLES, cfg.seed).ok())
    } else {
        None
    };
    match classify(&entry.family, cfg) {
        Ok(r) => {
            let attempts = r
                .attempts
                .iter()
                .map(|a| AttemptRow {
                    beta: a.beta.clone(),
                    verdicts: [a.p1.verdict(), a.p2.verdict(), a.p3.verdict()],
                    agreement: a.agreement,
                })
                .collect();
            let row = BatteryRow {
                id: entry.id.clone(),
                kind: entry.kind,
                dimension: entry.family.dim(),
                pass: r.pass,
                expected_pass: entry.expect_pass,
                agreement: r.agreement,
                beta_used: r.beta_used.clone(),
                attempts,
                symmetry_residual: symmetry,
                error: None,
            };
            (row, Some(r))
        }
        Err(e) => (
            BatteryRow {
                id: entry.id.clone(),
                kind: entry.kind,
                dimension: entry.family.dim(),
                pass: false,
                expected_pass: entry.expect_pass,
                agreement: false,
                beta_used: None,
                attempts: Vec::new(),
                symmetry_residual: symmetry,
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}

pub fn summarize(seed: u64, rows: Vec<BatteryRow>) -> BatteryReport {
    BatteryReport {
        seed,
        all_agree: rows.iter().all(|r| r.agreement),
        all_expected: rows.iter().all(|r| r.pass == r.expected_pass),
        rows,
    }
}

/// Runs every entry sequentially.
pub fn run_battery(cfg: &VerifyConfig) -> Result<BatteryReport> {
    let rows = default_battery()?.iter().map(|e| run_entry(e, cfg).0).collect();
    Ok(summarize(cfg.seed, rows))
}
