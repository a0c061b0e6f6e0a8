//! Example pairs shipped as model documents.
//!
//! The matrix entries are gauge transforms `G Q~ G^-1 + G_lambda G^-1`,
//! `G P~ G^-1 + G_x G^-1` of diagonal (or scalar) pairs with
//! `G = S(x) (E + lambda N(u))`, `N` nilpotent, which keeps them compatible
//! for any vector field while making every entry depend on the state.
//! `catalog/generate.py` produced the non-trivial documents.

use serde::Serialize;

use crate::document::parse_model;
use crate::error::{Error, Result};
use crate::model::PQPairModel;
use crate::propagation::evolve_state;
use crate::report::{analyze, choose_kind, Analysis, RunConfig};
use crate::tolerances::{Tolerances, COMPAT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Features {
    pub irregular: bool,
    pub regular: bool,
    pub resonant: bool,
    pub scalar: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recommended {
    pub order: usize,
    pub x_end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: String,
    pub model: PQPairModel,
    pub features: Features,
    pub recommended: Recommended,
    /// The document text the entry is parsed from.
    pub document: &'static str,
}

struct Raw {
    name: &'static str,
    text: &'static str,
    features: Features,
    recommended: Recommended,
}

const fn flags(irregular: bool, resonant: bool, scalar: bool) -> Features {
    Features { irregular, regular: !irregular, resonant, scalar }
}

const UNIT_RUN: fn(usize) -> Recommended = |order| Recommended { order, x_end: 1.0, steps: 1000 };

fn raw_entries() -> [Raw; 5] {
    [
        Raw {
            name: "scalar_exact",
            text: include_str!("../catalog/scalar_exact.json"),
            features: flags(true, false, true),
            recommended: UNIT_RUN(12),
        },
        Raw {
            name: "abelian_diag",
            text: include_str!("../catalog/abelian_diag.json"),
            features: flags(true, false, false),
            recommended: UNIT_RUN(10),
        },
        Raw {
            name: "irregular_2x2",
            text: include_str!("../catalog/irregular_2x2.json"),
            features: flags(true, false, false),
            recommended: UNIT_RUN(10),
        },
        Raw {
            name: "regular_fuchsian",
            text: include_str!("../catalog/regular_fuchsian.json"),
            features: flags(false, false, false),
            recommended: UNIT_RUN(8),
        },
        Raw {
            name: "resonant_regular",
            text: include_str!("../catalog/resonant_regular.json"),
            features: flags(false, true, false),
            recommended: UNIT_RUN(8),
        },
    ]
}

pub fn catalog_names() -> Vec<&'static str> {
    raw_entries().iter().map(|r| r.name).collect()
}

/// Parses and validates an entry. The compatibility residual is checked at
/// 21 points of the recommended state trajectory; an entry failing it is an
/// error, not a usable model.
pub fn catalog_get(name: &str) -> Result<CatalogEntry> {
    let raw = raw_entries()
        .into_iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::UnknownEntry(name.to_string()))?;
    let model = parse_model(raw.text)?;
    let rec = raw.recommended;
    let states = evolve_state(&model, model.x0() + rec.x_end, rec.steps)?;
    let stride = (rec.steps / 20).max(1);
    for s in (0..states.grid.len()).step_by(stride) {
        let r = model.compatibility_residual(&states.u[s], states.grid[s])?.max();
        if !(r < COMPAT_TOL) {
            return Err(Error::InvalidModel(format!(
                "catalog entry `{name}` has compatibility residual {r:e} at x = {}",
                states.grid[s]
            )));
        }
    }
    Ok(CatalogEntry {
        name: raw.name,
        description: model.spec().description.clone().unwrap_or_default(),
        model,
        features: raw.features,
        recommended: rec,
        document: raw.text,
    })
}

impl CatalogEntry {
    pub fn run_config(&self, tolerances: Tolerances) -> RunConfig {
        RunConfig {
            kind: choose_kind(&self.model, false),
            order: self.recommended.order,
            x_end: self.model.x0() + self.recommended.x_end,
            steps: self.recommended.steps,
            tolerances,
        }
    }
}

/// Full run of an entry at its recommended settings and default
/// tolerances; `summary.pass` is the verdict.
pub fn verify_catalog_entry(name: &str) -> Result<Analysis> {
    let entry = catalog_get(name)?;
    analyze(&entry.model, &entry.run_config(Tolerances::default()))
}
