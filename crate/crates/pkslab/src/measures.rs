//! Finite measures as atom lists plus an optional diffuse density:
//! total-variation and atomic semi-norms, decomposition into large atoms and
//! a small remainder, and regularization to a smooth field that launches the
//! solver.

use crate::fields::{Field2D, FieldError, GridSpec};
use crate::profiles::{ProfileCache, ProfileError};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CRITICAL_MASS: f64 = 8.0 * std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum MeasureError {
    #[error("atom at ({x}, {y}) carries mass {mass} >= 8 pi; no mild continuation exists")]
    CriticalAtom { x: f64, y: f64, mass: f64 },
    #[error("nonnegative measure required, found negative part")]
    NegativePart,
    #[error("epsilon must be positive")]
    BadEpsilon,
    #[error("regularization time must be positive")]
    BadTime,
    #[error("regularization scale sqrt(t0) = {scale:.3e} below grid resolution {cell:.3e}")]
    UnderResolved { scale: f64, cell: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("malformed measure description: {0}")]
    Malformed(String),
}

/// Point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
}

impl Atom {
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance(&self, other: &Atom) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Finite signed Borel measure: atoms plus an optional density.
#[derive(Debug, Clone)]
pub struct MeasureData {
    atoms: Vec<Atom>,
    diffuse: Option<Field2D>,
    nonnegative: bool,
}

impl MeasureData {
    /// Build a measure; atoms at identical positions are merged.
    pub fn new(atoms: Vec<Atom>, diffuse: Option<Field2D>) -> Result<Self, MeasureError> {
        let mut merged: Vec<Atom> = Vec::new();
        for a in atoms {
            if !(a.mass.is_finite() && a.x.is_finite() && a.y.is_finite()) {
                return Err(MeasureError::Malformed("non-finite atom".into()));
            }
            if let Some(existing) = merged.iter_mut().find(|b| b.x == a.x && b.y == a.y) {
                existing.mass += a.mass;
            } else {
                merged.push(a);
            }
        }
        Ok(MeasureData {
            atoms: merged,
            diffuse,
            nonnegative: false,
        })
    }

    /// Mark the measure nonnegative (required for the chemotaxis model);
    /// verifies the sign of every part.
    pub fn nonnegative(mut self) -> Result<Self, MeasureError> {
        if self.atoms.iter().any(|a| a.mass < 0.0) {
            return Err(MeasureError::NegativePart);
        }
        if let Some(d) = &self.diffuse {
            if d.min_value() < -1e-12 * d.max_value().abs().max(1e-300) {
                return Err(MeasureError::NegativePart);
            }
        }
        self.nonnegative = true;
        Ok(self)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn diffuse(&self) -> Option<&Field2D> {
        self.diffuse.as_ref()
    }

    pub fn is_nonnegative_flagged(&self) -> bool {
        self.nonnegative
    }

    /// `(total variation, atomic semi-norm)`: the semi-norm counts only the
    /// purely atomic part.
    pub fn norms(&self) -> (f64, f64) {
        let atomic: f64 = self.atoms.iter().map(|a| a.mass.abs()).sum();
        let diffuse: f64 = self
            .diffuse
            .as_ref()
            .map(|d| d.lp_norm(1.0))
            .unwrap_or(0.0);
        (atomic + diffuse, atomic)
    }
}

/// Outcome of splitting a measure at threshold `epsilon`.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub extracted: Vec<Atom>,
    pub remainder: MeasureData,
    /// Minimal pairwise distance between extracted atoms.
    pub min_distance: Option<f64>,
    pub epsilon: f64,
}

impl DecompositionResult {
    /// Default regularization time `t0 = d^2 / 64` (so `sqrt(t0) <= d / 8`),
    /// falling back to `fallback` when fewer than two atoms were extracted.
    pub fn default_t0(&self, fallback: f64) -> f64 {
        match self.min_distance {
            Some(d) => (d * d / 64.0).min(fallback),
            None => fallback,
        }
    }
}

/// Split off atoms of mass `>= epsilon`; if the summed mass of the small
/// atoms still reaches `epsilon`, keep extracting the largest until the
/// remainder's atomic semi-norm is below threshold.
pub fn decompose(mu: &MeasureData, epsilon: f64) -> Result<DecompositionResult, MeasureError> {
    if !(epsilon > 0.0) {
        return Err(MeasureError::BadEpsilon);
    }
    if mu.nonnegative {
        for a in &mu.atoms {
            if a.mass >= CRITICAL_MASS {
                return Err(MeasureError::CriticalAtom {
                    x: a.x,
                    y: a.y,
                    mass: a.mass,
                });
            }
        }
    }
    let mut small: Vec<Atom> = Vec::new();
    let mut extracted: Vec<Atom> = Vec::new();
    for a in &mu.atoms {
        if a.mass.abs() >= epsilon {
            extracted.push(*a);
        } else {
            small.push(*a);
        }
    }
    small.sort_by(|a, b| b.mass.abs().partial_cmp(&a.mass.abs()).unwrap());
    let mut small_sum: f64 = small.iter().map(|a| a.mass.abs()).sum();
    while small_sum >= epsilon && !small.is_empty() {
        let a = small.remove(0);
        small_sum -= a.mass.abs();
        extracted.push(a);
    }
    let min_distance = if extracted.len() >= 2 {
        let mut d = f64::INFINITY;
        for i in 0..extracted.len() {
            for j in i + 1..extracted.len() {
                d = d.min(extracted[i].distance(&extracted[j]));
            }
        }
        Some(d)
    } else {
        None
    };
    let mut remainder = MeasureData::new(small, mu.diffuse.clone())?;
    remainder.nonnegative = mu.nonnegative;
    Ok(DecompositionResult {
        extracted,
        remainder,
        min_distance,
        epsilon,
    })
}

/// Regularize at time `t0`: large atoms become rescaled self-similar
/// profiles `t0^{-1} G_alpha((x - z)/sqrt(t0))`, remainder atoms become heat
/// kernels, and the diffuse density is advanced by `e^{t0 Delta}`.
///
/// Atoms closer than one grid cell are merged (mass-weighted position) with
/// a warning.  Each sampled profile is renormalized to carry its exact
/// discrete atom mass.
pub fn regularize(
    decomp: &DecompositionResult,
    t0: f64,
    cache: &ProfileCache,
    grid: GridSpec,
) -> Result<Field2D, MeasureError> {
    if !(t0 > 0.0) {
        return Err(MeasureError::BadTime);
    }
    let cell = grid.cell();
    if t0.sqrt() < 1.5 * cell {
        return Err(MeasureError::UnderResolved {
            scale: t0.sqrt(),
            cell,
        });
    }
    let atoms = merge_subcell_atoms(&decomp.extracted, cell);
    let mut total = Field2D::zeros(grid);
    for a in &atoms {
        let profile = cache.get(a.mass)?;
        let sampled = profile.sample(grid, t0, a.position())?;
        // pin the discrete mass to the atom mass exactly
        let sampled = sampled.scaled(a.mass / sampled.mass());
        total = total.add(&sampled)?;
    }
    for a in decomp.remainder.atoms() {
        let kernel = Field2D::gaussian(grid, a.position(), a.mass, t0)?;
        total = total.add(&kernel)?;
    }
    if let Some(d) = decomp.remainder.diffuse() {
        if d.spec() != grid {
            return Err(MeasureError::Malformed(
                "diffuse density lives on a different grid".into(),
            ));
        }
        total = total.add(&d.heat_apply(t0)?)?;
    }
    Ok(total)
}

fn merge_subcell_atoms(atoms: &[Atom], cell: f64) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::new();
    for &a in atoms {
        if let Some(b) = out.iter_mut().find(|b| b.distance(&a) < cell) {
            log::warn!(
                "merging atoms closer than one grid cell: ({}, {}) and ({}, {})",
                b.x,
                b.y,
                a.x,
                a.y
            );
            let m = b.mass + a.mass;
            b.x = (b.x * b.mass + a.x * a.mass) / m;
            b.y = (b.y * b.mass + a.y * a.mass) / m;
            b.mass = m;
        } else {
            out.push(a);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Serializable description
// ---------------------------------------------------------------------------

/// Diffuse part of a measure description: an inline bump or a field file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffuseSpec {
    Gaussian {
        center: [f64; 2],
        mass: f64,
        width: f64,
    },
    Field {
        path: String,
    },
}

/// JSON-serializable measure description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub diffuse: Option<DiffuseSpec>,
}

impl MeasureSpec {
    /// Materialize on a grid; `base_dir` resolves relative field paths.
    pub fn build(&self, grid: GridSpec, base_dir: &Path) -> Result<MeasureData, MeasureError> {
        let diffuse = match &self.diffuse {
            None => None,
            Some(DiffuseSpec::Gaussian {
                center,
                mass,
                width,
            }) => Some(Field2D::gaussian(grid, *center, *mass, *width)?),
            Some(DiffuseSpec::Field { path }) => {
                let full = base_dir.join(path);
                Some(Field2D::read_from(&full)?)
            }
        };
        MeasureData::new(self.atoms.clone(), diffuse)
    }
}
