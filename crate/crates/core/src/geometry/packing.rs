//! Per-cube coefficient tables and Carleson packing reports.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alpha::{alpha, AlphaOptions};
use super::beta::{beta, BetaOrder};
use super::Plane;
use crate::error::Result;
use crate::lattice::{CubeId, Lattice};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientOptions {
    /// Dilation `a` of the cube `aQ` used by β.
    pub beta_dilation: f64,
    pub compute_alpha: bool,
    pub alpha: AlphaOptions,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        Self {
            beta_dilation: 2.0,
            compute_alpha: false,
            alpha: AlphaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeCoefficients {
    pub id: CubeId,
    pub generation: i32,
    pub key: Vec<i64>,
    pub ell: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta_inf: f64,
    /// Witness of β_2.
    pub plane: Plane,
    pub alpha: Option<f64>,
    pub alpha_plane: Option<Plane>,
    pub c_star: Option<f64>,
    pub alpha_approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub entries: Vec<Option<CubeCoefficients>>,
}

impl CoefficientTable {
    pub fn get(&self, id: CubeId) -> Option<&CubeCoefficients> {
        self.entries.get(id.0).and_then(|e| e.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &CubeCoefficients> {
        self.entries.iter().flatten()
    }
}

fn cube_coefficients(
    lattice: &Lattice,
    id: CubeId,
    opts: &CoefficientOptions,
) -> Result<CubeCoefficients> {
    let cube = lattice.cube(id);
    let (beta1, _) = beta(lattice, id, BetaOrder::One, opts.beta_dilation)?;
    let (beta2, plane) = beta(lattice, id, BetaOrder::Two, opts.beta_dilation)?;
    let (beta_inf, _) = beta(lattice, id, BetaOrder::Infinity, opts.beta_dilation)?;
    let (alpha_value, alpha_plane, c_star, approximate) = if opts.compute_alpha {
        let a = alpha(lattice, id, &opts.alpha)?;
        (Some(a.value), Some(a.plane), Some(a.c_star), a.approximate)
    } else {
        (None, None, None, false)
    };
    Ok(CubeCoefficients {
        id,
        generation: cube.generation,
        key: cube.key.clone(),
        ell: cube.ell(),
        beta1,
        beta2,
        beta_inf,
        plane,
        alpha: alpha_value,
        alpha_plane,
        c_star,
        alpha_approximate: approximate,
    })
}

/// Coefficients for every cube of the lattice, computed in parallel.
pub fn compute_coefficients(
    lattice: &Lattice,
    opts: &CoefficientOptions,
) -> Result<CoefficientTable> {
    let ids: Vec<CubeId> = lattice.ids().collect();
    compute_coefficients_for(lattice, &ids, opts)
}

/// Coefficients for a subset of cubes; other entries stay empty.
pub fn compute_coefficients_for(
    lattice: &Lattice,
    ids: &[CubeId],
    opts: &CoefficientOptions,
) -> Result<CoefficientTable> {
    let computed: Vec<CubeCoefficients> = ids
        .par_iter()
        .map(|&id| cube_coefficients(lattice, id, opts))
        .collect::<Result<_>>()?;
    let mut entries = vec![None; lattice.len()];
    for c in computed {
        let slot = c.id.0;
        entries[slot] = Some(c);
    }
    Ok(CoefficientTable { entries })
}

/// Coefficient whose Carleson packing is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackingKind {
    Beta1Squared,
    Beta2Squared,
    BetaInfSquared,
    AlphaSquared,
}

impl PackingKind {
    /// `coefficient² · ℓ^n`, or `None` when the coefficient is missing.
    pub fn term(&self, entry: &CubeCoefficients, n: usize) -> Option<f64> {
        let value = match self {
            PackingKind::Beta1Squared => Some(entry.beta1),
            PackingKind::Beta2Squared => Some(entry.beta2),
            PackingKind::BetaInfSquared => Some(entry.beta_inf),
            PackingKind::AlphaSquared => entry.alpha,
        }?;
        Some(value * value * entry.ell.powi(n as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootPacking {
    pub root: CubeId,
    pub key: Vec<i64>,
    /// Σ_{Q ⊆ R} term(Q) / ℓ(R)^n.
    pub sum: f64,
    /// Cumulative normalized sums including generations `j_R ..= j_R + k`.
    pub by_depth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingReport {
    pub kind: PackingKind,
    pub root_generation: i32,
    pub max_depth: i32,
    pub roots: Vec<RootPacking>,
    /// Max over roots of the cumulative sum at each depth.
    pub max_by_depth: Vec<f64>,
    pub max_sum: f64,
    /// Some coefficients in range were missing.
    pub partial: bool,
}

/// Normalized packing sums `Σ_{Q ⊆ R} term(Q)/ℓ(R)^n` for every root of a generation.
pub fn packing_report(
    lattice: &Lattice,
    table: &CoefficientTable,
    kind: PackingKind,
    root_generation: i32,
    depth: Option<i32>,
) -> PackingReport {
    let n = lattice.measure().target_dim();
    let max_depth = depth
        .unwrap_or(lattice.j_max() - root_generation)
        .min(lattice.j_max() - root_generation)
        .max(0);
    let mut partial = false;
    let mut roots = Vec::new();
    for &root in lattice.generation(root_generation) {
        let ell_n = lattice.cube(root).ell().powi(n as i32);
        let mut per_depth: BTreeMap<i32, f64> = BTreeMap::new();
        for q in lattice.descendants(root) {
            let depth = lattice.cube(q).generation - root_generation;
            if depth > max_depth {
                continue;
            }
            match table.get(q).and_then(|e| kind.term(e, n)) {
                Some(t) => *per_depth.entry(depth).or_insert(0.0) += t,
                None => partial = true,
            }
        }
        let mut by_depth = Vec::with_capacity(max_depth as usize + 1);
        let mut acc = 0.0;
        for k in 0..=max_depth {
            acc += per_depth.get(&k).copied().unwrap_or(0.0) / ell_n;
            by_depth.push(acc);
        }
        roots.push(RootPacking {
            root,
            key: lattice.cube(root).key.clone(),
            sum: acc,
            by_depth,
        });
    }
    let max_by_depth: Vec<f64> = (0..=max_depth as usize)
        .map(|k| roots.iter().map(|r| r.by_depth[k]).fold(0.0, f64::max))
        .collect();
    let max_sum = max_by_depth.last().copied().unwrap_or(0.0);
    PackingReport {
        kind,
        root_generation,
        max_depth,
        roots,
        max_by_depth,
        max_sum,
        partial,
    }
}
