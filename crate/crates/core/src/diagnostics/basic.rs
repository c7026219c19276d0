//! Numerical check of the basic estimate `‖Wμ‖² + ‖Sμ‖² ≲ Σ (α̃(C₁Q)² + β̃₂(Q)²) ℓ(Q)^n` on graphs.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::alpha::QuadratureAnchor;
use crate::geometry::alpha::{alpha_in_region, alpha_region};
use crate::geometry::{beta, AlphaOptions, AlphaRegion, BetaOrder};
use crate::lattice::{CubeId, Lattice, LatticeKind, ShiftSpec};
use crate::measure::DiscreteMeasure;
use crate::numeric::compensated_sum;
use crate::operators::ws_functionals;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasicOptions {
    pub j_min: i32,
    pub j_max: i32,
    /// Quadrature spacing follows the graph sampling step when set.
    pub sample_aligned: bool,
    /// Dilation `C₁` of the α̃ region.
    pub alpha_dilation: f64,
    pub beta_dilation: f64,
    pub alpha: AlphaOptions,
    /// Points per octave for the `Sμ` grid.
    pub per_octave: u32,
    /// Both sides below this are reported as a 0/0 ratio.
    pub noise_floor: f64,
}

impl Default for BasicOptions {
    fn default() -> Self {
        Self {
            j_min: 3,
            j_max: 5,
            sample_aligned: true,
            alpha_dilation: 6.0,
            beta_dilation: 2.0,
            alpha: AlphaOptions {
                anchor: QuadratureAnchor::NearestSupportPoint,
                plane_budget: 8,
                ..AlphaOptions::default()
            },
            per_octave: 8,
            noise_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicEstimate {
    /// `‖Wμ‖²_{L²(μ)}` over points with graph coordinates in the unit cube.
    pub lhs_w: f64,
    pub lhs_s: f64,
    pub rhs_alpha: f64,
    pub rhs_beta: f64,
    pub rhs: f64,
    /// `(lhs_w + lhs_s) / rhs`; `None` when both sides are below the noise floor.
    pub ratio: Option<f64>,
    /// Point of largest `Wμ`.
    pub argmax_w: usize,
    pub cubes: usize,
}

/// Smallest positive gap between first graph coordinates.
fn sampling_step(mu: &DiscreteMeasure) -> Result<f64> {
    let frame = mu.frame().expect("graph measure");
    let mut coords: Vec<f64> = (0..mu.len())
        .map(|i| frame.coordinate(mu.point(i), 0))
        .collect();
    coords.sort_by(f64::total_cmp);
    coords
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 1e-12)
        .reduce(f64::min)
        .ok_or_else(|| Error::InvalidArgument("graph has a single sample".into()))
}

/// Evaluates both sides on a (padded) graph measure over the unit cube.
pub fn basic_estimate_check(
    mu: Arc<DiscreteMeasure>,
    opts: &BasicOptions,
) -> Result<BasicEstimate> {
    let frame = mu
        .frame()
        .ok_or_else(|| Error::InvalidArgument("basic estimate needs a graph measure".into()))?
        .clone();
    let n = mu.target_dim();
    let inside = |x: &[f64]| (0..n).all(|a| (0.0..=1.0).contains(&frame.coordinate(x, a)));
    let ws = ws_functionals(&mu, opts.j_min - 1, opts.j_max, opts.per_octave)?;
    let keep: Vec<usize> = (0..mu.len()).filter(|&i| inside(mu.point(i))).collect();
    let lhs_w = compensated_sum(keep.iter().map(|&i| ws.w[i] * ws.w[i] * mu.weight(i)));
    let lhs_s = compensated_sum(keep.iter().map(|&i| ws.s[i] * ws.s[i] * mu.weight(i)));
    let argmax_w = keep
        .iter()
        .copied()
        .max_by(|&a, &b| ws.w[a].total_cmp(&ws.w[b]).then(b.cmp(&a)))
        .unwrap_or(0);

    let mut alpha_opts = opts.alpha;
    if opts.sample_aligned {
        alpha_opts.spacing = Some(sampling_step(&mu)?);
    }
    let lattice = Lattice::build(
        mu.clone(),
        opts.j_min,
        opts.j_max,
        ShiftSpec::default(),
        LatticeKind::GraphCylinder,
    )?;
    let cubes: Vec<CubeId> = lattice
        .ids()
        .filter(|&id| {
            let ell = lattice.cube(id).ell();
            lattice
                .cell_center(id)
                .iter()
                .zip(lattice.shift())
                .all(|(c, s)| c - s - 0.5 * ell >= -1e-12 && c - s + 0.5 * ell <= 1.0 + 1e-12)
        })
        .collect();
    let terms: Vec<(f64, f64)> = cubes
        .par_iter()
        .map(|&id| -> Result<(f64, f64)> {
            let ell = lattice.cube(id).ell();
            let ell_n = ell.powi(n as i32);
            let (b2, plane) = beta(&lattice, id, BetaOrder::Two, opts.beta_dilation)?;
            let region = alpha_region(
                &lattice,
                id,
                AlphaRegion::Cylinder {
                    dilation: opts.alpha_dilation,
                },
            )?;
            let a = alpha_in_region(&mu, &region, ell, &alpha_opts, Some(plane))?;
            Ok((a.value * a.value * ell_n, b2 * b2 * ell_n))
        })
        .collect::<Result<_>>()?;
    let rhs_alpha = compensated_sum(terms.iter().map(|t| t.0));
    let rhs_beta = compensated_sum(terms.iter().map(|t| t.1));
    let rhs = rhs_alpha + rhs_beta;
    let lhs = lhs_w + lhs_s;
    let ratio = if lhs <= opts.noise_floor && rhs <= opts.noise_floor {
        None
    } else if rhs > 0.0 {
        Some(lhs / rhs)
    } else {
        Some(f64::INFINITY)
    };
    Ok(BasicEstimate {
        lhs_w,
        lhs_s,
        rhs_alpha,
        rhs_beta,
        rhs,
        ratio,
        argmax_w,
        cubes: cubes.len(),
    })
}
