//! Dual flat distance over 1-Lipschitz functions supported in a region.

use serde::{Deserialize, Serialize};

use super::transport::boundary_transport;
use crate::error::{Error, Result};
use crate::measure::{GraphFrame, SignedMeasure};
use crate::numeric::{compensated_sum, distance};

/// Closed region carrying the support constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Vertical cylinder `Q̃ × ℝ^{d-n}` in frame coordinates, intersected with a ball.
    Cylinder {
        center: Vec<f64>,
        half_side: f64,
        n: usize,
        frame: Option<GraphFrame>,
        cap_radius: f64,
    },
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    /// `max(0, dist(x, ∂F))` for points of `F`, zero outside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Ball { center, radius } => (radius - distance(x, center)).max(0.0),
            Region::Cylinder {
                center,
                half_side,
                n,
                frame,
                cap_radius,
            } => {
                let r: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let mut gap = cap_radius - distance(x, center);
                for axis in 0..*n {
                    let coord = match frame {
                        Some(f) => f.coordinate(&r, axis),
                        None => r[axis],
                    };
                    gap = gap.min(half_side - coord.abs());
                }
                gap.max(0.0)
            }
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Region::Ball { center, .. } | Region::Cylinder { center, .. } => center,
        }
    }

    /// Radius of a ball containing the region.
    pub fn outer_radius(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } => *radius,
            Region::Cylinder { cap_radius, .. } => *cap_radius,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Region::Ball { radius, .. } => *radius > 0.0,
            Region::Cylinder {
                half_side,
                cap_radius,
                ..
            } => *half_side > 0.0 && *cap_radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "region must have positive size".into(),
            ))
        }
    }
}

/// Optimal value with a feasible optimal test function on the joint support.
#[derive(Debug, Clone)]
pub struct FlatDistance {
    pub value: f64,
    /// Support points (σ points first, then ν points), row-major.
    pub points: Vec<f64>,
    /// Net signed mass `σ − ν` per support point.
    pub masses: Vec<f64>,
    /// Optimal 1-Lipschitz test function values with `|f| ≤ dist(·, ∂F)`.
    pub witness: Vec<f64>,
    pub pivots: usize,
}

/// `dist_F(σ, ν)` as a point-to-point transport problem with boundary exits.
pub fn flat_distance_detailed(
    sigma: &SignedMeasure,
    nu: &SignedMeasure,
    region: &Region,
) -> Result<FlatDistance> {
    region.validate()?;
    let d = sigma.ambient_dim();
    if nu.ambient_dim() != d || region.center().len() != d {
        return Err(Error::InvalidArgument(
            "dimension mismatch in flat distance".into(),
        ));
    }
    let mut points = Vec::with_capacity((sigma.len() + nu.len()) * d);
    let mut masses = Vec::with_capacity(sigma.len() + nu.len());
    for i in 0..sigma.len() {
        points.extend_from_slice(sigma.point(i));
        masses.push(sigma.weight(i));
    }
    for i in 0..nu.len() {
        points.extend_from_slice(nu.point(i));
        masses.push(-nu.weight(i));
    }
    let m = masses.len();
    let point = |i: usize| &points[i * d..(i + 1) * d];
    let gaps: Vec<f64> = (0..m).map(|i| region.boundary_distance(point(i))).collect();
    let active: Vec<usize> = (0..m)
        .filter(|&i| gaps[i] > 0.0 && masses[i] != 0.0)
        .collect();
    let sources: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| masses[i] > 0.0)
        .collect();
    let sinks: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| masses[i] < 0.0)
        .collect();
    let mut witness = vec![0.0; m];
    if sources.is_empty() && sinks.is_empty() {
        return Ok(FlatDistance {
            value: 0.0,
            points,
            masses,
            witness,
            pivots: 0,
        });
    }
    let solution = boundary_transport(
        &sources.iter().map(|&i| masses[i]).collect::<Vec<_>>(),
        &sources.iter().map(|&i| gaps[i]).collect::<Vec<_>>(),
        &sinks.iter().map(|&j| -masses[j]).collect::<Vec<_>>(),
        &sinks.iter().map(|&j| gaps[j]).collect::<Vec<_>>(),
        |a, b| distance(point(sources[a]), point(sinks[b])),
    )?;
    // Sink potentials, then the largest 1-Lipschitz extension below them and the boundary cap.
    let u_boundary = solution.row_potentials[sources.len()];
    let sink_values: Vec<f64> = sinks
        .iter()
        .enumerate()
        .map(|(k, &j)| (-(solution.col_potentials[k] + u_boundary)).clamp(-gaps[j], gaps[j]))
        .collect();
    for i in 0..m {
        let mut f = gaps[i];
        for (k, &j) in sinks.iter().enumerate() {
            f = f.min(sink_values[k] + distance(point(i), point(j)));
        }
        witness[i] = f.max(-gaps[i]);
    }
    let value = solution.cost.max(0.0);
    Ok(FlatDistance {
        value,
        points,
        masses,
        witness,
        pivots: solution.pivots,
    })
}

/// `dist_F(σ, ν) = sup{|∫f dσ − ∫f dν| : Lip(f) ≤ 1, supp f ⊂ F}`.
pub fn flat_distance(sigma: &SignedMeasure, nu: &SignedMeasure, region: &Region) -> Result<f64> {
    Ok(flat_distance_detailed(sigma, nu, region)?.value)
}

/// Value of `∫ f d(σ − ν)` for a witness on the joint support.
pub fn witness_pairing(result: &FlatDistance) -> f64 {
    compensated_sum(
        result
            .witness
            .iter()
            .zip(&result.masses)
            .map(|(f, m)| f * m),
    )
}
