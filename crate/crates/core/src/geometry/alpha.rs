//! Tolsa-type α coefficients: flat distance of μ to the best multiple of a flat measure.

use serde::{Deserialize, Serialize};

use super::flat::{flat_distance, Region};
use super::{fit_plane, pattern_search, Plane, PointCloud, SearchOptions};
use crate::error::{Error, Result};
use crate::lattice::{CubeId, Lattice, LatticeKind};
use crate::measure::{DiscreteMeasure, SignedMeasure};

/// Region over which the flat distance is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaRegion {
    /// `B(z_Q, 6√d ℓ(Q))`.
    Ball,
    /// Vertical cylinder over the `dilation`-fold graph cube, capped by the ball `B(z, dilation·√d·ℓ(Q))`.
    Cylinder { dilation: f64 },
}

/// Point through which the quadrature grid passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureAnchor {
    /// Projection of the region centre.
    RegionCenter,
    /// Projection of the support point nearest the region centre.
    NearestSupportPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaOptions {
    /// Quadrature spacing is `ℓ(Q) / quadrature_divisor` unless `spacing` is set.
    pub quadrature_divisor: f64,
    /// Absolute quadrature spacing; must not exceed `ℓ(Q)/8`.
    pub spacing: Option<f64>,
    pub anchor: QuadratureAnchor,
    /// Maximum number of candidate planes.
    pub plane_budget: usize,
    /// Relative tolerance of the search over the multiple `c`.
    pub c_tolerance: f64,
    pub region: AlphaRegion,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self {
            quadrature_divisor: 16.0,
            spacing: None,
            anchor: QuadratureAnchor::RegionCenter,
            plane_budget: 24,
            c_tolerance: 1e-6,
            region: AlphaRegion::Ball,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    /// `dist / ℓ^{n+1}` at the best plane and multiple found.
    pub value: f64,
    /// Unnormalized flat distance.
    pub raw: f64,
    pub c_star: f64,
    pub plane: Plane,
    /// Set when the plane budget ran out before the search converged.
    pub approximate: bool,
    pub spacing: f64,
    /// Number of flat-distance evaluations.
    pub evaluations: usize,
}

/// Grid quadrature of `H^n` restricted to `plane ∩ region`, spacing `h`, weights `h^n`.
pub fn plane_quadrature(plane: &Plane, region: &Region, spacing: f64) -> Result<SignedMeasure> {
    plane_quadrature_through(plane, region, spacing, region.center())
}

/// Grid quadrature passing through the projection of `through`.
pub fn plane_quadrature_through(
    plane: &Plane,
    region: &Region,
    spacing: f64,
    through: &[f64],
) -> Result<SignedMeasure> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument(
            "quadrature spacing must be positive".into(),
        ));
    }
    let n = plane.dim();
    let d = plane.ambient_dim();
    let anchor = plane.project(through);
    let reach = ((region.outer_radius() + crate::numeric::distance(through, region.center()))
        / spacing)
        .ceil() as i64
        + 1;
    let width = (2 * reach + 1) as usize;
    let cell = spacing.powi(n as i32);
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut x = vec![0.0; d];
    for flat in 0..width.pow(n as u32) {
        let mut rest = flat;
        x.copy_from_slice(&anchor);
        for e in plane.basis() {
            let k = (rest % width) as i64 - reach;
            rest /= width;
            for (xa, ea) in x.iter_mut().zip(e) {
                *xa += k as f64 * spacing * ea;
            }
        }
        if region.boundary_distance(&x) > 0.0 {
            coords.extend_from_slice(&x);
            weights.push(cell);
        }
    }
    SignedMeasure::new(d, coords, weights)
}

/// Points of μ strictly inside the region.
pub fn restrict_to_region(mu: &DiscreteMeasure, region: &Region) -> SignedMeasure {
    let d = mu.ambient_dim();
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for i in 0..mu.len() {
        if region.boundary_distance(mu.point(i)) > 0.0 {
            coords.extend_from_slice(mu.point(i));
            weights.push(mu.weight(i));
        }
    }
    SignedMeasure::new(d, coords, weights).expect("consistent lengths")
}

/// `min_{c ≥ 0} dist_F(σ, c·q)` by golden-section search; returns `(value, c, evaluations)`.
pub fn best_multiple(
    sigma: &SignedMeasure,
    quadrature: &SignedMeasure,
    region: &Region,
    tolerance: f64,
) -> Result<(f64, f64, usize)> {
    let mut evaluations = 0usize;
    let mut eval = |c: f64| -> Result<f64> {
        evaluations += 1;
        flat_distance(sigma, &quadrature.scaled(c), region)
    };
    let q_total = quadrature.total();
    if quadrature.is_empty() || !(q_total > 0.0) {
        let v = eval(0.0)?;
        return Ok((v, 0.0, evaluations));
    }
    let guess = (sigma.total() / q_total).max(0.0);
    let scale = if guess > 0.0 { guess } else { 1.0 };
    let mut best = (eval(0.0)?, 0.0);
    let mut hi = 2.0 * scale;
    const GOLD: f64 = 0.618_033_988_749_894_9;
    for _ in 0..40 {
        let (mut a, mut b) = (0.0, hi);
        let mut x1 = b - GOLD * (b - a);
        let mut x2 = a + GOLD * (b - a);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        for (f, x) in [(f1, x1), (f2, x2)] {
            if f < best.0 {
                best = (f, x);
            }
        }
        while b - a > tolerance * scale {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLD * (b - a);
                f1 = eval(x1)?;
                if f1 < best.0 {
                    best = (f1, x1);
                }
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLD * (b - a);
                f2 = eval(x2)?;
                if f2 < best.0 {
                    best = (f2, x2);
                }
            }
        }
        if best.1 < hi * (1.0 - 1e-3) {
            break;
        }
        hi *= 2.0;
    }
    Ok((best.0, best.1, evaluations))
}

/// `min_c dist_F(μ, c H^n_L)` for one fixed plane; returns `(raw value, c, evaluations)`.
pub fn fixed_plane_distance(
    mu: &DiscreteMeasure,
    region: &Region,
    plane: &Plane,
    spacing: f64,
    tolerance: f64,
) -> Result<(f64, f64, usize)> {
    let sigma = restrict_to_region(mu, region);
    let quadrature = plane_quadrature(plane, region, spacing)?;
    best_multiple(&sigma, &quadrature, region, tolerance)
}

/// α over an explicit region at scale `ell`, searching planes from `start` (or the least-squares fit).
pub fn alpha_in_region(
    mu: &DiscreteMeasure,
    region: &Region,
    ell: f64,
    opts: &AlphaOptions,
    start: Option<Plane>,
) -> Result<AlphaResult> {
    let spacing = opts.spacing.unwrap_or(ell / opts.quadrature_divisor);
    if !(ell > 0.0) || !(spacing > 0.0) || spacing > ell / 8.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(
            "α needs ℓ > 0 and quadrature spacing ≤ ℓ/8".into(),
        ));
    }
    let n = mu.target_dim();
    let d = mu.ambient_dim();
    let sigma = restrict_to_region(mu, region);
    let through: Vec<f64> = match opts.anchor {
        QuadratureAnchor::RegionCenter => region.center().to_vec(),
        QuadratureAnchor::NearestSupportPoint => (0..mu.len())
            .min_by(|&a, &b| {
                crate::numeric::distance_squared(mu.point(a), region.center()).total_cmp(
                    &crate::numeric::distance_squared(mu.point(b), region.center()),
                )
            })
            .map_or_else(|| region.center().to_vec(), |i| mu.point(i).to_vec()),
    };
    let start = match start {
        Some(p) => p,
        None if !sigma.is_empty() => {
            let cloud = PointCloud::new(
                d,
                (0..sigma.len())
                    .flat_map(|i| sigma.point(i).to_vec())
                    .collect(),
                sigma.weights().to_vec(),
            )?;
            fit_plane(&cloud, n, None)?
        }
        None => {
            let axes = (0..n)
                .map(|a| {
                    let mut e = vec![0.0; d];
                    e[a] = 1.0;
                    e
                })
                .collect();
            Plane::new(region.center().to_vec(), axes)?
        }
    };
    let mut evaluations = 0usize;
    let mut failure: Option<Error> = None;
    let mut best: Option<(f64, f64, Plane)> = None;
    let outcome = pattern_search(
        &start,
        |plane| {
            if failure.is_some() {
                return f64::INFINITY;
            }
            let result = plane_quadrature_through(plane, region, spacing, &through)
                .and_then(|q| best_multiple(&sigma, &q, region, opts.c_tolerance));
            match result {
                Ok((value, c, evals)) => {
                    evaluations += evals;
                    if best.as_ref().map_or(true, |(v, _, _)| value < *v) {
                        best = Some((value, c, plane.clone()));
                    }
                    value
                }
                Err(e) => {
                    failure = Some(e);
                    f64::INFINITY
                }
            }
        },
        SearchOptions {
            initial_angle: 0.05,
            initial_shift: 0.05 * ell,
            min_angle: 1e-4,
            max_sweeps: usize::MAX,
            translate: true,
            max_evaluations: opts.plane_budget.max(1),
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (raw, c_star, plane) = best.expect("at least one plane evaluated");
    Ok(AlphaResult {
        value: raw / ell.powi(n as i32 + 1),
        raw,
        c_star,
        plane,
        approximate: !outcome.converged,
        spacing,
        evaluations,
    })
}

/// Region used by α for a cube.
pub fn alpha_region(lattice: &Lattice, id: CubeId, region: AlphaRegion) -> Result<Region> {
    let mu = lattice.measure();
    let cube = lattice.cube(id);
    let ell = cube.ell();
    let d = mu.ambient_dim();
    let z = mu.point(cube.center).to_vec();
    match region {
        AlphaRegion::Ball => Ok(Region::ball(z, 6.0 * (d as f64).sqrt() * ell)),
        AlphaRegion::Cylinder { dilation } => {
            if lattice.kind() != LatticeKind::GraphCylinder {
                return Err(Error::InvalidArgument(
                    "cylinder α needs a graph-cylinder lattice".into(),
                ));
            }
            let frame = mu.frame().expect("cylinder lattices carry a frame").clone();
            let n = mu.target_dim();
            let cell = lattice.cell_center(id);
            let mut graph: Vec<f64> = (0..d).map(|a| frame.coordinate(&z, a)).collect();
            for a in 0..n {
                graph[a] = cell[a] - lattice.shift()[a];
            }
            Ok(Region::Cylinder {
                center: frame.to_ambient(&graph),
                half_side: 0.5 * dilation * ell,
                n,
                frame: Some(frame),
                cap_radius: dilation * (d as f64).sqrt() * ell,
            })
        }
    }
}

/// `α_μ(Q) = ℓ(Q)^{-n-1} inf_{c ≥ 0, L} dist_{B_Q}(μ, c H^n_L)`.
pub fn alpha(lattice: &Lattice, id: CubeId, opts: &AlphaOptions) -> Result<AlphaResult> {
    let region = alpha_region(lattice, id, opts.region)?;
    alpha_in_region(
        lattice.measure(),
        &region,
        lattice.cube(id).ell(),
        opts,
        None,
    )
}
