//! Jones-type β coefficients.

use serde::{Deserialize, Serialize};

use super::{fit_plane, pattern_search, Plane, PointCloud, SearchOptions};
use crate::error::{Error, Result};
use crate::lattice::{CubeId, Lattice};
use crate::numeric::{compensated_sum, dot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaOrder {
    One,
    Two,
    Infinity,
}

const IRLS_ITERATIONS: usize = 50;

/// Unnormalized objective: `Σ w dist` (p = 1), `Σ w dist²` (p = 2) or `max dist` (p = ∞).
pub fn plane_objective(cloud: &PointCloud, plane: &Plane, order: BetaOrder) -> f64 {
    match order {
        BetaOrder::One => compensated_sum(
            (0..cloud.len()).map(|i| cloud.weights[i] * plane.distance(cloud.point(i))),
        ),
        BetaOrder::Two => compensated_sum((0..cloud.len()).map(|i| {
            let r = plane.distance(cloud.point(i));
            cloud.weights[i] * r * r
        })),
        BetaOrder::Infinity => (0..cloud.len())
            .map(|i| plane.distance(cloud.point(i)))
            .fold(0.0, f64::max),
    }
}

/// Normalized β value of a plane on a cloud at scale `ell`.
pub fn normalize(raw: f64, ell: f64, n: usize, order: BetaOrder) -> f64 {
    let ln = ell.powi(n as i32);
    match order {
        BetaOrder::One => raw / (ln * ell),
        BetaOrder::Two => (raw / (ln * ell * ell)).max(0.0).sqrt(),
        BetaOrder::Infinity => raw / ell,
    }
}

/// Best offset along the single normal for a fixed orientation.
fn recenter(cloud: &PointCloud, plane: &Plane, order: BetaOrder) -> Plane {
    let normals = plane.normals();
    if normals.len() != 1 {
        return plane.clone();
    }
    let nu = &normals[0];
    let signed: Vec<f64> = (0..cloud.len())
        .map(|i| {
            let r: Vec<f64> = cloud
                .point(i)
                .iter()
                .zip(plane.base())
                .map(|(a, b)| a - b)
                .collect();
            dot(&r, nu)
        })
        .collect();
    let offset = match order {
        BetaOrder::Infinity => {
            let lo = signed.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = signed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lo + hi)
        }
        BetaOrder::Two => {
            compensated_sum(signed.iter().zip(&cloud.weights).map(|(s, w)| s * w))
                / cloud.total_weight()
        }
        BetaOrder::One => {
            let mut order_idx: Vec<usize> = (0..signed.len()).collect();
            order_idx.sort_by(|&a, &b| signed[a].total_cmp(&signed[b]).then(a.cmp(&b)));
            let half = 0.5 * cloud.total_weight();
            let mut acc = 0.0;
            let mut median = signed[order_idx[0]];
            for &k in &order_idx {
                acc += cloud.weights[k];
                median = signed[k];
                if acc >= half {
                    break;
                }
            }
            median
        }
    };
    let base: Vec<f64> = plane
        .base()
        .iter()
        .zip(nu)
        .map(|(b, e)| b + offset * e)
        .collect();
    Plane::new(base, plane.basis().to_vec()).unwrap_or_else(|_| plane.clone())
}

fn search_options(ell: f64, translate: bool) -> SearchOptions {
    SearchOptions {
        initial_angle: 0.1,
        initial_shift: 0.1 * ell,
        min_angle: 1e-9,
        max_sweeps: 400,
        translate,
        max_evaluations: 20_000,
    }
}

/// Exact minimum-width line for a planar cloud: one side of the optimal slab carries a hull edge.
fn min_width_line(cloud: &PointCloud) -> Option<Plane> {
    let mut pts: Vec<(f64, f64)> = (0..cloud.len())
        .map(|i| (cloud.point(i)[0], cloud.point(i)[1]))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return None;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return None;
    }
    let mut best: Option<(f64, Plane)> = None;
    for e in 0..hull.len() {
        let a = hull[e];
        let b = hull[(e + 1) % hull.len()];
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = (dx * dx + dy * dy).sqrt();
        if len == 0.0 {
            continue;
        }
        let (nx, ny) = (-dy / len, dx / len);
        let width = hull
            .iter()
            .map(|p| ((p.0 - a.0) * nx + (p.1 - a.1) * ny).abs())
            .fold(0.0, f64::max);
        if best.as_ref().map_or(true, |(w, _)| width < *w) {
            let side = hull
                .iter()
                .map(|p| (p.0 - a.0) * nx + (p.1 - a.1) * ny)
                .fold(0.0, |acc: f64, v| if v.abs() > acc.abs() { v } else { acc });
            let shift = 0.5 * side;
            let plane =
                Plane::new(vec![a.0 + shift * nx, a.1 + shift * ny], vec![vec![dx, dy]]).ok()?;
            best = Some((width, plane));
        }
    }
    best.map(|(_, p)| p)
}

/// β_p of a weighted cloud at scale `ell`, with a witness plane.
pub fn beta_cloud(
    cloud: &PointCloud,
    ell: f64,
    n: usize,
    order: BetaOrder,
) -> Result<(f64, Plane)> {
    if cloud.is_empty() {
        return Err(Error::UndefinedCoefficient("empty dilated cube".into()));
    }
    if !(ell > 0.0) || n == 0 || n >= cloud.d {
        return Err(Error::InvalidArgument(
            "β needs ℓ > 0 and 1 <= n < d".into(),
        ));
    }
    let start = fit_plane(cloud, n, None)?;
    let codim_one = cloud.d - n == 1;
    let plane = match order {
        BetaOrder::Two => start,
        BetaOrder::One => {
            let mut best_plane = recenter(cloud, &start, order);
            let mut best = plane_objective(cloud, &best_plane, order);
            let floor = 1e-9 * ell;
            let mut current = best_plane.clone();
            for _ in 0..IRLS_ITERATIONS {
                let reweighted: Vec<f64> = (0..cloud.len())
                    .map(|i| cloud.weights[i] / current.distance(cloud.point(i)).max(floor))
                    .collect();
                let next = recenter(cloud, &fit_plane(cloud, n, Some(&reweighted))?, order);
                let value = plane_objective(cloud, &next, order);
                let improvement = best - value;
                if value < best {
                    best = value;
                    best_plane = next.clone();
                }
                current = next;
                if improvement.abs() <= 1e-9 * best.max(f64::MIN_POSITIVE) {
                    break;
                }
            }
            let outcome = pattern_search(
                &best_plane,
                |p| {
                    let p = if codim_one {
                        recenter(cloud, p, order)
                    } else {
                        p.clone()
                    };
                    plane_objective(cloud, &p, order)
                },
                search_options(ell, !codim_one),
            );
            if codim_one {
                recenter(cloud, &outcome.plane, order)
            } else {
                outcome.plane
            }
        }
        BetaOrder::Infinity => {
            let exact = if n == 1 && cloud.d == 2 {
                min_width_line(cloud)
            } else {
                None
            };
            match exact {
                Some(p) => p,
                None => {
                    let seed = recenter(cloud, &start, order);
                    let outcome = pattern_search(
                        &seed,
                        |p| {
                            let p = if codim_one {
                                recenter(cloud, p, order)
                            } else {
                                p.clone()
                            };
                            plane_objective(cloud, &p, order)
                        },
                        search_options(ell, !codim_one),
                    );
                    if codim_one {
                        recenter(cloud, &outcome.plane, order)
                    } else {
                        outcome.plane
                    }
                }
            }
        }
    };
    let value = normalize(plane_objective(cloud, &plane, order), ell, n, order);
    Ok((value, plane))
}

/// `β_{p,μ}(Q)` over the dilation `a·Q`.
pub fn beta(
    lattice: &Lattice,
    id: CubeId,
    order: BetaOrder,
    dilation: f64,
) -> Result<(f64, Plane)> {
    let members = lattice.dilated_members(id, dilation);
    let mu = lattice.measure();
    let cloud = PointCloud::gather(mu, &members);
    beta_cloud(&cloud, lattice.cube(id).ell(), mu.target_dim(), order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rectangle(h: f64) -> PointCloud {
        PointCloud::new(2, vec![1.0, h, -1.0, h, 1.0, -h, -1.0, -h], vec![1.0; 4]).unwrap()
    }

    #[test]
    fn four_point_examples() {
        let h = 0.1;
        let (inf, plane) = beta_cloud(&rectangle(h), 2.0, 1, BetaOrder::Infinity).unwrap();
        assert!(
            (inf - h / 2.0).abs() < 1e-15,
            "β∞ = {inf}, plane = {plane:?}"
        );
        assert!(plane.distance(&[5.0, 0.0]) < 1e-15);
        let (two, _) = beta_cloud(&rectangle(h), 2.0, 1, BetaOrder::Two).unwrap();
        let expected = (0.5f64 * 4.0 * h * h / 4.0).sqrt();
        assert!((two - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn collinear_is_flat() {
        let coords: Vec<f64> = (0..7)
            .flat_map(|i| [i as f64 * 0.1, 0.3 * i as f64 * 0.1 - 0.2])
            .collect();
        let cloud = PointCloud::new(2, coords, vec![0.5; 7]).unwrap();
        for order in [BetaOrder::One, BetaOrder::Two, BetaOrder::Infinity] {
            assert!(beta_cloud(&cloud, 1.0, 1, order).unwrap().0 <= 1e-12);
        }
    }

    #[test]
    fn l1_fit_ignores_an_outlier() {
        let mut coords: Vec<f64> = (0..9).flat_map(|i| [i as f64 * 0.1, 0.0]).collect();
        coords.extend([0.45, 0.5]);
        let cloud = PointCloud::new(2, coords, vec![1.0; 10]).unwrap();
        let (b1, plane) = beta_cloud(&cloud, 1.0, 1, BetaOrder::One).unwrap();
        assert!((b1 - 0.5).abs() < 1e-6, "β1 = {b1}");
        assert!(plane.distance(&[3.0, 0.0]) < 1e-6);
    }
}
