//! Flatness of a cube controlled by differences of special truncations at spanning points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Plane;
use crate::lattice::{CubeId, Lattice};
use crate::measure::annulus_mass;
use crate::numeric::{distance, pow2};
use crate::operators::special_truncation_sm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessCheck {
    /// `max_{x ∈ 3Q} dist(x, L_0)`.
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Point of `3Q` attaining the left-hand side.
    pub argmax: usize,
    /// `x_0, …, x_n` spanning `L_0`.
    pub spanning: Vec<usize>,
    /// The annulus around `x_0` at scale `s` meets the support.
    pub hypothesis_met: bool,
    /// `Σ_j Σ_k |S_k μ(x_j) − S_k μ(x_0)|`.
    pub truncation_sum: f64,
    pub diameter: f64,
}

fn exact_power_of_two(value: f64) -> Option<i32> {
    if !(value > 0.0) || !value.is_finite() {
        return None;
    }
    let e = value.log2().round() as i32;
    (pow2(e) == value).then_some(-e)
}

/// Compares `max_{x ∈ 3Q} dist(x, L_0)` with `s ΣΣ|S_kμ(x_j) − S_kμ(x_0)| + r²/s + rs/t`, `r = diam(Q)`,
/// for dyadic `t ≥ s > 4 diam(Q)`.
pub fn flatness_bound_check(
    lattice: &Lattice,
    id: CubeId,
    s: f64,
    t: f64,
) -> Result<FlatnessCheck> {
    let mu = lattice.measure();
    let (Some(m), Some(p)) = (exact_power_of_two(s), exact_power_of_two(t)) else {
        return Err(Error::InvalidArgument(
            "s and t must be exact powers of two".into(),
        ));
    };
    let cube = lattice.cube(id);
    let r = cube
        .members
        .iter()
        .flat_map(|&a| cube.members.iter().map(move |&b| (a, b)))
        .map(|(a, b)| distance(mu.point(a), mu.point(b)))
        .fold(0.0, f64::max);
    if !(t >= s && s > 4.0 * r) {
        return Err(Error::InvalidArgument(format!(
            "need t >= s > 4 diam(Q) = {}",
            4.0 * r
        )));
    }
    let spanning = lattice.select_spanning_points(id)?;
    let x0 = mu.point(spanning.indices[0]).to_vec();
    let directions: Vec<Vec<f64>> = spanning.indices[1..]
        .iter()
        .map(|&j| mu.point(j).iter().zip(&x0).map(|(a, b)| a - b).collect())
        .collect();
    let plane = Plane::new(x0.clone(), directions)?;
    let (lhs, argmax) = lattice
        .dilated_members(id, 3.0)
        .into_iter()
        .map(|q| (plane.distance(mu.point(q)), q))
        .fold(
            (0.0, spanning.indices[0]),
            |a, b| if b.0 > a.0 { b } else { a },
        );
    let low = pow2(-m) * std::f64::consts::FRAC_1_SQRT_2;
    let high = pow2(-m) * std::f64::consts::SQRT_2;
    let hypothesis_met = annulus_mass(mu, &x0, low, high)? > 0.0;

    let mut points = spanning.indices[1..].to_vec();
    points.push(argmax);
    let mut truncation_sum = 0.0;
    for k in p..=m {
        let base = special_truncation_sm(mu, None, &x0, k)?;
        for &j in &points {
            let v = special_truncation_sm(mu, None, mu.point(j), k)?;
            truncation_sum += distance(&v, &base);
        }
    }
    let rhs = s * truncation_sum + r * r / s + r * s / t;
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(FlatnessCheck {
        lhs,
        rhs,
        ratio,
        argmax,
        spanning: spanning.indices,
        hypothesis_met,
        truncation_sum,
        diameter: r,
    })
}
