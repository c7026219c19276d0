//! Calderón–Zygmund decomposition of a signed measure against a point-cloud measure.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, SignedMeasure};
use crate::numeric::compensated_sum;

/// Closed axis-parallel cube `{y : |y - center|_∞ ≤ side/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzCube {
    pub center: Vec<f64>,
    pub side: f64,
    /// `|ν|(Q)`.
    pub nu_mass: f64,
    /// `μ(2Q)`.
    pub mu_mass_double: f64,
}

impl CzCube {
    /// Membership in the concentric dilation `aQ`.
    pub fn contains_dilated(&self, x: &[f64], a: f64) -> bool {
        sup_distance(x, &self.center) <= 0.5 * a * self.side
    }
}

/// Output of [`cz_decompose`] with its measured constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzDecomposition {
    pub lambda: f64,
    pub cubes: Vec<CzCube>,
    /// Density of ν with respect to μ off the selected cubes, per μ point.
    pub density: Vec<f64>,
    /// `b_j` as `(μ point, value)` pairs supported in `R_j = 6Q_j`.
    pub bumps: Vec<Vec<(usize, f64)>>,
    /// `∫ w_j dν` per cube.
    pub bump_integrals: Vec<f64>,
    /// Good part `g` per μ point.
    pub good: Vec<f64>,
    /// `max Σ_j χ_{Q_j}` over ν atoms and μ points.
    pub overlap: usize,
    /// `max_x Σ_j |b_j(x)| / λ`.
    pub bump_constant: f64,
    /// `max_j ‖b_j‖_∞ μ(R_j) / |ν|(Q_j)`.
    pub bump_mass_constant: f64,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn coordinate_key(x: &[f64]) -> Vec<u64> {
    x.iter()
        .map(|v| if *v == 0.0 { 0 } else { v.to_bits() })
        .collect()
}

/// Mass of the closed cube of half-side `half` around `center`.
fn cube_mass(
    points: &[f64],
    weights: &[f64],
    d: usize,
    center: &[f64],
    half: f64,
    absolute: bool,
) -> f64 {
    compensated_sum((0..weights.len()).filter_map(|i| {
        let p = &points[i * d..(i + 1) * d];
        (sup_distance(p, center) <= half).then(|| {
            if absolute {
                weights[i].abs()
            } else {
                weights[i]
            }
        })
    }))
}

/// Largest side at which `|ν|(Q(x, ℓ)) > c μ(Q(x, 2ℓ))`, chosen so that the inequality fails for every
/// side above `2ℓ`; `None` if it never holds.
fn stopping_side(
    mu: &DiscreteMeasure,
    nu: &SignedMeasure,
    x: &[f64],
    threshold: f64,
) -> Option<f64> {
    let d = mu.ambient_dim();
    // Events in the side variable ℓ: ν atoms enter Q at ℓ = 2t, μ points enter 2Q at ℓ = t.
    let mut events: Vec<f64> = vec![0.0];
    for i in 0..nu.len() {
        events.push(2.0 * sup_distance(nu.point(i), x));
    }
    for i in 0..mu.len() {
        events.push(sup_distance(mu.point(i), x));
    }
    events.sort_by(f64::total_cmp);
    events.dedup();
    let holds = |side: f64| {
        let nu_mass = cube_mass(
            nu_coords(nu, d).as_slice(),
            nu.weights(),
            d,
            x,
            0.5 * side,
            true,
        );
        let mu_mass = cube_mass(mu.coords(), mu.weights(), d, x, side, false);
        nu_mass > threshold * mu_mass
    };
    let mut last_good: Option<usize> = None;
    for (k, &e) in events.iter().enumerate() {
        // The interval [e, next) has the member sets of e (closed cubes); e = 0 stands for (0, next).
        let probe = if e == 0.0 {
            events.get(1).map_or(1.0, |n| 0.5 * n)
        } else {
            e
        };
        if holds(probe) {
            last_good = Some(k);
        }
    }
    let k = last_good?;
    let start = if events[k] == 0.0 {
        events.get(1).map_or(1.0, |n| 0.5 * n)
    } else {
        events[k]
    };
    let next = events.get(k + 1).copied()?;
    Some(start.max(0.5 * next))
}

fn nu_coords(nu: &SignedMeasure, d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(nu.len() * d);
    for i in 0..nu.len() {
        out.extend_from_slice(nu.point(i));
    }
    out
}

/// Selects almost disjoint centred cubes covering the region where `|ν| > 2^{-d-1}λ μ`, builds the
/// bump functions on `6Q_j` and verifies every postcondition before returning.
pub fn cz_decompose(
    mu: &DiscreteMeasure,
    nu: &SignedMeasure,
    lambda: f64,
) -> Result<CzDecomposition> {
    let d = mu.ambient_dim();
    if nu.ambient_dim() != d {
        return Err(Error::InvalidArgument(
            "ν and μ live in different dimensions".into(),
        ));
    }
    let admissible = 2f64.powi(d as i32 + 1) * nu.total_variation() / mu.total_mass();
    if !(lambda > admissible) {
        return Err(Error::Precondition(format!(
            "λ = {lambda} must exceed 2^(d+1)‖ν‖/‖μ‖ = {admissible}"
        )));
    }
    let threshold = lambda / 2f64.powi(d as i32 + 1);
    let nu_points = nu_coords(nu, d);

    let mut candidates: Vec<(f64, usize)> = (0..nu.len())
        .filter(|&i| nu.weight(i) != 0.0)
        .filter_map(|i| stopping_side(mu, nu, nu.point(i), threshold).map(|s| (s, i)))
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut cubes: Vec<CzCube> = Vec::new();
    for (side, i) in candidates {
        let x = nu.point(i);
        if cubes.iter().any(|q| q.contains_dilated(x, 1.0)) {
            continue;
        }
        cubes.push(CzCube {
            center: x.to_vec(),
            side,
            nu_mass: cube_mass(&nu_points, nu.weights(), d, x, 0.5 * side, true),
            mu_mass_double: cube_mass(mu.coords(), mu.weights(), d, x, side, false),
        });
    }

    // Density off the cubes: ν atoms sitting on μ points.
    let mut mu_index: HashMap<Vec<u64>, usize> = HashMap::new();
    for i in 0..mu.len() {
        mu_index.entry(coordinate_key(mu.point(i))).or_insert(i);
    }
    let covered = |x: &[f64]| cubes.iter().filter(|q| q.contains_dilated(x, 1.0)).count();
    let mut density = vec![0.0; mu.len()];
    for i in 0..nu.len() {
        let x = nu.point(i);
        if covered(x) > 0 {
            continue;
        }
        match mu_index.get(&coordinate_key(x)) {
            Some(&p) => density[p] += nu.weight(i) / mu.weight(p),
            None => {
                return Err(Error::Construction(format!(
                    "ν atom {i} lies off supp μ and outside every selected cube"
                )))
            }
        }
    }

    // Bumps: b_j = (∫ w_j dν) / μ(R_j) on supp μ ∩ 6Q_j.
    let mut bumps = Vec::with_capacity(cubes.len());
    let mut bump_integrals = Vec::with_capacity(cubes.len());
    let mut bump_mass_constant = 0.0f64;
    for q in &cubes {
        let integral = compensated_sum((0..nu.len()).filter_map(|i| {
            let x = nu.point(i);
            q.contains_dilated(x, 1.0)
                .then(|| nu.weight(i) / covered(x) as f64)
        }));
        let support: Vec<usize> = (0..mu.len())
            .filter(|&p| q.contains_dilated(mu.point(p), 6.0))
            .collect();
        let mass = compensated_sum(support.iter().map(|&p| mu.weight(p)));
        if !(mass > 0.0) {
            return Err(Error::Construction(
                "a bump region 6Q_j carries no μ mass".into(),
            ));
        }
        let value = integral / mass;
        bump_mass_constant = bump_mass_constant.max(value.abs() * mass / q.nu_mass);
        bumps.push(support.into_iter().map(|p| (p, value)).collect::<Vec<_>>());
        bump_integrals.push(integral);
    }

    let mut abs_sum = vec![0.0; mu.len()];
    let mut good: Vec<f64> = (0..mu.len())
        .map(|p| {
            if covered(mu.point(p)) > 0 {
                0.0
            } else {
                density[p]
            }
        })
        .collect();
    for bump in &bumps {
        for &(p, v) in bump {
            abs_sum[p] += v.abs();
            good[p] += v;
        }
    }
    let bump_constant = abs_sum.iter().fold(0.0f64, |a, &b| a.max(b)) / lambda;
    let overlap = (0..nu.len())
        .map(|i| covered(nu.point(i)))
        .chain((0..mu.len()).map(|p| covered(mu.point(p))))
        .max()
        .unwrap_or(0);

    let out = CzDecomposition {
        lambda,
        cubes,
        density,
        bumps,
        bump_integrals,
        good,
        overlap,
        bump_constant,
        bump_mass_constant,
    };
    let violations = verify_cz(mu, nu, &out);
    if let Some(first) = violations.first() {
        return Err(Error::Construction(first.clone()));
    }
    Ok(out)
}

/// Re-evaluates every postcondition; returns the violated clauses.
pub fn verify_cz(mu: &DiscreteMeasure, nu: &SignedMeasure, cz: &CzDecomposition) -> Vec<String> {
    let d = mu.ambient_dim();
    let threshold = cz.lambda / 2f64.powi(d as i32 + 1);
    let nu_points = nu_coords(nu, d);
    let mut violations = Vec::new();
    for (j, q) in cz.cubes.iter().enumerate() {
        let inner = cube_mass(&nu_points, nu.weights(), d, &q.center, 0.5 * q.side, true);
        let outer = cube_mass(mu.coords(), mu.weights(), d, &q.center, q.side, false);
        if !(inner > threshold * outer) {
            violations.push(format!("cube {j}: |ν|(Q) > 2^(-d-1) λ μ(2Q) fails"));
        }
        for eta in [3.0, 4.0, 8.0] {
            let a = cube_mass(
                &nu_points,
                nu.weights(),
                d,
                &q.center,
                0.5 * eta * q.side,
                true,
            );
            let b = cube_mass(mu.coords(), mu.weights(), d, &q.center, eta * q.side, false);
            if a > threshold * b {
                violations.push(format!(
                    "cube {j}: |ν|(ηQ) <= 2^(-d-1) λ μ(2ηQ) fails for η = {eta}"
                ));
            }
        }
        let bump = &cz.bumps[j];
        let total = compensated_sum(bump.iter().map(|&(p, v)| v * mu.weight(p)));
        if (total - cz.bump_integrals[j]).abs()
            > 1e-12 * cz.bump_integrals[j].abs().max(1e-300) + 1e-15
        {
            violations.push(format!("cube {j}: ∫ b_j dμ differs from ∫ w_j dν"));
        }
        if bump
            .iter()
            .any(|&(p, _)| !q.contains_dilated(mu.point(p), 6.0))
        {
            violations.push(format!("cube {j}: bump support leaves 6Q_j"));
        }
        let positive = bump.iter().any(|&(_, v)| v > 0.0);
        let negative = bump.iter().any(|&(_, v)| v < 0.0);
        if positive && negative {
            violations.push(format!("cube {j}: bump changes sign"));
        }
    }
    for (p, f) in cz.density.iter().enumerate() {
        if f.abs() > cz.lambda * (1.0 + 1e-12) {
            violations.push(format!("μ point {p}: |f| <= λ fails"));
        }
    }
    violations
}
