//! Planes, β and α coefficients, the flat distance and packing reports.

pub mod alpha;
pub mod beta;
pub mod flat;
pub mod packing;
pub mod transport;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::numeric::{compensated_sum, dot, norm};

pub use alpha::{alpha, AlphaOptions, AlphaRegion, AlphaResult};
pub use beta::{beta, beta_cloud, BetaOrder};
pub use flat::{flat_distance, Region};
pub use packing::{
    compute_coefficients, packing_report, CoefficientOptions, CoefficientTable, CubeCoefficients,
    PackingKind, PackingReport,
};

/// Affine `n`-plane through `base` spanned by an orthonormal `basis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    base: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl Plane {
    /// Builds a plane, orthonormalizing the given directions.
    pub fn new(base: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self> {
        let d = base.len();
        if directions.is_empty() || directions.len() >= d || directions.iter().any(|v| v.len() != d)
        {
            return Err(Error::InvalidArgument(
                "plane needs 1 <= n < d directions of length d".into(),
            ));
        }
        let basis = gram_schmidt(&directions).ok_or_else(|| {
            Error::InvalidArgument("plane directions are linearly dependent".into())
        })?;
        Ok(Self { base, basis })
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.len()
    }

    /// Orthogonal projection onto the plane.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let mut out = self.base.clone();
        for e in &self.basis {
            let c = dot(&r, e);
            for (o, v) in out.iter_mut().zip(e) {
                *o += c * v;
            }
        }
        out
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut r: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        for e in &self.basis {
            let c = dot(&r, e);
            for (o, v) in r.iter_mut().zip(e) {
                *o -= c * v;
            }
        }
        norm(&r)
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn normals(&self) -> Vec<Vec<f64>> {
        complete_basis(&self.basis)[self.dim()..].to_vec()
    }

    /// Largest principal angle (radians) between the direction spaces.
    pub fn angle_to(&self, other: &Plane) -> f64 {
        let mut worst = 0.0f64;
        for e in &self.basis {
            let mut r = e.clone();
            for f in &other.basis {
                let c = dot(&r, f);
                for (o, v) in r.iter_mut().zip(f) {
                    *o -= c * v;
                }
            }
            worst = worst.max(norm(&r).min(1.0).asin());
        }
        worst
    }

    /// Image under `x ↦ R x + t` with `R` row-major orthogonal.
    pub fn transformed(&self, rotation: &[f64], translation: &[f64]) -> Plane {
        let d = self.ambient_dim();
        let apply = |v: &[f64]| -> Vec<f64> {
            (0..d)
                .map(|i| (0..d).map(|k| rotation[i * d + k] * v[k]).sum())
                .collect()
        };
        let base: Vec<f64> = apply(&self.base)
            .iter()
            .zip(translation)
            .map(|(a, b)| a + b)
            .collect();
        Plane {
            base,
            basis: self.basis.iter().map(|e| apply(e)).collect(),
        }
    }

    fn from_frame(base: Vec<f64>, frame: &[Vec<f64>], n: usize) -> Plane {
        Plane {
            base,
            basis: frame[..n].to_vec(),
        }
    }
}

fn gram_schmidt(vectors: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = dot(&r, e);
                for (o, x) in r.iter_mut().zip(e) {
                    *o -= c * x;
                }
            }
        }
        let len = norm(&r);
        if len < 1e-12 * norm(v).max(1e-300) {
            return None;
        }
        out.push(r.iter().map(|x| x / len).collect());
    }
    Some(out)
}

/// Extends an orthonormal family to an orthonormal basis of ℝ^d.
fn complete_basis(family: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = family.first().map_or(0, |v| v.len());
    let mut out = family.to_vec();
    for axis in 0..d {
        if out.len() == d {
            break;
        }
        let mut candidate = vec![0.0; d];
        candidate[axis] = 1.0;
        let mut r = candidate.clone();
        for _ in 0..2 {
            for e in &out {
                let c = dot(&r, e);
                for (o, x) in r.iter_mut().zip(e) {
                    *o -= c * x;
                }
            }
        }
        let len = norm(&r);
        if len > 1e-6 {
            out.push(r.iter().map(|x| x / len).collect());
        }
    }
    out
}

/// Weighted points gathered for a geometric fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub d: usize,
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(d: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if coords.len() != weights.len() * d {
            return Err(Error::InvalidArgument(
                "cloud coordinates do not match weights".into(),
            ));
        }
        Ok(Self { d, coords, weights })
    }

    pub fn gather(mu: &DiscreteMeasure, indices: &[usize]) -> Self {
        let d = mu.ambient_dim();
        let mut coords = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            coords.extend_from_slice(mu.point(i));
        }
        Self {
            d,
            coords,
            weights: indices.iter().map(|&i| mu.weight(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }
}

/// Weighted least-squares `n`-plane (principal directions about the weighted mean).
pub fn fit_plane(cloud: &PointCloud, n: usize, weights: Option<&[f64]>) -> Result<Plane> {
    let d = cloud.d;
    if cloud.is_empty() {
        return Err(Error::UndefinedCoefficient("empty point set".into()));
    }
    let w = weights.unwrap_or(&cloud.weights);
    let total = compensated_sum(w.iter().copied());
    if !(total > 0.0) {
        return Err(Error::UndefinedCoefficient("zero total weight".into()));
    }
    let mean: Vec<f64> = (0..d)
        .map(|a| compensated_sum((0..cloud.len()).map(|i| w[i] * cloud.point(i)[a])) / total)
        .collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for i in 0..cloud.len() {
        let p = cloud.point(i);
        for a in 0..d {
            let da = p[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += w[i] * da * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let directions: Vec<Vec<f64>> = order[..n]
        .iter()
        .map(|&k| (0..d).map(|a| eig.eigenvectors[(a, k)]).collect())
        .collect();
    let basis = gram_schmidt(&directions).unwrap_or_default();
    let basis = if basis.len() == n {
        basis
    } else {
        let mut fallback = Vec::new();
        for a in 0..n {
            let mut e = vec![0.0; d];
            e[a] = 1.0;
            fallback.push(e);
        }
        fallback
    };
    Ok(Plane { base: mean, basis })
}

/// Options of the derivative-free plane search.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SearchOptions {
    pub initial_angle: f64,
    pub initial_shift: f64,
    pub min_angle: f64,
    pub max_sweeps: usize,
    pub translate: bool,
    pub max_evaluations: usize,
}

pub(crate) struct SearchOutcome {
    pub plane: Plane,
    pub converged: bool,
}

/// Compass search over rotations (and optionally normal translations) of a plane.
pub(crate) fn pattern_search<F: FnMut(&Plane) -> f64>(
    start: &Plane,
    mut objective: F,
    opts: SearchOptions,
) -> SearchOutcome {
    let n = start.dim();
    let d = start.ambient_dim();
    let mut frame = complete_basis(&start.basis);
    let mut base = start.base.clone();
    let mut best = objective(start);
    let mut evaluations = 1;
    let mut angle = opts.initial_angle;
    let mut shift = opts.initial_shift;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut improved = false;
        for i in 0..n {
            for k in n..d {
                for sign in [1.0, -1.0] {
                    if evaluations >= opts.max_evaluations {
                        return SearchOutcome {
                            plane: Plane::from_frame(base, &frame, n),
                            converged: false,
                        };
                    }
                    let (c, s) = ((sign * angle).cos(), (sign * angle).sin());
                    let mut trial = frame.clone();
                    trial[i] = frame[i]
                        .iter()
                        .zip(&frame[k])
                        .map(|(a, b)| c * a + s * b)
                        .collect();
                    trial[k] = frame[i]
                        .iter()
                        .zip(&frame[k])
                        .map(|(a, b)| -s * a + c * b)
                        .collect();
                    let candidate = Plane::from_frame(base.clone(), &trial, n);
                    let value = objective(&candidate);
                    evaluations += 1;
                    if value < best {
                        best = value;
                        frame = trial;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if opts.translate {
            for k in n..d {
                for sign in [1.0, -1.0] {
                    if evaluations >= opts.max_evaluations {
                        return SearchOutcome {
                            plane: Plane::from_frame(base, &frame, n),
                            converged: false,
                        };
                    }
                    let trial: Vec<f64> = base
                        .iter()
                        .zip(&frame[k])
                        .map(|(b, e)| b + sign * shift * e)
                        .collect();
                    let candidate = Plane::from_frame(trial.clone(), &frame, n);
                    let value = objective(&candidate);
                    evaluations += 1;
                    if value < best {
                        best = value;
                        base = trial;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if sweeps % 8 == 0 {
            if let Some(clean) = gram_schmidt(&frame) {
                frame = clean;
            }
        }
        if !improved {
            angle *= 0.5;
            shift *= 0.5;
            if angle < opts.min_angle {
                converged = true;
                break;
            }
        }
    }
    SearchOutcome {
        plane: Plane::from_frame(base, &frame, n),
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_distance_and_projection() {
        let p = Plane::new(vec![0.0, 1.0], vec![vec![2.0, 0.0]]).unwrap();
        assert_eq!(p.distance(&[3.0, 4.0]), 3.0);
        assert_eq!(p.project(&[3.0, 4.0]), vec![3.0, 1.0]);
        assert_eq!(p.normals().len(), 1);
    }

    #[test]
    fn fit_recovers_line() {
        let coords: Vec<f64> = (0..10)
            .flat_map(|i| [i as f64, 2.0 * i as f64 + 1.0])
            .collect();
        let cloud = PointCloud::new(2, coords, vec![1.0; 10]).unwrap();
        let plane = fit_plane(&cloud, 1, None).unwrap();
        for i in 0..10 {
            assert!(plane.distance(cloud.point(i)) < 1e-12);
        }
        let e = &plane.basis()[0];
        assert!((dot(e, e) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn principal_angle() {
        let a = Plane::new(vec![0.0, 0.0], vec![vec![1.0, 0.0]]).unwrap();
        let b = Plane::new(vec![0.0, 0.0], vec![vec![1.0, 1.0]]).unwrap();
        assert!((a.angle_to(&b) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }
}
