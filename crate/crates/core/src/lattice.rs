//! Dyadic μ-cubes: shifted ambient (or graph-cylinder) dyadic cells intersected with supp μ.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::numeric::{compensated_sum, distance, distance_squared, pow2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeId(pub usize);

/// Whether cells live in ℝ^d or in the first `n` graph coordinates (vertical cylinders).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Ambient,
    GraphCylinder,
}

/// Global shift of the dyadic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(untagged)]
pub enum ShiftSpec {
    Vector(Vec<f64>),
    Seed(u64),
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec::Vector(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub generation: i32,
    pub key: Vec<i64>,
    pub members: Vec<usize>,
    pub mass: f64,
    /// Index of the centre point `z_Q`.
    pub center: usize,
    pub parent: Option<CubeId>,
    pub children: Vec<CubeId>,
}

impl Cube {
    pub fn ell(&self) -> f64 {
        pow2(-self.generation)
    }
}

#[derive(Debug, Clone)]
pub struct Lattice {
    measure: Arc<DiscreteMeasure>,
    kind: LatticeKind,
    j_min: i32,
    j_max: i32,
    shift: Vec<f64>,
    cubes: Vec<Cube>,
    generations: Vec<Vec<CubeId>>,
    index: Vec<HashMap<Vec<i64>, CubeId>>,
    /// `owner[g][i]`: cube of generation `j_min + g` containing point `i`.
    owner: Vec<Vec<CubeId>>,
}

/// Normalizer for Carleson sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    Mass,
    SideLength,
}

/// Output of the greedy spanning-point selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningPoints {
    pub indices: Vec<usize>,
    /// `dist(x_k, L_{k-1}) / ℓ(Q)` for `k = 1..=n`.
    pub ratios: Vec<f64>,
}

/// Finest generation whose side is at least the minimal spacing.
pub fn finest_admissible_generation(mu: &DiscreteMeasure) -> i32 {
    let spacing = mu.min_spacing();
    if !spacing.is_finite() {
        return 60;
    }
    (-(spacing * (1.0 - 1e-12)).log2()).floor() as i32
}

impl Lattice {
    pub fn build(
        measure: Arc<DiscreteMeasure>,
        j_min: i32,
        j_max: i32,
        shift: ShiftSpec,
        kind: LatticeKind,
    ) -> Result<Self> {
        if j_max < j_min {
            return Err(Error::InvalidArgument(format!(
                "empty generation range {j_min}..={j_max}"
            )));
        }
        let finest = finest_admissible_generation(&measure);
        if j_max > finest {
            return Err(Error::Resolution {
                requested: j_max,
                finest,
            });
        }
        let key_dim = match kind {
            LatticeKind::Ambient => measure.ambient_dim(),
            LatticeKind::GraphCylinder => {
                if measure.frame().is_none() {
                    return Err(Error::InvalidArgument(
                        "graph-cylinder lattice needs a graph frame".into(),
                    ));
                }
                measure.target_dim()
            }
        };
        let shift = match shift {
            ShiftSpec::Vector(v) if v.is_empty() => vec![0.0; key_dim],
            ShiftSpec::Vector(v) => {
                if v.len() != key_dim {
                    return Err(Error::InvalidArgument(format!(
                        "shift has {} entries, expected {key_dim}",
                        v.len()
                    )));
                }
                v
            }
            ShiftSpec::Seed(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..key_dim).map(|_| rng.gen_range(0.0..1.0)).collect()
            }
        };
        let coords: Vec<Vec<f64>> = (0..measure.len())
            .map(|i| key_coordinates(&measure, kind, &shift, measure.point(i)))
            .collect();
        let mut cubes: Vec<Cube> = Vec::new();
        let mut generations = Vec::new();
        let mut index = Vec::new();
        let mut owner = Vec::new();
        for j in j_min..=j_max {
            let scale = pow2(j);
            let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
            for (i, c) in coords.iter().enumerate() {
                let key: Vec<i64> = c.iter().map(|v| (v * scale).floor() as i64).collect();
                cells.entry(key).or_default().push(i);
            }
            let mut ids = Vec::with_capacity(cells.len());
            let mut lookup = HashMap::with_capacity(cells.len());
            let mut own = vec![CubeId(usize::MAX); measure.len()];
            for (key, members) in cells {
                let id = CubeId(cubes.len());
                for &m in &members {
                    own[m] = id;
                }
                let parent = if j > j_min {
                    let parent_key: Vec<i64> = key.iter().map(|k| k.div_euclid(2)).collect();
                    let pid = index
                        .last()
                        .and_then(|m: &HashMap<Vec<i64>, CubeId>| m.get(&parent_key).copied());
                    match pid {
                        Some(p) => Some(p),
                        None => {
                            return Err(Error::Construction(
                                "child cell without a parent cell".into(),
                            ))
                        }
                    }
                } else {
                    None
                };
                let mass = compensated_sum(members.iter().map(|&m| measure.weight(m)));
                lookup.insert(key.clone(), id);
                ids.push(id);
                cubes.push(Cube {
                    generation: j,
                    key,
                    members,
                    mass,
                    center: 0,
                    parent,
                    children: Vec::new(),
                });
            }
            for &id in &ids {
                if let Some(p) = cubes[id.0].parent {
                    cubes[p.0].children.push(id);
                }
            }
            generations.push(ids);
            index.push(lookup);
            owner.push(own);
        }
        let mut lattice = Lattice {
            measure,
            kind,
            j_min,
            j_max,
            shift,
            cubes,
            generations,
            index,
            owner,
        };
        let centers: Vec<usize> = {
            use rayon::prelude::*;
            (0..lattice.cubes.len())
                .into_par_iter()
                .map(|c| lattice.compute_center(CubeId(c)))
                .collect()
        };
        for (cube, center) in lattice.cubes.iter_mut().zip(centers) {
            cube.center = center;
        }
        Ok(lattice)
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn measure_arc(&self) -> &Arc<DiscreteMeasure> {
        &self.measure
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn cube(&self, id: CubeId) -> &Cube {
        &self.cubes[id.0]
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn ids(&self) -> impl Iterator<Item = CubeId> + '_ {
        (0..self.cubes.len()).map(CubeId)
    }

    pub fn generation(&self, j: i32) -> &[CubeId] {
        if j < self.j_min || j > self.j_max {
            return &[];
        }
        &self.generations[(j - self.j_min) as usize]
    }

    /// Cube of generation `j` containing point `i`.
    pub fn cube_of(&self, i: usize, j: i32) -> Option<CubeId> {
        if j < self.j_min || j > self.j_max {
            return None;
        }
        Some(self.owner[(j - self.j_min) as usize][i])
    }

    pub fn lookup(&self, j: i32, key: &[i64]) -> Option<CubeId> {
        if j < self.j_min || j > self.j_max {
            return None;
        }
        self.index[(j - self.j_min) as usize].get(key).copied()
    }

    /// Whether `inner ⊆ outer` (as point sets with generation nesting).
    pub fn is_descendant(&self, inner: CubeId, outer: CubeId) -> bool {
        let (gi, go) = (self.cube(inner).generation, self.cube(outer).generation);
        if gi < go {
            return false;
        }
        let mut cur = inner;
        while self.cube(cur).generation > go {
            match self.cube(cur).parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
        cur == outer
    }

    /// All cubes `Q ⊆ root` in the lattice, root included, coarse to fine.
    pub fn descendants(&self, root: CubeId) -> Vec<CubeId> {
        let mut out = vec![root];
        let mut k = 0;
        while k < out.len() {
            let id = out[k];
            out.extend(self.cube(id).children.iter().copied());
            k += 1;
        }
        out
    }

    /// Coordinates in which cells are keyed, shift included.
    pub fn key_coordinates(&self, x: &[f64]) -> Vec<f64> {
        key_coordinates(&self.measure, self.kind, &self.shift, x)
    }

    /// Centre of the cell of `id` in key coordinates (shift included).
    pub fn cell_center(&self, id: CubeId) -> Vec<f64> {
        let cube = self.cube(id);
        let ell = cube.ell();
        cube.key.iter().map(|&k| (k as f64 + 0.5) * ell).collect()
    }

    fn neighbor_keys(&self, id: CubeId, reach: i64) -> Vec<CubeId> {
        let cube = self.cube(id);
        let dim = cube.key.len();
        let width = (2 * reach + 1) as usize;
        let mut out = Vec::new();
        let mut key = vec![0i64; dim];
        for flat in 0..width.pow(dim as u32) {
            let mut rest = flat;
            for a in 0..dim {
                key[a] = cube.key[a] + (rest % width) as i64 - reach;
                rest /= width;
            }
            if let Some(other) = self.lookup(cube.generation, &key) {
                out.push(other);
            }
        }
        out.sort_unstable();
        out
    }

    fn compute_center(&self, id: CubeId) -> usize {
        let cube = self.cube(id);
        let mu = &*self.measure;
        let ell = cube.ell();
        let near: Vec<usize> = self
            .neighbor_keys(id, 1)
            .into_iter()
            .filter(|&c| c != id)
            .flat_map(|c| self.cube(c).members.iter().copied())
            .collect();
        let total_outside = mu.len() - cube.members.len();
        if total_outside == 0 {
            let centroid = mu.centroid(&cube.members);
            return *cube
                .members
                .iter()
                .min_by(|&&a, &&b| {
                    distance_squared(mu.point(a), &centroid)
                        .total_cmp(&distance_squared(mu.point(b), &centroid))
                        .then(a.cmp(&b))
                })
                .expect("cubes are non-empty");
        }
        let generation = cube.generation;
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for &m in &cube.members {
            let x = mu.point(m);
            let mut nearest = near
                .iter()
                .map(|&o| distance(x, mu.point(o)))
                .fold(f64::INFINITY, f64::min);
            if nearest > ell {
                for o in 0..mu.len() {
                    if self.cube_of(o, generation) != Some(id) {
                        nearest = nearest.min(distance(x, mu.point(o)));
                    }
                }
            }
            if nearest > best.0 {
                best = (nearest, m);
            }
        }
        best.1
    }

    /// Same-generation cubes meeting the closed `ℓ(R)`-neighbourhood of `R`; always contains `R`.
    pub fn vicinity(&self, id: CubeId) -> Vec<CubeId> {
        let mu = &*self.measure;
        let cube = self.cube(id);
        let ell2 = cube.ell() * cube.ell();
        self.neighbor_keys(id, 2)
            .into_iter()
            .filter(|&other| {
                other == id
                    || cube.members.iter().any(|&a| {
                        self.cube(other)
                            .members
                            .iter()
                            .any(|&b| distance_squared(mu.point(a), mu.point(b)) <= ell2)
                    })
            })
            .collect()
    }

    /// Members of the dilation `aQ`: points within `(a-1)ℓ(Q)` of `Q` for ambient lattices, points whose
    /// graph coordinates lie in the concentric cube of side `aℓ(Q)` for cylinder lattices.
    pub fn dilated_members(&self, id: CubeId, a: f64) -> Vec<usize> {
        let mu = &*self.measure;
        let cube = self.cube(id);
        let ell = cube.ell();
        match self.kind {
            LatticeKind::Ambient => {
                let reach = (a - 1.0).max(0.0) * ell;
                let reach2 = reach * reach;
                let cells = ((a - 1.0).max(0.0).ceil() as i64) + 1;
                let mut out: Vec<usize> = cube.members.clone();
                for other in self.neighbor_keys(id, cells) {
                    if other == id {
                        continue;
                    }
                    for &p in &self.cube(other).members {
                        let x = mu.point(p);
                        if cube
                            .members
                            .iter()
                            .any(|&m| distance_squared(x, mu.point(m)) <= reach2)
                        {
                            out.push(p);
                        }
                    }
                }
                out.sort_unstable();
                out
            }
            LatticeKind::GraphCylinder => {
                let center = self.cell_center(id);
                let half = a * ell / 2.0;
                (0..mu.len())
                    .filter(|&p| {
                        let u = self.key_coordinates(mu.point(p));
                        u.iter().zip(&center).all(|(x, c)| (x - c).abs() <= half)
                    })
                    .collect()
            }
        }
    }

    /// μ-average of `f` over a member set.
    pub fn mean(&self, f: &[f64], members: &[usize]) -> f64 {
        let mu = &*self.measure;
        let mass = compensated_sum(members.iter().map(|&i| mu.weight(i)));
        compensated_sum(members.iter().map(|&i| f[i] * mu.weight(i))) / mass
    }

    /// `Δ_Q f = Σ_{U ∈ Ch(Q)} χ_U (m_U f - m_Q f)` as a full-length vector.
    pub fn haar_difference(&self, f: &[f64], id: CubeId) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        let cube = self.cube(id);
        if cube.children.is_empty() {
            warn!(
                "cube {:?} has no children in lattice range; Haar difference is zero",
                cube.key
            );
            return out;
        }
        let parent_mean = self.mean(f, &cube.members);
        for &child in &cube.children {
            let members = &self.cube(child).members;
            let value = self.mean(f, members) - parent_mean;
            for &m in members {
                out[m] = value;
            }
        }
        out
    }

    /// `χ_Q (f - m_Q f)` as a full-length vector.
    pub fn tilde_haar_difference(&self, f: &[f64], id: CubeId) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        let members = &self.cube(id).members;
        let mean = self.mean(f, members);
        for &m in members {
            out[m] = f[m] - mean;
        }
        out
    }

    /// `a_D(f) = Σ_{R ∈ V(D)} |m_R f - m_D f|`.
    pub fn vicinity_coefficient(&self, f: &[f64], id: CubeId) -> f64 {
        let own = self.mean(f, &self.cube(id).members);
        compensated_sum(
            self.vicinity(id)
                .into_iter()
                .map(|r| (self.mean(f, &self.cube(r).members) - own).abs()),
        )
    }

    /// `Σ_{Q ⊆ R} coeff(Q)` divided by `μ(R)` or `ℓ(R)^n`.
    pub fn carleson_sum(&self, coeffs: &[f64], root: CubeId, normalizer: Normalizer) -> f64 {
        let total = compensated_sum(self.descendants(root).into_iter().map(|q| coeffs[q.0]));
        let r = self.cube(root);
        let norm = match normalizer {
            Normalizer::Mass => r.mass,
            Normalizer::SideLength => r.ell().powi(self.measure.target_dim() as i32),
        };
        total / norm
    }

    /// Greedy farthest-point selection of `n+1` points spanning `Q`.
    pub fn select_spanning_points(&self, id: CubeId) -> Result<SpanningPoints> {
        let mu = &*self.measure;
        let n = mu.target_dim();
        let cube = self.cube(id);
        if cube.members.len() < n + 1 {
            return Err(Error::Degenerate { ratio: 0.0 });
        }
        let ell = cube.ell();
        let base = mu.point(cube.center).to_vec();
        let mut chosen = vec![cube.center];
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut ratios = Vec::new();
        for _ in 0..n {
            let mut best = (-1.0f64, usize::MAX, Vec::new());
            for &m in &cube.members {
                let mut r: Vec<f64> = mu.point(m).iter().zip(&base).map(|(a, b)| a - b).collect();
                for e in &basis {
                    let c = crate::numeric::dot(&r, e);
                    for (x, y) in r.iter_mut().zip(e) {
                        *x -= c * y;
                    }
                }
                let dist = crate::numeric::norm(&r);
                if dist > best.0 {
                    best = (dist, m, r);
                }
            }
            let ratio = best.0 / ell;
            ratios.push(ratio);
            if best.0 <= 1e-9 * ell {
                return Err(Error::Degenerate { ratio });
            }
            basis.push(best.2.iter().map(|v| v / best.0).collect());
            chosen.push(best.1);
        }
        Ok(SpanningPoints {
            indices: chosen,
            ratios,
        })
    }

    /// Mass within `τ·2^{-j}` of the cell faces at generation `j`.
    pub fn boundary_mass(&self, j: i32, tau: f64) -> f64 {
        let mu = &*self.measure;
        let ell = pow2(-j);
        let band = tau * ell;
        compensated_sum((0..mu.len()).filter_map(|i| {
            let u = self.key_coordinates(mu.point(i));
            let near = u.iter().any(|&v| {
                let offset = v - (v / ell).floor() * ell;
                offset.min(ell - offset) <= band
            });
            near.then(|| mu.weight(i))
        }))
    }
}

fn key_coordinates(mu: &DiscreteMeasure, kind: LatticeKind, shift: &[f64], x: &[f64]) -> Vec<f64> {
    match kind {
        LatticeKind::Ambient => x.iter().zip(shift).map(|(v, s)| v + s).collect(),
        LatticeKind::GraphCylinder => {
            let frame = mu.frame().expect("checked at build");
            (0..mu.target_dim())
                .map(|a| frame.coordinate(x, a) + shift[a])
                .collect()
        }
    }
}
