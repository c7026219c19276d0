//! Reference corona construction (bad cubes plus coherent stopping trees) and its validator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_plane, CoefficientTable, Plane, PointCloud};
use crate::lattice::{CubeId, Lattice};
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct CoronaParams {
    /// Slope bound of the approximating graphs.
    pub eta: f64,
    /// Relative distance tolerance `dist(x, Γ_S) ≤ θ ℓ(Q)` on `2Q`.
    pub theta: f64,
    /// `β_∞` threshold `η′`; defaults to `θ/2`.
    pub beta_threshold: Option<f64>,
    /// Angle threshold `η″` in radians; defaults to `atan η`.
    pub angle_threshold: Option<f64>,
}

impl Default for CoronaParams {
    fn default() -> Self {
        Self {
            eta: 0.5,
            theta: 0.5,
            beta_threshold: None,
            angle_threshold: None,
        }
    }
}

impl CoronaParams {
    pub fn beta_limit(&self) -> f64 {
        self.beta_threshold.unwrap_or(0.5 * self.theta)
    }

    pub fn angle_limit(&self) -> f64 {
        self.angle_threshold.unwrap_or_else(|| self.eta.atan())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", content = "tree", rename_all = "snake_case")]
pub enum CubeRole {
    Bad,
    Tree(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaTree {
    pub root: CubeId,
    pub cubes: Vec<CubeId>,
    /// Least-squares plane `Γ_S` over the members of the root.
    pub graph: Plane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaStructure {
    pub params: CoronaParams,
    pub roles: Vec<CubeRole>,
    pub bad: Vec<CubeId>,
    pub trees: Vec<CoronaTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaValidation {
    /// (a) every cube is bad or good, never both.
    pub partition: bool,
    /// (b) `max_R Σ_{Q ∈ B, Q ⊆ R} μ(Q) / μ(R)`.
    pub bad_packing: f64,
    /// (c) every good cube lies in exactly one tree.
    pub trees_partition: bool,
    /// (d) unique maximal cube, interval closure and all-or-none children.
    pub coherent: bool,
    /// (e) `max_R Σ_{Q_S ⊆ R} μ(Q_S) / μ(R)`.
    pub root_packing: f64,
    /// (e) restricted to roots within the given depth below the coarsest generation, max over those roots.
    pub root_packing_by_depth: Vec<f64>,
    /// (f) points `x ∈ 2Q` with `dist(x, Γ_S) > θ ℓ(Q)`.
    pub approximation_violations: usize,
    /// (f) `max dist(x, Γ_S) / (θ ℓ(Q))`.
    pub approximation_ratio: f64,
    pub failures: Vec<String>,
}

fn approximation_ratio(lattice: &Lattice, id: CubeId, graph: &Plane, theta: f64) -> (f64, usize) {
    let mu = lattice.measure();
    let bound = theta * lattice.cube(id).ell();
    let mut worst = 0.0f64;
    let mut violations = 0;
    for p in lattice.dilated_members(id, 2.0) {
        let dist = graph.distance(mu.point(p));
        worst = worst.max(dist / bound);
        if dist > bound {
            violations += 1;
        }
    }
    (worst, violations)
}

/// Stopping-time construction from every unassigned maximal cube, followed by validation.
pub fn corona_build_and_validate(
    lattice: &Lattice,
    table: &CoefficientTable,
    params: &CoronaParams,
) -> Result<(CoronaStructure, CoronaValidation)> {
    if !(params.eta > 0.0 && params.theta > 0.0) {
        return Err(Error::InvalidArgument(
            "corona needs η > 0 and θ > 0".into(),
        ));
    }
    let mu = lattice.measure();
    let n = mu.target_dim();
    let coefficients = |id: CubeId| {
        table.get(id).ok_or_else(|| {
            Error::UndefinedCoefficient(format!("no coefficients for cube {}", id.0))
        })
    };
    let beta_limit = params.beta_limit();
    let angle_limit = params.angle_limit();
    let mut roles: Vec<Option<CubeRole>> = vec![None; lattice.len()];
    let mut trees: Vec<CoronaTree> = Vec::new();
    let mut bad = Vec::new();
    for id in lattice.ids() {
        if roles[id.0].is_some() {
            continue;
        }
        let cube = lattice.cube(id);
        let entry = coefficients(id)?;
        let graph = if cube.members.len() > n {
            fit_plane(&PointCloud::gather(mu, &cube.members), n, None).ok()
        } else {
            Some(entry.plane.clone())
        };
        let good_root = graph.as_ref().filter(|g| {
            entry.beta_inf <= beta_limit && approximation_ratio(lattice, id, g, params.theta).1 == 0
        });
        let Some(graph) = good_root.cloned() else {
            roles[id.0] = Some(CubeRole::Bad);
            bad.push(id);
            continue;
        };
        let t = trees.len();
        roles[id.0] = Some(CubeRole::Tree(t));
        let mut cubes = vec![id];
        let mut frontier = vec![id];
        while let Some(p) = frontier.pop() {
            let children = &lattice.cube(p).children;
            if children.is_empty() {
                continue;
            }
            let mut all = true;
            for &c in children {
                let e = coefficients(c)?;
                let ok = e.beta_inf <= beta_limit
                    && e.plane.angle_to(&graph) <= angle_limit
                    && approximation_ratio(lattice, c, &graph, params.theta).1 == 0;
                if !ok {
                    all = false;
                    break;
                }
            }
            if all {
                for &c in children {
                    roles[c.0] = Some(CubeRole::Tree(t));
                    cubes.push(c);
                    frontier.push(c);
                }
            }
        }
        cubes.sort_unstable();
        trees.push(CoronaTree {
            root: id,
            cubes,
            graph,
        });
    }
    let structure = CoronaStructure {
        params: *params,
        roles: roles
            .into_iter()
            .map(|r| r.expect("every cube visited"))
            .collect(),
        bad,
        trees,
    };
    let validation = validate_corona(lattice, &structure);
    Ok((structure, validation))
}

/// Checks conditions (a)–(f) on a corona structure and measures its packing constants.
pub fn validate_corona(lattice: &Lattice, s: &CoronaStructure) -> CoronaValidation {
    let mut failures = Vec::new();
    let mut membership = vec![0usize; lattice.len()];
    let mut bad_flag = vec![false; lattice.len()];
    for &b in &s.bad {
        membership[b.0] += 1;
        bad_flag[b.0] = true;
    }
    let mut tree_of = vec![usize::MAX; lattice.len()];
    let mut trees_partition = true;
    for (t, tree) in s.trees.iter().enumerate() {
        for &q in &tree.cubes {
            membership[q.0] += 1;
            if tree_of[q.0] != usize::MAX {
                trees_partition = false;
            }
            tree_of[q.0] = t;
        }
    }
    let partition = membership.iter().all(|&m| m == 1);
    if !partition {
        failures.push("(a) cubes are not partitioned into bad and good cubes".into());
    }
    if !trees_partition {
        failures.push("(c) a good cube lies in several trees".into());
    }

    let mut coherent = true;
    for (t, tree) in s.trees.iter().enumerate() {
        let maximal: Vec<CubeId> = tree
            .cubes
            .iter()
            .copied()
            .filter(|&q| lattice.cube(q).parent.map_or(true, |p| tree_of[p.0] != t))
            .collect();
        if maximal != vec![tree.root] {
            coherent = false;
            failures.push(format!("(d) tree {t} has maximal cubes {maximal:?}"));
        }
        for &q in &tree.cubes {
            let children = &lattice.cube(q).children;
            let inside = children.iter().filter(|c| tree_of[c.0] == t).count();
            if inside != 0 && inside != children.len() {
                coherent = false;
                failures.push(format!(
                    "(d) tree {t} keeps only some children of cube {}",
                    q.0
                ));
            }
        }
    }

    let mut approximation_violations = 0;
    let mut approximation_ratio_max = 0.0f64;
    for tree in &s.trees {
        for &q in &tree.cubes {
            let (ratio, violations) = approximation_ratio(lattice, q, &tree.graph, s.params.theta);
            approximation_ratio_max = approximation_ratio_max.max(ratio);
            approximation_violations += violations;
        }
    }
    if approximation_violations > 0 {
        failures.push(format!(
            "(f) {approximation_violations} points violate dist(x, Γ_S) <= θ ℓ(Q)"
        ));
    }

    let is_root: Vec<bool> = {
        let mut v = vec![false; lattice.len()];
        for tree in &s.trees {
            v[tree.root.0] = true;
        }
        v
    };
    let packing = |flags: &[bool], root: CubeId, max_generation: i32| -> f64 {
        let total = compensated_sum(
            lattice
                .descendants(root)
                .into_iter()
                .filter(|q| flags[q.0] && lattice.cube(*q).generation <= max_generation)
                .map(|q| lattice.cube(q).mass),
        );
        total / lattice.cube(root).mass
    };
    let j_max = lattice.j_max();
    let bad_packing = lattice
        .ids()
        .map(|r| packing(&bad_flag, r, j_max))
        .fold(0.0, f64::max);
    let root_packing = lattice
        .ids()
        .map(|r| packing(&is_root, r, j_max))
        .fold(0.0, f64::max);
    let mut by_depth: BTreeMap<i32, f64> = BTreeMap::new();
    for depth in 0..=(j_max - lattice.j_min()) {
        let value = lattice
            .generation(lattice.j_min())
            .iter()
            .map(|&r| packing(&is_root, r, lattice.j_min() + depth))
            .fold(0.0, f64::max);
        by_depth.insert(depth, value);
    }
    CoronaValidation {
        partition,
        bad_packing,
        trees_partition,
        coherent,
        root_packing,
        root_packing_by_depth: by_depth.into_values().collect(),
        approximation_violations,
        approximation_ratio: approximation_ratio_max,
        failures,
    }
}
