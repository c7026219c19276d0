//! Rectifiability detector built from bad cubes, high special truncations and the Tree/Top recursion.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{beta, BetaOrder};
use crate::kernels::{KernelSpec, TruncationProfile};
use crate::lattice::{finest_admissible_generation, CubeId, Lattice, LatticeKind, ShiftSpec};
use crate::measure::DiscreteMeasure;
use crate::numeric::compensated_sum;
use crate::operators::{family_row, sm_norm_field, GridSpec, ScaleGrid};
use crate::variation::{rho_variation, Values};

/// `|S_k μ(x)|` at every support point for a contiguous range of `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmField {
    pub k_lo: i32,
    pub k_hi: i32,
    /// Indexed `[k - k_lo][point]`.
    pub values: Vec<Vec<f64>>,
}

impl SmField {
    pub fn compute(mu: &DiscreteMeasure, k_lo: i32, k_hi: i32) -> Result<Self> {
        if k_hi < k_lo {
            return Err(Error::InvalidArgument(
                "empty range of special truncations".into(),
            ));
        }
        let ks: Vec<i32> = (k_lo..=k_hi).collect();
        Ok(Self {
            k_lo,
            k_hi,
            values: sm_norm_field(mu, &ks)?,
        })
    }

    pub fn get(&self, k: i32) -> Option<&[f64]> {
        (self.k_lo..=self.k_hi)
            .contains(&k)
            .then(|| self.values[(k - self.k_lo) as usize].as_slice())
    }

    /// `min_{x ∈ members} |S_k μ(x)|`.
    pub fn min_over(&self, k: i32, members: &[usize]) -> Option<f64> {
        let field = self.get(k)?;
        Some(
            members
                .iter()
                .map(|&p| field[p])
                .fold(f64::INFINITY, f64::min),
        )
    }
}

/// Membership flags indexed by cube id.
#[derive(Debug, Clone, PartialEq)]
pub struct BadSets {
    /// `β_1 > ε_0`.
    pub b: Vec<bool>,
    /// `Q ∈ D_{k+m_0}` with `|S_k μ| ≥ δ_0` on all of `Q`.
    pub b_tilde: Vec<bool>,
}

/// Flags the bad cubes `B` from β_1 values and the high-truncation cubes `B̃` from the `S_k` field.
pub fn build_bad_sets(
    lattice: &Lattice,
    beta1: &[f64],
    sm: &SmField,
    epsilon0: f64,
    delta0: f64,
    m0: i32,
) -> BadSets {
    let b = beta1.iter().map(|&v| v > epsilon0).collect();
    let b_tilde = lattice
        .cubes()
        .iter()
        .map(|cube| {
            sm.min_over(cube.generation - m0, &cube.members)
                .is_some_and(|v| v >= delta0)
        })
        .collect();
    BadSets { b, b_tilde }
}

/// One stopping tree `Tree(P)` of the recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingTree {
    pub root: CubeId,
    /// Recursion level: 0 for the outer root, `m + 1` for roots in `Top_m`.
    pub level: usize,
    pub cubes: Vec<CubeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeTop {
    pub root: CubeId,
    pub threshold: f64,
    pub trees: Vec<StoppingTree>,
    /// `top[m]` lists `Top_m(R)`.
    pub top: Vec<Vec<CubeId>>,
    /// `F^R(x)` for each member of `R`, as `(point, count)`.
    pub counts: Vec<(usize, u32)>,
    /// `Σ_{Q ∈ B̃, Q ⊆ R} μ(Q)`.
    pub b_tilde_mass: f64,
}

/// Single top-down pass accumulating the ancestor count `F_P^R`, restarting at every stopping cube.
pub fn tree_top(
    lattice: &Lattice,
    b_tilde: &[bool],
    root: CubeId,
    threshold: f64,
) -> Result<TreeTop> {
    if !(threshold > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tree threshold M = {threshold} must exceed 1"
        )));
    }
    let mut trees: Vec<StoppingTree> = Vec::new();
    let mut top: Vec<Vec<CubeId>> = Vec::new();
    let mut b_tilde_mass = 0.0;
    let mut point_count: BTreeMap<usize, u32> = BTreeMap::new();
    // Stack entries: cube, index of its current tree (if any), count since that tree's root, total count.
    let mut stack: Vec<(CubeId, Option<usize>, u32, u32)> = vec![(root, None, 0, 0)];
    let mut tilde_total = 0usize;
    while let Some((id, tree, count, total)) = stack.pop() {
        let cube = lattice.cube(id);
        let (mut tree, mut count, mut total) = (tree, count, total);
        if b_tilde[id.0] {
            tilde_total += 1;
            b_tilde_mass += cube.mass;
            total += 1;
            match tree {
                Some(t) if (count + 1) as f64 <= threshold => {
                    count += 1;
                    trees[t].cubes.push(id);
                }
                _ => {
                    let level = tree.map_or(0, |t| trees[t].level + 1);
                    if level > 0 {
                        if top.len() < level {
                            top.resize(level, Vec::new());
                        }
                        top[level - 1].push(id);
                    }
                    trees.push(StoppingTree {
                        root: id,
                        level,
                        cubes: vec![id],
                    });
                    tree = Some(trees.len() - 1);
                    count = 1;
                }
            }
        }
        if cube.children.is_empty() {
            for &p in &cube.members {
                point_count.insert(p, total);
            }
        }
        for &child in cube.children.iter().rev() {
            stack.push((child, tree, count, total));
        }
    }
    for &p in &lattice.cube(root).members {
        point_count.entry(p).or_insert(0);
    }
    // Partition identity: every B̃ cube below R lies in exactly one tree.
    let mut seen = vec![false; lattice.len()];
    for tree in &trees {
        for &q in &tree.cubes {
            if seen[q.0] || !b_tilde[q.0] || !lattice.is_descendant(q, root) {
                return Err(Error::Construction(
                    "Tree/Top partition identity violated".into(),
                ));
            }
            seen[q.0] = true;
        }
    }
    if seen.iter().filter(|&&s| s).count() != tilde_total {
        return Err(Error::Construction(
            "Tree/Top partition does not cover the B̃ cubes".into(),
        ));
    }
    Ok(TreeTop {
        root,
        threshold,
        trees,
        top,
        counts: point_count.into_iter().collect(),
        b_tilde_mass,
    })
}

/// Best subcube with high special truncation found by [`high_sm_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighSm {
    pub k: i32,
    pub cube: CubeId,
    /// `min_{x ∈ P} |S_{i+k} μ(x)|`.
    pub delta: f64,
}

/// Searches `|k| ≤ k_0` and cubes `P ⊆ 4Q` of generation `i + k + m_0` maximizing `min_P |S_{i+k} μ|`.
/// Values of `k` whose generation or truncation index falls outside the lattice or field are skipped.
pub fn high_sm_search(
    lattice: &Lattice,
    sm: &SmField,
    id: CubeId,
    delta_floor: f64,
    k0: i32,
    m0: i32,
) -> Result<Option<HighSm>> {
    let cube = lattice.cube(id);
    let i = cube.generation;
    let mut region = vec![false; lattice.measure().len()];
    for p in lattice.dilated_members(id, 4.0) {
        region[p] = true;
    }
    let mut best: Option<HighSm> = None;
    let mut in_range = false;
    for k in -k0..=k0 {
        let generation = i + k + m0;
        if generation < lattice.j_min() || generation > lattice.j_max() || sm.get(i + k).is_none() {
            continue;
        }
        in_range = true;
        for &p in lattice.generation(generation) {
            let members = &lattice.cube(p).members;
            if !members.iter().all(|&x| region[x]) {
                continue;
            }
            let delta = sm.min_over(i + k, members).expect("k checked");
            if best.map_or(true, |b| delta > b.delta) {
                best = Some(HighSm { k, cube: p, delta });
            }
        }
    }
    if !in_range {
        return Err(Error::Range(format!(
            "no generation i + k + m0 with |k| <= {k0} lies in the lattice for i = {i}"
        )));
    }
    Ok(best.filter(|b| b.delta >= delta_floor))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub epsilon0: f64,
    pub delta0: f64,
    pub m0: i32,
    pub k0: i32,
    /// Tree threshold `M`, also the dilation of `χ_{MR}`.
    pub tree_threshold: f64,
    pub rho: f64,
    /// Coarsest generation; defaults to the generation whose side first exceeds the diameter.
    pub j_min: Option<i32>,
    /// Finest generation; capped at the finest admissible generation.
    pub j_max: Option<i32>,
    /// Minimal per-generation increment of the B̃ packing read as growth.
    pub growth_increment: f64,
    /// Maximal per-generation growth factor read as stable.
    pub stable_factor: f64,
    /// Packing values at or below this are read as stable regardless of growth.
    pub noise_floor: f64,
    /// Number of trailing generations inspected by the verdict.
    pub window: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            epsilon0: 0.05,
            delta0: 0.02,
            m0: 2,
            k0: 4,
            tree_threshold: 16.0,
            rho: 3.0,
            j_min: None,
            j_max: None,
            growth_increment: 0.25,
            stable_factor: 1.25,
            noise_floor: 1e-3,
            window: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "rectifiable-like")]
    RectifiableLike,
    #[serde(rename = "non-rectifiable-like")]
    NonRectifiableLike,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

/// Statistics of one root, indexed by depth below the root generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootStatistics {
    pub key: Vec<i64>,
    pub generation: i32,
    pub mass: f64,
    /// `∫_R (F^R)^{2/ρ} dμ / μ(R)` with `F^R` counting generations down to the depth.
    pub f_integral: Vec<f64>,
    /// `Σ_{Q ∈ B̃, Q ⊆ R} μ(Q) / μ(R)`.
    pub b_tilde_packing: Vec<f64>,
    /// `Σ_{Q ∈ B, Q ⊆ R} μ(Q) / μ(R)`.
    pub b_packing: Vec<f64>,
    /// `min_{x ∈ R} δ_0^{-ρ} (V_ρ T_φ χ_{MR}(x))^ρ − F^R(x)`.
    pub domination_margin: f64,
    pub domination_violations: usize,
    pub trees: usize,
    pub top_levels: usize,
}

/// Per-cube row of the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeDiagnostic {
    pub generation: i32,
    pub key: Vec<i64>,
    pub mass: f64,
    pub beta1: f64,
    pub min_sm: Option<f64>,
    pub in_b: bool,
    pub in_b_tilde: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub label: String,
    pub config_hash: Option<String>,
    pub config: DetectorConfig,
    pub generations: [i32; 2],
    pub roots: Vec<RootStatistics>,
    /// Max over roots, per depth.
    pub f_integral: Vec<f64>,
    pub b_tilde_packing: Vec<f64>,
    pub b_packing: Vec<f64>,
    pub domination_holds: bool,
    pub verdict: Verdict,
    pub reason: String,
    #[serde(skip)]
    pub cubes: Vec<CubeDiagnostic>,
}

/// Verdict from a cumulative packing series.
pub fn classify(series: &[f64], config: &DetectorConfig) -> (Verdict, String) {
    let window = config.window.max(1);
    if series.len() < window + 1 {
        return (
            Verdict::Inconclusive,
            format!(
                "{} generations resolved, {} needed",
                series.len(),
                window + 1
            ),
        );
    }
    let tail = &series[series.len() - window - 1..];
    let increments: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    if increments.iter().all(|&v| v >= config.growth_increment) {
        return (
            Verdict::NonRectifiableLike,
            format!(
                "B̃ packing grows by at least {} in each of the last {window} generations",
                config.growth_increment
            ),
        );
    }
    let last = *series.last().expect("nonempty");
    if last <= config.noise_floor {
        return (
            Verdict::RectifiableLike,
            format!("B̃ packing stays below {}", config.noise_floor),
        );
    }
    let stable = tail.windows(2).all(|w| {
        if w[0] > 0.0 {
            w[1] / w[0] <= config.stable_factor
        } else {
            w[1] <= config.noise_floor
        }
    });
    if stable {
        return (
            Verdict::RectifiableLike,
            format!(
                "B̃ packing growth factor at most {} over the last {window} generations",
                config.stable_factor
            ),
        );
    }
    (
        Verdict::Inconclusive,
        "B̃ packing neither stable nor steadily growing".into(),
    )
}

/// Default coarsest generation: the largest side not exceeding twice the diameter.
fn default_j_min(mu: &DiscreteMeasure) -> i32 {
    let diam = mu.diameter();
    if diam > 0.0 {
        (-diam.log2()).floor() as i32
    } else {
        0
    }
}

/// Runs the detector on an ambient dyadic lattice over the resolved generations.
pub fn wgl_detect(mu: Arc<DiscreteMeasure>, config: &DetectorConfig) -> Result<DiagnosticReport> {
    if !(config.rho >= 1.0) || !(config.delta0 > 0.0) || config.m0 < 0 || config.k0 < 0 {
        return Err(Error::InvalidArgument(
            "detector needs ρ >= 1, δ_0 > 0, m_0 >= 0, k_0 >= 0".into(),
        ));
    }
    let finest = finest_admissible_generation(&mu);
    let j_min = config.j_min.unwrap_or_else(|| default_j_min(&mu));
    let j_max = config.j_max.unwrap_or(finest).min(finest);
    let label = mu.label().to_string();
    if j_max < j_min {
        return Ok(DiagnosticReport {
            label,
            config_hash: None,
            config: *config,
            generations: [j_min, j_max],
            roots: Vec::new(),
            f_integral: Vec::new(),
            b_tilde_packing: Vec::new(),
            b_packing: Vec::new(),
            domination_holds: true,
            verdict: Verdict::Inconclusive,
            reason: "no resolved generations".into(),
            cubes: Vec::new(),
        });
    }
    let lattice = Lattice::build(
        mu.clone(),
        j_min,
        j_max,
        ShiftSpec::default(),
        LatticeKind::Ambient,
    )?;
    let ids: Vec<CubeId> = lattice.ids().collect();
    let beta1: Vec<f64> = ids
        .par_iter()
        .map(|&id| beta(&lattice, id, BetaOrder::One, 2.0).map(|(v, _)| v))
        .collect::<Result<_>>()?;
    let sm = SmField::compute(&mu, j_min - config.m0, j_max - config.m0)?;
    let sets = build_bad_sets(
        &lattice,
        &beta1,
        &sm,
        config.epsilon0,
        config.delta0,
        config.m0,
    );

    let kernel = KernelSpec::riesz(mu.target_dim(), mu.ambient_dim());
    let grid = GridSpec::Shared(ScaleGrid::dyadic_range(
        j_min - config.m0,
        j_max - config.m0 + 1,
        1,
    )?);
    let max_depth = (j_max - j_min) as usize;
    let mut roots = Vec::new();
    for &root in lattice.generation(j_min) {
        let cube = lattice.cube(root);
        let tt = tree_top(&lattice, &sets.b_tilde, root, config.tree_threshold)?;
        let mut b_tilde_by_depth = vec![0.0; max_depth + 1];
        let mut b_by_depth = vec![0.0; max_depth + 1];
        let mut depth_counts: Vec<Vec<u32>> = vec![vec![0; mu.len()]; max_depth + 1];
        for q in lattice.descendants(root) {
            let c = lattice.cube(q);
            let depth = (c.generation - j_min) as usize;
            if sets.b_tilde[q.0] {
                b_tilde_by_depth[depth] += c.mass;
                for &p in &c.members {
                    depth_counts[depth][p] += 1;
                }
            }
            if sets.b[q.0] {
                b_by_depth[depth] += c.mass;
            }
        }
        let cumulative = |v: &[f64]| -> Vec<f64> {
            let mut acc = 0.0;
            v.iter()
                .map(|x| {
                    acc += x / cube.mass;
                    acc
                })
                .collect()
        };
        let mut running = vec![0u32; mu.len()];
        let mut f_integral = Vec::with_capacity(max_depth + 1);
        for layer in &depth_counts {
            for &p in &cube.members {
                running[p] += layer[p];
            }
            f_integral.push(
                compensated_sum(
                    cube.members
                        .iter()
                        .map(|&p| mu.weight(p) * (running[p] as f64).powf(2.0 / config.rho)),
                ) / cube.mass,
            );
        }

        // Domination of F^R by the variation of the smooth family applied to χ_{MR}.
        let mut chi = vec![0.0; mu.len()];
        for p in lattice.dilated_members(root, config.tree_threshold) {
            chi[p] = 1.0;
        }
        let counts: BTreeMap<usize, u32> = tt.counts.iter().copied().collect();
        let scale = config.delta0.powf(-config.rho);
        let margins: Vec<(f64, bool)> = cube
            .members
            .par_iter()
            .map(|&p| -> Result<(f64, bool)> {
                let row = family_row(
                    &mu,
                    Some(&chi),
                    &kernel,
                    TruncationProfile::Smooth,
                    &grid,
                    p,
                )?;
                let (v, _) = rho_variation(Values::new(&row.values, kernel.arity())?, config.rho)?;
                let f = counts.get(&p).copied().unwrap_or(0) as f64;
                let bound = scale * v.powf(config.rho);
                Ok((bound - f, bound < f * (1.0 - 1e-9)))
            })
            .collect::<Result<_>>()?;
        roots.push(RootStatistics {
            key: cube.key.clone(),
            generation: cube.generation,
            mass: cube.mass,
            f_integral,
            b_tilde_packing: cumulative(&b_tilde_by_depth),
            b_packing: cumulative(&b_by_depth),
            domination_margin: margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min),
            domination_violations: margins.iter().filter(|m| m.1).count(),
            trees: tt.trees.len(),
            top_levels: tt.top.len(),
        });
    }
    let series_max = |pick: fn(&RootStatistics) -> &Vec<f64>| -> Vec<f64> {
        (0..=max_depth)
            .map(|k| roots.iter().map(|r| pick(r)[k]).fold(0.0, f64::max))
            .collect()
    };
    let f_integral = series_max(|r| &r.f_integral);
    let b_tilde_packing = series_max(|r| &r.b_tilde_packing);
    let b_packing = series_max(|r| &r.b_packing);
    let (verdict, reason) = classify(&b_tilde_packing, config);
    let cubes = lattice
        .cubes()
        .iter()
        .enumerate()
        .map(|(i, c)| CubeDiagnostic {
            generation: c.generation,
            key: c.key.clone(),
            mass: c.mass,
            beta1: beta1[i],
            min_sm: sm.min_over(c.generation - config.m0, &c.members),
            in_b: sets.b[i],
            in_b_tilde: sets.b_tilde[i],
        })
        .collect();
    Ok(DiagnosticReport {
        label,
        config_hash: None,
        config: *config,
        generations: [j_min, j_max],
        domination_holds: roots.iter().all(|r| r.domination_violations == 0),
        roots,
        f_integral,
        b_tilde_packing,
        b_packing,
        verdict,
        reason,
        cubes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::generate_segment;
    use crate::numeric::pow2;

    fn chain_lattice() -> Lattice {
        // Points at 2^{-k} give one nested chain of cubes containing the origin.
        let coords: Vec<f64> = (0..10)
            .flat_map(|k| [if k == 0 { 0.0 } else { pow2(-k) * 0.999 }, 0.0])
            .collect();
        let mu = DiscreteMeasure::new(1, 2, coords, vec![0.1; 10], "chain").unwrap();
        Lattice::build(
            Arc::new(mu),
            0,
            8,
            ShiftSpec::default(),
            LatticeKind::Ambient,
        )
        .unwrap()
    }

    fn origin_chain(lattice: &Lattice) -> Vec<bool> {
        let mut flags = vec![false; lattice.len()];
        for j in lattice.j_min()..=lattice.j_max() {
            flags[lattice.cube_of(0, j).unwrap().0] = true;
        }
        flags
    }

    #[test]
    fn empty_b_tilde() {
        let lattice = chain_lattice();
        let root = lattice.generation(0)[0];
        let tt = tree_top(&lattice, &vec![false; lattice.len()], root, 2.0).unwrap();
        assert!(tt.trees.is_empty() && tt.top.is_empty());
        assert!(tt.counts.iter().all(|&(_, c)| c == 0));
        assert!(tree_top(&lattice, &vec![false; lattice.len()], root, 1.0).is_err());
    }

    #[test]
    fn chain_positions() {
        let lattice = chain_lattice();
        let root = lattice.generation(0)[0];
        let flags = origin_chain(&lattice);
        let all = tree_top(&lattice, &flags, root, 20.0).unwrap();
        assert_eq!(all.trees.len(), 1);
        assert!(all.top.is_empty());
        let tt = tree_top(&lattice, &flags, root, 2.0).unwrap();
        let tops: Vec<i32> = tt
            .top
            .iter()
            .map(|level| lattice.cube(level[0]).generation)
            .collect();
        // Chain positions 3, 5, 7, 9 (generations 2, 4, 6, 8).
        assert_eq!(tops, vec![2, 4, 6, 8]);
        assert_eq!(tt.counts.iter().find(|&&(p, _)| p == 0).unwrap().1, 9);
    }

    #[test]
    fn classify_series() {
        let c = DetectorConfig::default();
        assert_eq!(
            classify(&[0.0, 0.3, 0.6, 0.9, 1.2], &c).0,
            Verdict::NonRectifiableLike
        );
        assert_eq!(
            classify(&[0.0, 0.0, 0.0, 0.0], &c).0,
            Verdict::RectifiableLike
        );
        assert_eq!(
            classify(&[0.5, 0.6, 0.62, 0.63], &c).0,
            Verdict::RectifiableLike
        );
        assert_eq!(classify(&[0.5, 0.6], &c).0, Verdict::Inconclusive);
    }

    #[test]
    fn high_delta_floor_is_none() {
        let mu = Arc::new(generate_segment(2, 64).unwrap());
        let lattice =
            Lattice::build(mu.clone(), 0, 5, ShiftSpec::default(), LatticeKind::Ambient).unwrap();
        let sm = SmField::compute(&mu, -2, 3).unwrap();
        let q = lattice.generation(2)[1];
        let any = high_sm_search(&lattice, &sm, q, 0.0, 4, 2).unwrap();
        assert!(any.is_some());
        assert!(high_sm_search(&lattice, &sm, q, 1e9, 4, 2)
            .unwrap()
            .is_none());
    }
}
