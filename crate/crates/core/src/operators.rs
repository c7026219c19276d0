//! Truncated transforms, special truncations and whole scale-grid families.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{phi_r, KernelSpec, ProfileEvaluator, TruncationProfile};
use crate::measure::DiscreteMeasure;
use crate::numeric::{pow2, CompensatedSum};
use crate::variation::{short_long_variation, Values};

/// How a grid was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridPolicy {
    Dyadic { per_octave: u32 },
    Breakpoints,
    Explicit,
}

/// Strictly decreasing positive scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    pub scales: Vec<f64>,
    pub policy: GridPolicy,
}

impl ScaleGrid {
    pub fn explicit(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::InvalidArgument("scale grid is empty".into()));
        }
        if scales.iter().any(|s| !(*s > 0.0) || !s.is_finite())
            || scales.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(Error::InvalidArgument(
                "scales must be positive and strictly decreasing".into(),
            ));
        }
        Ok(Self {
            scales,
            policy: GridPolicy::Explicit,
        })
    }

    /// `2^{a - k/R}` from the first power of two at or above `eps_max` down to `eps_min`.
    /// Exact powers of two appear exactly.
    pub fn dyadic(eps_max: f64, eps_min: f64, per_octave: u32) -> Result<Self> {
        if !(eps_max > 0.0 && eps_min > 0.0 && eps_min <= eps_max) || per_octave == 0 {
            return Err(Error::InvalidArgument(
                "dyadic grid needs 0 < eps_min <= eps_max and R >= 1".into(),
            ));
        }
        let top = eps_max.log2().ceil() as i64;
        let r = per_octave as i64;
        let mut scales = Vec::new();
        let mut k = 0i64;
        loop {
            let numerator = top * r - k;
            let scale = if numerator % r == 0 {
                pow2((numerator / r) as i32)
            } else {
                2f64.powf(numerator as f64 / r as f64)
            };
            if scale < eps_min * (1.0 - 1e-12) {
                break;
            }
            scales.push(scale);
            k += 1;
        }
        Ok(Self {
            scales,
            policy: GridPolicy::Dyadic { per_octave },
        })
    }

    /// Dyadic grid `2^{-m}` for `m` in `[m_lo, m_hi]` with `R` points per octave (ending at `2^{-m_hi}`).
    pub fn dyadic_range(m_lo: i32, m_hi: i32, per_octave: u32) -> Result<Self> {
        if m_hi < m_lo {
            return Err(Error::InvalidArgument("empty dyadic range".into()));
        }
        Self::dyadic(pow2(-m_lo), pow2(-m_hi), per_octave)
    }

    /// Outer scale `2·diam` followed by every distinct pairwise distance, decreasing.
    pub fn breakpoints(mu: &DiscreteMeasure) -> Result<Self> {
        let mut distances = Vec::with_capacity(mu.len() * mu.len().saturating_sub(1) / 2);
        for i in 0..mu.len() {
            for k in (i + 1)..mu.len() {
                let r = crate::numeric::distance(mu.point(i), mu.point(k));
                if r > 0.0 {
                    distances.push(r);
                }
            }
        }
        distances.sort_unstable_by(|a, b| b.total_cmp(a));
        distances.dedup();
        let mut scales = vec![outer_scale(mu)];
        scales.extend(distances);
        Ok(Self {
            scales,
            policy: GridPolicy::Breakpoints,
        })
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

/// Scale above every pairwise distance, where every truncated sum vanishes.
pub fn outer_scale(mu: &DiscreteMeasure) -> f64 {
    let diam = mu.diameter();
    if diam > 0.0 {
        2.0 * diam
    } else {
        1.0
    }
}

/// Grid request for a family evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// One grid shared by all points.
    Shared(ScaleGrid),
    /// Per-point breakpoints (own distances plus the outer scale); sharp profile only.
    PointBreakpoints,
}

/// One support point's values along its scales.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRow {
    pub scales: Vec<f64>,
    /// `scales.len() × arity` values.
    pub values: Vec<f64>,
}

impl FamilyRow {
    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

/// Values `F_ε(x)` for every support point and grid scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyEvaluation {
    pub kernel: KernelSpec,
    pub profile: TruncationProfile,
    pub policy: GridPolicy,
    pub arity: usize,
    pub rows: Vec<FamilyRow>,
}

fn check_f(mu: &DiscreteMeasure, f: Option<&[f64]>) -> Result<()> {
    if let Some(f) = f {
        if f.len() != mu.len() {
            return Err(Error::InvalidArgument(format!(
                "f has {} values for {} points",
                f.len(),
                mu.len()
            )));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("f has non-finite values".into()));
        }
    }
    Ok(())
}

#[inline]
fn f_at(f: Option<&[f64]>, i: usize) -> f64 {
    f.map_or(1.0, |f| f[i])
}

/// `Σ_y profile(ε, x-y) K(x-y) f(y) w_y` over `y ≠ x`, summed by ascending index.
pub fn truncated_transform(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    kernel: &KernelSpec,
    x: &[f64],
    eps: f64,
    profile: TruncationProfile,
) -> Result<Vec<f64>> {
    check_f(mu, f)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale must be positive, got {eps}"
        )));
    }
    let evaluator = ProfileEvaluator::new(profile, mu.frame(), mu.target_dim())?;
    Ok(transform_with(mu, f, kernel, x, eps, &evaluator))
}

fn transform_with(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    kernel: &KernelSpec,
    x: &[f64],
    eps: f64,
    evaluator: &ProfileEvaluator<'_>,
) -> Vec<f64> {
    let d = mu.ambient_dim();
    let arity = kernel.arity();
    let mut acc = vec![CompensatedSum::new(); arity];
    let mut diff = vec![0.0; d];
    let mut k = vec![0.0; arity];
    for i in 0..mu.len() {
        let p = mu.point(i);
        let mut r2 = 0.0;
        for a in 0..d {
            diff[a] = x[a] - p[a];
            r2 += diff[a] * diff[a];
        }
        if r2 == 0.0 {
            continue;
        }
        let weight =
            evaluator.weight_from_radius_squared(evaluator.profile_radius_squared(&diff, r2), eps);
        if weight == 0.0 {
            continue;
        }
        kernel.eval_nonzero(&diff, r2, &mut k);
        let scale = weight * f_at(f, i) * mu.weight(i);
        for a in 0..arity {
            acc[a].add(k[a] * scale);
        }
    }
    acc.iter().map(|s| s.value()).collect()
}

/// `S_m μ(x) = T_{φ_{2^{-m-1}}} - T_{φ_{2^{-m}}}` for the Riesz kernel of the measure, applied to `f μ`.
pub fn special_truncation_sm(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    x: &[f64],
    m: i32,
) -> Result<Vec<f64>> {
    let kernel = KernelSpec::riesz(mu.target_dim(), mu.ambient_dim());
    let inner = truncated_transform(mu, f, &kernel, x, pow2(-m - 1), TruncationProfile::Smooth)?;
    let outer = truncated_transform(mu, f, &kernel, x, pow2(-m), TruncationProfile::Smooth)?;
    Ok(inner.iter().zip(&outer).map(|(a, b)| a - b).collect())
}

/// `|S_m μ(x)|` at every support point, for each `m` in `m_values`; indexed `[m][point]`.
pub fn sm_norm_field(mu: &DiscreteMeasure, m_values: &[i32]) -> Result<Vec<Vec<f64>>> {
    let kernel = KernelSpec::riesz(mu.target_dim(), mu.ambient_dim());
    let evaluator = ProfileEvaluator::new(TruncationProfile::Smooth, None, mu.target_dim())?;
    Ok(m_values
        .iter()
        .map(|&m| {
            (0..mu.len())
                .into_par_iter()
                .map(|i| {
                    let x = mu.point(i);
                    let inner = transform_with(mu, None, &kernel, x, pow2(-m - 1), &evaluator);
                    let outer = transform_with(mu, None, &kernel, x, pow2(-m), &evaluator);
                    inner
                        .iter()
                        .zip(&outer)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect())
}

/// `max_ε |F_ε(x)|` along a row.
pub fn maximal_transform(row: &FamilyRow, arity: usize) -> f64 {
    row.values
        .chunks(arity)
        .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

struct Neighbor {
    /// Squared radius the profile sees.
    s2: f64,
    /// Kernel value times `f(y) w_y`, `arity` entries.
    contribution: Vec<f64>,
}

fn neighbors(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    kernel: &KernelSpec,
    evaluator: &ProfileEvaluator<'_>,
    i: usize,
) -> Vec<Neighbor> {
    let d = mu.ambient_dim();
    let arity = kernel.arity();
    let x = mu.point(i);
    let mut diff = vec![0.0; d];
    let mut out = Vec::with_capacity(mu.len());
    for k in 0..mu.len() {
        let p = mu.point(k);
        let mut r2 = 0.0;
        for a in 0..d {
            diff[a] = x[a] - p[a];
            r2 += diff[a] * diff[a];
        }
        if r2 == 0.0 {
            continue;
        }
        let mut value = vec![0.0; arity];
        kernel.eval_nonzero(&diff, r2, &mut value);
        let scale = f_at(f, k) * mu.weight(k);
        for v in &mut value {
            *v *= scale;
        }
        out.push(Neighbor {
            s2: evaluator.profile_radius_squared(&diff, r2),
            contribution: value,
        });
    }
    // Farthest first; the sort is stable so equal radii keep index order.
    out.sort_by(|a, b| b.s2.total_cmp(&a.s2));
    out
}

/// One row of a family evaluation.
pub fn family_row(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    kernel: &KernelSpec,
    profile: TruncationProfile,
    grid: &GridSpec,
    i: usize,
) -> Result<FamilyRow> {
    check_f(mu, f)?;
    let evaluator = ProfileEvaluator::new(profile, mu.frame(), mu.target_dim())?;
    row_with(mu, f, kernel, &evaluator, grid, i)
}

fn row_with(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    kernel: &KernelSpec,
    evaluator: &ProfileEvaluator<'_>,
    grid: &GridSpec,
    i: usize,
) -> Result<FamilyRow> {
    let arity = kernel.arity();
    let near = neighbors(mu, f, kernel, evaluator, i);
    match (grid, evaluator.kind()) {
        (GridSpec::PointBreakpoints, TruncationProfile::Sharp) => {
            let mut scales = vec![outer_scale(mu)];
            let mut values = vec![0.0; arity];
            let mut acc = vec![CompensatedSum::new(); arity];
            let mut k = 0;
            while k < near.len() {
                let radius = near[k].s2.sqrt();
                while k < near.len() && near[k].s2.sqrt() == radius {
                    for a in 0..arity {
                        acc[a].add(near[k].contribution[a]);
                    }
                    k += 1;
                }
                scales.push(radius);
                values.extend(acc.iter().map(|s| s.value()));
            }
            Ok(FamilyRow { scales, values })
        }
        (GridSpec::PointBreakpoints, _) => Err(Error::InvalidArgument(
            "per-point breakpoint grids apply to the sharp profile only".into(),
        )),
        (GridSpec::Shared(grid), TruncationProfile::Sharp) => {
            let mut values = Vec::with_capacity(grid.len() * arity);
            let mut acc = vec![CompensatedSum::new(); arity];
            let mut k = 0;
            for &eps in &grid.scales {
                while k < near.len() && near[k].s2.sqrt() >= eps {
                    for a in 0..arity {
                        acc[a].add(near[k].contribution[a]);
                    }
                    k += 1;
                }
                values.extend(acc.iter().map(|s| s.value()));
            }
            Ok(FamilyRow {
                scales: grid.scales.clone(),
                values,
            })
        }
        (GridSpec::Shared(grid), _) => {
            // prefix[k] = Σ of the first k (farthest) contributions.
            let mut prefix = Vec::with_capacity((near.len() + 1) * arity);
            let mut acc = vec![CompensatedSum::new(); arity];
            prefix.extend(acc.iter().map(|s| s.value()));
            for nb in &near {
                for a in 0..arity {
                    acc[a].add(nb.contribution[a]);
                }
                prefix.extend(acc.iter().map(|s| s.value()));
            }
            let mut values = Vec::with_capacity(grid.len() * arity);
            let (mut far, mut inner) = (0usize, 0usize);
            for &eps in &grid.scales {
                let e2 = eps * eps;
                while far < near.len() && near[far].s2 / e2 >= 4.0 {
                    far += 1;
                }
                inner = inner.max(far);
                while inner < near.len() && near[inner].s2 / e2 > 0.25 {
                    inner += 1;
                }
                let mut band = vec![CompensatedSum::new(); arity];
                for a in 0..arity {
                    band[a].add(prefix[far * arity + a]);
                }
                for nb in &near[far..inner] {
                    let w = phi_r(nb.s2 / e2);
                    for a in 0..arity {
                        band[a].add(w * nb.contribution[a]);
                    }
                }
                values.extend(band.iter().map(|s| s.value()));
            }
            Ok(FamilyRow {
                scales: grid.scales.clone(),
                values,
            })
        }
    }
}

/// Evaluates the family at every support point, rows in point order.
pub fn evaluate_family(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    kernel: &KernelSpec,
    profile: TruncationProfile,
    grid: &GridSpec,
) -> Result<FamilyEvaluation> {
    check_f(mu, f)?;
    if kernel.d != mu.ambient_dim() {
        return Err(Error::InvalidArgument(
            "kernel and measure dimensions differ".into(),
        ));
    }
    let evaluator = ProfileEvaluator::new(profile, mu.frame(), mu.target_dim())?;
    let rows: Result<Vec<FamilyRow>> = (0..mu.len())
        .into_par_iter()
        .map(|i| row_with(mu, f, kernel, &evaluator, grid, i))
        .collect();
    Ok(FamilyEvaluation {
        kernel: kernel.clone(),
        profile,
        policy: match grid {
            GridSpec::Shared(g) => g.policy,
            GridSpec::PointBreakpoints => GridPolicy::Breakpoints,
        },
        arity: kernel.arity(),
        rows: rows?,
    })
}

/// Per-point `(Wμ(x), Sμ(x))` for a measure carrying a graph frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WsField {
    pub w: Vec<f64>,
    pub s: Vec<f64>,
}

/// `Wμ` summed over `m ∈ [m_lo, m_hi]`; `Sμ` as the short 2-variation of the smooth family on the
/// dyadic grid over the same range with `per_octave` points per octave.
pub fn ws_functionals(
    mu: &DiscreteMeasure,
    m_lo: i32,
    m_hi: i32,
    per_octave: u32,
) -> Result<WsField> {
    if mu.frame().is_none() {
        return Err(Error::InvalidArgument(
            "W and S functionals need a graph frame".into(),
        ));
    }
    let kernel = KernelSpec::riesz(mu.target_dim(), mu.ambient_dim());
    let dyadic = ScaleGrid::dyadic_range(m_lo, m_hi, 1)?;
    let fine = GridSpec::Shared(ScaleGrid::dyadic_range(m_lo, m_hi, per_octave)?);
    let smooth = ProfileEvaluator::new(TruncationProfile::Smooth, None, mu.target_dim())?;
    let projected = ProfileEvaluator::new(
        TruncationProfile::GraphProjected,
        mu.frame(),
        mu.target_dim(),
    )?;
    let pairs: Result<Vec<(f64, f64)>> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = mu.point(i);
            let mut w2 = CompensatedSum::new();
            for &eps in &dyadic.scales {
                let a = transform_with(mu, None, &kernel, x, eps, &smooth);
                let b = transform_with(mu, None, &kernel, x, eps, &projected);
                w2.add(a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum());
            }
            let row = row_with(mu, None, &kernel, &smooth, &fine, i)?;
            let (short, _) =
                short_long_variation(Values::new(&row.values, kernel.arity())?, &row.scales, 2.0)?;
            Ok((w2.value().max(0.0).sqrt(), short))
        })
        .collect();
    let pairs = pairs?;
    Ok(WsField {
        w: pairs.iter().map(|p| p.0).collect(),
        s: pairs.iter().map(|p| p.1).collect(),
    })
}
