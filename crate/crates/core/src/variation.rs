//! ρ-variation, oscillation and the short/long split, exact over a scale grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, TruncationProfile};
use crate::lattice::Lattice;
use crate::measure::DiscreteMeasure;
use crate::numeric::compensated_sum;
use crate::operators::{family_row, FamilyEvaluation, GridSpec};

/// Sequence of scalar or vector values stored contiguously.
#[derive(Debug, Clone, Copy)]
pub struct Values<'a> {
    data: &'a [f64],
    arity: usize,
}

impl<'a> Values<'a> {
    pub fn new(data: &'a [f64], arity: usize) -> Result<Self> {
        if arity == 0 || data.len() % arity != 0 {
            return Err(Error::InvalidArgument(format!(
                "value buffer of length {} is not a multiple of arity {arity}",
                data.len()
            )));
        }
        Ok(Self { data, arity })
    }

    pub fn scalar(data: &'a [f64]) -> Self {
        Self { data, arity: 1 }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.arity
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    #[inline]
    pub fn get(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    /// `|F_i - F_j|`, Euclidean for vectors.
    #[inline]
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        gap(self.get(i), self.get(j))
    }

    pub fn slice(&self, start: usize, end: usize) -> Values<'a> {
        Values {
            data: &self.data[start * self.arity..end * self.arity],
            arity: self.arity,
        }
    }
}

/// Distance between two values: absolute difference for scalars, Euclidean norm otherwise.
#[inline]
pub fn gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        (a[0] - b[0]).abs()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cost `|ΔF|^ρ` of a single step.
#[inline]
pub fn step_cost(gap: f64, rho: f64) -> f64 {
    gap.powf(rho)
}

/// Sequences shorter than this use the plain quadratic DP.
const PRUNE_THRESHOLD: usize = 64;

fn check_rho(rho: f64) -> Result<()> {
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::Unsupported(format!(
            "ρ-variation needs finite ρ >= 1, got {rho}"
        )));
    }
    Ok(())
}

/// Longest-path DP: returns the best ρ-sum and the backpointers. `counts(j, i)` tells
/// whether the step `j → i` contributes its cost.
fn longest_path<C: Fn(usize, usize) -> bool>(
    values: Values<'_>,
    rho: f64,
    counts: C,
) -> (Vec<f64>, Vec<usize>) {
    let g = values.len();
    let mut best = vec![0.0f64; g];
    let mut parent = vec![usize::MAX; g];
    if g <= PRUNE_THRESHOLD {
        for i in 1..g {
            let mut top = f64::NEG_INFINITY;
            let mut arg = 0;
            for j in 0..i {
                let cost = if counts(j, i) {
                    step_cost(values.gap(j, i), rho)
                } else {
                    0.0
                };
                let candidate = best[j] + cost;
                if candidate > top {
                    top = candidate;
                    arg = j;
                }
            }
            best[i] = top;
            parent[i] = arg;
        }
        return (best, parent);
    }
    // Dyadic blocks [b·2^L, (b+1)·2^L) carry the radius of their values around the first one.
    let levels = usize::BITS as usize - g.leading_zeros() as usize;
    let mut radius: Vec<Vec<f64>> = (0..levels).map(|l| vec![0.0; (g >> l) + 1]).collect();
    for i in 0..g {
        if i > 0 {
            let mut top = best[i - 1]
                + if counts(i - 1, i) {
                    step_cost(values.gap(i - 1, i), rho)
                } else {
                    0.0
                };
            let mut arg = i - 1;
            let mut end = i - 1;
            while end > 0 {
                let mut level = (end.trailing_zeros() as usize).min(levels - 1);
                while (1usize << level) > end {
                    level -= 1;
                }
                loop {
                    if level == 0 {
                        let j = end - 1;
                        let cost = if counts(j, i) {
                            step_cost(values.gap(j, i), rho)
                        } else {
                            0.0
                        };
                        let candidate = best[j] + cost;
                        if candidate > top {
                            top = candidate;
                            arg = j;
                        }
                        end -= 1;
                        break;
                    }
                    let start = end - (1usize << level);
                    let reach = values.gap(start, i) + radius[level][start >> level];
                    let bound = best[end - 1] + step_cost(reach, rho);
                    if bound * (1.0 + 1e-12) < top {
                        end = start;
                        break;
                    }
                    level -= 1;
                }
            }
            best[i] = top;
            parent[i] = arg;
        }
        for (level, row) in radius.iter_mut().enumerate() {
            let block = i >> level;
            let center = block << level;
            let r = values.gap(center, i);
            if r > row[block] {
                row[block] = r;
            }
        }
    }
    (best, parent)
}

fn trace(parent: &[usize], last: usize) -> Vec<usize> {
    let mut path = vec![last];
    let mut cur = last;
    while parent[cur] != usize::MAX {
        cur = parent[cur];
        path.push(cur);
    }
    path.reverse();
    path
}

/// Exact ρ-variation over all subsequences and a witness subsequence.
pub fn rho_variation(values: Values<'_>, rho: f64) -> Result<(f64, Vec<usize>)> {
    check_rho(rho)?;
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "variation of an empty sequence".into(),
        ));
    }
    let (best, parent) = longest_path(values, rho, |_, _| true);
    let last = values.len() - 1;
    Ok((best[last].powf(1.0 / rho), trace(&parent, last)))
}

/// Re-evaluates `(Σ |F_{w_{t+1}} - F_{w_t}|^ρ)^{1/ρ}` along a witness, in order.
pub fn evaluate_witness(values: Values<'_>, rho: f64, witness: &[usize]) -> f64 {
    let mut sum = 0.0;
    for pair in witness.windows(2) {
        sum += step_cost(values.gap(pair[0], pair[1]), rho);
    }
    sum.powf(1.0 / rho)
}

/// Octave `j` with `ε ∈ [2^{-j-1}, 2^{-j})`.
pub fn octave_of(scale: f64) -> i32 {
    assert!(
        scale > 0.0 && scale.is_finite(),
        "octave of non-positive scale"
    );
    if scale >= f64::MIN_POSITIVE {
        let exponent = ((scale.to_bits() >> 52) & 0x7ff) as i32 - 1023;
        -exponent - 1
    } else {
        (-(scale.log2().floor()) as i32) - 1
    }
}

/// Oscillation along the fixed intervals `[r_{m+1}, r_m]`.
pub fn oscillation(values: Values<'_>, scales: &[f64], r_seq: &[f64]) -> Result<f64> {
    if scales.len() != values.len() {
        return Err(Error::InvalidArgument(
            "scales and values differ in length".into(),
        ));
    }
    if r_seq.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(
            "interval sequence must be strictly decreasing".into(),
        ));
    }
    let mut total = 0.0;
    for w in r_seq.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        let members: Vec<usize> = (0..scales.len())
            .filter(|&i| scales[i] <= hi && scales[i] >= lo)
            .collect();
        let spread = if values.arity() == 1 {
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &members {
                mn = mn.min(values.get(i)[0]);
                mx = mx.max(values.get(i)[0]);
            }
            if members.is_empty() {
                0.0
            } else {
                mx - mn
            }
        } else {
            let mut diam = 0.0f64;
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    diam = diam.max(values.gap(i, j));
                }
            }
            diam
        };
        total += spread * spread;
    }
    Ok(total.sqrt())
}

/// Short and long variation of a sequence tagged with scales.
pub fn short_long_variation(values: Values<'_>, scales: &[f64], rho: f64) -> Result<(f64, f64)> {
    check_rho(rho)?;
    if scales.len() != values.len() || values.is_empty() {
        return Err(Error::InvalidArgument(
            "scales and values must be non-empty and equal in length".into(),
        ));
    }
    let octaves: Vec<i32> = scales.iter().map(|&s| octave_of(s)).collect();
    let mut short_sum = 0.0;
    let mut start = 0;
    while start < octaves.len() {
        let mut end = start + 1;
        while end < octaves.len() && octaves[end] == octaves[start] {
            end += 1;
        }
        let (best, _) = longest_path(values.slice(start, end), rho, |_, _| true);
        short_sum += best[end - start - 1];
        start = end;
    }
    let (best, _) = longest_path(values, rho, |j, i| octaves[j] != octaves[i]);
    Ok((
        short_sum.powf(1.0 / rho),
        best[values.len() - 1].powf(1.0 / rho),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum VariationMode {
    Full,
    Short,
    Long,
    Oscillation,
}

impl VariationMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Short => "short",
            Self::Long => "long",
            Self::Oscillation => "oscillation",
        }
    }
}

/// Per-point variation of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationResult {
    pub values: Vec<f64>,
    pub witnesses: Vec<Option<Vec<usize>>>,
    pub rho: f64,
    pub mode: VariationMode,
    /// `(Σ_x V(x)² w_x)^{1/2}`.
    pub l2_norm: f64,
}

/// Applies the chosen variation functional row by row.
pub fn compose_variation(
    family: &FamilyEvaluation,
    weights: &[f64],
    rho: f64,
    mode: VariationMode,
    r_seq: Option<&[f64]>,
) -> Result<VariationResult> {
    use rayon::prelude::*;
    if weights.len() != family.rows.len() {
        return Err(Error::InvalidArgument(
            "weights do not match family rows".into(),
        ));
    }
    let arity = family.arity;
    let rows: Vec<Result<(f64, Option<Vec<usize>>)>> = family
        .rows
        .par_iter()
        .map(|row| {
            let values = Values::new(&row.values, arity)?;
            match mode {
                VariationMode::Full => rho_variation(values, rho).map(|(v, w)| (v, Some(w))),
                VariationMode::Short => {
                    short_long_variation(values, &row.scales, rho).map(|(s, _)| (s, None))
                }
                VariationMode::Long => {
                    short_long_variation(values, &row.scales, rho).map(|(_, l)| (l, None))
                }
                VariationMode::Oscillation => {
                    let r = r_seq.ok_or_else(|| {
                        Error::InvalidArgument("oscillation needs an interval sequence".into())
                    })?;
                    oscillation(values, &row.scales, r).map(|o| (o, None))
                }
            }
        })
        .collect();
    let mut out = Vec::with_capacity(rows.len());
    let mut witnesses = Vec::with_capacity(rows.len());
    for r in rows {
        let (v, w) = r?;
        out.push(v);
        witnesses.push(w);
    }
    let l2 = compensated_sum(out.iter().zip(weights).map(|(v, w)| v * v * w)).sqrt();
    Ok(VariationResult {
        values: out,
        witnesses,
        rho,
        mode,
        l2_norm: l2,
    })
}

/// Dyadic interval sequence `r_m = 2^{-m}` covering `[lo, hi]`.
pub fn dyadic_intervals(hi: f64, lo: f64) -> Vec<f64> {
    let top = hi.log2().ceil() as i32;
    let bottom = lo.log2().floor() as i32;
    (bottom..=top).rev().map(crate::numeric::pow2).collect()
}

/// Built-in test functions for [`norm_ratio_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Constant,
    /// Indicator of every cube of one generation.
    CubeIndicators {
        generation: i32,
    },
    /// `χ_C/μ(C) − χ_Q/μ(Q)` for the first child `C` of every cube `Q` of one generation.
    Haar {
        generation: i32,
    },
    /// Seeded independent ±1 fields.
    Rademacher {
        count: usize,
        seed: u64,
    },
}

/// Largest observed `‖(V_ρ∘T)f‖_{L²(μ)} / ‖f‖_{L²(μ)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub ratio: f64,
    pub argmax: String,
    pub ratios: Vec<(String, f64)>,
}

fn expand_tests(
    mu: &DiscreteMeasure,
    tests: &[TestFunction],
    lattice: Option<&Lattice>,
) -> Result<Vec<(String, Vec<f64>)>> {
    use rand::{Rng, SeedableRng};
    let need_lattice = || {
        lattice.ok_or_else(|| {
            Error::InvalidArgument("cube-based test functions need a lattice".into())
        })
    };
    let key_name = |key: &[i64]| {
        key.iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut out = Vec::new();
    for test in tests {
        match test {
            TestFunction::Constant => out.push(("constant".to_string(), vec![1.0; mu.len()])),
            TestFunction::CubeIndicators { generation } => {
                let lattice = need_lattice()?;
                check_generation(lattice, *generation)?;
                for &id in lattice.generation(*generation) {
                    let cube = lattice.cube(id);
                    let mut f = vec![0.0; mu.len()];
                    for &p in &cube.members {
                        f[p] = 1.0;
                    }
                    out.push((format!("cube:{}:{}", generation, key_name(&cube.key)), f));
                }
            }
            TestFunction::Haar { generation } => {
                let lattice = need_lattice()?;
                check_generation(lattice, *generation)?;
                for &id in lattice.generation(*generation) {
                    let cube = lattice.cube(id);
                    let Some(&child) = cube.children.first() else {
                        continue;
                    };
                    let child = lattice.cube(child);
                    let mut f = vec![0.0; mu.len()];
                    for &p in &cube.members {
                        f[p] = -1.0 / cube.mass;
                    }
                    for &p in &child.members {
                        f[p] += 1.0 / child.mass;
                    }
                    out.push((format!("haar:{}:{}", generation, key_name(&cube.key)), f));
                }
            }
            TestFunction::Rademacher { count, seed } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                for i in 0..*count {
                    let f = (0..mu.len())
                        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                        .collect();
                    out.push((format!("rademacher:{seed}:{i}"), f));
                }
            }
        }
    }
    Ok(out)
}

fn check_generation(lattice: &Lattice, generation: i32) -> Result<()> {
    if generation < lattice.j_min() || generation > lattice.j_max() {
        return Err(Error::Range(format!(
            "generation {generation} outside the lattice range {}..={}",
            lattice.j_min(),
            lattice.j_max()
        )));
    }
    Ok(())
}

/// Lower bound for the `L²(μ)` norm of `V_ρ∘T` from a family of test functions; rows are streamed.
pub fn norm_ratio_probe(
    mu: &DiscreteMeasure,
    kernel: &KernelSpec,
    profile: TruncationProfile,
    rho: f64,
    grid: &GridSpec,
    tests: &[TestFunction],
    lattice: Option<&Lattice>,
) -> Result<ProbeResult> {
    use rayon::prelude::*;
    let functions = expand_tests(mu, tests, lattice)?;
    if functions.is_empty() {
        return Err(Error::InvalidArgument("empty test family".into()));
    }
    let mut ratios = Vec::with_capacity(functions.len());
    for (name, f) in functions {
        let norm = compensated_sum(f.iter().zip(mu.weights()).map(|(v, w)| v * v * w)).sqrt();
        if !(norm > 0.0) {
            continue;
        }
        let squares: Vec<f64> = (0..mu.len())
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let row = family_row(mu, Some(&f), kernel, profile, grid, i)?;
                let (v, _) = rho_variation(Values::new(&row.values, kernel.arity())?, rho)?;
                Ok(v * v * mu.weight(i))
            })
            .collect::<Result<_>>()?;
        ratios.push((name, compensated_sum(squares).sqrt() / norm));
    }
    let (argmax, ratio) = ratios
        .iter()
        .fold((String::new(), f64::NEG_INFINITY), |best, (n, r)| {
            if *r > best.1 {
                (n.clone(), *r)
            } else {
                best
            }
        });
    if ratio == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "every test function has zero norm".into(),
        ));
    }
    Ok(ProbeResult {
        ratio,
        argmax,
        ratios,
    })
}
