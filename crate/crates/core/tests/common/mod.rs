#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn distance(values: &[f64], arity: usize, i: usize, j: usize) -> f64 {
    let a = &values[i * arity..(i + 1) * arity];
    let b = &values[j * arity..(j + 1) * arity];
    if arity == 1 {
        (a[0] - b[0]).abs()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Largest ρ-sum over every subsequence of `values`, counting only steps accepted by `counts`.
pub fn brute_force_sum<C: Fn(usize, usize) -> bool>(
    values: &[f64],
    arity: usize,
    rho: f64,
    counts: C,
) -> f64 {
    let g = values.len() / arity;
    let mut best = 0.0f64;
    for mask in 1u32..(1u32 << g) {
        let picks: Vec<usize> = (0..g).filter(|&i| mask & (1 << i) != 0).collect();
        let mut sum = 0.0;
        for w in picks.windows(2) {
            if counts(w[0], w[1]) {
                sum += distance(values, arity, w[0], w[1]).powf(rho);
            }
        }
        best = best.max(sum);
    }
    best
}

/// Exhaustive ρ-variation.
pub fn brute_force_variation(values: &[f64], arity: usize, rho: f64) -> f64 {
    brute_force_sum(values, arity, rho, |_, _| true).powf(1.0 / rho)
}

/// Dyadic octave `j` with `2^{-j-1} <= s < 2^{-j}`.
pub fn octave(scale: f64) -> i32 {
    (-scale.log2()).ceil() as i32 - 1
}

/// Exhaustive short and long variation.
pub fn brute_force_short_long(
    values: &[f64],
    arity: usize,
    scales: &[f64],
    rho: f64,
) -> (f64, f64) {
    let oct: Vec<i32> = scales.iter().map(|&s| octave(s)).collect();
    let mut short = 0.0;
    let mut start = 0;
    while start < oct.len() {
        let mut end = start + 1;
        while end < oct.len() && oct[end] == oct[start] {
            end += 1;
        }
        short += brute_force_sum(&values[start * arity..end * arity], arity, rho, |_, _| true);
        start = end;
    }
    let long = brute_force_sum(values, arity, rho, |i, j| oct[i] != oct[j]);
    (short.powf(1.0 / rho), long.powf(1.0 / rho))
}

/// Random instance with `g` values of the given arity.
pub fn random_values(rng: &mut ChaCha8Rng, g: usize, arity: usize) -> Vec<f64> {
    (0..g * arity).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Strictly decreasing random scales in `(2^{-octaves}, 1)`.
pub fn random_scales(rng: &mut ChaCha8Rng, g: usize, octaves: i32) -> Vec<f64> {
    let mut s: Vec<f64> = (0..g)
        .map(|_| 2f64.powf(-rng.gen_range(0.0..octaves as f64)))
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s.dedup();
    s
}

/// Weighted line-fit objective `min_L Σ w dist(x, L)²` over a dense sweep of directions through the
/// weighted centroid (the optimal line always passes through it).
pub fn plane_sweep_l2(points: &[[f64; 2]], weights: &[f64], directions: usize) -> f64 {
    let total: f64 = weights.iter().sum();
    let cx = points
        .iter()
        .zip(weights)
        .map(|(p, w)| p[0] * w)
        .sum::<f64>()
        / total;
    let cy = points
        .iter()
        .zip(weights)
        .map(|(p, w)| p[1] * w)
        .sum::<f64>()
        / total;
    let objective = |theta: f64| {
        let (nx, ny) = (-theta.sin(), theta.cos());
        points
            .iter()
            .zip(weights)
            .map(|(p, w)| {
                let r = (p[0] - cx) * nx + (p[1] - cy) * ny;
                w * r * r
            })
            .sum::<f64>()
    };
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..directions {
        let theta = std::f64::consts::PI * k as f64 / directions as f64;
        let v = objective(theta);
        if v < best.0 {
            best = (v, theta);
        }
    }
    // Golden-section polish around the best sampled direction.
    let step = std::f64::consts::PI / directions as f64;
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if objective(c) < objective(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.0.min(objective(0.5 * (a + b)))
}

/// Flat distance by a generic LP: maximize `Σ m_i f_i` over `|f_i - f_j| <= |p_i - p_j|` and `|f_i| <= g_i`,
/// where `g` is the distance to the boundary of the ball `F` (zero outside).
pub fn flat_distance_lp(points: &[Vec<f64>], masses: &[f64], center: &[f64], radius: f64) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = points
        .iter()
        .zip(masses)
        .map(|(p, &m)| {
            let g = (radius - dist(p, center)).max(0.0);
            problem.add_var(m, (-g, g))
        })
        .collect();
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i != j {
                problem.add_constraint(
                    &[(vars[i], 1.0), (vars[j], -1.0)],
                    ComparisonOp::Le,
                    dist(&points[i], &points[j]),
                );
            }
        }
    }
    problem
        .solve()
        .expect("flat LP is always feasible")
        .objective()
}
