mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rectilab::diagnostics::{
    basic_estimate_check, cz_decompose, verify_cz, wgl_detect, BasicOptions, DetectorConfig,
    Verdict,
};
use rectilab::geometry::alpha::{alpha, alpha_in_region, alpha_region, fixed_plane_distance};
use rectilab::geometry::flat::flat_distance_detailed;
use rectilab::geometry::{
    beta_cloud, compute_coefficients, flat_distance, packing_report, AlphaOptions, AlphaRegion,
    BetaOrder, CoefficientOptions, PackingKind, PointCloud, Region,
};
use rectilab::lattice::{finest_admissible_generation, ShiftSpec};
use rectilab::measure::{
    generate_circle_arc, generate_four_corner_cantor, generate_lipschitz_graph, generate_segment,
    GraphSpec, Profile,
};
use rectilab::operators::{evaluate_family, family_row, maximal_transform, outer_scale, GridSpec};
use rectilab::variation::{
    norm_ratio_probe, rho_variation, short_long_variation, TestFunction, Values,
};
use rectilab::{
    DiscreteMeasure, KernelSpec, Lattice, LatticeKind, Plane, ScaleGrid, SignedMeasure,
    TruncationProfile,
};

/// Lower bound on α for the Cantor top cube, certified by the coarse plane grid below.
const CANTOR_ALPHA_FLOOR: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sine_graph(resolution: usize) -> DiscreteMeasure {
    let profile = Profile::Sine {
        amplitude: 0.5 / std::f64::consts::TAU,
        frequency: 1.0,
    };
    generate_lipschitz_graph(&GraphSpec::new(1, 2, profile, 0.5, resolution)).unwrap()
}

fn bump_graph(resolution: usize) -> DiscreteMeasure {
    let profile = Profile::Bump {
        amplitude: 0.1,
        center: 0.5,
        width: 0.4,
    };
    generate_lipschitz_graph(&GraphSpec::new(1, 2, profile, 0.5, resolution)).unwrap()
}

fn full_lattice(mu: DiscreteMeasure) -> Lattice {
    let finest = finest_admissible_generation(&mu);
    Lattice::build(
        Arc::new(mu),
        0,
        finest,
        ShiftSpec::default(),
        LatticeKind::Ambient,
    )
    .unwrap()
}

fn l2_squared(mu: &DiscreteMeasure, f: &[f64]) -> f64 {
    f.iter()
        .enumerate()
        .map(|(i, v)| v * v * mu.weight(i))
        .sum()
}

fn ratios(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] / w[0]).collect()
}

fn variation_dp_oracle() -> Outcome {
    let mut rng = common::rng(2024);
    let mut mismatches = 0;
    for instance in 0..200 {
        let g = rng.gen_range(1..=12);
        let arity = 1 + instance % 2;
        let rho = [1.0, 2.0, 3.0][instance % 3];
        let values = common::random_values(&mut rng, g, arity);
        let (v, _) = rho_variation(Values::new(&values, arity).unwrap(), rho).unwrap();
        if v != common::brute_force_variation(&values, arity, rho) {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches in 200 instances"),
    )
}

fn pointwise_order() -> Outcome {
    let kernel = KernelSpec::riesz(1, 2);
    let fixtures = [
        generate_segment(2, 128).unwrap(),
        generate_circle_arc(2, 1.0, 1.5, 128).unwrap(),
        sine_graph(128),
        bump_graph(128),
        generate_four_corner_cantor(3, 2).unwrap(),
    ];
    let rhos = [1.0, 1.5, 2.0, 3.0, 4.0];
    let mut violations = 0;
    let mut points = 0;
    for mu in &fixtures {
        let smooth_grid =
            GridSpec::Shared(ScaleGrid::dyadic(outer_scale(mu), mu.min_spacing(), 8).unwrap());
        for (profile, grid) in [
            (TruncationProfile::Sharp, GridSpec::PointBreakpoints),
            (TruncationProfile::Smooth, smooth_grid),
        ] {
            let family = evaluate_family(mu, None, &kernel, profile, &grid).unwrap();
            for row in &family.rows {
                points += 1;
                let values = Values::new(&row.values, 2).unwrap();
                let v: Vec<f64> = rhos
                    .iter()
                    .map(|&rho| rho_variation(values, rho).unwrap().0)
                    .collect();
                if maximal_transform(row, 2) > v[0] * (1.0 + 1e-12) {
                    violations += 1;
                }
                violations += v.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12)).count();
            }
        }
    }
    let mut rng = common::rng(77);
    let mut split_violations = 0;
    for _ in 0..100 {
        let scales = common::random_scales(&mut rng, 40, 6);
        let arity = rng.gen_range(1..=2);
        let values = common::random_values(&mut rng, scales.len(), arity);
        let rho = rng.gen_range(1.0..4.0);
        let vals = Values::new(&values, arity).unwrap();
        let (s, l) = short_long_variation(vals, &scales, rho).unwrap();
        if rho_variation(vals, rho).unwrap().0 > (s + l) * (1.0 + 1e-12) {
            split_violations += 1;
        }
    }
    outcome(
        violations == 0 && split_violations == 0,
        format!("{violations} order violations over {points} points, {split_violations} split violations in 100 instances"),
    )
}

fn sharp_exactness() -> Outcome {
    let kernel = KernelSpec::riesz(1, 2);
    let mut rng = common::rng(5);
    let cloud_coords: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..1.0)).collect();
    let fixtures = [
        generate_segment(2, 32).unwrap(),
        generate_circle_arc(2, 1.0, 1.5, 32).unwrap(),
        generate_four_corner_cantor(2, 2).unwrap(),
        DiscreteMeasure::new(1, 2, cloud_coords, vec![0.05; 20], "cloud").unwrap(),
    ];
    let (mut midpoint_mismatches, mut sup_mismatches, mut checked) = (0, 0, 0);
    for mu in &fixtures {
        let family = evaluate_family(
            mu,
            None,
            &kernel,
            TruncationProfile::Sharp,
            &GridSpec::PointBreakpoints,
        )
        .unwrap();
        for (i, row) in family.rows.iter().enumerate() {
            // Adjacent breakpoints one ulp apart have no representable interior point.
            let gaps: Vec<usize> = (0..row.scales.len() - 1)
                .filter(|&s| {
                    let mid = 0.5 * (row.scales[s] + row.scales[s + 1]);
                    mid < row.scales[s] && mid > row.scales[s + 1]
                })
                .collect();
            let mids: Vec<f64> = gaps
                .iter()
                .map(|&s| 0.5 * (row.scales[s] + row.scales[s + 1]))
                .collect();
            let mid_row = family_row(
                mu,
                None,
                &kernel,
                TruncationProfile::Sharp,
                &GridSpec::Shared(ScaleGrid::explicit(mids).unwrap()),
                i,
            )
            .unwrap();
            checked += gaps.len();
            midpoint_mismatches += gaps
                .iter()
                .enumerate()
                .filter(|&(m, &s)| mid_row.values[2 * m..2 * m + 2] != row.values[2 * s..2 * s + 2])
                .count();

            let mut refined = Vec::new();
            for w in row.scales.windows(2) {
                refined.extend((0..4).map(|t| w[0] + (w[1] - w[0]) * t as f64 / 4.0));
            }
            let last = *row.scales.last().unwrap();
            refined.extend([last, 0.5 * last, 0.25 * last]);
            refined.dedup_by(|b, a| *b >= *a);
            let fine = family_row(
                mu,
                None,
                &kernel,
                TruncationProfile::Sharp,
                &GridSpec::Shared(ScaleGrid::explicit(refined).unwrap()),
                i,
            )
            .unwrap();
            for rho in [1.0, 2.0, 3.0] {
                let grid_v = rho_variation(Values::new(&row.values, 2).unwrap(), rho)
                    .unwrap()
                    .0;
                let fine_v = rho_variation(Values::new(&fine.values, 2).unwrap(), rho)
                    .unwrap()
                    .0;
                if (grid_v - fine_v).abs() > 1e-12 * (1.0 + fine_v) {
                    sup_mismatches += 1;
                }
            }
        }
    }
    outcome(
        midpoint_mismatches == 0 && sup_mismatches == 0,
        format!("{midpoint_mismatches} midpoint mismatches over {checked} gaps, {sup_mismatches} variation mismatches under refinement"),
    )
}

fn beta_oracle() -> Outcome {
    let mut rng = common::rng(404);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let len = rng.gen_range(3..=40);
        let points: Vec<[f64; 2]> = (0..len)
            .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let weights: Vec<f64> = (0..len).map(|_| rng.gen_range(0.1..1.0)).collect();
        let cloud = PointCloud::new(
            2,
            points.iter().flatten().copied().collect(),
            weights.clone(),
        )
        .unwrap();
        let (v, _) = beta_cloud(&cloud, 1.0, 1, BetaOrder::Two).unwrap();
        let oracle = common::plane_sweep_l2(&points, &weights, 720).sqrt();
        worst = worst.max((v - oracle).abs() / oracle);
    }
    let mut collinear = 0.0f64;
    for _ in 0..20 {
        let (slope, offset) = (rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
        let len = rng.gen_range(2..=40);
        let coords: Vec<f64> = (0..len)
            .flat_map(|_| {
                let t: f64 = rng.gen_range(-1.0..1.0);
                [t, slope * t + offset]
            })
            .collect();
        let cloud = PointCloud::new(
            2,
            coords,
            (0..len).map(|_| rng.gen_range(0.1..1.0)).collect(),
        )
        .unwrap();
        for order in [BetaOrder::One, BetaOrder::Two, BetaOrder::Infinity] {
            collinear = collinear.max(beta_cloud(&cloud, 1.0, 1, order).unwrap().0);
        }
    }
    outcome(
        worst <= 1e-6 && collinear <= 1e-12,
        format!("max relative error {worst:.2e}, collinear max {collinear:.2e}"),
    )
}

fn random_signed(rng: &mut rand_chacha::ChaCha8Rng) -> SignedMeasure {
    let len = rng.gen_range(1..=5);
    let coords: Vec<f64> = (0..2 * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let weights: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SignedMeasure::new(2, coords, weights).unwrap()
}

fn flat_metric() -> Outcome {
    let mut rng = common::rng(55);
    let (mut symmetry, mut triangle, mut tv_bound) = (0.0f64, 0.0f64, 0.0f64);
    let mut lp_gap = 0.0f64;
    for _ in 0..50 {
        let radius = rng.gen_range(0.3..2.0);
        let region = Region::ball(vec![0.0, 0.0], radius);
        let (a, b, c) = (
            random_signed(&mut rng),
            random_signed(&mut rng),
            random_signed(&mut rng),
        );
        let ab = flat_distance(&a, &b, &region).unwrap();
        let ba = flat_distance(&b, &a, &region).unwrap();
        let ac = flat_distance(&a, &c, &region).unwrap();
        let cb = flat_distance(&c, &b, &region).unwrap();
        symmetry = symmetry.max((ab - ba).abs());
        triangle = triangle.max(ab - ac - cb);
        tv_bound = tv_bound.max(ab - radius * a.difference(&b).unwrap().total_variation());
        let detailed = flat_distance_detailed(&a, &b, &region).unwrap();
        let mut points = Vec::new();
        let mut masses = Vec::new();
        for i in 0..a.len() {
            points.push(a.point(i).to_vec());
            masses.push(a.weight(i));
        }
        for i in 0..b.len() {
            points.push(b.point(i).to_vec());
            masses.push(-b.weight(i));
        }
        lp_gap = lp_gap.max(
            (detailed.value - common::flat_distance_lp(&points, &masses, &[0.0, 0.0], radius))
                .abs(),
        );
    }
    let region = Region::ball(vec![0.0, 0.0], 10.0);
    let (p, q) = ([0.7, -0.1], [-0.2, 0.5]);
    let two_point = flat_distance(
        &SignedMeasure::new(2, p.to_vec(), vec![1.0]).unwrap(),
        &SignedMeasure::new(2, q.to_vec(), vec![1.0]).unwrap(),
        &region,
    )
    .unwrap();
    let distance = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    let two_point_error = (two_point - distance).abs();
    outcome(
        symmetry <= 1e-7 && triangle <= 1e-7 && tv_bound <= 1e-7 && two_point_error <= 1e-7 && lp_gap <= 1e-7 * 10.0,
        format!(
            "symmetry {symmetry:.1e}, triangle excess {triangle:.1e}, TV excess {tv_bound:.1e}, two-point error {two_point_error:.1e}, LP gap {lp_gap:.1e}"
        ),
    )
}

fn alpha_sanity() -> Outcome {
    let mut worst_fraction = 0.0f64;
    for (slope, offset, c0) in [(0.3, 0.1, 1.5), (0.0, 0.0, 1.0), (-0.5, 0.2, 0.7)] {
        let h_mu = 1.0 / 64.0;
        let count = (8.0 / h_mu) as usize;
        let norm = (1.0f64 + slope * slope).sqrt();
        let coords: Vec<f64> = (0..count)
            .flat_map(|i| {
                let s = -4.0 + (i as f64 + 0.5) * h_mu;
                [s / norm, offset + slope * s / norm]
            })
            .collect();
        let mu = DiscreteMeasure::new(1, 2, coords, vec![c0 * h_mu; count], "line").unwrap();
        let ell = 0.125;
        let radius = 6.0 * 2f64.sqrt() * ell;
        let region = Region::ball(vec![0.5 / norm, offset + slope * 0.5 / norm], radius);
        let res = alpha_in_region(&mu, &region, ell, &AlphaOptions::default(), None).unwrap();
        let bound = c0 * 2.0 * radius * (h_mu + ell / 16.0) / 2.0 / (ell * ell);
        worst_fraction = worst_fraction.max(res.value / bound);
    }

    let mu = generate_four_corner_cantor(3, 2).unwrap();
    let lattice = Lattice::build(
        Arc::new(mu),
        0,
        2,
        ShiftSpec::default(),
        LatticeKind::Ambient,
    )
    .unwrap();
    let top = lattice.generation(0)[0];
    let region = alpha_region(&lattice, top, AlphaRegion::Ball).unwrap();
    let mut grid_min = f64::INFINITY;
    for k in 0..8 {
        let angle = std::f64::consts::PI * k as f64 / 8.0;
        for o in 0..5 {
            let offset = 0.25 * o as f64;
            let base = vec![-offset * angle.sin(), offset * angle.cos()];
            let plane = Plane::new(base, vec![vec![angle.cos(), angle.sin()]]).unwrap();
            let (value, _, _) =
                fixed_plane_distance(lattice.measure(), &region, &plane, 1.0 / 16.0, 1e-3).unwrap();
            grid_min = grid_min.min(value);
        }
    }
    let cantor = alpha(&lattice, top, &AlphaOptions::default()).unwrap();
    outcome(
        worst_fraction <= 2.0 && grid_min >= CANTOR_ALPHA_FLOOR && cantor.value >= CANTOR_ALPHA_FLOOR,
        format!(
            "quadrature α/bound max {worst_fraction:.3}; Cantor top cube α {:.4}, coarse-grid minimum {grid_min:.4}, floor {CANTOR_ALPHA_FLOOR}",
            cantor.value
        ),
    )
}

fn packing_dichotomy() -> Outcome {
    let mut graph_factors = Vec::new();
    for mu in [sine_graph(1024), bump_graph(1024)] {
        let lattice = full_lattice(mu);
        let table = compute_coefficients(&lattice, &CoefficientOptions::default()).unwrap();
        let series =
            packing_report(&lattice, &table, PackingKind::Beta2Squared, 0, None).max_by_depth;
        graph_factors.extend((3..series.len() - 2).map(|k| series[k + 2] / series[k]));
    }
    let graph_max = graph_factors.iter().copied().fold(0.0, f64::max);

    let cantor: Vec<f64> = (3..=6u32)
        .map(|g| {
            let lattice = full_lattice(generate_four_corner_cantor(g, 2).unwrap());
            let table = compute_coefficients(&lattice, &CoefficientOptions::default()).unwrap();
            packing_report(&lattice, &table, PackingKind::Beta2Squared, 0, None).max_sum
        })
        .collect();
    let increments: Vec<f64> = cantor.windows(2).map(|w| w[1] - w[0]).collect();
    let cantor_ok = increments[0] > 0.0 && increments.iter().all(|&d| d >= 0.5 * increments[0]);
    outcome(
        graph_max <= 1.5 && cantor_ok,
        format!("graph depth+2 factor max {graph_max:.4}; Cantor sums {cantor:.4?}"),
    )
}

fn boundedness_dichotomy() -> Outcome {
    let riesz = KernelSpec::riesz(1, 2);
    let tests = [
        TestFunction::Constant,
        TestFunction::Rademacher { count: 4, seed: 1 },
    ];
    let mut graph_detail = Vec::new();
    let mut graph_ok = true;
    for (name, build) in [
        ("sine", sine_graph as fn(usize) -> DiscreteMeasure),
        ("bump", bump_graph),
    ] {
        let series: Vec<f64> = [128, 256, 512, 1024]
            .into_iter()
            .map(|res| {
                let mu = build(res);
                let grid = GridSpec::Shared(
                    ScaleGrid::dyadic(outer_scale(&mu), mu.min_spacing(), 8).unwrap(),
                );
                norm_ratio_probe(
                    &mu,
                    &riesz,
                    TruncationProfile::Smooth,
                    3.0,
                    &grid,
                    &tests,
                    None,
                )
                .unwrap()
                .ratio
            })
            .collect();
        graph_ok &= series.iter().all(|v| v.is_finite() && *v > 0.0)
            && ratios(&series).iter().all(|&r| r <= 1.25);
        graph_detail.push(format!("{name} {series:.4?}"));
    }
    let cantor: Vec<f64> = (3..=6u32)
        .map(|g| {
            let mu = generate_four_corner_cantor(g, 2).unwrap();
            norm_ratio_probe(
                &mu,
                &riesz,
                TruncationProfile::Sharp,
                3.0,
                &GridSpec::PointBreakpoints,
                &[TestFunction::Constant],
                None,
            )
            .unwrap()
            .ratio
        })
        .collect();
    let cantor_ok = cantor.windows(2).all(|w| w[1] > w[0]);
    outcome(
        graph_ok && cantor_ok,
        format!("{}; Cantor {cantor:.4?}", graph_detail.join(", ")),
    )
}

fn cz_postconditions() -> Outcome {
    let graph = sine_graph(256);
    let center = [0.5, graph.point(128)[1]];
    let inside: Vec<usize> = (0..graph.len())
        .filter(|&i| {
            ((graph.point(i)[0] - center[0]).powi(2) + (graph.point(i)[1] - center[1]).powi(2))
                .sqrt()
                <= 0.35
        })
        .collect();
    let mu = DiscreteMeasure::new(
        1,
        2,
        inside
            .iter()
            .flat_map(|&i| graph.point(i).to_vec())
            .collect(),
        inside.iter().map(|&i| graph.weight(i)).collect(),
        "graph ball",
    )
    .unwrap();
    let mut rng = common::rng(9);
    let (mut failures, mut overlap) = (Vec::new(), 0);
    for _ in 0..20 {
        let atoms = rng.gen_range(1..=15);
        let mut coords = Vec::with_capacity(2 * atoms);
        for _ in 0..atoms {
            if rng.gen_bool(0.5) {
                let p = mu.point(rng.gen_range(0..mu.len()));
                coords.extend([
                    p[0] + rng.gen_range(-0.01..0.01),
                    p[1] + rng.gen_range(-0.01..0.01),
                ]);
            } else {
                coords.extend([
                    center[0] + rng.gen_range(-0.35..0.35),
                    center[1] + rng.gen_range(-0.35..0.35),
                ]);
            }
        }
        let nu = SignedMeasure::new(
            2,
            coords,
            (0..atoms).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let floor = 8.0 * nu.total_variation() / mu.total_mass();
        let lambda = floor * rng.gen_range(1.01..4.0);
        let cz = cz_decompose(&mu, &nu, lambda).unwrap();
        failures.extend(verify_cz(&mu, &nu, &cz));
        overlap = overlap.max(cz.overlap);
    }
    outcome(
        failures.is_empty() && overlap <= 4,
        format!(
            "{} invariant failures, measured overlap constant {overlap}",
            failures.len()
        ),
    )
}

fn detector_classification() -> Outcome {
    let fixtures: Vec<(&str, DiscreteMeasure, Verdict)> = vec![
        (
            "segment",
            generate_segment(2, 1024).unwrap(),
            Verdict::RectifiableLike,
        ),
        (
            "arc",
            generate_circle_arc(2, 1.0, 1.5, 1024).unwrap(),
            Verdict::RectifiableLike,
        ),
        ("sine graph", sine_graph(1024), Verdict::RectifiableLike),
        ("bump graph", bump_graph(1024), Verdict::RectifiableLike),
        (
            "cantor g4",
            generate_four_corner_cantor(4, 2).unwrap(),
            Verdict::NonRectifiableLike,
        ),
        (
            "cantor g5",
            generate_four_corner_cantor(5, 2).unwrap(),
            Verdict::NonRectifiableLike,
        ),
    ];
    let mut correct = 0;
    let mut domination = true;
    let mut detail = Vec::new();
    for (name, mu, expected) in fixtures {
        let report = wgl_detect(Arc::new(mu), &DetectorConfig::default()).unwrap();
        correct += usize::from(report.verdict == expected);
        domination &= report.domination_holds;
        detail.push(format!("{name}: {:?}", report.verdict));
    }
    outcome(
        correct == 6 && domination,
        format!(
            "{correct}/6 correct, domination {domination} ({})",
            detail.join(", ")
        ),
    )
}

fn haar_and_vicinity(mu: DiscreteMeasure, seed: u64) -> (f64, f64) {
    let lattice = full_lattice(mu);
    let mu = lattice.measure();
    let mut rng = common::rng(seed);
    let (mut haar_excess, mut constant) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..20 {
        let f: Vec<f64> = (0..mu.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = l2_squared(mu, &f);
        let haar: f64 = lattice
            .ids()
            .filter(|&id| !lattice.cube(id).children.is_empty())
            .map(|id| l2_squared(mu, &lattice.haar_difference(&f, id)))
            .sum();
        haar_excess = haar_excess.max((haar - norm) / norm);
        let vicinity: f64 = lattice
            .ids()
            .map(|id| lattice.vicinity_coefficient(&f, id).powi(2) * lattice.cube(id).mass)
            .sum();
        constant = constant.max(vicinity / norm);
    }
    (haar_excess, constant)
}

fn haar_vicinity_carleson() -> Outcome {
    let mut haar_ok = true;
    let mut stable = true;
    let mut detail = Vec::new();
    for (name, build) in [
        ("sine", sine_graph as fn(usize) -> DiscreteMeasure),
        ("bump", bump_graph),
    ] {
        let (coarse_excess, coarse_c) = haar_and_vicinity(build(256), 31);
        let (fine_excess, fine_c) = haar_and_vicinity(build(512), 32);
        haar_ok &= coarse_excess <= 1e-9 && fine_excess <= 1e-9;
        let factor = fine_c / coarse_c;
        stable &= (0.5..=2.0).contains(&factor);
        detail.push(format!("{name}: C {coarse_c:.4} -> {fine_c:.4}"));
    }
    outcome(
        haar_ok && stable,
        format!("Haar bound holds {haar_ok}; {}", detail.join(", ")),
    )
}

fn basic_estimate() -> Outcome {
    let opts = BasicOptions {
        j_max: 4,
        ..BasicOptions::default()
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, build) in [
        ("sine", sine_graph as fn(usize) -> DiscreteMeasure),
        ("bump", bump_graph),
    ] {
        let series: Vec<Option<f64>> = [128, 256]
            .into_iter()
            .map(|res| {
                basic_estimate_check(Arc::new(build(res)), &opts)
                    .unwrap()
                    .ratio
            })
            .collect();
        match (series[0], series[1]) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() && a > 0.0 => {
                ok &= (0.5..=2.0).contains(&(b / a))
            }
            _ => ok = false,
        }
        detail.push(format!("{name} {series:.4?}"));
    }
    outcome(ok, detail.join(", "))
}

fn collect_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && !p.to_string_lossy().ends_with(".timing.json"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn reproducibility() -> Outcome {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/segment.json");
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        for sub in [
            "generate",
            "lattice",
            "coeffs",
            "transform",
            "variation",
            "detect",
            "corona",
            "report",
        ] {
            let status = Command::new(env!("CARGO_BIN_EXE_rectilab"))
                .args([sub, "--config", config, "--out"])
                .arg(&out)
                .output()
                .unwrap()
                .status;
            assert!(status.success(), "{sub} failed with {status}");
        }
        runs.push(collect_files(&out));
    }
    let differing: Vec<&String> = runs[0]
        .keys()
        .filter(|k| runs[1].get(*k) != runs[0].get(*k))
        .collect();
    let same_set = runs[0].keys().eq(runs[1].keys());
    outcome(
        same_set && differing.is_empty() && runs[0].len() > 5,
        format!(
            "{} artifacts compared, {} differ",
            runs[0].len(),
            differing.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("variation DP oracle", variation_dp_oracle),
        ("pointwise order", pointwise_order),
        ("sharp-truncation exactness", sharp_exactness),
        ("beta oracle", beta_oracle),
        ("flat metric", flat_metric),
        ("alpha sanity", alpha_sanity),
        ("packing dichotomy", packing_dichotomy),
        ("boundedness dichotomy", boundedness_dichotomy),
        ("CZ postconditions", cz_postconditions),
        ("detector classification", detector_classification),
        ("Haar and vicinity Carleson", haar_vicinity_carleson),
        ("basic estimate", basic_estimate),
        ("reproducibility", reproducibility),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (index, (name, check)) in criteria.iter().enumerate() {
        let number = index + 1;
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| *f == number.to_string() || name.contains(f.as_str()))
        {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {message}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {number:>2} {name}: {} ({}; {:.1}s)",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
