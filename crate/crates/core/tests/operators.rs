use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rectilab::kernels::{
    phi_r, phi_r_derivative, profile_eval, ProfileEvaluator, PHI_R_DERIVATIVE_FLOOR,
};
use rectilab::measure::{generate_segment, GraphFrame};
use rectilab::operators::{
    evaluate_family, maximal_transform, outer_scale, special_truncation_sm, truncated_transform,
    ws_functionals, GridSpec,
};
use rectilab::{DiscreteMeasure, Error, KernelSpec, ScaleGrid, TruncationProfile};

fn random_cloud(seed: u64, len: usize) -> DiscreteMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..2 * len).map(|_| rng.gen::<f64>()).collect();
    let weights: Vec<f64> = (0..len).map(|_| rng.gen_range(0.1..1.0)).collect();
    DiscreteMeasure::new(1, 2, coords, weights, "cloud").unwrap()
}

fn riesz_by_hand(z: [f64; 2]) -> [f64; 2] {
    let r2 = z[0] * z[0] + z[1] * z[1];
    [z[0] / r2, z[1] / r2]
}

#[test]
fn riesz_values() {
    let k = KernelSpec::riesz(1, 2);
    assert_eq!(k.eval(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    let v = k.eval(&[3.0, 4.0]).unwrap();
    assert!((v[0] - 0.12).abs() < 1e-15 && (v[1] - 0.16).abs() < 1e-15);
    let w = k.eval(&[-3.0, -4.0]).unwrap();
    assert_eq!(w, vec![-v[0], -v[1]]);
    assert!(matches!(k.eval(&[0.0, 0.0]), Err(Error::Singularity)));
    let k2 = KernelSpec::riesz(2, 3);
    let u = k2.eval(&[1.0, 2.0, 2.0]).unwrap();
    assert!((u[0] - 1.0 / 27.0).abs() < 1e-15 && (u[2] - 2.0 / 27.0).abs() < 1e-15);
}

#[test]
fn profile_examples() {
    let eps = 0.3;
    assert_eq!(
        profile_eval(TruncationProfile::Smooth, eps, &[0.6, 0.0], None, 1).unwrap(),
        1.0
    );
    assert_eq!(
        profile_eval(TruncationProfile::Smooth, eps, &[0.0, 0.15], None, 1).unwrap(),
        0.0
    );
    let ev = ProfileEvaluator::new(TruncationProfile::Smooth, None, 1).unwrap();
    for x in [[0.1, 0.2], [0.3, 0.0], [0.5, 0.1]] {
        assert_eq!(ev.eval_banded(eps, eps, &x).unwrap(), 0.0);
    }
    assert!(matches!(
        ev.eval(0.0, &[1.0, 0.0]),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        profile_eval(TruncationProfile::GraphProjected, 1.0, &[1.0, 0.0], None, 1),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn smoothstep_derivative_floor() {
    let samples = 30_000;
    let min = (0..=samples)
        .map(|i| 1.0 / 3.0 + (3.0 - 1.0 / 3.0) * i as f64 / samples as f64)
        .map(phi_r_derivative)
        .fold(f64::INFINITY, f64::min);
    assert!((min - PHI_R_DERIVATIVE_FLOOR).abs() < 1e-12);
    assert!(PHI_R_DERIVATIVE_FLOOR > 0.0);
    assert_eq!(phi_r(0.25), 0.0);
    assert_eq!(phi_r(4.0), 1.0);
}

#[test]
fn symmetric_pair_cancels() {
    let mu = DiscreteMeasure::new(1, 2, vec![0.2, 0.1, 0.8, 0.5], vec![1.0, 1.0], "pair").unwrap();
    let x = [0.5, 0.3];
    for kernel in [
        KernelSpec::riesz(1, 2),
        KernelSpec::cauchy_re(2),
        KernelSpec::cauchy_im(2),
    ] {
        for profile in [TruncationProfile::Sharp, TruncationProfile::Smooth] {
            let v = truncated_transform(&mu, None, &kernel, &x, 0.05, profile).unwrap();
            assert!(v.iter().all(|c| c.abs() < 1e-15), "{v:?}");
        }
    }
}

#[test]
fn single_mass_sharp_value() {
    let mu = DiscreteMeasure::new(1, 2, vec![0.7, 0.4], vec![0.3], "atom").unwrap();
    let x = [0.1, 0.2];
    let f = [2.0];
    let v = truncated_transform(
        &mu,
        Some(&f),
        &KernelSpec::riesz(1, 2),
        &x,
        0.1,
        TruncationProfile::Sharp,
    )
    .unwrap();
    let k = riesz_by_hand([x[0] - 0.7, x[1] - 0.4]);
    assert!((v[0] - k[0] * 0.3 * 2.0).abs() < 1e-15 && (v[1] - k[1] * 0.3 * 2.0).abs() < 1e-15);
}

#[test]
fn three_points_on_a_line() {
    let mu = DiscreteMeasure::new(
        1,
        2,
        vec![0.0, 0.0, 0.5, 0.0, 2.0, 0.0],
        vec![1.0, 0.5, 0.25],
        "line",
    )
    .unwrap();
    let x = mu.point(0).to_vec();
    let v = truncated_transform(
        &mu,
        None,
        &KernelSpec::riesz(1, 2),
        &x,
        0.1,
        TruncationProfile::Sharp,
    )
    .unwrap();
    // (x - y)/|x - y|² w: (-0.5)/0.25·0.5 + (-2)/4·0.25 = -1 - 0.125
    assert!((v[0] + 1.125).abs() < 1e-12 && v[1].abs() < 1e-12);
    let v = truncated_transform(
        &mu,
        None,
        &KernelSpec::riesz(1, 2),
        &x,
        1.0,
        TruncationProfile::Sharp,
    )
    .unwrap();
    assert!((v[0] + 0.125).abs() < 1e-12);
}

#[test]
fn special_truncation_bands() {
    let m = 3;
    let x = [0.0, 0.0];
    let far = DiscreteMeasure::new(1, 2, vec![2f64.powi(-m + 1), 0.0], vec![1.0], "far").unwrap();
    assert!(special_truncation_sm(&far, None, &x, m)
        .unwrap()
        .iter()
        .all(|&c| c == 0.0));
    let near = DiscreteMeasure::new(1, 2, vec![0.0, 2f64.powi(-m - 2)], vec![1.0], "near").unwrap();
    assert!(special_truncation_sm(&near, None, &x, m)
        .unwrap()
        .iter()
        .all(|&c| c == 0.0));
    let y = [2f64.powi(-m - 1) * 0.6, 2f64.powi(-m - 1) * 0.8];
    let band = DiscreteMeasure::new(1, 2, y.to_vec(), vec![0.5], "band").unwrap();
    let got = special_truncation_sm(&band, None, &x, m).unwrap();
    let z = [x[0] - y[0], x[1] - y[1]];
    let inner = profile_eval(TruncationProfile::Smooth, 2f64.powi(-m - 1), &z, None, 1).unwrap();
    let outer = profile_eval(TruncationProfile::Smooth, 2f64.powi(-m), &z, None, 1).unwrap();
    let k = riesz_by_hand(z);
    for a in 0..2 {
        assert!((got[a] - (inner - outer) * k[a] * 0.5).abs() < 1e-12);
    }
    assert!(((inner - outer) - (phi_r(1.0) - phi_r(0.25))).abs() < 1e-15);
}

#[test]
fn special_truncation_is_a_difference_of_transforms() {
    let mu = random_cloud(4, 30);
    let kernel = KernelSpec::riesz(1, 2);
    for i in 0..5 {
        let x = mu.point(i).to_vec();
        for m in -1..4 {
            let s = special_truncation_sm(&mu, None, &x, m).unwrap();
            let a = truncated_transform(
                &mu,
                None,
                &kernel,
                &x,
                2f64.powi(-m - 1),
                TruncationProfile::Smooth,
            )
            .unwrap();
            let b = truncated_transform(
                &mu,
                None,
                &kernel,
                &x,
                2f64.powi(-m),
                TruncationProfile::Smooth,
            )
            .unwrap();
            for c in 0..2 {
                assert_eq!(s[c].to_bits(), (a[c] - b[c]).to_bits());
            }
        }
    }
}

#[test]
fn maximal_examples() {
    let mu = random_cloud(8, 10);
    let kernel = KernelSpec::riesz(1, 2);
    let zero = vec![0.0; 10];
    let fam = evaluate_family(
        &mu,
        Some(&zero),
        &kernel,
        TruncationProfile::Sharp,
        &GridSpec::PointBreakpoints,
    )
    .unwrap();
    assert!(fam.rows.iter().all(|r| maximal_transform(r, 2) == 0.0));

    let atom = DiscreteMeasure::new(1, 2, vec![0.4, 0.9], vec![0.3], "atom").unwrap();
    let grid = GridSpec::Shared(ScaleGrid::explicit(vec![1.0, 0.5, 0.2, 0.1]).unwrap());
    let row = rectilab::operators::family_row(
        &atom,
        Some(&[-2.0]),
        &kernel,
        TruncationProfile::Sharp,
        &grid,
        0,
    )
    .unwrap();
    assert_eq!(maximal_transform(&row, 2), 0.0);
    let pair =
        DiscreteMeasure::new(1, 2, vec![0.0, 0.0, 0.4, 0.3], vec![1.0, 0.3], "pair").unwrap();
    let row = rectilab::operators::family_row(
        &pair,
        Some(&[1.0, -2.0]),
        &kernel,
        TruncationProfile::Sharp,
        &grid,
        0,
    )
    .unwrap();
    assert!((maximal_transform(&row, 2) - 0.3 * 2.0 / 0.5).abs() < 1e-15);
}

#[test]
fn maximal_equals_refined_supremum() {
    let mu = random_cloud(21, 10);
    let kernel = KernelSpec::riesz(1, 2);
    let fam = evaluate_family(
        &mu,
        None,
        &kernel,
        TruncationProfile::Sharp,
        &GridSpec::PointBreakpoints,
    )
    .unwrap();
    let breakpoints = ScaleGrid::breakpoints(&mu).unwrap().scales;
    let mut refined = Vec::new();
    for w in breakpoints.windows(2) {
        for t in 0..10 {
            refined.push(w[0] + (w[1] - w[0]) * t as f64 / 10.0);
        }
    }
    let last = *breakpoints.last().unwrap();
    for t in 0..10 {
        refined.push(last * (1.0 - t as f64 / 10.0).max(0.01));
    }
    refined.dedup();
    let fine = evaluate_family(
        &mu,
        None,
        &kernel,
        TruncationProfile::Sharp,
        &GridSpec::Shared(ScaleGrid::explicit(refined).unwrap()),
    )
    .unwrap();
    for (a, b) in fam.rows.iter().zip(&fine.rows) {
        assert_eq!(maximal_transform(a, 2), maximal_transform(b, 2));
    }
}

#[test]
fn family_rows_agree_with_pointwise_transforms() {
    let mu = random_cloud(33, 25);
    let kernel = KernelSpec::riesz(1, 2);
    let grid = ScaleGrid::dyadic(outer_scale(&mu), mu.min_spacing(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for profile in [TruncationProfile::Sharp, TruncationProfile::Smooth] {
        let fam = evaluate_family(
            &mu,
            Some(&f),
            &kernel,
            profile,
            &GridSpec::Shared(grid.clone()),
        )
        .unwrap();
        for _ in 0..5 {
            let i = rng.gen_range(0..25);
            let s = rng.gen_range(0..grid.len());
            let direct =
                truncated_transform(&mu, Some(&f), &kernel, mu.point(i), grid.scales[s], profile)
                    .unwrap();
            for a in 0..2 {
                assert!(
                    (fam.rows[i].values[s * 2 + a] - direct[a]).abs()
                        <= 1e-12 * (1.0 + direct[a].abs())
                );
            }
        }
    }
    let zero = vec![0.0; 25];
    let fam = evaluate_family(
        &mu,
        Some(&zero),
        &kernel,
        TruncationProfile::Smooth,
        &GridSpec::Shared(grid),
    )
    .unwrap();
    assert!(fam.rows.iter().all(|r| r.values.iter().all(|&v| v == 0.0)));
}

#[test]
fn one_point_family_is_zero() {
    let atom = DiscreteMeasure::new(1, 2, vec![0.4, 0.9], vec![0.3], "atom").unwrap();
    let fam = evaluate_family(
        &atom,
        None,
        &KernelSpec::riesz(1, 2),
        TruncationProfile::Sharp,
        &GridSpec::PointBreakpoints,
    )
    .unwrap();
    assert_eq!(fam.rows.len(), 1);
    assert!(fam.rows[0].values.iter().all(|&v| v == 0.0));
}

#[test]
fn family_tends_to_the_full_sum_below_the_minimum_distance() {
    let mu = random_cloud(5, 12);
    let kernel = KernelSpec::riesz(1, 2);
    let fam = evaluate_family(
        &mu,
        None,
        &kernel,
        TruncationProfile::Sharp,
        &GridSpec::PointBreakpoints,
    )
    .unwrap();
    for (i, row) in fam.rows.iter().enumerate() {
        let x = mu.point(i);
        let mut full = [0.0; 2];
        for j in (0..12).filter(|&j| j != i) {
            let k = riesz_by_hand([x[0] - mu.point(j)[0], x[1] - mu.point(j)[1]]);
            full[0] += k[0] * mu.weight(j);
            full[1] += k[1] * mu.weight(j);
        }
        let last = &row.values[row.values.len() - 2..];
        assert!((last[0] - full[0]).abs() < 1e-10 && (last[1] - full[1]).abs() < 1e-10);
    }
}

#[test]
fn sharp_rows_are_constant_between_breakpoints() {
    let mu = random_cloud(77, 15);
    let kernel = KernelSpec::riesz(1, 2);
    let fam = evaluate_family(
        &mu,
        None,
        &kernel,
        TruncationProfile::Sharp,
        &GridSpec::PointBreakpoints,
    )
    .unwrap();
    for (i, row) in fam.rows.iter().enumerate() {
        let mids: Vec<f64> = row.scales.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mid_row = rectilab::operators::family_row(
            &mu,
            None,
            &kernel,
            TruncationProfile::Sharp,
            &GridSpec::Shared(ScaleGrid::explicit(mids).unwrap()),
            i,
        )
        .unwrap();
        for s in 0..mid_row.len() {
            assert_eq!(
                &mid_row.values[2 * s..2 * s + 2],
                &row.values[2 * s..2 * s + 2]
            );
        }
    }
}

#[test]
fn ws_functionals_on_flat_and_perturbed_graphs() {
    let flat = generate_segment(2, 128).unwrap();
    let ws = ws_functionals(&flat, 0, 6, 4).unwrap();
    let w_max = ws.w.iter().copied().fold(0.0, f64::max);
    assert!(w_max < 1e-9, "{w_max}");

    let mut coords = flat.coords().to_vec();
    coords[2 * 64 + 1] = 0.02;
    let bumped = DiscreteMeasure::new(1, 2, coords, flat.weights().to_vec(), "bumped")
        .unwrap()
        .with_frame(GraphFrame::identity(2))
        .unwrap();
    let ws = ws_functionals(&bumped, 0, 6, 4).unwrap();
    assert!(ws.w[63] > 1e-6 && ws.w[65] > 1e-6);

    let atom = DiscreteMeasure::new(1, 2, vec![0.5, 0.0], vec![1.0], "atom")
        .unwrap()
        .with_frame(GraphFrame::identity(2))
        .unwrap();
    let ws = ws_functionals(&atom, 0, 4, 4).unwrap();
    assert_eq!(ws.s, vec![0.0]);
    assert!(ws_functionals(&random_cloud(1, 5), 0, 3, 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smooth_profile_is_sandwiched(x in -3.0f64..3.0, y in -3.0f64..3.0, eps in 0.05f64..2.0) {
        let v = [x, y];
        let sharp_wide = profile_eval(TruncationProfile::Sharp, 2.0 * eps, &v, None, 1).unwrap();
        let smooth = profile_eval(TruncationProfile::Smooth, eps, &v, None, 1).unwrap();
        let sharp_narrow = profile_eval(TruncationProfile::Sharp, eps / 2.0, &v, None, 1).unwrap();
        prop_assert!(sharp_wide <= smooth && smooth <= sharp_narrow);
    }

    #[test]
    fn smooth_profile_is_monotone(r in 0.0f64..3.0, dr in 0.0f64..1.0, eps in 0.05f64..2.0, de in 0.0f64..1.0) {
        let at = |radius: f64, e: f64| profile_eval(TruncationProfile::Smooth, e, &[radius, 0.0], None, 1).unwrap();
        prop_assert!(at(r, eps) <= at(r + dr, eps));
        prop_assert!(at(r, eps + de) <= at(r, eps));
    }

    #[test]
    fn transform_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0, eps in 0.01f64..0.5) {
        let mu = random_cloud(seed, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let f: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = f.iter().zip(&g).map(|(u, v)| a * u + b * v).collect();
        let kernel = KernelSpec::riesz(1, 2);
        let x = [0.5, 0.5];
        let tf = truncated_transform(&mu, Some(&f), &kernel, &x, eps, TruncationProfile::Smooth).unwrap();
        let tg = truncated_transform(&mu, Some(&g), &kernel, &x, eps, TruncationProfile::Smooth).unwrap();
        let th = truncated_transform(&mu, Some(&h), &kernel, &x, eps, TruncationProfile::Smooth).unwrap();
        for c in 0..2 {
            let expected = a * tf[c] + b * tg[c];
            let scale = a.abs() * tf[c].abs() + b.abs() * tg[c].abs() + 1e-300;
            prop_assert!((th[c] - expected).abs() <= 1e-12 * scale.max(th[c].abs()) + 1e-13);
        }
    }

    #[test]
    fn symmetric_measures_give_zero(seed in any::<u64>(), eps in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for _ in 0..8 {
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let w = rng.gen_range(0.1..1.0);
            coords.extend([x[0] + v[0], x[1] + v[1], x[0] - v[0], x[1] - v[1]]);
            weights.extend([w, w]);
        }
        let mu = DiscreteMeasure::new(1, 2, coords, weights, "symmetric").unwrap();
        for profile in [TruncationProfile::Sharp, TruncationProfile::Smooth] {
            let v = truncated_transform(&mu, None, &KernelSpec::riesz(1, 2), &x, eps, profile).unwrap();
            prop_assert!(v.iter().all(|c| c.abs() <= 1e-12));
        }
    }
}
