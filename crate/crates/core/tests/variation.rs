mod common;

use proptest::prelude::*;
use rectilab::measure::generate_segment;
use rectilab::operators::{evaluate_family, maximal_transform, outer_scale, GridSpec};
use rectilab::variation::{
    compose_variation, evaluate_witness, norm_ratio_probe, octave_of, oscillation, rho_variation,
    short_long_variation, TestFunction, Values,
};
use rectilab::{DiscreteMeasure, Error, KernelSpec, ScaleGrid, TruncationProfile, VariationMode};

#[test]
fn constant_and_two_value_sequences() {
    for rho in [1.0, 1.5, 2.0, 3.0] {
        assert_eq!(
            rho_variation(Values::scalar(&[0.7; 6]), rho).unwrap().0,
            0.0
        );
        assert!(
            (rho_variation(Values::scalar(&[0.25, -1.5]), rho).unwrap().0 - 1.75).abs() < 1e-15
        );
    }
}

#[test]
fn up_and_down() {
    let (v2, w2) = rho_variation(Values::scalar(&[0.0, 1.0, 0.0]), 2.0).unwrap();
    assert!((v2 - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(w2, vec![0, 1, 2]);
    assert_eq!(v2, common::brute_force_variation(&[0.0, 1.0, 0.0], 1, 2.0));
    let (v1, _) = rho_variation(Values::scalar(&[0.0, 1.0, 0.0]), 1.0).unwrap();
    assert_eq!(v1, 2.0);
}

#[test]
fn small_rho_is_unsupported() {
    assert!(matches!(
        rho_variation(Values::scalar(&[0.0, 1.0]), 0.9),
        Err(Error::Unsupported(_))
    ));
    assert!(matches!(
        short_long_variation(Values::scalar(&[0.0, 1.0]), &[1.0, 0.5], 0.5),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn oscillation_examples() {
    let scales = [0.9, 0.8, 0.7, 0.4, 0.3];
    let r = [1.0, 0.5, 0.25];
    assert_eq!(
        oscillation(Values::scalar(&[3.0; 5]), &scales, &r).unwrap(),
        0.0
    );
    assert_eq!(
        oscillation(Values::scalar(&[0.0, 1.0, 0.0]), &scales[..3], &r[..2]).unwrap(),
        1.0
    );
    let values = [0.0, 1.0, 0.5, 2.0, 0.0];
    let o = oscillation(Values::scalar(&values), &scales, &r).unwrap();
    assert!((o - 5f64.sqrt()).abs() < 1e-15);
    // Pair enumeration on 2-vectors.
    let vecs = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0];
    let o = oscillation(Values::new(&vecs, 2).unwrap(), &scales, &r).unwrap();
    assert!((o - 5f64.sqrt()).abs() < 1e-15);
    assert!(matches!(
        oscillation(Values::scalar(&values), &scales, &[0.5, 1.0]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn short_long_single_octave_and_one_per_octave() {
    let values = [0.0, 1.0, -0.5, 0.25];
    let full = rho_variation(Values::scalar(&values), 2.0).unwrap().0;
    let (s, l) =
        short_long_variation(Values::scalar(&values), &[0.9, 0.8, 0.6, 0.55], 2.0).unwrap();
    assert_eq!(l, 0.0);
    assert!((s - full).abs() < 1e-15);
    let (s, l) = short_long_variation(Values::scalar(&values), &[0.9, 0.4, 0.2, 0.1], 2.0).unwrap();
    assert_eq!(s, 0.0);
    assert!((l - full).abs() < 1e-15);
}

#[test]
fn octaves_follow_half_open_intervals() {
    assert_eq!(octave_of(0.5), 0);
    assert_eq!(octave_of(0.999), 0);
    assert_eq!(octave_of(1.0), -1);
    assert_eq!(octave_of(0.4999), 1);
    for s in [0.3, 0.5, 0.75, 1.0, 3.0, 1e-3] {
        assert_eq!(octave_of(s), common::octave(s));
    }
}

#[test]
fn short_long_match_exhaustive_search() {
    let mut rng = common::rng(12);
    for _ in 0..20 {
        let scales = common::random_scales(&mut rng, 12, 3);
        let g = scales.len();
        for arity in [1, 2] {
            let values = common::random_values(&mut rng, g, arity);
            for rho in [1.0, 2.0, 3.0] {
                let vals = Values::new(&values, arity).unwrap();
                let (s, l) = short_long_variation(vals, &scales, rho).unwrap();
                let (bs, bl) = common::brute_force_short_long(&values, arity, &scales, rho);
                assert!(
                    (s - bs).abs() <= 1e-12 * (1.0 + bs) && (l - bl).abs() <= 1e-12 * (1.0 + bl)
                );
                let full = rho_variation(vals, rho).unwrap().0;
                assert!(full <= s + l + 1e-12);
            }
        }
    }
}

fn small_family(profile: TruncationProfile) -> (DiscreteMeasure, rectilab::FamilyEvaluation) {
    let mut rng = common::rng(3);
    let coords = common::random_values(&mut rng, 30, 2)
        .iter()
        .map(|v| 0.5 + 0.5 * v)
        .collect();
    let mu = DiscreteMeasure::new(1, 2, coords, vec![1.0 / 30.0; 30], "cloud").unwrap();
    let grid = match profile {
        TruncationProfile::Sharp => GridSpec::PointBreakpoints,
        _ => GridSpec::Shared(ScaleGrid::dyadic(outer_scale(&mu), mu.min_spacing(), 8).unwrap()),
    };
    let fam = evaluate_family(&mu, None, &KernelSpec::riesz(1, 2), profile, &grid).unwrap();
    (mu, fam)
}

#[test]
fn composed_variation_dominates_the_maximal_transform() {
    for profile in [TruncationProfile::Sharp, TruncationProfile::Smooth] {
        let (mu, fam) = small_family(profile);
        let res = compose_variation(&fam, mu.weights(), 3.0, VariationMode::Full, None).unwrap();
        for (row, v) in fam.rows.iter().zip(&res.values) {
            assert!(maximal_transform(row, 2) <= *v * (1.0 + 1e-12));
        }
        let row = &fam.rows[7];
        let direct = rho_variation(Values::new(&row.values, 2).unwrap(), 3.0)
            .unwrap()
            .0;
        assert_eq!(res.values[7], direct);
        let l2: f64 = res
            .values
            .iter()
            .zip(mu.weights())
            .map(|(v, w)| v * v * w)
            .sum::<f64>()
            .sqrt();
        assert!((res.l2_norm - l2).abs() < 1e-12);
    }
}

#[test]
fn zero_input_gives_zero_field() {
    let mu = generate_segment(2, 32).unwrap();
    let zero = vec![0.0; 32];
    let grid = GridSpec::Shared(ScaleGrid::dyadic(outer_scale(&mu), mu.min_spacing(), 4).unwrap());
    let fam = evaluate_family(
        &mu,
        Some(&zero),
        &KernelSpec::riesz(1, 2),
        TruncationProfile::Smooth,
        &grid,
    )
    .unwrap();
    let res = compose_variation(&fam, mu.weights(), 2.0, VariationMode::Full, None).unwrap();
    assert!(res.values.iter().all(|&v| v == 0.0));
    assert_eq!(res.l2_norm, 0.0);
}

#[test]
fn probe_degenerate_cases() {
    let mu = generate_segment(2, 32).unwrap();
    let grid = GridSpec::Shared(ScaleGrid::dyadic(outer_scale(&mu), mu.min_spacing(), 4).unwrap());
    let zero = norm_ratio_probe(
        &mu,
        &KernelSpec::zero(1, 2),
        TruncationProfile::Smooth,
        3.0,
        &grid,
        &[TestFunction::Constant],
        None,
    )
    .unwrap();
    assert_eq!(zero.ratio, 0.0);
    let atom = DiscreteMeasure::new(1, 2, vec![0.5, 0.5], vec![1.0], "atom").unwrap();
    let single = norm_ratio_probe(
        &atom,
        &KernelSpec::riesz(1, 2),
        TruncationProfile::Sharp,
        3.0,
        &GridSpec::PointBreakpoints,
        &[
            TestFunction::Constant,
            TestFunction::Rademacher { count: 3, seed: 4 },
        ],
        None,
    )
    .unwrap();
    assert_eq!(single.ratio, 0.0);
}

#[test]
fn probe_is_stable_on_flat_graphs() {
    let ratio = |res: usize| {
        let mu = generate_segment(2, res).unwrap();
        norm_ratio_probe(
            &mu,
            &KernelSpec::riesz(1, 2),
            TruncationProfile::Sharp,
            3.0,
            &GridSpec::PointBreakpoints,
            &[TestFunction::Constant],
            None,
        )
        .unwrap()
        .ratio
    };
    let (coarse, fine) = (ratio(64), ratio(128));
    assert!(coarse > 0.0);
    assert!(
        (0.5 * fine..=1.5 * fine).contains(&coarse),
        "{coarse} vs {fine}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_equals_exhaustive_search(seed in any::<u64>(), g in 1usize..=10, arity in 1usize..=2, rho_index in 0usize..3) {
        let rho = [1.0, 2.0, 3.0][rho_index];
        let values = common::random_values(&mut common::rng(seed), g, arity);
        let (v, witness) = rho_variation(Values::new(&values, arity).unwrap(), rho).unwrap();
        prop_assert_eq!(v, common::brute_force_variation(&values, arity, rho));
        prop_assert_eq!(evaluate_witness(Values::new(&values, arity).unwrap(), rho, &witness), v);
    }

    #[test]
    fn variation_decreases_in_rho(seed in any::<u64>(), g in 1usize..80, rho in 1.0f64..4.0, extra in 0.0f64..3.0) {
        let values = common::random_values(&mut common::rng(seed), g, 2);
        let vals = Values::new(&values, 2).unwrap();
        let low = rho_variation(vals, rho).unwrap().0;
        let high = rho_variation(vals, rho + extra).unwrap().0;
        prop_assert!(high <= low * (1.0 + 1e-12));
    }

    #[test]
    fn split_bounds_the_full_variation(seed in any::<u64>(), g in 2usize..100, rho in 1.0f64..4.0) {
        let mut rng = common::rng(seed);
        let scales = common::random_scales(&mut rng, g, 6);
        let values = common::random_values(&mut rng, scales.len(), 1);
        let vals = Values::scalar(&values);
        let (s, l) = short_long_variation(vals, &scales, rho).unwrap();
        prop_assert!(rho_variation(vals, rho).unwrap().0 <= (s + l) * (1.0 + 1e-12));
    }

    #[test]
    fn refinement_never_decreases_variation(seed in any::<u64>(), g in 2usize..120, keep in 0.1f64..0.9) {
        let mut rng = common::rng(seed);
        let values = common::random_values(&mut rng, g, 1);
        let subset: Vec<f64> = values.iter().enumerate().filter(|(i, _)| (*i as f64 * keep).fract() < keep).map(|(_, v)| *v).collect();
        prop_assume!(!subset.is_empty());
        let coarse = rho_variation(Values::scalar(&subset), 2.5).unwrap().0;
        let fine = rho_variation(Values::scalar(&values), 2.5).unwrap().0;
        prop_assert!(coarse <= fine * (1.0 + 1e-12));
    }

    #[test]
    fn witnesses_reproduce_the_value(seed in any::<u64>(), g in 1usize..200, rho in 1.0f64..4.0) {
        let values = common::random_values(&mut common::rng(seed), g, 2);
        let vals = Values::new(&values, 2).unwrap();
        let (v, witness) = rho_variation(vals, rho).unwrap();
        prop_assert!(witness.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(evaluate_witness(vals, rho, &witness).to_bits(), v.to_bits());
    }
}
