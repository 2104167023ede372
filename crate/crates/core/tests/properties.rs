use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use biaskit::data::{generate_mixture, read_csv, write_csv_to};
use biaskit::imbalance::{random_oversample, random_undersample, WeightVector};
use biaskit::metrics::{icc, mcc, roc_curve, ConfusionMatrix};
use biaskit::shift::{
    detect_shift, importance_weights, kl_histogram, rejection_sample, ShiftOptions,
};
use biaskit::tree::{fit_tree, Node, SplitRule};
use biaskit::{ColumnSpec, Dataset, FeatureSchema, MixtureComponent, MixtureSpec, TreeParams};

fn labeled_schema(n_features: usize, classes: &[&str]) -> FeatureSchema {
    let mut columns: Vec<ColumnSpec> = (0..n_features)
        .map(|j| ColumnSpec::continuous(format!("f{j}")))
        .collect();
    columns.push(ColumnSpec::categorical("y", classes.iter().copied()));
    FeatureSchema::new(columns, Some("y".into())).unwrap()
}

fn binary_dataset(rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Dataset {
    let width = rows[0].len();
    let labels = labels
        .into_iter()
        .map(|l| if l { "b" } else { "a" }.to_string())
        .collect();
    Dataset::new(labeled_schema(width, &["a", "b"]), rows, Some(labels), None).unwrap()
}

fn unconstrained() -> TreeParams {
    TreeParams {
        max_depth: usize::MAX,
        min_samples_split: 2,
        min_impurity_decrease: 0.0,
    }
}

fn gaussian(mean: f64, count: usize, seed: u64) -> Dataset {
    generate_mixture(&MixtureSpec {
        seed,
        components: vec![MixtureComponent {
            mean: vec![mean, 0.0],
            std: vec![1.0, 1.0],
            label: "x".into(),
            count,
        }],
    })
    .unwrap()
    .without_labels()
}

/// Sum over children of `2ab/n` (the size-weighted child Gini) as an exact
/// fraction `(num, den)`.
fn weighted_child_gini(sides: [[u64; 2]; 2]) -> (u128, u128) {
    let term = |c: [u64; 2]| {
        (
            2 * u128::from(c[0]) * u128::from(c[1]),
            u128::from(c[0] + c[1]),
        )
    };
    let (a, na) = term(sides[0]);
    let (b, nb) = term(sides[1]);
    (a * nb + b * na, na * nb)
}

proptest! {
    #[test]
    fn mcc_bounded_and_antisymmetric(tp in 0u64..5000, fp in 0u64..5000, tn in 0u64..5000, fn_ in 0u64..5000) {
        let cm = ConfusionMatrix::new(tp, fp, tn, fn_);
        prop_assume!(cm.total() > 0);
        let m = mcc(&cm).unwrap();
        prop_assert!((-1.0..=1.0).contains(&m));
        let flipped = mcc(&cm.flipped_predictions()).unwrap();
        prop_assert!((m + flipped).abs() <= 1e-12);
    }

    #[test]
    fn roc_is_monotone_from_origin_to_corner(
        pairs in prop::collection::vec((0u8..20, any::<bool>()), 2..60)
    ) {
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let scores: Vec<f64> = pairs.iter().map(|p| f64::from(p.0) / 20.0).collect();
        let curve = roc_curve(&scores, &labels).unwrap();
        let pts = curve.points();
        prop_assert_eq!(pts[0], (0.0, 0.0));
        prop_assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        for w in pts.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn icc_in_unit_interval_and_affine_invariant(
        groups in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 1..8), 2..6),
        shift in -50.0f64..50.0,
        scale in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
    ) {
        let base = icc(&groups).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let shifted: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| v + shift).collect()).collect();
        let scaled: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| v * scale).collect()).collect();
        prop_assert!((icc(&shifted).unwrap() - base).abs() < 1e-6);
        prop_assert!((icc(&scaled).unwrap() - base).abs() < 1e-6);
    }

    #[test]
    fn csv_round_trip(
        rows in prop::collection::vec((-1e6f64..1e6, -1e-3f64..1e-3, 0usize..3), 0..40)
    ) {
        let schema = FeatureSchema::new(
            vec![
                ColumnSpec::continuous("u"),
                ColumnSpec::continuous("v"),
                ColumnSpec::categorical("c", ["p", "q", "r"]),
            ],
            None,
        ).unwrap();
        let data: Vec<Vec<f64>> = rows.iter().map(|&(u, v, c)| vec![u, v, c as f64]).collect();
        let ds = Dataset::new(schema.clone(), data, None, None).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &schema).unwrap();
        prop_assert_eq!(back.rows(), ds.rows());
    }

    #[test]
    fn tree_is_invariant_to_row_order(
        rows in prop::collection::vec(((0u8..6), (0u8..6), any::<bool>()), 12..50),
        perm_seed in any::<u64>(),
    ) {
        let labels: Vec<bool> = rows.iter().map(|r| r.2).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let features: Vec<Vec<f64>> = rows.iter().map(|r| vec![f64::from(r.0), f64::from(r.1)]).collect();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut rng = biaskit::rng::seeded(perm_seed);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let original = binary_dataset(features.clone(), labels.clone());
        let permuted = binary_dataset(
            order.iter().map(|&i| features[i].clone()).collect(),
            order.iter().map(|&i| labels[i]).collect(),
        );
        let params = TreeParams { min_samples_split: 4, ..TreeParams::default() };
        prop_assert_eq!(
            fit_tree(&original, &params).unwrap(),
            fit_tree(&permuted, &params).unwrap()
        );
    }

    #[test]
    fn unconstrained_tree_fits_training_data(
        points in prop::collection::btree_map(((0u8..30), (0u8..30)), any::<bool>(), 2..60)
    ) {
        let labels: Vec<bool> = points.values().copied().collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let rows: Vec<Vec<f64>> = points.keys().map(|&(a, b)| vec![f64::from(a), f64::from(b)]).collect();
        let ds = binary_dataset(rows.clone(), labels.clone());
        let tree = fit_tree(&ds, &unconstrained()).unwrap();
        for (row, label) in rows.iter().zip(&labels) {
            prop_assert_eq!(tree.predict_proba(row).unwrap() > 0.5, *label);
        }
    }

    #[test]
    fn accepted_splits_meet_min_decrease(
        rows in prop::collection::vec(((0u8..10), (0u8..10), any::<bool>()), 10..80),
        min_decrease in 0.0f64..0.1,
    ) {
        let labels: Vec<bool> = rows.iter().map(|r| r.2).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let features = rows.iter().map(|r| vec![f64::from(r.0), f64::from(r.1)]).collect();
        let params = TreeParams { min_impurity_decrease: min_decrease, min_samples_split: 2, ..TreeParams::default() };
        let tree = fit_tree(&binary_dataset(features, labels), &params).unwrap();
        for node in tree.nodes() {
            if let Node::Split { impurity_decrease, .. } = node {
                prop_assert!(*impurity_decrease >= min_decrease);
            }
        }
    }

    #[test]
    fn root_split_matches_exhaustive_oracle(
        n_features in 1usize..=3,
        cells in prop::collection::vec((prop::collection::vec(any::<bool>(), 3), any::<bool>()), 2..=30),
    ) {
        let labels: Vec<bool> = cells.iter().map(|c| c.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let rows: Vec<Vec<f64>> = cells
            .iter()
            .map(|c| c.0[..n_features].iter().map(|&b| f64::from(u8::from(b))).collect())
            .collect();

        // every (feature, 0-vs-1) split with both sides non-empty
        let mut best: Option<(usize, (u128, u128))> = None;
        for f in 0..n_features {
            let mut sides = [[0u64; 2]; 2];
            for (row, &label) in rows.iter().zip(&labels) {
                sides[usize::from(row[f] > 0.5)][usize::from(label)] += 1;
            }
            if sides.iter().any(|s| s[0] + s[1] == 0) {
                continue;
            }
            let g = weighted_child_gini(sides);
            if best.is_none_or(|(_, b)| g.0 * b.1 < b.0 * g.1) {
                best = Some((f, g));
            }
        }

        let tree = fit_tree(&binary_dataset(rows, labels), &TreeParams {
            max_depth: 1,
            ..unconstrained()
        }).unwrap();
        match (best, tree.root()) {
            (None, Node::Leaf { .. }) => {}
            (Some((f, _)), Node::Split { feature, rule: SplitRule::Threshold { value }, .. }) => {
                prop_assert_eq!(*feature, f);
                prop_assert_eq!(*value, 0.5);
            }
            (expected, root) => prop_assert!(false, "oracle {:?}, tree root {:?}", expected, root),
        }
    }

    #[test]
    fn under_and_oversample_keep_input_rows(
        counts in prop::collection::vec(1usize..25, 2..5),
        seed in any::<u64>(),
    ) {
        let names: Vec<String> = (0..counts.len()).map(|c| format!("k{c}")).collect();
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &count) in counts.iter().enumerate() {
            for i in 0..count {
                rows.push(vec![c as f64, i as f64]);
                labels.push(names[c].clone());
            }
        }
        let ds = Dataset::new(labeled_schema(2, &name_refs), rows, Some(labels), None).unwrap();
        let originals: BTreeSet<(Vec<u64>, String)> = (0..ds.len())
            .map(|i| (ds.row(i).iter().map(|v| v.to_bits()).collect(), ds.labels().unwrap()[i].clone()))
            .collect();
        let k = counts.len();
        let min = *counts.iter().min().unwrap();
        let max = *counts.iter().max().unwrap();
        for (out, size) in [
            (random_undersample(&ds, seed).unwrap(), k * min),
            (random_oversample(&ds, seed).unwrap(), k * max),
        ] {
            prop_assert_eq!(out.len(), size);
            for i in 0..out.len() {
                let key = (out.row(i).iter().map(|v| v.to_bits()).collect(), out.labels().unwrap()[i].clone());
                prop_assert!(originals.contains(&key));
            }
            let mut per_class: BTreeMap<&String, usize> = BTreeMap::new();
            for l in out.labels().unwrap() {
                *per_class.entry(l).or_default() += 1;
            }
            prop_assert!(per_class.values().all(|&c| c == size / k));
        }
    }

    #[test]
    fn rejection_sample_is_monotone_in_non_maximal_weights(
        weights in prop::collection::vec(0.01f64..10.0, 2..60),
        index in any::<prop::sample::Index>(),
        bump in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let n = weights.len();
        let schema = FeatureSchema::new(vec![ColumnSpec::continuous("x")], None).unwrap();
        let ds = Dataset::new(schema, (0..n).map(|i| vec![i as f64]).collect(), None, None).unwrap();
        let max = weights.iter().copied().fold(0.0, f64::max);
        let i = index.index(n);
        let mut raised = weights.clone();
        // stay at or below the maximum so the acceptance scale is unchanged
        raised[i] += bump * (max - raised[i]);
        let before = rejection_sample(&ds, &WeightVector::new(weights).unwrap(), seed).unwrap();
        let after = rejection_sample(&ds, &WeightVector::new(raised).unwrap(), seed).unwrap();
        prop_assert!(after.len() >= before.len());
    }

    #[test]
    fn kl_of_identical_samples_is_zero(
        values in prop::collection::vec(-1e3f64..1e3, 1..100),
        bins in 2usize..30,
    ) {
        prop_assert_eq!(kl_histogram(&values, &values, bins).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn importance_weights_are_positive_and_finite(
        shift in -3.0f64..3.0,
        n_train in 20usize..200,
        n_test in 20usize..200,
        seed in any::<u64>(),
    ) {
        let train = gaussian(0.0, n_train, seed);
        let test = gaussian(shift, n_test, seed.wrapping_add(1));
        let w = importance_weights(&train, &test, &TreeParams::default(), seed).unwrap();
        prop_assert_eq!(w.len(), n_train);
        prop_assert!(w.as_slice().iter().all(|&v| v > 0.0 && v.is_finite()));
    }
}

#[test]
fn detect_shift_is_symmetric_on_calibration_fixtures() {
    for run in 0..5 {
        let a = gaussian(0.0, 1000, 100 + 2 * run);
        let b = gaussian(0.0, 1000, 101 + 2 * run);
        let opts = ShiftOptions {
            seed: run,
            ..ShiftOptions::default()
        };
        let forward = detect_shift(&a, &b, &opts).unwrap().magnitude;
        let backward = detect_shift(&b, &a, &opts).unwrap().magnitude;
        assert!(
            (forward - backward).abs() <= 0.1,
            "run {run}: {forward} vs {backward}"
        );
    }
}

#[test]
fn correction_drops_disjoint_shift_below_strong() {
    // two disjoint clusters; train favours the left one, test the right one
    let cluster = |seed, left, right| {
        generate_mixture(&MixtureSpec {
            seed,
            components: vec![
                MixtureComponent {
                    mean: vec![-6.0, 0.0],
                    std: vec![1.0, 1.0],
                    label: "x".into(),
                    count: left,
                },
                MixtureComponent {
                    mean: vec![6.0, 0.0],
                    std: vec![1.0, 1.0],
                    label: "x".into(),
                    count: right,
                },
            ],
        })
        .unwrap()
        .without_labels()
    };
    let train = cluster(1, 900, 300);
    let test = cluster(2, 100, 700);
    let opts = ShiftOptions::default();
    let before = detect_shift(&train, &test, &opts).unwrap().magnitude;
    let weights = importance_weights(&train, &test, &TreeParams::default(), 0).unwrap();
    let corrected = rejection_sample(&train, &weights, 0).unwrap();
    let after = detect_shift(&corrected, &test, &opts).unwrap();
    assert!(after.magnitude < before, "{before} -> {}", after.magnitude);
    assert_ne!(after.verdict, biaskit::Verdict::Strong);
}
