//! Covariate-shift detection and correction.
//!
//! Rows of the training set are tagged `s = 1` and rows of the test set
//! `s = 0`; a decision tree is then trained to predict `s`. If the two sets
//! come from one distribution the tree cannot beat chance, so its
//! cross-validated Matthews correlation measures how far apart they are.
//! The same discriminator's odds `p(s=0|x) / p(s=1|x)`, rescaled by the
//! set sizes, estimate the density ratio `p_test(x) / p_train(x)` used as
//! importance weights.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, ColumnSpec, Dataset};
use crate::error::{Error, Result};
use crate::imbalance::WeightVector;
use crate::metrics::{confusion, mcc};
use crate::rng;
use crate::tree::{DecisionTree, TreeParams};

/// Magnitude below this is reported as no shift.
pub const WEAK_THRESHOLD: f64 = 0.2;
/// Magnitude at or above this is reported as strong shift.
pub const STRONG_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    None,
    Weak,
    Strong,
}

impl Verdict {
    pub fn from_magnitude(magnitude: f64) -> Verdict {
        if magnitude < WEAK_THRESHOLD {
            Verdict::None
        } else if magnitude < STRONG_THRESHOLD {
            Verdict::Weak
        } else {
            Verdict::Strong
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::None => "none",
            Verdict::Weak => "weak",
            Verdict::Strong => "strong",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    /// Mean fold MCC clamped to `[0, 1]`.
    pub magnitude: f64,
    pub fold_mccs: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    /// `KL(test || train)` of each feature's smoothed histogram.
    pub per_feature_kl: BTreeMap<String, f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftOptions {
    pub tree: TreeParams,
    pub folds: usize,
    /// Histogram bins for continuous features in the KL estimate.
    pub kl_bins: usize,
    pub seed: u64,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        ShiftOptions {
            tree: TreeParams::default(),
            folds: 5,
            kl_bins: 10,
            seed: 42,
        }
    }
}

/// Train and test rows stacked, with the origin flag as the label column
/// (`"1"` for training rows, `"0"` for test rows).
#[derive(Debug, Clone, PartialEq)]
pub struct OriginLabeledData {
    data: Dataset,
    n_train: usize,
}

impl OriginLabeledData {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_test(&self) -> usize {
        self.data.len() - self.n_train
    }

    /// `true` for training-origin rows.
    pub fn origins(&self) -> Vec<bool> {
        (0..self.data.len()).map(|i| i < self.n_train).collect()
    }
}

pub const ORIGIN_COLUMN: &str = "s";

pub fn tag_origin(train: &Dataset, test: &Dataset) -> Result<OriginLabeledData> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("both train and test sets must be non-empty"));
    }
    if let Some(col) = train.schema().first_feature_mismatch(test.schema()) {
        return Err(Error::Schema(format!(
            "train and test differ at feature column `{col}`"
        )));
    }
    let features = train.schema().without_label();
    let mut origin_name = ORIGIN_COLUMN.to_string();
    while features.columns().iter().any(|c| c.name == origin_name) {
        origin_name.insert(0, '_');
    }
    let schema = features.with_label(ColumnSpec::categorical(origin_name, ["0", "1"]))?;
    let rows: Vec<Vec<f64>> = train.rows().iter().chain(test.rows()).cloned().collect();
    let labels = std::iter::repeat_n("1".to_string(), train.len())
        .chain(std::iter::repeat_n("0".to_string(), test.len()))
        .collect();
    Ok(OriginLabeledData {
        data: Dataset::new(schema, rows, Some(labels), None)?,
        n_train: train.len(),
    })
}

/// Fold index for every row such that each class is spread evenly across
/// the `k` folds. Each class is shuffled with its own seeded stream.
pub fn stratified_folds(targets: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    let mut folds = vec![0; targets.len()];
    for (stream, class) in [false, true].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..targets.len())
            .filter(|&i| targets[i] == class)
            .collect();
        if members.len() < k {
            return Err(Error::invalid(format!(
                "too few rows for {k} folds: a class has only {} rows",
                members.len()
            )));
        }
        members.shuffle(&mut rng::substream(seed, stream as u64));
        for (pos, i) in members.into_iter().enumerate() {
            folds[i] = pos % k;
        }
    }
    Ok(folds)
}

/// Cross-validated origin discriminator. Each fold's tree predicts
/// training origin when `p(s=1|x) > 0.5`.
pub fn detect_shift(train: &Dataset, test: &Dataset, opts: &ShiftOptions) -> Result<ShiftReport> {
    opts.tree.validate()?;
    let origin = tag_origin(train, test)?;
    let targets = origin.origins();
    let folds = stratified_folds(&targets, opts.folds, opts.seed)?;
    let data = origin.data();
    let classes = ["0".to_string(), "1".to_string()];

    let fold_mccs = (0..opts.folds)
        .into_par_iter()
        .map(|fold| {
            let (held, fit): (Vec<usize>, Vec<usize>) =
                (0..data.len()).partition(|&i| folds[i] == fold);
            let tree = DecisionTree::fit_rows(data, &targets, &fit, classes.clone(), &opts.tree)?;
            let predicted = held
                .iter()
                .map(|&i| Ok(tree.predict_proba(data.row(i))? > 0.5))
                .collect::<Result<Vec<bool>>>()?;
            let truth: Vec<bool> = held.iter().map(|&i| targets[i]).collect();
            mcc(&confusion(&predicted, &truth)?)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mean = fold_mccs.iter().sum::<f64>() / fold_mccs.len() as f64;
    let magnitude = mean.clamp(0.0, 1.0);

    let mut per_feature_kl = BTreeMap::new();
    for (j, col) in train.schema().features().enumerate() {
        let a = train.column(j);
        let b = test.column(j);
        let kl = match &col.kind {
            ColumnKind::Continuous => kl_histogram(&a, &b, opts.kl_bins)?,
            ColumnKind::Categorical { categories } => kl_categorical(&a, &b, categories.len())?,
        };
        per_feature_kl.insert(col.name.clone(), kl);
    }

    Ok(ShiftReport {
        magnitude,
        fold_mccs,
        n_train: train.len(),
        n_test: test.len(),
        per_feature_kl,
        verdict: Verdict::from_magnitude(magnitude),
    })
}

/// `KL(P_test || P_train)` between Laplace-smoothed (add-one) histograms of
/// one continuous feature, with `bins` equal-width bins over the pooled
/// range.
pub fn kl_histogram(train: &[f64], test: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::invalid("continuous KL needs at least 2 bins"));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("KL needs at least one value on each side"));
    }
    if train.iter().chain(test).any(|v| !v.is_finite()) {
        return Err(Error::invalid("KL values must be finite"));
    }
    let (lo, hi) = train
        .iter()
        .chain(test)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let width = (hi - lo) / bins as f64;
    let bin_of = |v: f64| {
        if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        }
    };
    let histogram = |values: &[f64]| {
        let mut h = vec![0u64; bins];
        for &v in values {
            h[bin_of(v)] += 1;
        }
        h
    };
    Ok(smoothed_kl(&histogram(test), &histogram(train)))
}

/// Categorical counterpart of [`kl_histogram`]: values are category indices
/// and each of the `n_categories` categories is its own bin.
pub fn kl_categorical(train: &[f64], test: &[f64], n_categories: usize) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("KL needs at least one value on each side"));
    }
    let histogram = |values: &[f64]| -> Result<Vec<u64>> {
        let mut h = vec![0u64; n_categories];
        for &v in values {
            if !(v >= 0.0 && v.fract() == 0.0 && (v as usize) < n_categories) {
                return Err(Error::invalid(format!("category index {v} out of range")));
            }
            h[v as usize] += 1;
        }
        Ok(h)
    };
    Ok(smoothed_kl(&histogram(test)?, &histogram(train)?))
}

/// `sum p ln(p/q)` with `p = (count_p + 1) / (n_p + B)` and likewise `q`.
fn smoothed_kl(p_counts: &[u64], q_counts: &[u64]) -> f64 {
    let bins = p_counts.len() as f64;
    let np: u64 = p_counts.iter().sum();
    let nq: u64 = q_counts.iter().sum();
    let kl: f64 = p_counts
        .iter()
        .zip(q_counts)
        .map(|(&a, &b)| {
            let p = (a as f64 + 1.0) / (np as f64 + bins);
            let q = (b as f64 + 1.0) / (nq as f64 + bins);
            p * (p / q).ln()
        })
        .sum();
    kl.max(0.0)
}

/// Density-ratio weights for the training rows,
/// `w = p(s=0|x) / p(s=1|x) * n_train / n_test`, from one origin
/// discriminator fit on all rows. Leaf smoothing keeps every weight finite
/// and positive.
///
/// Fitting is deterministic, so `seed` does not change the result; it is
/// accepted so every correction step carries a seed in its provenance.
pub fn importance_weights(
    train: &Dataset,
    test: &Dataset,
    params: &TreeParams,
    _seed: u64,
) -> Result<WeightVector> {
    let origin = tag_origin(train, test)?;
    let targets = origin.origins();
    let all: Vec<usize> = (0..targets.len()).collect();
    let tree = DecisionTree::fit_rows(
        origin.data(),
        &targets,
        &all,
        ["0".to_string(), "1".to_string()],
        params,
    )?;
    let prior = train.len() as f64 / test.len() as f64;
    let weights = (0..train.len())
        .map(|i| {
            let p_train = tree.predict_proba(origin.data().row(i))?;
            Ok((1.0 - p_train) / p_train * prior)
        })
        .collect::<Result<Vec<f64>>>()?;
    WeightVector::new(weights)
}

/// Keeps row `i` with probability `weights[i] / max(weights)`. One uniform
/// draw is consumed per row, in row order.
pub fn rejection_sample(ds: &Dataset, weights: &WeightVector, seed: u64) -> Result<Dataset> {
    if weights.len() != ds.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} rows",
            weights.len(),
            ds.len()
        )));
    }
    let max = weights.as_slice().iter().copied().fold(0.0, f64::max);
    let mut rng = rng::seeded(seed);
    let keep: Vec<usize> = weights
        .as_slice()
        .iter()
        .enumerate()
        .filter_map(|(i, &w)| {
            let u: f64 = rng.random();
            (u < w / max).then_some(i)
        })
        .collect();
    Ok(ds.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_mixture, FeatureSchema, MixtureComponent, MixtureSpec};

    fn blob(mean: f64, count: usize, seed: u64) -> Dataset {
        generate_mixture(&MixtureSpec {
            seed,
            components: vec![MixtureComponent {
                mean: vec![mean],
                std: vec![1.0],
                label: "a".into(),
                count,
            }],
        })
        .unwrap()
    }

    fn plain(values: &[f64]) -> Dataset {
        let schema = FeatureSchema::new(vec![ColumnSpec::continuous("x")], None).unwrap();
        Dataset::new(
            schema,
            values.iter().map(|&v| vec![v]).collect(),
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn tag_origin_counts_and_strips_labels() {
        let train = blob(0.0, 100, 1);
        let test = blob(0.0, 50, 2);
        let tagged = tag_origin(&train, &test).unwrap();
        assert_eq!(tagged.data().len(), 150);
        assert_eq!(tagged.n_train(), 100);
        assert_eq!(tagged.n_test(), 50);
        let labels = tagged.data().labels().unwrap();
        assert_eq!(labels.iter().filter(|l| *l == "1").count(), 100);
        assert_eq!(labels.iter().filter(|l| *l == "0").count(), 50);
        assert_eq!(tagged.data().n_features(), 1);
        assert!(tagged
            .data()
            .schema()
            .columns()
            .iter()
            .all(|c| c.name != "label"));
    }

    #[test]
    fn tag_origin_errors() {
        let train = blob(0.0, 10, 1);
        let other_schema = FeatureSchema::new(vec![ColumnSpec::continuous("y")], None).unwrap();
        let other = Dataset::new(other_schema, vec![vec![1.0]], None, None).unwrap();
        let err = tag_origin(&train, &other).unwrap_err();
        assert!(err.to_string().contains("`x0`"), "{err}");
        assert!(tag_origin(&train, &train.subset(&[])).is_err());
    }

    #[test]
    fn origin_column_avoids_feature_names() {
        let schema = FeatureSchema::new(vec![ColumnSpec::continuous("s")], None).unwrap();
        let ds = Dataset::new(schema, vec![vec![1.0]], None, None).unwrap();
        let tagged = tag_origin(&ds, &ds).unwrap();
        assert_eq!(tagged.data().schema().label_column(), Some("_s"));
    }

    #[test]
    fn folds_are_stratified() {
        let targets: Vec<bool> = (0..103).map(|i| i % 3 == 0).collect();
        let folds = stratified_folds(&targets, 5, 9).unwrap();
        for f in 0..5 {
            let pos = (0..103).filter(|&i| folds[i] == f && targets[i]).count();
            let neg = (0..103).filter(|&i| folds[i] == f && !targets[i]).count();
            assert!((6..=7).contains(&pos), "fold {f}: {pos}");
            assert!((13..=14).contains(&neg), "fold {f}: {neg}");
        }
        assert_eq!(folds, stratified_folds(&targets, 5, 9).unwrap());
        assert!(stratified_folds(&targets[..4], 5, 9).is_err());
        assert!(stratified_folds(&targets, 1, 9).is_err());
    }

    #[test]
    fn disjoint_gaussians_are_strong_shift() {
        let report = detect_shift(
            &blob(-5.0, 1000, 3),
            &blob(5.0, 1000, 4),
            &ShiftOptions::default(),
        )
        .unwrap();
        assert!(report.magnitude >= 0.9, "{report:?}");
        assert_eq!(report.verdict, Verdict::Strong);
        assert_eq!(report.fold_mccs.len(), 5);
        assert!(report.per_feature_kl["x0"] > 1.0);
    }

    #[test]
    fn same_distribution_is_no_shift() {
        let report = detect_shift(
            &blob(0.0, 1000, 5),
            &blob(0.0, 1000, 6),
            &ShiftOptions::default(),
        )
        .unwrap();
        assert!(report.magnitude <= 0.15, "{report:?}");
        assert_eq!(report.verdict, Verdict::None);
    }

    #[test]
    fn too_few_rows_for_folds() {
        let err = detect_shift(
            &blob(0.0, 3, 1),
            &blob(0.0, 30, 2),
            &ShiftOptions::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn verdict_thresholds() {
        assert_eq!(Verdict::from_magnitude(0.0), Verdict::None);
        assert_eq!(Verdict::from_magnitude(0.1999), Verdict::None);
        assert_eq!(Verdict::from_magnitude(0.2), Verdict::Weak);
        assert_eq!(Verdict::from_magnitude(0.5999), Verdict::Weak);
        assert_eq!(Verdict::from_magnitude(0.6), Verdict::Strong);
        assert_eq!(serde_json::to_string(&Verdict::Weak).unwrap(), "\"weak\"");
    }

    #[test]
    fn kl_identical_is_zero() {
        let x = [0.3, 1.7, -2.0, 5.5, 0.3];
        assert_eq!(kl_histogram(&x, &x, 4).unwrap(), 0.0);
        assert_eq!(kl_histogram(&[2.0, 2.0], &[2.0, 2.0], 3).unwrap(), 0.0);
    }

    #[test]
    fn kl_hand_summation() {
        // pooled range [0, 3], 3 bins of width 1.
        // train counts [2, 1, 1] -> q = [3, 2, 2] / 7
        // test counts  [0, 1, 3] -> p = [1, 2, 4] / 7
        let train = [0.1, 0.5, 1.5, 2.5];
        let test = [1.2, 2.2, 2.9, 3.0];
        let p: [f64; 3] = [1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0];
        let q = [3.0 / 7.0, 2.0 / 7.0, 2.0 / 7.0];
        let expected: f64 = p.iter().zip(&q).map(|(p, q)| p * (p / q).ln()).sum();
        let got = kl_histogram(&train, &test, 3).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn kl_unseen_bin_is_finite() {
        let train = vec![0.0; 500];
        let test = vec![10.0; 500];
        let kl = kl_histogram(&train, &test, 10).unwrap();
        assert!(kl.is_finite() && kl > 3.0, "{kl}");
    }

    #[test]
    fn kl_errors_and_categorical() {
        assert!(kl_histogram(&[1.0], &[2.0], 1).is_err());
        assert!(kl_histogram(&[], &[2.0], 3).is_err());
        assert_eq!(kl_categorical(&[0.0, 1.0], &[0.0, 1.0], 3).unwrap(), 0.0);
        // test all category 1, train all category 0, 2 categories:
        // p = [1, 3] / 4, q = [3, 1] / 4
        let kl = kl_categorical(&[0.0, 0.0], &[1.0, 1.0], 2).unwrap();
        let expected = 0.25 * (1.0f64 / 3.0).ln() + 0.75 * 3.0f64.ln();
        assert!((kl - expected).abs() < 1e-15);
        assert!(kl_categorical(&[2.0], &[0.0], 2).is_err());
    }

    #[test]
    fn importance_weights_single_leaf_are_equal() {
        // identical sets: no split improves Gini, tree is one leaf with p = 0.5
        let train = plain(&[1.0, 2.0, 3.0, 4.0]);
        let w = importance_weights(&train, &train.clone(), &TreeParams::default(), 0).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn importance_weights_near_one_without_shift() {
        let w = importance_weights(
            &blob(0.0, 1000, 7),
            &blob(0.0, 1000, 8),
            &TreeParams::default(),
            0,
        )
        .unwrap();
        let mean = w.as_slice().iter().sum::<f64>() / 1000.0;
        assert!((0.8..=1.25).contains(&mean), "{mean}");
        assert!(w.as_slice().iter().all(|&v| v > 0.0 && v.is_finite()));
    }

    #[test]
    fn rejection_sampling_examples() {
        let ds = plain(&(0..10).map(f64::from).collect::<Vec<_>>());
        let all = rejection_sample(&ds, &WeightVector::new(vec![2.0; 10]).unwrap(), 1).unwrap();
        assert_eq!(all, ds);

        let half: Vec<f64> = (0..10).map(|i| if i < 5 { 0.0 } else { 1.0 }).collect();
        let out = rejection_sample(&ds, &WeightVector::new(half).unwrap(), 1).unwrap();
        assert!(out.rows().iter().all(|r| r[0] >= 5.0));
        assert_eq!(out.len(), 5);

        assert!(rejection_sample(&ds, &WeightVector::new(vec![1.0; 3]).unwrap(), 1).is_err());
    }

    #[test]
    fn rejection_sampling_binomial_count() {
        let ds = plain(&(0..2000).map(f64::from).collect::<Vec<_>>());
        let w: Vec<f64> = (0..2000)
            .map(|i| if i < 1000 { 1.0 } else { 0.5 })
            .collect();
        let out = rejection_sample(&ds, &WeightVector::new(w).unwrap(), 77).unwrap();
        let first = out.rows().iter().filter(|r| r[0] < 1000.0).count();
        let second = out.len() - first;
        assert_eq!(first, 1000);
        // Binomial(1000, 0.5): sd = sqrt(250) ~ 15.8, 5 sd ~ 79
        assert!((second as i64 - 500).abs() <= 79, "{second}");
    }
}
