//! Class-imbalance measurement and correction.
//!
//! Correction either reweights examples so each class carries its target
//! share of the total mass ([`class_weights`]) or resamples rows
//! ([`random_undersample`], [`random_oversample`], [`smote`]).

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on `sum(target) == 1` for target distributions.
pub const TARGET_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceReport {
    pub n: usize,
    pub class_counts: BTreeMap<String, usize>,
    /// Present only for weighted distributions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_mass: Option<BTreeMap<String, f64>>,
    pub proportions: BTreeMap<String, f64>,
    /// Largest over smallest nonzero class share.
    pub imbalance_ratio: f64,
    pub majority_class: String,
    pub minority_class: String,
}

/// Nonnegative per-example weights, at least one of them positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct WeightVector {
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawWeights {
    weights: Vec<f64>,
}

impl TryFrom<RawWeights> for WeightVector {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        WeightVector::new(raw.weights)
    }
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!(
                "weight {bad} is not a finite nonnegative number"
            )));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::invalid("all weights are zero"));
        }
        Ok(WeightVector { weights })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.weights
    }

    /// One `weight` column, rows aligned with the input dataset.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "weight")?;
        for w in &self.weights {
            writeln!(out, "{w}")?;
        }
        Ok(())
    }
}

fn class_counts(labels: &[String]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for l in labels {
        *counts.entry(l.clone()).or_insert(0) += 1;
    }
    counts
}

fn report_from_mass(
    n: usize,
    class_counts: BTreeMap<String, usize>,
    mass: BTreeMap<String, f64>,
    weighted: bool,
) -> Result<ImbalanceReport> {
    let total: f64 = mass.values().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::invalid("total class mass is zero"));
    }
    let proportions: BTreeMap<String, f64> =
        mass.iter().map(|(c, m)| (c.clone(), m / total)).collect();

    // first class in sorted order wins ties
    let mut majority: Option<(&String, f64)> = None;
    let mut minority: Option<(&String, f64)> = None;
    for (c, &m) in &mass {
        if majority.is_none_or(|(_, best)| m > best) {
            majority = Some((c, m));
        }
        if m > 0.0 && minority.is_none_or(|(_, best)| m < best) {
            minority = Some((c, m));
        }
    }
    let (majority, max_mass) = majority.expect("non-empty");
    let (minority, min_mass) = minority.expect("positive total mass");

    Ok(ImbalanceReport {
        n,
        class_counts,
        class_mass: weighted.then_some(mass.clone()),
        proportions,
        imbalance_ratio: max_mass / min_mass,
        majority_class: majority.clone(),
        minority_class: minority.clone(),
    })
}

/// Empirical class counts and proportions.
pub fn class_distribution(labels: &[String]) -> Result<ImbalanceReport> {
    if labels.is_empty() {
        return Err(Error::invalid("no labels"));
    }
    let counts = class_counts(labels);
    let mass = counts.iter().map(|(c, &n)| (c.clone(), n as f64)).collect();
    report_from_mass(labels.len(), counts, mass, false)
}

/// Class shares measured by weight mass instead of row counts.
pub fn effective_distribution(
    labels: &[String],
    weights: &WeightVector,
) -> Result<ImbalanceReport> {
    if labels.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} weights",
            labels.len(),
            weights.len()
        )));
    }
    let mut mass: BTreeMap<String, f64> = BTreeMap::new();
    for (l, &w) in labels.iter().zip(weights.as_slice()) {
        *mass.entry(l.clone()).or_insert(0.0) += w;
    }
    report_from_mass(labels.len(), class_counts(labels), mass, true)
}

/// Uniform target over the given classes.
pub fn uniform_target<'a>(classes: impl IntoIterator<Item = &'a String>) -> BTreeMap<String, f64> {
    let classes: Vec<&String> = classes.into_iter().collect();
    let share = 1.0 / classes.len() as f64;
    classes.into_iter().map(|c| (c.clone(), share)).collect()
}

/// Parses `uniform` or a list like `a=0.25,b=0.75`.
pub fn parse_target(text: &str, labels: &[String]) -> Result<BTreeMap<String, f64>> {
    if text.trim() == "uniform" {
        return Ok(uniform_target(class_counts(labels).keys()));
    }
    let mut target = BTreeMap::new();
    for part in text.split(',') {
        let (class, share) = part
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("target entry `{part}` is not class=share")))?;
        let share: f64 = share
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("target share `{share}` is not a number")))?;
        target.insert(class.trim().to_string(), share);
    }
    Ok(target)
}

/// Per-example weights `target(y) / p_train(y)`: the test/train probability
/// ratio when only the label distribution differs. Weights are not
/// normalized to mean one.
pub fn class_weights(
    train_labels: &[String],
    target: &BTreeMap<String, f64>,
) -> Result<WeightVector> {
    if train_labels.is_empty() {
        return Err(Error::invalid("no training labels"));
    }
    if let Some((c, p)) = target.iter().find(|(_, p)| !p.is_finite() || **p < 0.0) {
        return Err(Error::invalid(format!(
            "target share {p} for `{c}` is invalid"
        )));
    }
    let sum: f64 = target.values().sum();
    if (sum - 1.0).abs() > TARGET_SUM_TOLERANCE {
        return Err(Error::invalid(format!(
            "target is not a distribution: shares sum to {sum}"
        )));
    }
    let counts = class_counts(train_labels);
    if let Some(missing) = counts.keys().find(|c| !target.contains_key(*c)) {
        return Err(Error::invalid(format!(
            "class `{missing}` is missing from the target distribution"
        )));
    }
    if let Some((c, _)) = target
        .iter()
        .find(|(c, p)| **p > 0.0 && !counts.contains_key(*c))
    {
        return Err(Error::invalid(format!(
            "target puts mass on class `{c}`, which has no training examples"
        )));
    }
    let n = train_labels.len() as f64;
    let per_class: BTreeMap<&String, f64> = counts
        .iter()
        .map(|(c, &count)| (c, target[c] * n / count as f64))
        .collect();
    WeightVector::new(train_labels.iter().map(|l| per_class[l]).collect())
}

/// Row indices grouped by class, classes in sorted order.
fn indices_by_class(labels: &[String]) -> BTreeMap<&String, Vec<usize>> {
    let mut groups: BTreeMap<&String, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

fn labeled_groups(ds: &Dataset) -> Result<BTreeMap<&String, Vec<usize>>> {
    let labels = ds.require_labels()?;
    let groups = indices_by_class(labels);
    if groups.len() < 2 {
        return Err(Error::invalid("resampling needs at least two classes"));
    }
    Ok(groups)
}

/// Downsamples every class, uniformly without replacement, to the minority
/// count. Kept rows stay in input order.
pub fn random_undersample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let groups = labeled_groups(ds)?;
    let min = groups.values().map(Vec::len).min().unwrap_or(0);
    let mut rng = rng::seeded(seed);
    let mut keep = Vec::with_capacity(min * groups.len());
    for members in groups.values() {
        let picked = index::sample(&mut rng, members.len(), min);
        keep.extend(picked.iter().map(|p| members[p]));
    }
    keep.sort_unstable();
    Ok(ds.subset(&keep))
}

/// Upsamples every class, by copying random rows of that class with
/// replacement, to the majority count. Originals come first, then copies
/// grouped by class.
pub fn random_oversample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let groups = labeled_groups(ds)?;
    let max = groups.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for members in groups.values() {
        for _ in members.len()..max {
            order.push(members[rng.random_range(0..members.len())]);
        }
    }
    Ok(ds.subset(&order))
}

/// Target counts that lift every class to the majority count.
pub fn balanced_counts(labels: &[String]) -> BTreeMap<String, usize> {
    let counts = class_counts(labels);
    let max = counts.values().copied().max().unwrap_or(0);
    counts.into_keys().map(|c| (c, max)).collect()
}

/// Synthetic minority oversampling.
///
/// Each synthetic row is `x + u * (nn - x)` where `x` is a random row of the
/// class being grown, `nn` one of its `k` nearest same-class neighbours
/// (Euclidean, ties by row order) and `u` uniform on `[0, 1)`. Classes absent
/// from `target_count` keep their size. Only continuous features are
/// supported.
pub fn smote(
    ds: &Dataset,
    k: usize,
    target_count: &BTreeMap<String, usize>,
    seed: u64,
) -> Result<Dataset> {
    let labels = ds.require_labels()?;
    if let Some(col) = ds.schema().features().find(|c| c.kind.is_categorical()) {
        return Err(Error::invalid(format!(
            "SMOTE cannot interpolate categorical feature `{}`",
            col.name
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let groups = indices_by_class(labels);
    for (class, &want) in target_count {
        let have = groups.get(class).map_or(0, Vec::len);
        if have == 0 {
            return Err(Error::invalid(format!("class `{class}` has no examples")));
        }
        if want < have {
            return Err(Error::invalid(format!(
                "target {want} for `{class}` is below its current count {have}"
            )));
        }
        if want > have {
            if have < 2 {
                return Err(Error::invalid(format!(
                    "class `{class}` needs at least 2 examples to interpolate"
                )));
            }
            if k > have - 1 {
                return Err(Error::invalid(format!(
                    "k = {k} exceeds the {} neighbours available in `{class}`",
                    have - 1
                )));
            }
        }
    }

    let mut rng = rng::seeded(seed);
    let mut extra_rows = Vec::new();
    let mut extra_labels = Vec::new();
    for (class, members) in &groups {
        let want = target_count.get(*class).copied().unwrap_or(members.len());
        if want == members.len() {
            continue;
        }
        let neighbours = nearest_neighbours(ds, members, k);
        for _ in members.len()..want {
            let base = rng.random_range(0..members.len());
            let nn = neighbours[base][rng.random_range(0..k)];
            let u: f64 = rng.random();
            let x = ds.row(members[base]);
            let y = ds.row(nn);
            extra_rows.push(x.iter().zip(y).map(|(a, b)| a + u * (b - a)).collect());
            extra_labels.push((*class).clone());
        }
    }
    Ok(ds.extended(extra_rows, extra_labels))
}

/// For each member, the row indices of its `k` nearest other members.
fn nearest_neighbours(ds: &Dataset, members: &[usize], k: usize) -> Vec<Vec<usize>> {
    members
        .iter()
        .map(|&i| {
            let mut dists: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (squared_distance(ds.row(i), ds.row(j)), j))
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dists.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}
