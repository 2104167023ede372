//! Binary classifier metrics.
//!
//! [`accuracy`] and [`recall`] are here mostly to show how they mislead on
//! skewed data; [`mcc`], [`roc_curve`]/[`auc`] and [`icc`] are the ones that
//! account for class imbalance.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The matrix obtained by inverting every prediction.
    pub fn flipped_predictions(&self) -> Self {
        ConfusionMatrix {
            tp: self.fn_,
            fp: self.tn,
            tn: self.fp,
            fn_: self.tp,
        }
    }

    fn non_empty(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::invalid("confusion matrix is empty"));
        }
        Ok(())
    }
}

pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.non_empty()?;
    Ok((cm.tp + cm.tn) as f64 / cm.total() as f64)
}

pub fn recall(cm: &ConfusionMatrix) -> Result<f64> {
    let positives = cm.tp + cm.fn_;
    if positives == 0 {
        return Err(Error::invalid("recall undefined: no actual positives"));
    }
    Ok(cm.tp as f64 / positives as f64)
}

/// Matthews correlation coefficient in `[-1, 1]`.
///
/// When any marginal (`tp+fp`, `tp+fn`, `tn+fp`, `tn+fn`) is zero the
/// coefficient is undefined and `0.0` is returned.
pub fn mcc(cm: &ConfusionMatrix) -> Result<f64> {
    cm.non_empty()?;
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let marginals = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if marginals.contains(&0.0) {
        return Ok(0.0);
    }
    let denom = marginals.iter().product::<f64>().sqrt();
    let value = (tp * tn - fp * fn_) / denom;
    Ok(value.clamp(-1.0, 1.0))
}

/// ROC points from `(0,0)` to `(1,1)`, monotone in both coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Validates and wraps a point list `(fpr, tpr)`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.first() != Some(&(0.0, 0.0)) || points.last() != Some(&(1.0, 1.0)) {
            return Err(Error::invalid("ROC curve must run from (0,0) to (1,1)"));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if points.iter().any(|&(x, y)| !in_unit(x) || !in_unit(y)) {
            return Err(Error::invalid("ROC coordinates must lie in [0,1]"));
        }
        if points
            .windows(2)
            .any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1)
        {
            return Err(Error::invalid("ROC curve must be non-decreasing"));
        }
        Ok(RocCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// `fpr,tpr` header followed by one line per point.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "fpr,tpr")?;
        for (x, y) in &self.points {
            writeln!(out, "{x},{y}")?;
        }
        Ok(())
    }
}

/// Sweeps the decision threshold over each distinct score, highest first.
/// Examples sharing a score cross the threshold together.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("ROC needs both classes present"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::with_capacity(order.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    RocCurve::new(points)
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Intraclass correlation from a one-way random-effects ANOVA: the share of
/// total variance lying between groups,
/// `s2_between / (s2_between + s2_within)`.
///
/// `s2_within` is the within-group mean square and
/// `s2_between = (MSB - MSW) / n0` with `n0 = (N - sum(n_i^2)/N) / (k - 1)`
/// the effective group size (equal to `n` for balanced groups). A negative
/// between-group estimate is clamped to zero, so the result lies in `[0, 1]`.
pub fn icc(groups: &[Vec<f64>]) -> Result<f64> {
    if groups.len() < 2 {
        return Err(Error::invalid("ICC needs at least two groups"));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::invalid("ICC groups must be non-empty"));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("ICC values must be finite"));
    }
    let k = groups.len() as f64;
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let n = n_total as f64;
    let grand = groups.iter().flatten().sum::<f64>() / n;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand).powi(2);
        ss_within += g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    if ss_between + ss_within == 0.0 {
        return Err(Error::invalid("ICC undefined: zero total variance"));
    }

    let ms_between = ss_between / (k - 1.0);
    // all singleton groups leave no within-group degrees of freedom
    let ms_within = if n_total > groups.len() {
        ss_within / (n - k)
    } else {
        0.0
    };
    let sum_sq_sizes: f64 = groups.iter().map(|g| (g.len() as f64).powi(2)).sum();
    let n0 = (n - sum_sq_sizes / n) / (k - 1.0);

    let var_between = ((ms_between - ms_within) / n0).max(0.0);
    let var_within = ms_within;
    if var_between + var_within == 0.0 {
        return Ok(0.0);
    }
    Ok((var_between / (var_between + var_within)).clamp(0.0, 1.0))
}
