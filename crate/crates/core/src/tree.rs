//! Binary CART classifier with Gini splits and Laplace-smoothed leaves.
//!
//! This is the origin discriminator behind [`crate::shift`], but it works on
//! any dataset with two classes. Split selection compares candidates with
//! exact integer arithmetic, so the grown tree does not depend on row order.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_impurity_decrease: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_samples_split: 10,
            min_impurity_decrease: 1e-7,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be positive"));
        }
        if self.min_samples_split == 0 {
            return Err(Error::invalid("min_samples_split must be positive"));
        }
        if !(self.min_impurity_decrease >= 0.0 && self.min_impurity_decrease.is_finite()) {
            return Err(Error::invalid(
                "min_impurity_decrease must be a finite nonnegative number",
            ));
        }
        Ok(())
    }
}

/// Rows matching the rule go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SplitRule {
    /// `x <= value`
    Threshold { value: f64 },
    /// `x == index`, one category against the rest.
    Category { index: usize, code: String },
}

impl SplitRule {
    fn goes_left(&self, x: f64) -> bool {
        match self {
            SplitRule::Threshold { value } => x <= *value,
            SplitRule::Category { index, .. } => x == *index as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        feature_name: String,
        rule: SplitRule,
        impurity_decrease: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        /// Training rows of class 0 and class 1 that reached this leaf.
        counts: [u64; 2],
        /// `(count + 1) / (total + 2)` per class.
        probabilities: [f64; 2],
    },
}

impl Node {
    fn leaf(counts: [u64; 2]) -> Node {
        let total = (counts[0] + counts[1]) as f64 + 2.0;
        Node::Leaf {
            counts,
            probabilities: [
                (counts[0] as f64 + 1.0) / total,
                (counts[1] as f64 + 1.0) / total,
            ],
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn visit<'a>(&'a self, out: &mut Vec<&'a Node>) {
        out.push(self);
        if let Node::Split { left, right, .. } = self {
            left.visit(out);
            right.visit(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Feature layout the tree was fit on (no label column).
    schema: FeatureSchema,
    /// Class names; `predict_proba` returns the probability of `classes[1]`.
    classes: [String; 2],
    params: TreeParams,
    root: Node,
}

/// Fits a tree on a dataset whose labels take exactly two values. The
/// lexicographically larger label is class 1.
pub fn fit_tree(ds: &Dataset, params: &TreeParams) -> Result<DecisionTree> {
    let labels = ds.require_labels()?;
    let classes: BTreeSet<&String> = labels.iter().collect();
    if classes.len() != 2 {
        return Err(Error::invalid(format!(
            "tree needs exactly two classes, found {}",
            classes.len()
        )));
    }
    let mut it = classes.into_iter();
    let negative = it.next().unwrap().clone();
    let positive = it.next().unwrap().clone();
    let targets: Vec<bool> = labels.iter().map(|l| *l == positive).collect();
    let rows: Vec<usize> = (0..ds.len()).collect();
    DecisionTree::fit_rows(ds, &targets, &rows, [negative, positive], params)
}

impl DecisionTree {
    /// Fits on the subset `rows` of `ds` with boolean targets (indexed like
    /// `ds`). Labels stored in `ds` are ignored.
    pub fn fit_rows(
        ds: &Dataset,
        targets: &[bool],
        rows: &[usize],
        classes: [String; 2],
        params: &TreeParams,
    ) -> Result<DecisionTree> {
        params.validate()?;
        if targets.len() != ds.len() {
            return Err(Error::invalid(format!(
                "{} targets for {} rows",
                targets.len(),
                ds.len()
            )));
        }
        let positives = rows.iter().filter(|&&i| targets[i]).count();
        if rows.len() < 2 || positives == 0 || positives == rows.len() {
            return Err(Error::invalid(
                "tree needs both classes present in the training rows",
            ));
        }
        let schema = ds.schema().without_label();
        let builder = Builder {
            ds,
            targets,
            params,
            categories: schema
                .features()
                .map(|c| match &c.kind {
                    ColumnKind::Categorical { categories } => Some(categories.clone()),
                    ColumnKind::Continuous => None,
                })
                .collect(),
            names: schema.features().map(|c| c.name.clone()).collect(),
        };
        let root = builder.grow(rows.to_vec(), 0);
        Ok(DecisionTree {
            schema,
            classes,
            params: *params,
            root,
        })
    }

    pub fn classes(&self) -> &[String; 2] {
        &self.classes
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn nodes(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.root.visit(&mut out);
        out
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes()
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Probability of class 1 at the leaf `row` lands in.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.schema.n_features() {
            return Err(Error::invalid(format!(
                "row has {} features, tree expects {}",
                row.len(),
                self.schema.n_features()
            )));
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("row contains NaN"));
        }
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { probabilities, .. } => return Ok(probabilities[1]),
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                    ..
                } => {
                    node = if rule.goes_left(row[*feature]) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Class-1 probabilities for every row; the dataset's feature columns
    /// must match the tree's.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if let Some(col) = self.schema.first_feature_mismatch(ds.schema()) {
            return Err(Error::Schema(format!(
                "feature column `{col}` does not match the tree's schema"
            )));
        }
        ds.rows().iter().map(|r| self.predict_proba(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<DecisionTree> {
        let tree: DecisionTree = serde_json::from_str(text)?;
        let width = tree.schema.n_features();
        for node in tree.nodes() {
            match node {
                Node::Split { feature, .. } if *feature >= width => {
                    return Err(Error::invalid(format!(
                        "split on missing feature {feature}"
                    )));
                }
                Node::Leaf { probabilities, .. }
                    if (probabilities[0] + probabilities[1] - 1.0).abs() > 1e-12 =>
                {
                    return Err(Error::invalid("leaf probabilities do not sum to 1"));
                }
                _ => {}
            }
        }
        Ok(tree)
    }
}

/// Sum of squared class counts over a side's size, kept as an exact
/// fraction: `(sq_left * n_right + sq_right * n_left) / (n_left * n_right)`.
/// A larger score means lower weighted child impurity.
#[derive(Debug, Clone, Copy)]
struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn new(left: [u64; 2], right: [u64; 2]) -> Self {
        let sq = |c: [u64; 2]| u128::from(c[0]).pow(2) + u128::from(c[1]).pow(2);
        let nl = u128::from(left[0] + left[1]);
        let nr = u128::from(right[0] + right[1]);
        SplitScore {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, other: &SplitScore) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    /// Gini decrease relative to a parent with class counts `parent`.
    fn gini_decrease(&self, parent: [u64; 2]) -> f64 {
        let n = (parent[0] + parent[1]) as f64;
        let parent_sq = (parent[0] as f64).powi(2) + (parent[1] as f64).powi(2);
        let value = (self.num as f64 / self.den as f64) / n - parent_sq / (n * n);
        value.max(0.0)
    }
}

struct Candidate {
    feature: usize,
    rule: SplitRule,
    score: SplitScore,
}

struct Builder<'a> {
    ds: &'a Dataset,
    targets: &'a [bool],
    params: &'a TreeParams,
    categories: Vec<Option<Vec<String>>>,
    names: Vec<String>,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> [u64; 2] {
        let pos = rows.iter().filter(|&&i| self.targets[i]).count() as u64;
        [rows.len() as u64 - pos, pos]
    }

    fn grow(&self, rows: Vec<usize>, depth: usize) -> Node {
        let counts = self.counts(&rows);
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || depth >= self.params.max_depth || rows.len() < self.params.min_samples_split {
            return Node::leaf(counts);
        }
        let Some(best) = self.best_split(&rows, counts) else {
            return Node::leaf(counts);
        };
        let decrease = best.score.gini_decrease(counts);
        if decrease < self.params.min_impurity_decrease {
            return Node::leaf(counts);
        }
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| best.rule.goes_left(self.ds.row(i)[best.feature]));
        Node::Split {
            feature: best.feature,
            feature_name: self.names[best.feature].clone(),
            rule: best.rule,
            impurity_decrease: decrease,
            left: Box::new(self.grow(left, depth + 1)),
            right: Box::new(self.grow(right, depth + 1)),
        }
    }

    /// Highest-scoring split; ties keep the lowest feature, then the lowest
    /// threshold or category.
    fn best_split(&self, rows: &[usize], counts: [u64; 2]) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        let mut offer = |c: Candidate| {
            if best
                .as_ref()
                .is_none_or(|b| c.score.cmp(&b.score) == Ordering::Greater)
            {
                best = Some(c);
            }
        };
        for feature in 0..self.names.len() {
            match &self.categories[feature] {
                None => self.threshold_candidates(rows, counts, feature, &mut offer),
                Some(codes) => self.category_candidates(rows, counts, feature, codes, &mut offer),
            }
        }
        best
    }

    fn threshold_candidates(
        &self,
        rows: &[usize],
        counts: [u64; 2],
        feature: usize,
        offer: &mut impl FnMut(Candidate),
    ) {
        let mut sorted: Vec<(f64, bool)> = rows
            .iter()
            .map(|&i| (self.ds.row(i)[feature], self.targets[i]))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0u64; 2];
        for w in 0..sorted.len() - 1 {
            left[usize::from(sorted[w].1)] += 1;
            let (lo, hi) = (sorted[w].0, sorted[w + 1].0);
            if lo == hi {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            offer(Candidate {
                feature,
                rule: SplitRule::Threshold {
                    value: midpoint(lo, hi),
                },
                score: SplitScore::new(left, right),
            });
        }
    }

    fn category_candidates(
        &self,
        rows: &[usize],
        counts: [u64; 2],
        feature: usize,
        codes: &[String],
        offer: &mut impl FnMut(Candidate),
    ) {
        let mut per_category = vec![[0u64; 2]; codes.len()];
        for &i in rows {
            let c = self.ds.row(i)[feature] as usize;
            per_category[c][usize::from(self.targets[i])] += 1;
        }
        let n = counts[0] + counts[1];
        for (index, left) in per_category.into_iter().enumerate() {
            let size = left[0] + left[1];
            if size == 0 || size == n {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            offer(Candidate {
                feature,
                rule: SplitRule::Category {
                    index,
                    code: codes[index].clone(),
                },
                score: SplitScore::new(left, right),
            });
        }
    }
}

/// A threshold `t` with `lo <= t < hi`, as close to the midpoint as `f64`
/// allows.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mut t = lo + (hi - lo) / 2.0;
    if !t.is_finite() {
        t = lo / 2.0 + hi / 2.0;
    }
    if t >= lo && t < hi {
        t
    } else {
        lo
    }
}
