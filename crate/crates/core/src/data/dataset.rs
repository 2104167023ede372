use std::collections::BTreeSet;

use super::schema::{ColumnKind, ColumnSpec, FeatureSchema};
use crate::error::{Error, Result};

/// Dense feature rows under a [`FeatureSchema`].
///
/// Each row holds one `f64` per feature column, in schema order (the label
/// column is split out into `labels`). Categorical cells store the index of
/// their code in the column's category list.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    /// `labels` must be present exactly when the schema names a label column.
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<String>>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let width = schema.n_features();
        let features: Vec<&ColumnSpec> = schema.features().collect();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::invalid(format!(
                    "row {i} has {} values, schema has {width} feature columns",
                    row.len()
                )));
            }
            for (value, col) in row.iter().zip(&features) {
                check_cell(*value, col).map_err(|msg| {
                    Error::invalid(format!("row {i}, column `{}`: {msg}", col.name))
                })?;
            }
        }
        match (&labels, schema.label_spec()) {
            (None, None) => {}
            (Some(labels), Some(spec)) => {
                if labels.len() != rows.len() {
                    return Err(Error::invalid(format!(
                        "{} labels for {} rows",
                        labels.len(),
                        rows.len()
                    )));
                }
                if let ColumnKind::Categorical { categories } = &spec.kind {
                    if let Some(bad) = labels.iter().find(|l| !categories.contains(l)) {
                        return Err(Error::invalid(format!(
                            "label `{bad}` is not a category of `{}`",
                            spec.name
                        )));
                    }
                }
            }
            (None, Some(spec)) => {
                return Err(Error::invalid(format!(
                    "schema names label column `{}` but no labels were given",
                    spec.name
                )))
            }
            (Some(_), None) => {
                return Err(Error::invalid(
                    "labels given but schema has no label column",
                ))
            }
        }
        if let Some(w) = &weights {
            check_weights(w, rows.len())?;
        }
        Ok(Dataset {
            schema,
            rows,
            labels,
            weights,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[String]> {
        self.labels()
            .ok_or_else(|| Error::invalid("dataset has no label column"))
    }

    /// Values of feature column `j`, one per row.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Rows at `indices` (repeats allowed), carrying labels and weights along.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Dataset> {
        check_weights(&weights, self.rows.len())?;
        self.weights = Some(weights);
        Ok(self)
    }

    /// Drops the label column from both schema and data.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            schema: self.schema.without_label(),
            rows: self.rows.clone(),
            labels: None,
            weights: self.weights.clone(),
        }
    }

    /// Appends `extra` rows with their labels; used by the oversamplers.
    pub(crate) fn extended(&self, extra_rows: Vec<Vec<f64>>, extra_labels: Vec<String>) -> Dataset {
        let mut out = self.clone();
        debug_assert_eq!(extra_rows.len(), extra_labels.len());
        out.rows.extend(extra_rows);
        if let Some(labels) = out.labels.as_mut() {
            labels.extend(extra_labels);
        }
        // synthetic rows carry no weight of their own
        out.weights = None;
        out
    }

    /// Distinct label values in sorted order.
    pub fn classes(&self) -> Result<Vec<String>> {
        let set: BTreeSet<&String> = self.require_labels()?.iter().collect();
        Ok(set.into_iter().cloned().collect())
    }
}

fn check_cell(value: f64, col: &ColumnSpec) -> std::result::Result<(), String> {
    match &col.kind {
        ColumnKind::Continuous if !value.is_finite() => Err(format!("non-finite value {value}")),
        ColumnKind::Continuous => Ok(()),
        ColumnKind::Categorical { categories } => {
            if value.fract() == 0.0 && value >= 0.0 && (value as usize) < categories.len() {
                Ok(())
            } else {
                Err(format!("category index {value} out of range"))
            }
        }
    }
}

pub(crate) fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::invalid(format!(
            "{} weights for {n} rows",
            weights.len()
        )));
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::invalid(format!(
            "weight {bad} is not a finite nonnegative number"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                ColumnSpec::continuous("x"),
                ColumnSpec::categorical("c", ["u", "v"]),
                ColumnSpec::categorical("y", ["a", "b"]),
            ],
            Some("y".into()),
        )
        .unwrap()
    }

    #[test]
    fn enforces_row_invariants() {
        let ok = Dataset::new(schema(), vec![vec![1.0, 1.0]], Some(vec!["a".into()]), None);
        assert!(ok.is_ok());
        let nan = Dataset::new(
            schema(),
            vec![vec![f64::NAN, 0.0]],
            Some(vec!["a".into()]),
            None,
        );
        assert!(nan.is_err());
        let bad_cat = Dataset::new(schema(), vec![vec![0.0, 2.0]], Some(vec!["a".into()]), None);
        assert!(bad_cat.is_err());
        let ragged = Dataset::new(schema(), vec![vec![0.0]], Some(vec!["a".into()]), None);
        assert!(ragged.is_err());
        let bad_label = Dataset::new(schema(), vec![vec![0.0, 0.0]], Some(vec!["z".into()]), None);
        assert!(bad_label.is_err());
        let missing_labels = Dataset::new(schema(), vec![vec![0.0, 0.0]], None, None);
        assert!(missing_labels.is_err());
    }

    #[test]
    fn rejects_negative_weights() {
        let ds =
            Dataset::new(schema(), vec![vec![1.0, 0.0]], Some(vec!["a".into()]), None).unwrap();
        assert!(ds.clone().with_weights(vec![-1.0]).is_err());
        assert!(ds.clone().with_weights(vec![1.0, 2.0]).is_err());
        assert!(ds.with_weights(vec![0.5]).is_ok());
    }

    #[test]
    fn subset_carries_labels() {
        let ds = Dataset::new(
            schema(),
            vec![vec![1.0, 0.0], vec![2.0, 1.0]],
            Some(vec!["a".into(), "b".into()]),
            None,
        )
        .unwrap();
        let sub = ds.subset(&[1, 1]);
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.labels().unwrap(), &["b".to_string(), "b".to_string()]);
        assert_eq!(ds.classes().unwrap(), vec!["a", "b"]);
        assert_eq!(ds.without_labels().n_features(), 2);
    }
}
