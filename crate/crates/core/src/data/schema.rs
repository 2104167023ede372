use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    /// Values are codes drawn from `categories`; a cell stores the code's
    /// position in this list.
    Categorical {
        categories: Vec<String>,
    },
}

impl ColumnKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    /// Index of `code` in this column's category list.
    pub fn category_index(&self, code: &str) -> Option<usize> {
        match &self.kind {
            ColumnKind::Categorical { categories } => categories.iter().position(|c| c == code),
            ColumnKind::Continuous => None,
        }
    }
}

/// Ordered column declarations plus the optional name of the label column.
///
/// The JSON form is
/// `{"columns": [{"name": "x", "kind": "continuous"},
///               {"name": "y", "kind": "categorical", "categories": ["a", "b"]}],
///   "label_column": "y"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct FeatureSchema {
    columns: Vec<ColumnSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_column: Option<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    columns: Vec<ColumnSpec>,
    #[serde(default)]
    label_column: Option<String>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        FeatureSchema::new(raw.columns, raw.label_column)
    }
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>, label_column: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for col in &columns {
            if col.name.is_empty() {
                return Err(Error::Schema("column names must be non-empty".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", col.name)));
            }
            if let ColumnKind::Categorical { categories } = &col.kind {
                let mut codes = HashSet::new();
                if let Some(dup) = categories.iter().find(|c| !codes.insert(c.as_str())) {
                    return Err(Error::Schema(format!(
                        "column `{}` lists category `{dup}` twice",
                        col.name
                    )));
                }
            }
        }
        if let Some(label) = &label_column {
            if !seen.contains(label.as_str()) {
                return Err(Error::Schema(format!(
                    "label column `{label}` is not a declared column"
                )));
            }
        }
        Ok(FeatureSchema {
            columns,
            label_column,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// All declared columns, label included, in declaration order.
    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn label_column(&self) -> Option<&str> {
        self.label_column.as_deref()
    }

    pub fn label_spec(&self) -> Option<&ColumnSpec> {
        let label = self.label_column.as_deref()?;
        self.columns.iter().find(|c| c.name == label)
    }

    fn is_label(&self, col: &ColumnSpec) -> bool {
        self.label_column.as_deref() == Some(col.name.as_str())
    }

    /// Non-label columns in declaration order; row vectors follow this order.
    pub fn features(&self) -> impl Iterator<Item = &ColumnSpec> + '_ {
        self.columns.iter().filter(move |c| !self.is_label(c))
    }

    pub fn feature(&self, index: usize) -> Option<&ColumnSpec> {
        self.features().nth(index)
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - usize::from(self.label_column.is_some())
    }

    pub fn has_categorical_features(&self) -> bool {
        self.features().any(|c| c.kind.is_categorical())
    }

    /// The same schema with the label column removed.
    pub fn without_label(&self) -> FeatureSchema {
        FeatureSchema {
            columns: self.features().cloned().collect(),
            label_column: None,
        }
    }

    /// The feature columns of `self` followed by `label` as the label column.
    pub fn with_label(&self, label: ColumnSpec) -> Result<FeatureSchema> {
        let mut columns: Vec<ColumnSpec> = self.features().cloned().collect();
        let name = label.name.clone();
        columns.push(label);
        FeatureSchema::new(columns, Some(name))
    }

    /// Name of the first feature column where `self` and `other` disagree,
    /// ignoring label columns. `None` when the feature layouts match.
    pub fn first_feature_mismatch(&self, other: &FeatureSchema) -> Option<String> {
        let mut a = self.features();
        let mut b = other.features();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return None,
                (Some(x), Some(y)) if x == y => continue,
                (Some(x), _) => return Some(x.name.clone()),
                (None, Some(y)) => return Some(y.name.clone()),
            }
        }
    }
}
