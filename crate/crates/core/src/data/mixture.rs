use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::schema::{ColumnSpec, FeatureSchema};
use crate::error::{Error, Result};
use crate::rng;

/// One axis-aligned Gaussian blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub label: String,
    pub count: usize,
}

/// `{"seed": u64, "components": [{"mean": [..], "std": [..], "label": "..", "count": n}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub seed: u64,
    pub components: Vec<MixtureComponent>,
}

impl MixtureSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MixtureSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .components
            .first()
            .ok_or_else(|| Error::invalid("mixture has no components"))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::invalid(
                "mixture components need at least one dimension",
            ));
        }
        for (i, c) in self.components.iter().enumerate() {
            if c.mean.len() != dim || c.std.len() != dim {
                return Err(Error::invalid(format!(
                    "component {i}: mean and std must both have {dim} entries"
                )));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::invalid(format!("component {i}: non-finite mean")));
            }
            if c.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::invalid(format!(
                    "component {i}: standard deviations must be positive"
                )));
            }
            if c.count == 0 {
                return Err(Error::invalid(format!("component {i}: count must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }
}

/// Draws every component's examples in declaration order. Features are
/// named `x0..x{d-1}`; the label column `label` lists component labels in
/// first-appearance order.
pub fn generate_mixture(spec: &MixtureSpec) -> Result<Dataset> {
    spec.validate()?;
    let dim = spec.dim();
    let mut categories: Vec<String> = Vec::new();
    for c in &spec.components {
        if !categories.contains(&c.label) {
            categories.push(c.label.clone());
        }
    }
    let mut columns: Vec<ColumnSpec> = (0..dim)
        .map(|i| ColumnSpec::continuous(format!("x{i}")))
        .collect();
    columns.push(ColumnSpec::categorical("label", categories));
    let schema = FeatureSchema::new(columns, Some("label".into()))?;

    let mut rng = rng::seeded(spec.seed);
    let total: usize = spec.components.iter().map(|c| c.count).sum();
    let mut rows = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for c in &spec.components {
        for _ in 0..c.count {
            let row = c
                .mean
                .iter()
                .zip(&c.std)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + s * z
                })
                .collect();
            rows.push(row);
            labels.push(c.label.clone());
        }
    }
    Dataset::new(schema, rows, Some(labels), None)
}
