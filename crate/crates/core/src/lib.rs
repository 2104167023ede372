//! Dataset bias auditing and correction.
//!
//! Two biases are covered. Class imbalance is measured with metrics that stay
//! honest under skewed label distributions ([`metrics`]) and corrected by
//! per-class weighting or resampling ([`imbalance`]). Covariate shift is
//! detected by training a decision tree ([`tree`]) to tell training rows from
//! test rows; its cross-validated Matthews correlation is the shift magnitude,
//! and its class probabilities give importance weights for correction
//! ([`shift`]).

pub mod cli;
pub mod data;
pub mod error;
pub mod imbalance;
pub mod metrics;
pub mod rng;
pub mod shift;
pub mod tree;

pub use data::{ColumnKind, ColumnSpec, Dataset, FeatureSchema, MixtureComponent, MixtureSpec};
pub use error::{Error, Result};
pub use imbalance::{ImbalanceReport, WeightVector};
pub use metrics::{ConfusionMatrix, RocCurve};
pub use shift::{ShiftOptions, ShiftReport, Verdict};
pub use tree::{DecisionTree, TreeParams};
