//! Datasets: typed schema, dense rows, optional labels and weights.

mod csv;
mod dataset;
mod idx;
mod mixture;
mod schema;

pub use self::csv::{load_csv, read_csv, write_csv, write_csv_to};
pub use dataset::Dataset;
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IdxImages};
pub use mixture::{generate_mixture, MixtureComponent, MixtureSpec};
pub use schema::{ColumnKind, ColumnSpec, FeatureSchema};
