//! The `biaskit` command line.
//!
//! Machine-readable output goes to the `--out` file (and `--points`,
//! `--report`, `--tree-out` where offered); a short human summary goes to
//! stdout. Every JSON report carries a `provenance` object with the command,
//! its full effective configuration, the seed, and SHA-256 digests of the
//! input files.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{
    generate_mixture, load_csv, load_idx, write_csv, Dataset, FeatureSchema, MixtureSpec,
};
use crate::error::{Error, Result};
use crate::imbalance::{
    balanced_counts, class_distribution, class_weights, effective_distribution, parse_target,
    random_oversample, random_undersample, smote, WeightVector,
};
use crate::metrics::{accuracy, auc, confusion, mcc, recall, roc_curve};
use crate::shift::{detect_shift, importance_weights, ShiftOptions};
use crate::tree::{fit_tree, TreeParams};

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "BIASKIT_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "biaskit",
    version,
    about = "Audit and correct class imbalance and covariate shift"
)]
pub struct Cli {
    /// Seed for every random step; falls back to $BIASKIT_SEED, then 42.
    #[arg(long, global = true, env = SEED_ENV)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Class counts, proportions and imbalance ratio of a labeled dataset.
    AuditImbalance(AuditArgs),
    /// Cross-validated origin-discriminator MCC between two datasets.
    DetectShift(ShiftArgs),
    /// Rebalance classes by undersampling, oversampling or SMOTE.
    Resample(ResampleArgs),
    /// Per-row weights from class proportions or train/test density ratios.
    Weigh(WeighArgs),
    /// ROC points, AUC and thresholded MCC from a predictions file.
    Roc(RocArgs),
    /// Sample a Gaussian-mixture dataset from a JSON spec.
    Generate(GenerateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct AuditArgs {
    /// Labeled CSV input (requires --schema).
    #[arg(long, conflicts_with_all = ["idx_images", "idx_labels"])]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// IDX image file (requires --idx-labels).
    #[arg(long, requires = "idx_labels")]
    pub idx_images: Option<PathBuf>,
    #[arg(long, requires = "idx_images")]
    pub idx_labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Clone, Copy)]
pub struct TreeArgs {
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 10)]
    pub min_samples_split: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub min_impurity_decrease: f64,
}

impl From<TreeArgs> for TreeParams {
    fn from(a: TreeArgs) -> Self {
        TreeParams {
            max_depth: a.max_depth,
            min_samples_split: a.min_samples_split,
            min_impurity_decrease: a.min_impurity_decrease,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ShiftArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Histogram bins per continuous feature for the KL estimate.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the discriminator fit on all rows as JSON.
    #[arg(long)]
    pub tree_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMethod {
    Under,
    Over,
    Smote,
}

#[derive(Debug, Args, Serialize)]
pub struct ResampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, value_enum)]
    pub method: ResampleMethod,
    /// Neighbours considered by SMOTE.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// SMOTE target: `uniform` (every class to the majority count) or
    /// `class=count,...`.
    #[arg(long, default_value = "uniform")]
    pub target: String,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON report with before/after distributions.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeighMethod {
    Class,
    Importance,
}

#[derive(Debug, Args, Serialize)]
pub struct WeighArgs {
    #[arg(long, value_enum)]
    pub method: WeighMethod,
    /// Labeled CSV (class weights).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Training CSV (importance weights).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test CSV (importance weights).
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub schema: PathBuf,
    /// Class-weight target: `uniform` or `class=share,...`.
    #[arg(long, default_value = "uniform")]
    pub target: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub tree: TreeArgs,
    /// Output CSV with a single `weight` column.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RocArgs {
    /// CSV with `score` and `label` (0/1) columns.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Rows with `score >= threshold` count as positive predictions.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// JSON summary.
    #[arg(long)]
    pub out: PathBuf,
    /// ROC points as `fpr,tpr` CSV.
    #[arg(long)]
    pub points: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Mixture spec JSON. Its own seed is used unless --seed is given.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the generated dataset's schema here.
    #[arg(long)]
    pub schema_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct InputDigest {
    path: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a Command,
    seed: u64,
    inputs: BTreeMap<&'static str, InputDigest>,
}

#[derive(Serialize)]
struct Emitted<'a, T: Serialize> {
    #[serde(flatten)]
    report: &'a T,
    provenance: Provenance<'a>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status: 0 on success, 2 on usage or validation
/// errors, 1 on I/O failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("biaskit: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let ctx = Context { cli };
    match &cli.command {
        Command::AuditImbalance(a) => ctx.audit(a),
        Command::DetectShift(a) => ctx.detect_shift(a),
        Command::Resample(a) => ctx.resample(a),
        Command::Weigh(a) => ctx.weigh(a),
        Command::Roc(a) => ctx.roc(a),
        Command::Generate(a) => ctx.generate(a),
    }
}

struct Context<'a> {
    cli: &'a Cli,
}

impl Context<'_> {
    fn provenance(&self, inputs: &[(&'static str, &Path)]) -> Result<Provenance<'_>> {
        let mut digests = BTreeMap::new();
        for (role, path) in inputs {
            let bytes = std::fs::read(path).map_err(|e| Error::io(*path, e))?;
            digests.insert(
                *role,
                InputDigest {
                    path: path.to_path_buf(),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                },
            );
        }
        Ok(Provenance {
            tool: "biaskit",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.cli.command,
            seed: self.cli.effective_seed(),
            inputs: digests,
        })
    }

    fn emit<T: Serialize>(
        &self,
        path: &Path,
        report: &T,
        inputs: &[(&'static str, &Path)],
    ) -> Result<()> {
        let doc = Emitted {
            report,
            provenance: self.provenance(inputs)?,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn audit(&self, a: &AuditArgs) -> Result<()> {
        let (ds, inputs): (Dataset, Vec<(&'static str, &Path)>) =
            match (&a.input, &a.idx_images, &a.idx_labels) {
                (Some(input), None, None) => {
                    let schema_path = a
                        .schema
                        .as_deref()
                        .ok_or_else(|| Error::invalid("--input requires --schema"))?;
                    let schema = FeatureSchema::load(schema_path)?;
                    (
                        load_csv(input, &schema)?,
                        vec![("input", input.as_path()), ("schema", schema_path)],
                    )
                }
                (None, Some(images), Some(labels)) => (
                    load_idx(images, labels)?,
                    vec![
                        ("idx_images", images.as_path()),
                        ("idx_labels", labels.as_path()),
                    ],
                ),
                _ => {
                    return Err(Error::invalid(
                        "give either --input with --schema, or --idx-images with --idx-labels",
                    ))
                }
            };
        let report = class_distribution(ds.require_labels()?)?;
        self.emit(&a.out, &report, &inputs)?;
        println!(
            "{} rows, {} classes; majority `{}` ({:.4}), minority `{}` ({:.4}); imbalance ratio {:.4}",
            report.n,
            report.class_counts.len(),
            report.majority_class,
            report.proportions[&report.majority_class],
            report.minority_class,
            report.proportions[&report.minority_class],
            report.imbalance_ratio
        );
        Ok(())
    }

    fn detect_shift(&self, a: &ShiftArgs) -> Result<()> {
        let schema = FeatureSchema::load(&a.schema)?;
        let train = load_csv(&a.train, &schema)?;
        let test = load_csv(&a.test, &schema)?;
        let opts = ShiftOptions {
            tree: a.tree.into(),
            folds: a.folds,
            kl_bins: a.bins,
            seed: self.cli.effective_seed(),
        };
        let report = detect_shift(&train, &test, &opts)?;
        if let Some(tree_out) = &a.tree_out {
            let origin = crate::shift::tag_origin(&train, &test)?;
            let tree = fit_tree(origin.data(), &opts.tree)?;
            let mut text = tree.to_json()?;
            text.push('\n');
            std::fs::write(tree_out, text).map_err(|e| Error::io(tree_out, e))?;
        }
        self.emit(
            &a.out,
            &report,
            &[
                ("train", &a.train),
                ("test", &a.test),
                ("schema", &a.schema),
            ],
        )?;
        println!(
            "shift magnitude {:.4} ({}), fold MCCs {:?}, n_train {}, n_test {}",
            report.magnitude,
            report.verdict.as_str(),
            report.fold_mccs,
            report.n_train,
            report.n_test
        );
        Ok(())
    }

    fn resample(&self, a: &ResampleArgs) -> Result<()> {
        let schema = FeatureSchema::load(&a.schema)?;
        let ds = load_csv(&a.input, &schema)?;
        let seed = self.cli.effective_seed();
        let out = match a.method {
            ResampleMethod::Under => random_undersample(&ds, seed)?,
            ResampleMethod::Over => random_oversample(&ds, seed)?,
            ResampleMethod::Smote => {
                let labels = ds.require_labels()?;
                let target = if a.target.trim() == "uniform" {
                    balanced_counts(labels)
                } else {
                    parse_counts(&a.target)?
                };
                smote(&ds, a.k, &target, seed)?
            }
        };
        write_csv(&out, &a.out)?;
        let before = class_distribution(ds.require_labels()?)?;
        let after = class_distribution(out.require_labels()?)?;
        if let Some(report) = &a.report {
            #[derive(Serialize)]
            struct ResampleReport<'a> {
                before: &'a crate::imbalance::ImbalanceReport,
                after: &'a crate::imbalance::ImbalanceReport,
            }
            self.emit(
                report,
                &ResampleReport {
                    before: &before,
                    after: &after,
                },
                &[("input", &a.input), ("schema", &a.schema)],
            )?;
        }
        println!(
            "{} rows -> {} rows; class counts {:?}",
            ds.len(),
            out.len(),
            after.class_counts
        );
        Ok(())
    }

    fn weigh(&self, a: &WeighArgs) -> Result<()> {
        let schema = FeatureSchema::load(&a.schema)?;
        let (weights, inputs): (WeightVector, Vec<(&'static str, &Path)>) = match a.method {
            WeighMethod::Class => {
                let input = a
                    .input
                    .as_deref()
                    .ok_or_else(|| Error::invalid("--method class requires --input"))?;
                if a.train.is_some() || a.test.is_some() {
                    return Err(Error::invalid(
                        "--train/--test only apply to --method importance",
                    ));
                }
                let ds = load_csv(input, &schema)?;
                let labels = ds.require_labels()?;
                let target = parse_target(&a.target, labels)?;
                (
                    class_weights(labels, &target)?,
                    vec![("input", input), ("schema", &a.schema)],
                )
            }
            WeighMethod::Importance => {
                let (Some(train_path), Some(test_path)) = (a.train.as_deref(), a.test.as_deref())
                else {
                    return Err(Error::invalid(
                        "--method importance requires --train and --test",
                    ));
                };
                if a.input.is_some() {
                    return Err(Error::invalid("--input only applies to --method class"));
                }
                let train = load_csv(train_path, &schema)?;
                let test = load_csv(test_path, &schema)?;
                (
                    importance_weights(&train, &test, &a.tree.into(), self.cli.effective_seed())?,
                    vec![
                        ("train", train_path),
                        ("test", test_path),
                        ("schema", &a.schema),
                    ],
                )
            }
        };
        let mut buf = Vec::new();
        weights
            .write_csv(&mut buf)
            .map_err(|e| Error::io(&a.out, e))?;
        std::fs::write(&a.out, buf).map_err(|e| Error::io(&a.out, e))?;

        let w = weights.as_slice();
        let (min, max) = w
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        if let Some(report) = &a.report {
            #[derive(Serialize)]
            struct WeighReport<'a> {
                n: usize,
                min: f64,
                max: f64,
                mean: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                effective_distribution: Option<crate::imbalance::ImbalanceReport>,
                weights: &'a WeightVector,
            }
            let effective = match (a.method, a.input.as_deref()) {
                (WeighMethod::Class, Some(input)) => {
                    let ds = load_csv(input, &schema)?;
                    Some(effective_distribution(ds.require_labels()?, &weights)?)
                }
                _ => None,
            };
            self.emit(
                report,
                &WeighReport {
                    n: w.len(),
                    min,
                    max,
                    mean,
                    effective_distribution: effective,
                    weights: &weights,
                },
                &inputs,
            )?;
        }
        println!(
            "{} weights: min {min:.4}, mean {mean:.4}, max {max:.4}",
            w.len()
        );
        Ok(())
    }

    fn roc(&self, a: &RocArgs) -> Result<()> {
        let (scores, labels) = read_predictions(&a.predictions)?;
        let curve = roc_curve(&scores, &labels)?;
        let area = auc(&curve);
        let predicted: Vec<bool> = scores.iter().map(|&s| s >= a.threshold).collect();
        let cm = confusion(&predicted, &labels)?;
        #[derive(Serialize)]
        struct RocSummary {
            n: usize,
            positives: usize,
            negatives: usize,
            auc: f64,
            threshold: f64,
            confusion: crate::metrics::ConfusionMatrix,
            mcc: f64,
            accuracy: f64,
            recall: f64,
            roc_points: usize,
        }
        let positives = labels.iter().filter(|&&l| l).count();
        let summary = RocSummary {
            n: labels.len(),
            positives,
            negatives: labels.len() - positives,
            auc: area,
            threshold: a.threshold,
            confusion: cm,
            mcc: mcc(&cm)?,
            accuracy: accuracy(&cm)?,
            recall: recall(&cm)?,
            roc_points: curve.points().len(),
        };
        if let Some(points) = &a.points {
            let mut buf = Vec::new();
            curve
                .write_csv(&mut buf)
                .map_err(|e| Error::io(points, e))?;
            std::fs::write(points, buf).map_err(|e| Error::io(points, e))?;
        }
        self.emit(&a.out, &summary, &[("predictions", &a.predictions)])?;
        println!(
            "AUC {:.4}; at threshold {}: MCC {:.4}, accuracy {:.4}, recall {:.4}",
            summary.auc, a.threshold, summary.mcc, summary.accuracy, summary.recall
        );
        Ok(())
    }

    fn generate(&self, a: &GenerateArgs) -> Result<()> {
        let text = std::fs::read_to_string(&a.spec).map_err(|e| Error::io(&a.spec, e))?;
        let mut spec = MixtureSpec::from_json(&text)?;
        if let Some(seed) = self.cli.seed {
            spec.seed = seed;
        }
        let ds = generate_mixture(&spec)?;
        write_csv(&ds, &a.out)?;
        if let Some(schema_out) = &a.schema_out {
            let mut text = serde_json::to_string_pretty(ds.schema())?;
            text.push('\n');
            std::fs::write(schema_out, text).map_err(|e| Error::io(schema_out, e))?;
        }
        println!(
            "{} rows, {} features, seed {}",
            ds.len(),
            ds.n_features(),
            spec.seed
        );
        Ok(())
    }
}

fn parse_counts(text: &str) -> Result<BTreeMap<String, usize>> {
    text.split(',')
        .map(|part| {
            let (class, count) = part.split_once('=').ok_or_else(|| {
                Error::invalid(format!("target entry `{part}` is not class=count"))
            })?;
            let count = count
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("target count `{count}` is not an integer")))?;
            Ok((class.trim().to_string(), count))
        })
        .collect()
}

fn read_predictions(path: &Path) -> Result<(Vec<f64>, Vec<bool>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = ::csv::ReaderBuilder::new()
        .trim(::csv::Trim::All)
        .from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?
        .clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv {
                line: 1,
                column: name.to_string(),
                message: "column missing from header".into(),
            })
    };
    let (score_at, label_at) = (find("score")?, find("label")?);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |column: &str, message: String| Error::Csv {
            line,
            column: column.to_string(),
            message,
        };
        let score_text = &record[score_at];
        let score: f64 = score_text
            .parse()
            .map_err(|_| bad("score", format!("`{score_text}` is not a number")))?;
        let label = match &record[label_at] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(bad("label", format!("`{other}` is not 0/1"))),
        };
        scores.push(score);
        labels.push(label);
    }
    Ok((scores, labels))
}
