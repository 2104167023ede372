//! C ABI over `biaskit`.
//!
//! Conventions:
//! - Every fallible function returns a [`BiaskitStatus`]; results go through
//!   out-pointers, which are written only on [`BiaskitStatus::Ok`].
//! - On failure, [`biaskit_last_error`] returns a message for the calling
//!   thread until its next call into this library.
//! - Datasets are opaque handles released with [`biaskit_dataset_free`];
//!   strings returned by the library are released with [`biaskit_string_free`].
//! - Panics never cross the boundary; they surface as
//!   [`BiaskitStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use biaskit::data::{load_csv, load_idx, write_csv};
use biaskit::imbalance::{
    balanced_counts, class_distribution, class_weights, parse_target, random_oversample,
    random_undersample, smote, WeightVector,
};
use biaskit::metrics::{auc, mcc, roc_curve, ConfusionMatrix};
use biaskit::shift::{detect_shift, importance_weights, rejection_sample, ShiftOptions};
use biaskit::{Dataset, Error, FeatureSchema, TreeParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiaskitStatus {
    Ok = 0,
    /// Null pointer, non-UTF-8 string, or a buffer of the wrong length.
    InvalidArgument = 1,
    /// Input rejected by validation (bad CSV, schema, parameters, ...).
    Validation = 2,
    /// A file could not be read or written.
    Io = 3,
    /// A panic was caught at the boundary.
    Internal = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiaskitResampleMethod {
    Undersample = 0,
    Oversample = 1,
    /// Oversample every class to the majority count with SMOTE.
    Smote = 2,
}

/// Decision-tree hyperparameters; see [`biaskit_tree_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BiaskitTreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_impurity_decrease: f64,
}

impl From<BiaskitTreeParams> for TreeParams {
    fn from(p: BiaskitTreeParams) -> Self {
        TreeParams {
            max_depth: p.max_depth,
            min_samples_split: p.min_samples_split,
            min_impurity_decrease: p.min_impurity_decrease,
        }
    }
}

/// Opaque dataset handle.
pub struct BiaskitDataset(Dataset);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: BiaskitStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            status: if e.is_validation() {
                BiaskitStatus::Validation
            } else {
                BiaskitStatus::Io
            },
            message: e.to_string(),
        }
    }
}

fn bad_argument(message: impl Into<String>) -> Failure {
    Failure {
        status: BiaskitStatus::InvalidArgument,
        message: message.into(),
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> BiaskitStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BiaskitStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(f.message);
            f.status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {what}"));
            BiaskitStatus::Internal
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the call.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(bad_argument(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| bad_argument(format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` is null or a live handle from this library.
unsafe fn dataset<'a>(p: *const BiaskitDataset, what: &str) -> Result<&'a Dataset, Failure> {
    p.as_ref()
        .map(|d| &d.0)
        .ok_or_else(|| bad_argument(format!("{what} is null")))
}

/// # Safety
/// `out` is null or valid for a write.
unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(bad_argument("output pointer is null"));
    }
    out.write(value);
    Ok(())
}

/// # Safety
/// `out` is null or valid for a write.
unsafe fn put_dataset(out: *mut *mut BiaskitDataset, ds: Dataset) -> Result<(), Failure> {
    if out.is_null() {
        return Err(bad_argument("output pointer is null"));
    }
    put(out, Box::into_raw(Box::new(BiaskitDataset(ds))))
}

/// # Safety
/// `out` is null or valid for a write.
unsafe fn put_json(out: *mut *mut c_char, value: &impl serde::Serialize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(bad_argument("output pointer is null"));
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::from(Error::from(e)))?;
    let c = CString::new(text).map_err(|_| bad_argument("report contains a NUL byte"))?;
    put(out, c.into_raw())
}

/// # Safety
/// `buf` is valid for `len` writes of `f64` when non-null.
unsafe fn fill(buf: *mut f64, len: usize, values: &[f64]) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(bad_argument("output buffer is null"));
    }
    if len != values.len() {
        return Err(bad_argument(format!(
            "output buffer holds {len} values, {} needed",
            values.len()
        )));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, len);
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the thread's next call into this library.
#[no_mangle]
pub extern "C" fn biaskit_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn biaskit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn biaskit_tree_params_default() -> BiaskitTreeParams {
    let p = TreeParams::default();
    BiaskitTreeParams {
        max_depth: p.max_depth,
        min_samples_split: p.min_samples_split,
        min_impurity_decrease: p.min_impurity_decrease,
    }
}

/// Loads a CSV file against a schema given as JSON text.
///
/// # Safety
/// `path` and `schema_json` are NUL-terminated strings; `out` is valid for a
/// write.
#[no_mangle]
pub unsafe extern "C" fn biaskit_dataset_load_csv(
    path: *const c_char,
    schema_json: *const c_char,
    out: *mut *mut BiaskitDataset,
) -> BiaskitStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        let schema = FeatureSchema::from_json(text(schema_json, "schema_json")?)?;
        let ds = load_csv(&path, &schema)?;
        put_dataset(out, ds)
    })
}

/// Loads an IDX image/label file pair.
///
/// # Safety
/// `images_path` and `labels_path` are NUL-terminated strings; `out` is valid
/// for a write.
#[no_mangle]
pub unsafe extern "C" fn biaskit_dataset_load_idx(
    images_path: *const c_char,
    labels_path: *const c_char,
    out: *mut *mut BiaskitDataset,
) -> BiaskitStatus {
    guard(|| {
        let images = PathBuf::from(text(images_path, "images_path")?);
        let labels = PathBuf::from(text(labels_path, "labels_path")?);
        put_dataset(out, load_idx(&images, &labels)?)
    })
}

/// # Safety
/// `ds` is null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn biaskit_dataset_free(ds: *mut BiaskitDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Row count; 0 for a null handle.
///
/// # Safety
/// `ds` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn biaskit_dataset_len(ds: *const BiaskitDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Feature count (label column excluded); 0 for a null handle.
///
/// # Safety
/// `ds` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn biaskit_dataset_n_features(ds: *const BiaskitDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_features())
}

/// # Safety
/// `ds` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn biaskit_dataset_write_csv(
    ds: *const BiaskitDataset,
    path: *const c_char,
) -> BiaskitStatus {
    guard(|| {
        let ds = dataset(ds, "ds")?;
        write_csv(ds, text(path, "path")?)?;
        Ok(())
    })
}

/// Class counts, proportions and imbalance ratio as a JSON object. Free the
/// result with [`biaskit_string_free`].
///
/// # Safety
/// `ds` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn biaskit_class_distribution_json(
    ds: *const BiaskitDataset,
    out: *mut *mut c_char,
) -> BiaskitStatus {
    guard(|| {
        let report = class_distribution(dataset(ds, "ds")?.require_labels()?)?;
        put_json(out, &report)
    })
}

/// Per-row weights moving the label distribution to `target`: `"uniform"`
/// or `"class=p,..."`. `out` must hold exactly one value per row.
///
/// # Safety
/// `ds` is a live handle; `target` is a NUL-terminated string; `out` is
/// valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn biaskit_class_weights(
    ds: *const BiaskitDataset,
    target: *const c_char,
    out: *mut f64,
    len: usize,
) -> BiaskitStatus {
    guard(|| {
        let labels = dataset(ds, "ds")?.require_labels()?;
        let target = parse_target(text(target, "target")?, labels)?;
        fill(out, len, class_weights(labels, &target)?.as_slice())
    })
}

/// # Safety
/// `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn biaskit_mcc(
    tp: u64,
    fp: u64,
    tn: u64,
    fn_: u64,
    out: *mut f64,
) -> BiaskitStatus {
    guard(|| put(out, mcc(&ConfusionMatrix::new(tp, fp, tn, fn_))?))
}

/// Area under the ROC curve; `labels[i]` nonzero marks a positive.
///
/// # Safety
/// `scores` and `labels` are valid for `n` reads; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn biaskit_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> BiaskitStatus {
    guard(|| {
        if scores.is_null() || labels.is_null() {
            return Err(bad_argument("scores and labels must be non-null"));
        }
        let scores = std::slice::from_raw_parts(scores, n);
        let labels: Vec<bool> = std::slice::from_raw_parts(labels, n)
            .iter()
            .map(|&b| b != 0)
            .collect();
        put(out, auc(&roc_curve(scores, &labels)?))
    })
}

/// Shift report as a JSON object. `tree` may be null for default
/// parameters. Free the result with [`biaskit_string_free`].
///
/// # Safety
/// `train` and `test` are live handles; `tree` is null or valid for a read;
/// `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn biaskit_detect_shift_json(
    train: *const BiaskitDataset,
    test: *const BiaskitDataset,
    tree: *const BiaskitTreeParams,
    folds: usize,
    kl_bins: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> BiaskitStatus {
    guard(|| {
        let opts = ShiftOptions {
            tree: tree
                .as_ref()
                .map_or_else(TreeParams::default, |&p| p.into()),
            folds,
            kl_bins,
            seed,
        };
        let report = detect_shift(dataset(train, "train")?, dataset(test, "test")?, &opts)?;
        put_json(out, &report)
    })
}

/// Density-ratio weights for the rows of `train`. `out` must hold exactly
/// one value per training row. `tree` may be null for default parameters.
///
/// # Safety
/// `train` and `test` are live handles; `tree` is null or valid for a read;
/// `out` is valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn biaskit_importance_weights(
    train: *const BiaskitDataset,
    test: *const BiaskitDataset,
    tree: *const BiaskitTreeParams,
    seed: u64,
    out: *mut f64,
    len: usize,
) -> BiaskitStatus {
    guard(|| {
        let params = tree
            .as_ref()
            .map_or_else(TreeParams::default, |&p| p.into());
        let weights = importance_weights(
            dataset(train, "train")?,
            dataset(test, "test")?,
            &params,
            seed,
        )?;
        fill(out, len, weights.as_slice())
    })
}

/// Keeps row `i` with probability `weights[i] / max(weights)`.
///
/// # Safety
/// `ds` is a live handle; `weights` is valid for `len` reads; `out` is valid
/// for a write.
#[no_mangle]
pub unsafe extern "C" fn biaskit_rejection_sample(
    ds: *const BiaskitDataset,
    weights: *const f64,
    len: usize,
    seed: u64,
    out: *mut *mut BiaskitDataset,
) -> BiaskitStatus {
    guard(|| {
        if weights.is_null() {
            return Err(bad_argument("weights is null"));
        }
        let weights = WeightVector::new(std::slice::from_raw_parts(weights, len).to_vec())?;
        put_dataset(out, rejection_sample(dataset(ds, "ds")?, &weights, seed)?)
    })
}

/// Balances the classes of a labeled dataset. `k` is used only by SMOTE.
///
/// # Safety
/// `ds` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn biaskit_resample(
    ds: *const BiaskitDataset,
    method: BiaskitResampleMethod,
    k: usize,
    seed: u64,
    out: *mut *mut BiaskitDataset,
) -> BiaskitStatus {
    guard(|| {
        let ds = dataset(ds, "ds")?;
        let result = match method {
            BiaskitResampleMethod::Undersample => random_undersample(ds, seed)?,
            BiaskitResampleMethod::Oversample => random_oversample(ds, seed)?,
            BiaskitResampleMethod::Smote => {
                smote(ds, k, &balanced_counts(ds.require_labels()?), seed)?
            }
        };
        put_dataset(out, result)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_converts_panics() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, BiaskitStatus::Internal);
        let msg = unsafe { CStr::from_ptr(biaskit_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal error: boom");
    }

    #[test]
    fn guard_maps_error_kinds() {
        assert_eq!(
            guard(|| Err(Error::InvalidInput("x".into()).into())),
            BiaskitStatus::Validation
        );
        let io = Error::Io {
            path: "f".into(),
            source: std::io::Error::other("gone"),
        };
        assert_eq!(guard(|| Err(io.into())), BiaskitStatus::Io);
        assert_eq!(guard(|| Ok(())), BiaskitStatus::Ok);
        assert!(biaskit_last_error().is_null());
    }

    #[test]
    fn default_params_match_core() {
        let p: TreeParams = biaskit_tree_params_default().into();
        assert_eq!(p, TreeParams::default());
    }
}
