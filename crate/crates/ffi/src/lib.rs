//! C interface to the churn toolkit.
//!
//! Every fallible call returns a [`ChurnStatus`]. On anything but
//! `CHURN_STATUS_OK` a message is kept per thread and can be read with
//! [`churn_last_error_message`]. Datasets and models are opaque handles
//! owned by the caller and released with their `_free` function.
//!
//! Undefined metrics (a ratio with a zero denominator) come back as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use churn_core::data::{Dataset, Label};
use churn_core::experiments::load_churn_csv;
use churn_core::metrics::{evaluate_scores, metric_set, ConfusionMatrix, MetricSet};
use churn_core::models::{Family, FittedPipeline, ModelSpec};
use churn_core::preprocess::{dummy_encode, EncoderSpec, FeatureTable};
use churn_core::stats::chi_square_survival;
use churn_core::synth::synthetic_churn;
use churn_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChurnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    /// Malformed or inconsistent input data.
    Data = 4,
    /// Serialized model text could not be read.
    Json = 5,
    /// Training failed or the input is degenerate.
    Model = 6,
    /// The model was fitted on different features.
    Fingerprint = 7,
    Panic = 99,
}

/// Binary metrics with "Left" as the positive class.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChurnMetrics {
    pub accuracy: f64,
    pub kappa: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    /// NaN when computed from counts alone.
    pub roc_auc: f64,
}

impl From<&MetricSet> for ChurnMetrics {
    fn from(m: &MetricSet) -> Self {
        let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
        ChurnMetrics {
            accuracy: m.accuracy,
            kappa: v(m.kappa),
            precision: v(m.precision),
            recall: v(m.recall),
            specificity: v(m.specificity),
            f1: v(m.f1),
            roc_auc: v(m.roc_auc),
        }
    }
}

/// A labeled churn table plus its dummy-encoded features.
pub struct ChurnDataset {
    data: Dataset,
    table: FeatureTable,
}

/// A fitted preprocessing + classifier pipeline.
pub struct ChurnModel {
    pipeline: FittedPipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ChurnStatus {
    match e {
        Error::Io { .. } => ChurnStatus::Io,
        Error::Json(_) => ChurnStatus::Json,
        Error::Csv(_)
        | Error::Header(_)
        | Error::Parse { .. }
        | Error::Missing { .. }
        | Error::UnknownColumn(_)
        | Error::InvalidValue { .. } => ChurnStatus::Data,
        Error::Config(_) | Error::InvalidInput(_) | Error::Hyperparameter(_) => ChurnStatus::InvalidArgument,
        Error::Fingerprint { .. } => ChurnStatus::Fingerprint,
        Error::Degenerate(_) | Error::NoConvergence { .. } | Error::NonFinite => ChurnStatus::Model,
    }
}

struct Failure(ChurnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ChurnStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(ChurnStatus::InvalidArgument, message.into())
}

/// Run `f`, record any error, and turn panics into `CHURN_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ChurnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ChurnStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            ChurnStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn wrap_dataset(data: Dataset) -> Result<*mut ChurnDataset, Failure> {
    let table = dummy_encode(&data, &EncoderSpec::churn())?;
    Ok(Box::into_raw(Box::new(ChurnDataset { data, table })))
}

/// Message for the last failed call on this thread, or NULL after a
/// success. The pointer stays valid until the next call on the thread.
#[no_mangle]
pub extern "C" fn churn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn churn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a churn CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn churn_dataset_load(path: *const c_char, out: *mut *mut ChurnDataset) -> ChurnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        *out = wrap_dataset(load_churn_csv(Path::new(path))?)?;
        Ok(())
    })
}

/// Generate `n` synthetic churn records.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn churn_dataset_synthetic(n: usize, seed: u64, out: *mut *mut ChurnDataset) -> ChurnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        *out = wrap_dataset(synthetic_churn(n, seed)?)?;
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn churn_dataset_rows(dataset: *const ChurnDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.data.n())
}

/// # Safety
/// `dataset` must be a live handle; `stayed` and `left` must be writable.
#[no_mangle]
pub unsafe extern "C" fn churn_dataset_class_counts(
    dataset: *const ChurnDataset,
    stayed: *mut usize,
    left: *mut usize,
) -> ChurnStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        let (stayed, left) = (out_ptr(stayed, "stayed")?, out_ptr(left, "left")?);
        (*stayed, *left) = d.data.class_counts()?;
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn churn_dataset_free(dataset: *mut ChurnDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fit a model of `family` ("gnb", "knn", "svm", "cart", "rf", "ann") on
/// every row of `dataset`. `names`/`values` hold `n_params` overrides of
/// the family defaults and may be NULL when `n_params` is 0.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn churn_model_fit(
    dataset: *const ChurnDataset,
    family: *const c_char,
    names: *const *const c_char,
    values: *const f64,
    n_params: usize,
    seed: u64,
    out: *mut *mut ChurnModel,
) -> ChurnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let d = handle(dataset, "dataset")?;
        let family: Family = str_arg(family, "family")?.parse()?;
        let mut spec = ModelSpec::new(family, seed);
        if n_params > 0 {
            if names.is_null() || values.is_null() {
                return Err(null("names/values"));
            }
            let names = std::slice::from_raw_parts(names, n_params);
            let values = std::slice::from_raw_parts(values, n_params);
            for (&name, &value) in names.iter().zip(values) {
                spec = spec.with(str_arg(name, "parameter name")?, value);
            }
        }
        spec.validate_names()?;
        let pipeline = FittedPipeline::fit(&spec, &d.table)?;
        *out = Box::into_raw(Box::new(ChurnModel { pipeline }));
        Ok(())
    })
}

/// Write one churn probability per row of `dataset` into `scores`, which
/// must hold exactly `len` == row count values.
///
/// # Safety
/// `scores` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn churn_model_predict(
    model: *const ChurnModel,
    dataset: *const ChurnDataset,
    scores: *mut f64,
    len: usize,
) -> ChurnStatus {
    guard(|| {
        let (m, d) = (handle(model, "model")?, handle(dataset, "dataset")?);
        if scores.is_null() {
            return Err(null("scores"));
        }
        if len != d.data.n() {
            return Err(invalid(format!("scores holds {len} values but the dataset has {} rows", d.data.n())));
        }
        let s = m.pipeline.predict_scores(&d.table)?;
        std::slice::from_raw_parts_mut(scores, len).copy_from_slice(&s);
        Ok(())
    })
}

/// Score `dataset` and compare with its labels at the 0.5 cutoff.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn churn_model_evaluate(
    model: *const ChurnModel,
    dataset: *const ChurnDataset,
    out: *mut ChurnMetrics,
) -> ChurnStatus {
    guard(|| {
        let (m, d) = (handle(model, "model")?, handle(dataset, "dataset")?);
        let out = out_ptr(out, "out")?;
        let scores = m.pipeline.predict_scores(&d.table)?;
        let truth: Vec<Label> = d.data.labels()?.to_vec();
        *out = ChurnMetrics::from(&evaluate_scores(&truth, &scores)?);
        Ok(())
    })
}

/// Serialize a model to JSON. Free the string with [`churn_string_free`].
///
/// # Safety
/// `model` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn churn_model_to_json(model: *const ChurnModel, out: *mut *mut c_char) -> ChurnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let json = handle(model, "model")?.pipeline.to_json()?;
        *out = CString::new(json).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn churn_model_from_json(json: *const c_char, out: *mut *mut ChurnModel) -> ChurnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let pipeline = FittedPipeline::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(ChurnModel { pipeline }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn churn_model_free(model: *mut ChurnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn churn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Metrics from confusion-matrix counts; `roc_auc` is NaN.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn churn_metrics_from_counts(
    tp: u64,
    fp: u64,
    tn: u64,
    fn_: u64,
    out: *mut ChurnMetrics,
) -> ChurnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cm = ConfusionMatrix { tp, fp, tn, fn_ };
        *out = ChurnMetrics::from(&metric_set(&cm)?);
        Ok(())
    })
}

/// Upper tail of the chi-square distribution; NaN for `x < 0` or `df == 0`.
#[no_mangle]
pub extern "C" fn churn_chi_square_survival(x: f64, df: u32) -> f64 {
    if !(x >= 0.0) || df == 0 {
        return f64::NAN;
    }
    chi_square_survival(x, df)
}
