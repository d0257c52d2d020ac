//! C ABI over the `oneclass` descriptors, validation objective and optimisers.
//!
//! Every fallible function returns an [`OcStatus`]; on anything but
//! `OC_STATUS_OK` the message is available from [`oc_last_error_message`] on
//! the same thread. Matrices are dense, row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ndarray::ArrayView2;
use oneclass::descriptors::{DescriptorKind, DescriptorSpec, FittedModel};
use oneclass::optim::{run_search, Budget, FnObjective, OptimiserKind};
use oneclass::validation::{auroc, ObjectiveHandle};
use oneclass::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InsufficientData = 3,
    NotConverged = 4,
    CallbackFailed = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcDescriptor {
    Nnd = 0,
    Lnnd = 1,
    Lof = 2,
    Alp = 3,
    Svm = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcOptimiser {
    Random = 0,
    HookeJeeves = 1,
    NelderMead = 2,
    Tpe = 3,
    MalherbePowell = 4,
}

impl From<OcDescriptor> for DescriptorKind {
    fn from(d: OcDescriptor) -> Self {
        match d {
            OcDescriptor::Nnd => DescriptorKind::Nnd,
            OcDescriptor::Lnnd => DescriptorKind::Lnnd,
            OcDescriptor::Lof => DescriptorKind::Lof,
            OcDescriptor::Alp => DescriptorKind::Alp,
            OcDescriptor::Svm => DescriptorKind::Svm,
        }
    }
}

impl From<OcOptimiser> for OptimiserKind {
    fn from(o: OcOptimiser) -> Self {
        match o {
            OcOptimiser::Random => OptimiserKind::Random,
            OcOptimiser::HookeJeeves => OptimiserKind::HookeJeeves,
            OcOptimiser::NelderMead => OptimiserKind::NelderMead,
            OcOptimiser::Tpe => OptimiserKind::Tpe,
            OcOptimiser::MalherbePowell => OptimiserKind::MalherbePowell,
        }
    }
}

/// Opaque fitted descriptor.
pub struct OcModel {
    model: FittedModel,
    spec: DescriptorSpec,
    features: usize,
}

/// Budget and seed for a search. Zero caps select the library defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OcBudget {
    pub max_evaluations: usize,
    pub max_proposals: usize,
    pub seed: u64,
}

/// Objective to maximise over `[0, 1]^dim`. A non-finite return aborts the search.
pub type OcObjectiveFn = Option<unsafe extern "C" fn(coords: *const f64, dim: usize, user_data: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(OcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::TooFewPoints { .. } | Error::NoUsableFold => OcStatus::InsufficientData,
            Error::NotConverged { .. } => OcStatus::NotConverged,
            Error::Json(_) | Error::Io { .. } => OcStatus::Internal,
            _ => OcStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(OcStatus::InvalidArgument, message.into())
}

fn set_error(message: String) {
    // interior NULs would truncate the C string
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, turning errors and panics into a status plus last-error message.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> OcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OcStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {message}"));
            OcStatus::Internal
        }
    }
}

unsafe fn slice_in<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn matrix<'a>(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<ArrayView2<'a, f64>, Failure> {
    if rows == 0 || cols == 0 {
        return Err(invalid(format!("{what} must have at least one row and one column")));
    }
    let len = rows.checked_mul(cols).ok_or_else(|| invalid(format!("{what} is too large")))?;
    let values = slice_in(data, len, what)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{what} contains a non-finite value")));
    }
    ArrayView2::from_shape((rows, cols), values).map_err(|e| invalid(e.to_string()))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn into_handle(model: FittedModel, spec: DescriptorSpec, features: usize) -> *mut OcModel {
    Box::into_raw(Box::new(OcModel { model, spec, features }))
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn oc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Number of hyperparameters `descriptor` takes: 1, or 2 for ALP and SVM.
#[no_mangle]
pub extern "C" fn oc_param_count(descriptor: OcDescriptor) -> usize {
    DescriptorKind::from(descriptor).default_spec(10, 1).values().len()
}

/// Default hyperparameters for `n_targets` instances in `features` dimensions.
/// `out_params` must hold `oc_param_count(descriptor)` values.
///
/// # Safety
/// `out_params` must be valid for that many writes.
#[no_mangle]
pub unsafe extern "C" fn oc_default_params(
    descriptor: OcDescriptor,
    n_targets: usize,
    features: usize,
    out_params: *mut f64,
) -> OcStatus {
    guard(|| {
        if out_params.is_null() {
            return Err(null("out_params"));
        }
        let values = DescriptorKind::from(descriptor).default_spec(n_targets, features).values();
        ptr::copy_nonoverlapping(values.as_ptr(), out_params, values.len());
        Ok(())
    })
}

/// Fits `descriptor` with explicit hyperparameters on a target-only matrix.
/// Integer hyperparameters are passed as whole-valued doubles.
///
/// # Safety
/// `data` must hold `rows * cols` doubles, `params` `n_params` doubles, and
/// `out_model` must be writable. Release the model with [`oc_model_free`].
#[no_mangle]
pub unsafe extern "C" fn oc_model_fit(
    descriptor: OcDescriptor,
    params: *const f64,
    n_params: usize,
    data: *const f64,
    rows: usize,
    cols: usize,
    out_model: *mut *mut OcModel,
) -> OcStatus {
    guard(|| {
        if out_model.is_null() {
            return Err(null("out_model"));
        }
        let target = matrix(data, rows, cols, "data")?;
        let spec = DescriptorSpec::from_values(descriptor.into(), slice_in(params, n_params, "params")?)?;
        let model = FittedModel::fit(&spec, target)?;
        out_model.write(into_handle(model, spec, cols));
        Ok(())
    })
}

/// Searches the hyperparameters of `descriptor` against the validation AUROC on
/// labelled training data, then fits the winner on the targets.
/// `is_target` holds one byte per row, nonzero for the target class.
///
/// # Safety
/// `data` must hold `rows * cols` doubles and `is_target` `rows` bytes.
/// `out_model` must be writable; `out_validation_auroc` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn oc_tune(
    descriptor: OcDescriptor,
    optimiser: OcOptimiser,
    data: *const f64,
    rows: usize,
    cols: usize,
    is_target: *const u8,
    budget: OcBudget,
    out_model: *mut *mut OcModel,
    out_validation_auroc: *mut f64,
) -> OcStatus {
    guard(|| {
        if out_model.is_null() {
            return Err(null("out_model"));
        }
        let train = matrix(data, rows, cols, "data")?;
        let mask: Vec<bool> = slice_in(is_target, rows, "is_target")?.iter().map(|&b| b != 0).collect();
        let mut handle = ObjectiveHandle::new(train, &mask, descriptor.into(), budget.seed)?;
        let start = handle.default_point();
        let result = run_search(optimiser.into(), &mut handle, to_budget(budget), &start)?;
        let best = result.best().ok_or_else(|| invalid("search made no evaluations"))?;
        let spec = DescriptorSpec::from_values(descriptor.into(), &best.params)?;
        let targets: Vec<usize> = (0..rows).filter(|&i| mask[i]).collect();
        let model = FittedModel::fit(&spec, train.select(ndarray::Axis(0), &targets).view())?;
        if !out_validation_auroc.is_null() {
            out_validation_auroc.write(best.value);
        }
        out_model.write(into_handle(model, spec, cols));
        Ok(())
    })
}

/// Scores `rows` queries; larger means more target-like.
///
/// # Safety
/// `model` must come from this library, `queries` must hold `rows * cols`
/// doubles and `out_scores` room for `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn oc_model_score(
    model: *const OcModel,
    queries: *const f64,
    rows: usize,
    cols: usize,
    out_scores: *mut f64,
) -> OcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out_scores.is_null() {
            return Err(null("out_scores"));
        }
        if cols != model.features {
            return Err(invalid(format!(
                "model was fitted on {} features, queries have {cols}",
                model.features
            )));
        }
        let scores = model.model.score(matrix(queries, rows, cols, "queries")?)?;
        ptr::copy_nonoverlapping(scores.as_ptr(), out_scores, scores.len());
        Ok(())
    })
}

/// Copies the fitted hyperparameters into `out_params`, which must hold
/// `oc_param_count` values for the model's descriptor.
///
/// # Safety
/// `model` must come from this library and `out_params` be writable.
#[no_mangle]
pub unsafe extern "C" fn oc_model_params(model: *const OcModel, out_params: *mut f64) -> OcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out_params.is_null() {
            return Err(null("out_params"));
        }
        let values = model.spec.values();
        ptr::copy_nonoverlapping(values.as_ptr(), out_params, values.len());
        Ok(())
    })
}

/// Serialises the fitted state as JSON. Free the string with [`oc_string_free`].
///
/// # Safety
/// `model` must come from this library and `out_json` be writable.
#[no_mangle]
pub unsafe extern "C" fn oc_model_to_json(model: *const OcModel, out_json: *mut *mut c_char) -> OcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let json = serde_json::to_string(&model.model).map_err(Error::from)?;
        let c = CString::new(json).map_err(|e| Failure(OcStatus::Internal, e.to_string()))?;
        write_out(out_json, c.into_raw(), "out_json")
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oc_model_free(model: *mut OcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Area under the ROC curve of target versus non-target scores, ties counted half.
///
/// # Safety
/// `targets` must hold `n_targets` doubles and `others` `n_others`.
#[no_mangle]
pub unsafe extern "C" fn oc_auroc(
    targets: *const f64,
    n_targets: usize,
    others: *const f64,
    n_others: usize,
    out_auroc: *mut f64,
) -> OcStatus {
    guard(|| {
        let value = auroc(slice_in(targets, n_targets, "targets")?, slice_in(others, n_others, "others")?)?;
        write_out(out_auroc, value, "out_auroc")
    })
}

fn to_budget(b: OcBudget) -> Budget {
    let default = Budget::default();
    Budget::new(
        if b.max_evaluations == 0 { default.max_evaluations } else { b.max_evaluations },
        if b.max_proposals == 0 { default.max_proposals } else { b.max_proposals },
        b.seed,
    )
}

/// Maximises a caller-supplied function over `[0, 1]^dim`. `start` (`dim`
/// values) seeds the local optimisers and may be NULL for the box centre.
/// `out_best` receives `dim` coordinates.
///
/// # Safety
/// `objective` must be safe to call with `user_data` from this thread;
/// the pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn oc_optimize(
    optimiser: OcOptimiser,
    dim: usize,
    objective: OcObjectiveFn,
    user_data: *mut c_void,
    start: *const f64,
    budget: OcBudget,
    out_best: *mut f64,
    out_value: *mut f64,
    out_evaluations: *mut usize,
) -> OcStatus {
    guard(|| {
        let f = objective.ok_or_else(|| null("objective"))?;
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        if out_best.is_null() {
            return Err(null("out_best"));
        }
        let start = if start.is_null() { vec![0.5; dim] } else { slice_in(start, dim, "start")?.to_vec() };
        let mut target = FnObjective::new(dim, |coords: &[f64]| f(coords.as_ptr(), dim, user_data));
        let result = run_search(optimiser.into(), &mut target, to_budget(budget), &start)
            .map_err(|e| Failure(OcStatus::CallbackFailed, e.to_string()))?;
        let best = result.best().ok_or_else(|| invalid("search made no evaluations"))?;
        ptr::copy_nonoverlapping(best.coords.as_ptr(), out_best, dim);
        if !out_value.is_null() {
            out_value.write(best.value);
        }
        if !out_evaluations.is_null() {
            out_evaluations.write(result.evaluations());
        }
        Ok(())
    })
}
