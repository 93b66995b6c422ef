//! C ABI over the `dynmmsbm` library.
//!
//! Objects cross the boundary as opaque handles created by `dm_*_load`,
//! `dm_*_simulate` or `dm_fit_*` and released with the matching `*_free`.
//! Every fallible function returns a [`DmStatus`]; on failure the message is
//! available from [`dm_last_error_message`] on the same thread.
//!
//! Array outputs follow one pattern: the required element count is written
//! to `*required`; passing a null `out` only queries the size, and a buffer
//! shorter than required yields `DM_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dynmmsbm::init::{initialize, InitConfig};
use dynmmsbm::io::{load_model, load_network, save_model, LoadOptions};
use dynmmsbm::model::logistic;
use dynmmsbm::predict::{auroc, fitted_probs};
use dynmmsbm::simulate::{generate, DgpPreset};
use dynmmsbm::svi::{fit_svi, split_holdout, SviConfig};
use dynmmsbm::{fit_vem, DynamicNetwork, Error, FittedModel, ModelSpec, VemConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numerical = 5,
    Model = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A dynamic network.
pub struct DmNetwork(DynamicNetwork);

/// A fitted model.
pub struct DmModel(FittedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> DmStatus {
    match e {
        Error::Io { .. } => DmStatus::Io,
        Error::Parse { .. } => DmStatus::Parse,
        Error::AlphaOverflow { .. } | Error::NonFinite(_) | Error::Underflow(_) | Error::NotPositiveDefinite(_) => {
            DmStatus::Numerical
        }
        Error::SchemaVersion { .. } | Error::ModelFormat(_) => DmStatus::Model,
        _ => DmStatus::InvalidArgument,
    }
}

struct Failure(DmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(DmStatus::InvalidArgument, msg.to_string())
}

fn null(what: &str) -> Failure {
    Failure(DmStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DmStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn opt_path_arg(p: *const c_char, what: &str) -> Result<Option<PathBuf>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        path_arg(p, what).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_array(values: &[f64], out: *mut f64, len: usize, required: *mut usize) -> Result<(), Failure> {
    if required.is_null() {
        return Err(null("required"));
    }
    *required = values.len();
    if out.is_null() {
        return Ok(());
    }
    if len < values.len() {
        return Err(Failure(
            DmStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} required", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a network from CSV files. `monadic` and `dyadic` may be null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_network_load(
    edges: *const c_char,
    monadic: *const c_char,
    dyadic: *const c_char,
    directed: c_int,
    dense: c_int,
    out: *mut *mut DmNetwork,
) -> DmStatus {
    guard(|| {
        let edges = path_arg(edges, "edges")?;
        let monadic = opt_path_arg(monadic, "monadic")?;
        let dyadic = opt_path_arg(dyadic, "dyadic")?;
        let opts = LoadOptions {
            directed: directed != 0,
            dense: dense != 0,
            intercept: true,
        };
        let net = load_network(&edges, monadic.as_deref(), dyadic.as_deref(), &opts)?;
        put(out, DmNetwork(net))
    })
}

/// Draws a network from the `easy`, `medium` or `hard` preset. When
/// `truth_required` is non-null, the true memberships (slots x K,
/// row-major) are written to `truth_pi` following the array-output
/// convention.
///
/// # Safety
/// `preset` must be NUL-terminated; pointers must be valid for their lengths.
#[no_mangle]
pub unsafe extern "C" fn dm_network_simulate(
    preset: *const c_char,
    seed: u64,
    out: *mut *mut DmNetwork,
    truth_pi: *mut f64,
    truth_len: usize,
    truth_required: *mut usize,
) -> DmStatus {
    guard(|| {
        if preset.is_null() {
            return Err(null("preset"));
        }
        let name = CStr::from_ptr(preset).to_str().map_err(|_| invalid("preset is not valid UTF-8"))?;
        let (net, truth) = generate(&DgpPreset::by_name(name)?, seed)?;
        if !truth_required.is_null() {
            write_array(&truth.pi, truth_pi, truth_len, truth_required)?;
        }
        put(out, DmNetwork(net))
    })
}

/// # Safety
/// `net` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dm_network_free(net: *mut DmNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Writes the node, period and modeled-dyad counts.
///
/// # Safety
/// `net` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_network_shape(
    net: *const DmNetwork,
    n_nodes: *mut usize,
    n_periods: *mut usize,
    n_dyads: *mut usize,
) -> DmStatus {
    guard(|| {
        let net = &handle(net, "network")?.0;
        if n_nodes.is_null() || n_periods.is_null() || n_dyads.is_null() {
            return Err(null("output count"));
        }
        *n_nodes = net.n_nodes();
        *n_periods = net.n_periods();
        *n_dyads = net.n_dyads();
        Ok(())
    })
}

fn spec_for(net: &DynamicNetwork, k: usize, m: usize) -> Result<ModelSpec, Failure> {
    let spec = ModelSpec::new(k, m, net.directed());
    spec.validate()?;
    Ok(spec)
}

/// Fits by batch variational EM from the spectral initialization. A zero
/// `max_iter` or non-positive `tol` selects the default.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_fit_vem(
    net: *const DmNetwork,
    k: usize,
    m: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    out: *mut *mut DmModel,
) -> DmStatus {
    guard(|| {
        let net = &handle(net, "network")?.0;
        let spec = spec_for(net, k, m)?;
        let d = VemConfig::default();
        let cfg = VemConfig {
            seed,
            max_iter: if max_iter > 0 { max_iter } else { d.max_iter },
            tol_hyper: if tol > 0.0 { tol } else { d.tol_hyper },
            ..d
        };
        let init = initialize(net, &spec, &InitConfig { seed, ..InitConfig::default() })?;
        put(out, DmModel(fit_vem(net, &spec, &init, &cfg)?))
    })
}

/// Fits by stochastic variational inference with `batch_nodes` nodes per
/// period per step and a `holdout` fraction of dyads for stopping.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_fit_svi(
    net: *const DmNetwork,
    k: usize,
    m: usize,
    seed: u64,
    batch_nodes: usize,
    holdout: f64,
    out: *mut *mut DmModel,
) -> DmStatus {
    guard(|| {
        let net = &handle(net, "network")?.0;
        let spec = spec_for(net, k, m)?;
        let cfg = SviConfig {
            batch_nodes,
            holdout_frac: holdout,
            seed,
            ..SviConfig::default()
        };
        cfg.validate()?;
        let split = split_holdout(net, holdout, seed)?;
        let init = initialize(&split.train, &spec, &InitConfig { seed, ..InitConfig::default() })?;
        put(out, DmModel(fit_svi(&split, &spec, &init, &cfg)?))
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_model_load(path: *const c_char, out: *mut *mut DmModel) -> DmStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        put(out, DmModel(load_model(&path)?))
    })
}

/// # Safety
/// `model` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dm_model_save(model: *const DmModel, path: *const c_char) -> DmStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        let path = path_arg(path, "path")?;
        save_model(model, &path, None)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dm_model_free(model: *mut DmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes K, M, the iteration count, whether the fit converged and its
/// final lower bound.
///
/// # Safety
/// `model` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_model_summary(
    model: *const DmModel,
    k: *mut usize,
    m: *mut usize,
    iterations: *mut usize,
    converged: *mut c_int,
    lower_bound: *mut f64,
) -> DmStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        if k.is_null() || m.is_null() || iterations.is_null() || converged.is_null() || lower_bound.is_null() {
            return Err(null("output field"));
        }
        *k = model.spec.k;
        *m = model.spec.m;
        *iterations = model.iters;
        *converged = c_int::from(model.converged);
        *lower_bound = model.lower_bound;
        Ok(())
    })
}

/// Edge probabilities between groups (K x K, row-major, sender rows).
///
/// # Safety
/// `model` must be a live handle; `out` must hold `len` values or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_model_blockmodel(model: *const DmModel, out: *mut f64, len: usize, required: *mut usize) -> DmStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        let probs: Vec<f64> = model.hyper.b.iter().map(|&b| logistic(b)).collect();
        write_array(&probs, out, len, required)
    })
}

/// Posterior-mean memberships per node-period slot (slots x K, row-major;
/// slots are ordered by period, then node).
///
/// # Safety
/// `model` must be a live handle; `out` must hold `len` values or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_model_memberships(model: *const DmModel, out: *mut f64, len: usize, required: *mut usize) -> DmStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        write_array(&model.pi_hat, out, len, required)
    })
}

/// State probabilities per period (T x M, row-major).
///
/// # Safety
/// `model` must be a live handle; `out` must hold `len` values or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_model_state_probs(model: *const DmModel, out: *mut f64, len: usize, required: *mut usize) -> DmStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        write_array(&model.vparams.kappa, out, len, required)
    })
}

/// Fitted edge probability of every modeled dyad of `net`, which must be
/// the network the model was fitted on.
///
/// # Safety
/// Handles must be live; `out` must hold `len` values or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_model_predict(
    model: *const DmModel,
    net: *const DmNetwork,
    out: *mut f64,
    len: usize,
    required: *mut usize,
) -> DmStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        let net = &handle(net, "network")?.0;
        write_array(&fitted_probs(model, net)?, out, len, required)
    })
}

/// Area under the ROC curve with its DeLong standard error. `labels` holds
/// 0 or 1 per case.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_auroc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    value: *mut f64,
    sd: *mut f64,
) -> DmStatus {
    guard(|| {
        if scores.is_null() || labels.is_null() || value.is_null() || sd.is_null() {
            return Err(null("argument"));
        }
        let s = std::slice::from_raw_parts(scores, n);
        let l: Vec<bool> = std::slice::from_raw_parts(labels, n).iter().map(|&v| v != 0).collect();
        let a = auroc(s, &l)?;
        *value = a.value;
        *sd = a.sd;
        Ok(())
    })
}
