//! C ABI over `ggm-core`.
//!
//! Objects are opaque heap handles created by `ggm_*_new`-style calls and
//! released with the matching `ggm_*_free`. Every fallible call returns a
//! [`GgmStatus`]; on failure `ggm_last_error()` describes the problem for
//! the calling thread. Matrices are passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ggm_core::evalbench::structure_error;
use ggm_core::generators::GeneratorSpec;
use ggm_core::learners::{learn, Algorithm, Data, LearnerConfig, PrecisionEstimate};
use ggm_core::linalg::SymMatrix;
use ggm_core::model::{kappa_of, parse_model_json, GgmModel as CoreModel, ModelFile};
use ggm_core::sampler::{sample, SampleSet};
use ggm_core::Error;
use ndarray::Array2;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GgmStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or a too-small output buffer.
    InvalidArgument = 1,
    /// Input rejected by the library (bad parameters, malformed JSON, ...).
    Validation = 2,
    /// A numerical routine failed (not positive definite, no convergence, ...).
    Numerical = 3,
    /// Internal panic; the handle arguments should be considered unusable.
    Panic = 4,
}

/// A Gaussian graphical model.
pub struct GgmModel {
    inner: CoreModel,
}

/// An `m × n` sample matrix.
pub struct GgmSamples {
    inner: SampleSet,
}

/// A learned precision matrix and edge set.
pub struct GgmEstimate {
    inner: PrecisionEstimate,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ggm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ggm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

enum Fail {
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type Res<T> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> Res<()>) -> GgmStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GgmStatus::Ok,
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            GgmStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            let status = if e.is_numerical() {
                GgmStatus::Numerical
            } else {
                GgmStatus::Validation
            };
            set_error(e.to_string());
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            GgmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(Fail::Arg(format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{name} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Res<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn obj<'a, T>(p: *const T, name: &str) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| Fail::Arg(format!("{name} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Res<&'a mut T> {
    p.as_mut().ok_or_else(|| Fail::Arg(format!("{name} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Res<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Arg(format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_buf<T: Copy>(dst: *mut T, cap: usize, src: &[T], name: &str) -> Res<()> {
    if cap < src.len() {
        return Err(Fail::Arg(format!("{name} holds {cap} values, {} needed", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(Fail::Arg(format!("{name} is null")));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

fn into_handle<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn square(n: usize, data: &[f64]) -> Res<SymMatrix> {
    let a = Array2::from_shape_vec((n, n), data.to_vec()).map_err(|e| Fail::Arg(e.to_string()))?;
    Ok(SymMatrix::new(a)?)
}

/// Parses a model file (the JSON written by `ggm gen`).
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_from_json(json: *const c_char, out: *mut *mut GgmModel) -> GgmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let inner = parse_model_json(str_arg(json, "json")?)?;
        *out = into_handle(GgmModel { inner });
        Ok(())
    })
}

/// Builds a model from a generator spec such as
/// `{"family": "path_cliques", "n": 64, "d": 4, "rho": 0.95, "standardize": true}`.
///
/// # Safety
/// `spec_json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_generate(spec_json: *const c_char, out: *mut *mut GgmModel) -> GgmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let spec: GeneratorSpec =
            serde_json::from_str(str_arg(spec_json, "spec_json")?).map_err(Error::from)?;
        *out = into_handle(GgmModel { inner: spec.build()? });
        Ok(())
    })
}

/// Builds a model from an `n × n` precision matrix.
///
/// # Safety
/// `theta` must point to `n * n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_from_precision(n: usize, theta: *const f64, out: *mut *mut GgmModel) -> GgmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let data = slice_arg(theta, n * n, "theta")?;
        *out = into_handle(GgmModel {
            inner: CoreModel::from_precision(square(n, data)?)?,
        });
        Ok(())
    })
}

/// Builds a model from an `n × n` covariance matrix.
///
/// # Safety
/// `sigma` must point to `n * n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_from_covariance(n: usize, sigma: *const f64, out: *mut *mut GgmModel) -> GgmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let data = slice_arg(sigma, n * n, "sigma")?;
        *out = into_handle(GgmModel {
            inner: CoreModel::from_covariance(square(n, data)?)?,
        });
        Ok(())
    })
}

/// Number of variables, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_dim(model: *const GgmModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// κ of the model through `out`; `Validation` when the model has no edges.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_kappa(model: *const GgmModel, out: *mut f64) -> GgmStatus {
    guard(|| {
        let m = obj(model, "model")?;
        let out = out_ptr(out, "out")?;
        *out = kappa_of(&m.inner).ok_or(Error::NoEdges)?;
        Ok(())
    })
}

/// Copies the precision matrix into `buf` (`n * n` doubles).
///
/// # Safety
/// `model` must be a live handle and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_precision(model: *const GgmModel, buf: *mut f64, cap: usize) -> GgmStatus {
    guard(|| {
        let m = obj(model, "model")?;
        let a = m.inner.theta().as_array();
        write_buf(buf, cap, &a.iter().copied().collect::<Vec<_>>(), "buf")
    })
}

/// Copies the covariance matrix into `buf` (`n * n` doubles).
///
/// # Safety
/// `model` must be a live handle and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_covariance(model: *const GgmModel, buf: *mut f64, cap: usize) -> GgmStatus {
    guard(|| {
        let m = obj(model, "model")?;
        let a = m.inner.sigma().as_array();
        write_buf(buf, cap, &a.iter().copied().collect::<Vec<_>>(), "buf")
    })
}

/// Serializes the model in the model-file format. Release the string with
/// [`ggm_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_to_json(model: *const GgmModel, out: *mut *mut c_char) -> GgmStatus {
    guard(|| {
        let m = obj(model, "model")?;
        let out = out_ptr(out, "out")?;
        let text = ggm_core::json::to_canonical(&ModelFile::from_model(&m.inner, None))?;
        *out = CString::new(text).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ggm_model_free(model: *mut GgmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ggm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Draws `m` samples with the given seed.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ggm_sample(model: *const GgmModel, m: usize, seed: u64, out: *mut *mut GgmSamples) -> GgmStatus {
    guard(|| {
        let model = obj(model, "model")?;
        let out = out_ptr(out, "out")?;
        *out = into_handle(GgmSamples {
            inner: sample(&model.inner, m, seed)?,
        });
        Ok(())
    })
}

/// Wraps caller data (`m × n`, row-major).
///
/// # Safety
/// `data` must point to `m * n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ggm_samples_from_data(m: usize, n: usize, data: *const f64, out: *mut *mut GgmSamples) -> GgmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let values = slice_arg(data, m * n, "data")?;
        let a = Array2::from_shape_vec((m, n), values.to_vec()).map_err(|e| Fail::Arg(e.to_string()))?;
        *out = into_handle(GgmSamples {
            inner: SampleSet::from_data(a)?,
        });
        Ok(())
    })
}

/// Writes the row and column counts.
///
/// # Safety
/// `samples` must be a live handle; `m` and `n` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ggm_samples_shape(samples: *const GgmSamples, m: *mut usize, n: *mut usize) -> GgmStatus {
    guard(|| {
        let s = obj(samples, "samples")?;
        *out_ptr(m, "m")? = s.inner.m();
        *out_ptr(n, "n")? = s.inner.n();
        Ok(())
    })
}

/// Copies the data (row-major, `m * n` doubles) into `buf`.
///
/// # Safety
/// `samples` must be a live handle and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ggm_samples_data(samples: *const GgmSamples, buf: *mut f64, cap: usize) -> GgmStatus {
    guard(|| {
        let s = obj(samples, "samples")?;
        let v: Vec<f64> = s.inner.data().iter().copied().collect();
        write_buf(buf, cap, &v, "buf")
    })
}

/// # Safety
/// `samples` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ggm_samples_free(samples: *mut GgmSamples) {
    if !samples.is_null() {
        drop(Box::from_raw(samples));
    }
}

unsafe fn parse_learn_args(algorithm: *const c_char, config_json: *const c_char) -> Res<(Algorithm, LearnerConfig)> {
    let alg: Algorithm = str_arg(algorithm, "algorithm")?.parse()?;
    let cfg = match opt_str_arg(config_json, "config_json")? {
        Some(text) => serde_json::from_str(text).map_err(Error::from)?,
        None => LearnerConfig::default(),
    };
    Ok((alg, cfg))
}

/// Learns from samples. `algorithm` is `greedy`, `search_and_validate` or
/// `hybrid`; `config_json` (nullable) holds learner parameters such as
/// `{"kappa": 0.3, "d": 4}` or `{"nu": 0.01, "t_steps": 6}`.
///
/// # Safety
/// `samples` must be a live handle, the strings nul-terminated (or null for
/// `config_json`) and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ggm_learn_samples(
    samples: *const GgmSamples,
    algorithm: *const c_char,
    config_json: *const c_char,
    out: *mut *mut GgmEstimate,
) -> GgmStatus {
    guard(|| {
        let s = obj(samples, "samples")?;
        let out = out_ptr(out, "out")?;
        let (alg, cfg) = parse_learn_args(algorithm, config_json)?;
        let res = learn(&Data::Samples(&s.inner), alg, &cfg)?;
        *out = into_handle(GgmEstimate { inner: res.estimate });
        Ok(())
    })
}

/// Learns from the model's exact covariance. Unset `kappa` and `d` in the
/// config default to the model's own values.
///
/// # Safety
/// As for [`ggm_learn_samples`], with `model` a live handle.
#[no_mangle]
pub unsafe extern "C" fn ggm_learn_population(
    model: *const GgmModel,
    algorithm: *const c_char,
    config_json: *const c_char,
    out: *mut *mut GgmEstimate,
) -> GgmStatus {
    guard(|| {
        let m = obj(model, "model")?;
        let out = out_ptr(out, "out")?;
        let (alg, mut cfg) = parse_learn_args(algorithm, config_json)?;
        cfg.kappa = cfg.kappa.or_else(|| kappa_of(&m.inner));
        cfg.d = cfg.d.or(Some(ggm_core::model::max_degree_of(&m.inner)));
        let res = learn(&Data::Population(m.inner.sigma()), alg, &cfg)?;
        *out = into_handle(GgmEstimate { inner: res.estimate });
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ggm_estimate_dim(est: *const GgmEstimate) -> usize {
    est.as_ref().map_or(0, |e| e.inner.theta_hat.dim())
}

/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ggm_estimate_edge_count(est: *const GgmEstimate) -> usize {
    est.as_ref().map_or(0, |e| e.inner.edges.len())
}

/// Copies the edges as `(i, j)` pairs with `i < j` into `buf`
/// (`2 * edge_count` entries).
///
/// # Safety
/// `est` must be a live handle and `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn ggm_estimate_edges(est: *const GgmEstimate, buf: *mut usize, cap: usize) -> GgmStatus {
    guard(|| {
        let e = obj(est, "est")?;
        let flat: Vec<usize> = e.inner.edges.iter().flat_map(|&(i, j)| [i, j]).collect();
        write_buf(buf, cap, &flat, "buf")
    })
}

/// Copies the estimated precision matrix (`n * n` doubles) into `buf`.
///
/// # Safety
/// `est` must be a live handle and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ggm_estimate_precision(est: *const GgmEstimate, buf: *mut f64, cap: usize) -> GgmStatus {
    guard(|| {
        let e = obj(est, "est")?;
        let v: Vec<f64> = e.inner.theta_hat.as_array().iter().copied().collect();
        write_buf(buf, cap, &v, "buf")
    })
}

/// Incorrect edges per node after thresholding the estimate at `kappa / 2`.
///
/// # Safety
/// `est` and `truth` must be live handles and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ggm_structure_error(
    est: *const GgmEstimate,
    truth: *const GgmModel,
    kappa: f64,
    out: *mut f64,
) -> GgmStatus {
    guard(|| {
        let e = obj(est, "est")?;
        let t = obj(truth, "truth")?;
        *out_ptr(out, "out")? = structure_error(&e.inner, &t.inner, kappa)?;
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ggm_estimate_free(est: *mut GgmEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let p = ggm_last_error();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut m: *mut GgmModel = ptr::null_mut();
        let st = unsafe { ggm_model_from_json(ptr::null(), &mut m) };
        assert_eq!(st, GgmStatus::InvalidArgument);
        assert!(last_error().contains("json is null"));
        assert!(m.is_null());
    }

    #[test]
    fn status_follows_error_family() {
        let mut m: *mut GgmModel = ptr::null_mut();
        let bad = [1.0, 2.0, 2.0, 1.0];
        assert_eq!(unsafe { ggm_model_from_precision(2, bad.as_ptr(), &mut m) }, GgmStatus::Numerical);
        let spec = CString::new(r#"{"family": "path_cliques", "n": 10, "d": 4, "rho": 0.9}"#).unwrap();
        assert_eq!(unsafe { ggm_model_generate(spec.as_ptr(), &mut m) }, GgmStatus::Validation);
        let ok = [2.0, -1.0, -1.0, 2.0];
        assert_eq!(unsafe { ggm_model_from_precision(2, ok.as_ptr(), &mut m) }, GgmStatus::Ok);
        assert!(ggm_last_error().is_null());
        assert_eq!(unsafe { ggm_model_dim(m) }, 2);
        unsafe { ggm_model_free(m) };
    }

    #[test]
    fn short_buffer_is_reported() {
        let mut m: *mut GgmModel = ptr::null_mut();
        let ok = [2.0, -1.0, -1.0, 2.0];
        unsafe { ggm_model_from_precision(2, ok.as_ptr(), &mut m) };
        let mut buf = [0.0; 3];
        assert_eq!(unsafe { ggm_model_precision(m, buf.as_mut_ptr(), 3) }, GgmStatus::InvalidArgument);
        unsafe { ggm_model_free(m) };
    }
}
