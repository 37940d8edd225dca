//! C ABI over `hybridq`: fidelity kernels, shot budgets and inference with a trained run.
//!
//! Every fallible call returns a [`QhStatus`]; on failure the message is available from
//! [`qh_last_error_message`] on the same thread until the next failing call. Objects are
//! opaque handles released with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hybridq::featuremap::{fidelity_kernel, fidelity_kernel_shots, train_gram, AngleVector, FeatureMapSpec};
use hybridq::harness::{ArtifactBundle, Store};
use hybridq::qsim::shots::required_shots;
use hybridq::qsim::NoiseSpec;
use hybridq::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Integrity = 5,
    Numerical = 6,
    Config = 7,
    Panic = 8,
    Other = 9,
}

/// A ZZ feature map with full entanglement and the default pair phase.
pub struct QhKernel {
    spec: FeatureMapSpec,
}

/// A finished run loaded from disk with every artifact hash verified.
pub struct QhBundle {
    inner: ArtifactBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QhStatus {
    match e {
        Error::DimensionMismatch { .. } => QhStatus::DimensionMismatch,
        Error::InvalidArgument(_) | Error::InvalidQubit { .. } | Error::Empty(_) => QhStatus::InvalidArgument,
        Error::Io { .. } => QhStatus::Io,
        Error::Integrity(_) | Error::Json(_) => QhStatus::Integrity,
        Error::Numerical(_) | Error::SingularConfusion(_) => QhStatus::Numerical,
        Error::Config(_) => QhStatus::Config,
        Error::Stage { source, .. } => status_of(source),
        _ => QhStatus::Other,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QhStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QhStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            QhStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path<'a>(p: *const c_char, what: &'static str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Error::invalid(format!("{what} is not valid UTF-8")))?;
    Ok(Path::new(s))
}

fn angles(values: &[f64], spec: &FeatureMapSpec) -> Result<AngleVector, Fail> {
    if values.len() != spec.num_qubits {
        return Err(Error::DimensionMismatch { expected: spec.num_qubits, got: values.len() }.into());
    }
    Ok(AngleVector::new(values.to_vec())?)
}

/// Message of the last failed call on this thread, or null. Owned by the library and valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qh_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn qh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Shots needed so an estimated probability is within `epsilon` with confidence `1 - delta`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `uint64_t`.
#[no_mangle]
pub unsafe extern "C" fn qh_required_shots(epsilon: f64, delta: f64, out: *mut u64) -> QhStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = required_shots(epsilon, delta)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be null or point to writable memory for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn qh_kernel_new(num_qubits: usize, reps: usize, out: *mut *mut QhKernel) -> QhStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let spec = FeatureMapSpec::new(num_qubits, reps)?;
        *out = Box::into_raw(Box::new(QhKernel { spec }));
        Ok(())
    })
}

/// Number of qubits, or 0 for a null handle.
///
/// # Safety
/// `kernel` must be null or a live handle from [`qh_kernel_new`].
#[no_mangle]
pub unsafe extern "C" fn qh_kernel_num_qubits(kernel: *const QhKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.spec.num_qubits)
}

/// Exact kernel value between two angle vectors of length `len` (the qubit count).
///
/// # Safety
/// `kernel` must be a live handle; `a` and `b` must point to `len` doubles; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn qh_kernel_eval(
    kernel: *const QhKernel,
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> QhStatus {
    guard(|| {
        let k = as_ref(kernel, "kernel")?;
        let a = angles(slice(a, len, "a")?, &k.spec)?;
        let b = angles(slice(b, len, "b")?, &k.spec)?;
        *as_mut(out, "out")? = fidelity_kernel(&a, &b, &k.spec)?;
        Ok(())
    })
}

/// Shot-estimated kernel value under depolarizing noise, without readout error.
///
/// # Safety
/// Same as [`qh_kernel_eval`].
#[no_mangle]
pub unsafe extern "C" fn qh_kernel_eval_shots(
    kernel: *const QhKernel,
    a: *const f64,
    b: *const f64,
    len: usize,
    shots: u64,
    depol_1q: f64,
    depol_2q: f64,
    seed: u64,
    out: *mut f64,
) -> QhStatus {
    guard(|| {
        let k = as_ref(kernel, "kernel")?;
        let a = angles(slice(a, len, "a")?, &k.spec)?;
        let b = angles(slice(b, len, "b")?, &k.spec)?;
        let noise = NoiseSpec::depolarizing(depol_1q, depol_2q);
        *as_mut(out, "out")? = fidelity_kernel_shots(&a, &b, &k.spec, shots, &noise, false, seed)?;
        Ok(())
    })
}

/// Exact Gram matrix of `n` angle vectors stored row-major (`n × len`), written row-major
/// into `out` (`n × n`).
///
/// # Safety
/// `angle_rows` must point to `n * len` doubles and `out` to `n * n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qh_kernel_gram(
    kernel: *const QhKernel,
    angle_rows: *const f64,
    n: usize,
    len: usize,
    out: *mut f64,
) -> QhStatus {
    guard(|| {
        let k = as_ref(kernel, "kernel")?;
        if len != k.spec.num_qubits {
            return Err(Error::DimensionMismatch { expected: k.spec.num_qubits, got: len }.into());
        }
        let total = n.checked_mul(len).ok_or_else(|| Error::invalid("n * len overflows"))?;
        let rows = slice(angle_rows, total, "angles")?
            .chunks(len)
            .map(|r| angles(r, &k.spec))
            .collect::<Result<Vec<_>, _>>()?;
        let gram = train_gram(&rows, &k.spec)?;
        let cells = n.checked_mul(n).ok_or_else(|| Error::invalid("n * n overflows"))?;
        slice_mut(out, cells, "out")?.iter_mut().zip(gram.iter()).for_each(|(o, g)| *o = *g);
        Ok(())
    })
}

/// # Safety
/// `kernel` must be null or a handle from [`qh_kernel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qh_kernel_free(kernel: *mut QhKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Opens a finished run directory whose stage files live under `store_root`.
///
/// # Safety
/// `run_dir` and `store_root` must be NUL-terminated strings; `out` must point to one
/// writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn qh_bundle_open(
    run_dir: *const c_char,
    store_root: *const c_char,
    out: *mut *mut QhBundle,
) -> QhStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let run_dir = path(run_dir, "run_dir")?;
        let root = path(store_root, "store_root")?;
        if !root.is_dir() {
            return Err(Error::invalid(format!("store root {} is not a directory", root.display())).into());
        }
        let inner = ArtifactBundle::open(run_dir, &Store::new(root)?)?;
        *out = Box::into_raw(Box::new(QhBundle { inner }));
        Ok(())
    })
}

/// Width of the preprocessed feature rows accepted by [`qh_bundle_score`].
///
/// # Safety
/// `bundle` must be a live handle; `out` must point to one writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn qh_bundle_num_features(bundle: *const QhBundle, out: *mut usize) -> QhStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(bundle, "bundle")?.inner.split.test.x.ncols();
        Ok(())
    })
}

/// The stored decision threshold; a row is labelled 1 when its score is at least this.
///
/// # Safety
/// `bundle` must be a live handle; `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn qh_bundle_threshold(bundle: *const QhBundle, out: *mut f64) -> QhStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(bundle, "bundle")?.inner.threshold();
        Ok(())
    })
}

/// Exact-mode scores for `rows` preprocessed feature rows (`rows × cols`, row-major).
/// `labels` may be null; otherwise it receives 0/1 per row from the stored threshold.
///
/// # Safety
/// `x` must point to `rows * cols` floats, `scores` to `rows` doubles and `labels`, when
/// non-null, to `rows` bytes.
#[no_mangle]
pub unsafe extern "C" fn qh_bundle_score(
    bundle: *const QhBundle,
    x: *const f32,
    rows: usize,
    cols: usize,
    scores: *mut f64,
    labels: *mut u8,
) -> QhStatus {
    guard(|| {
        let b = &as_ref(bundle, "bundle")?.inner;
        if rows == 0 {
            return Err(Error::Empty("feature rows").into());
        }
        let total = rows.checked_mul(cols).ok_or_else(|| Error::invalid("rows * cols overflows"))?;
        let view = ndarray::ArrayView2::from_shape((rows, cols), slice(x, total, "x")?)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let s = b.score_features(view)?;
        let out = slice_mut(scores, rows, "scores")?;
        out.copy_from_slice(&s);
        if !labels.is_null() {
            let t = b.threshold();
            for (l, v) in slice_mut(labels, rows, "labels")?.iter_mut().zip(&s) {
                *l = u8::from(*v >= t);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `bundle` must be null or a handle from [`qh_bundle_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qh_bundle_free(bundle: *mut QhBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}
