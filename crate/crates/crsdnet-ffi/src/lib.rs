//! C ABI for the crsdnet pipeline.
//!
//! Conventions: every function returns a [`CrsdStatus`] code; results come
//! back through out-pointers. Handles are opaque and must be released with
//! the matching `_free` function. Strings returned by the library must be
//! released with [`crsd_string_free`]. On any non-OK status the thread-local
//! error message is readable via [`crsd_last_error`] until the next call
//! on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use crsdnet::data_model::Dataset;
use crsdnet::forest::ForestParams;
use crsdnet::lbp::LbpParams;
use crsdnet::pipeline::{run_setting_prepared, DataSource, Prepared, RunConfig};
use crsdnet::synth::{generate, SynthParams};

/// Result codes for every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrsdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    RuntimeError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap());
}

fn status_of(err: &crsdnet::CrsdError) -> CrsdStatus {
    use crsdnet::CrsdError as E;
    match err {
        E::Io(_) => CrsdStatus::Io,
        E::InvalidParam(_) | E::InvalidConfig(_) => CrsdStatus::InvalidArgument,
        _ => CrsdStatus::RuntimeError,
    }
}

/// Opaque dataset handle.
pub struct CrsdDataset {
    prepared: Prepared,
}

/// Last error message for this thread; valid until the next FFI call on
/// the same thread. Never NULL. Do not free.
#[no_mangle]
pub extern "C" fn crsd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a malloc'd string; free with `crsd_string_free`.
#[no_mangle]
pub extern "C" fn crsd_version() -> *mut c_char {
    CString::new(env!("CARGO_PKG_VERSION")).unwrap().into_raw()
}

/// Free a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn crsd_string_free(s: *mut c_char) {
    if !s.is_null() {
        unsafe { drop(CString::from_raw(s)) };
    }
}

unsafe fn read_path(path: *const c_char) -> Result<PathBuf, CrsdStatus> {
    if path.is_null() {
        set_error("path is NULL");
        return Err(CrsdStatus::NullPointer);
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(CrsdStatus::InvalidUtf8)
        }
    }
}

fn finish_dataset(
    ds: Result<Dataset, crsdnet::CrsdError>,
    out: *mut *mut CrsdDataset,
) -> CrsdStatus {
    match ds {
        Ok(dataset) => {
            let handle = Box::new(CrsdDataset {
                prepared: Prepared::from_dataset(dataset),
            });
            unsafe { *out = Box::into_raw(handle) };
            CrsdStatus::Ok
        }
        Err(e) => {
            let code = status_of(&e);
            set_error(e.to_string());
            code
        }
    }
}

/// Load a review TSV into a dataset handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crsd_dataset_load_tsv(
    path: *const c_char,
    out: *mut *mut CrsdDataset,
) -> CrsdStatus {
    if out.is_null() {
        set_error("out is NULL");
        return CrsdStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let path = match read_path(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    finish_dataset(Dataset::load_tsv(&path), out)
}

/// Generate a synthetic dataset handle.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crsd_dataset_synth(
    n_users: usize,
    n_products: usize,
    spam_fraction: f64,
    seed: u64,
    out: *mut *mut CrsdDataset,
) -> CrsdStatus {
    if out.is_null() {
        set_error("out is NULL");
        return CrsdStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let params = SynthParams {
        n_users,
        n_products,
        spam_fraction,
        seed,
        ..Default::default()
    };
    finish_dataset(generate(&params), out)
}

/// Number of users in the dataset.
///
/// # Safety
/// `ds` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crsd_dataset_n_users(
    ds: *const CrsdDataset,
    out: *mut usize,
) -> CrsdStatus {
    if ds.is_null() || out.is_null() {
        set_error("ds or out is NULL");
        return CrsdStatus::NullPointer;
    }
    *out = (*ds).prepared.dataset.n_users();
    CrsdStatus::Ok
}

/// Release a dataset handle. NULL is a no-op.
///
/// # Safety
/// `ds` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn crsd_dataset_free(ds: *mut CrsdDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Run one pipeline setting over a single seed and return the report as a
/// malloc'd JSON string through `out_json` (free with `crsd_string_free`).
///
/// # Safety
/// `ds` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crsd_run(
    ds: *const CrsdDataset,
    setting: u8,
    budget_fraction: f64,
    seed: u64,
    n_trees: usize,
    out_json: *mut *mut c_char,
) -> CrsdStatus {
    if ds.is_null() || out_json.is_null() {
        set_error("ds or out_json is NULL");
        return CrsdStatus::NullPointer;
    }
    *out_json = ptr::null_mut();
    let cfg = RunConfig {
        data: DataSource::Synth(SynthParams::default()),
        setting,
        budget_fraction,
        seeds: vec![seed],
        forest: ForestParams {
            n_trees,
            ..Default::default()
        },
        lbp: LbpParams::default(),
        sparsify: Default::default(),
        tau: 0.5,
    };
    match run_setting_prepared(&cfg, &(*ds).prepared).and_then(|r| r.to_json()) {
        Ok(json) => {
            *out_json = CString::new(json.replace('\0', " ")).unwrap().into_raw();
            CrsdStatus::Ok
        }
        Err(e) => {
            let code = status_of(&e);
            set_error(e.to_string());
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_run_roundtrip() {
        unsafe {
            let mut ds: *mut CrsdDataset = ptr::null_mut();
            let st = crsd_dataset_synth(200, 30, 0.2, 1, &mut ds);
            assert_eq!(st, CrsdStatus::Ok);
            assert!(!ds.is_null());

            let mut n = 0usize;
            assert_eq!(crsd_dataset_n_users(ds, &mut n), CrsdStatus::Ok);
            assert_eq!(n, 200);

            let mut json: *mut c_char = ptr::null_mut();
            let st = crsd_run(ds, 1, 0.05, 0, 20, &mut json);
            assert_eq!(st, CrsdStatus::Ok);
            let text = CStr::from_ptr(json).to_str().unwrap().to_string();
            assert!(text.contains("\"auc\""));
            crsd_string_free(json);
            crsd_dataset_free(ds);
        }
    }

    #[test]
    fn null_and_error_paths() {
        unsafe {
            assert_eq!(
                crsd_dataset_load_tsv(ptr::null(), ptr::null_mut()),
                CrsdStatus::NullPointer
            );
            let mut ds: *mut CrsdDataset = ptr::null_mut();
            let path = CString::new("/nonexistent/file.tsv").unwrap();
            let st = crsd_dataset_load_tsv(path.as_ptr(), &mut ds);
            assert_eq!(st, CrsdStatus::Io);
            assert!(ds.is_null());
            let msg = CStr::from_ptr(crsd_last_error()).to_str().unwrap();
            assert!(!msg.is_empty());

            // invalid setting id surfaces as InvalidArgument
            let st = crsd_dataset_synth(50, 10, 0.2, 0, &mut ds);
            assert_eq!(st, CrsdStatus::Ok);
            let mut json: *mut c_char = ptr::null_mut();
            let st = crsd_run(ds, 9, 0.05, 0, 10, &mut json);
            assert_eq!(st, CrsdStatus::InvalidArgument);
            assert!(json.is_null());
            crsd_dataset_free(ds);
        }
    }

    #[test]
    fn version_string_is_returned() {
        let v = crsd_version();
        assert!(!v.is_null());
        unsafe {
            let s = CStr::from_ptr(v).to_str().unwrap();
            assert!(s.contains('.'));
            crsd_string_free(v);
        }
    }

    #[test]
    fn header_is_generated() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("crsdnet.h");
        let text = std::fs::read_to_string(header).unwrap();
        assert!(text.contains("crsd_run"));
        assert!(text.contains("CrsdStatus"));
        assert!(text.contains("CRSD_STATUS_OK"));
    }
}
