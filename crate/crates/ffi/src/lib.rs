//! C ABI over `bte-core`.
//!
//! Conventions:
//!
//! * Every fallible function returns a [`BteStatus`]; results come back
//!   through out-pointers, which are written only on success.
//! * Objects are opaque handles. Each constructor has a matching `_free`,
//!   and `_free(NULL)` is a no-op.
//! * On failure a message is kept per thread; [`bte_last_error`] returns it
//!   until the next failing call on that thread.
//! * Panics never cross the boundary; they surface as
//!   [`BteStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

mod handles;
mod stats;

pub use handles::*;
pub use stats::*;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BteStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Encode = 5,
    Perturb = 6,
    Features = 7,
    Hint = 8,
    Stats = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

pub(crate) struct Failure {
    pub status: BteStatus,
    pub message: String,
}

impl Failure {
    pub(crate) fn new(status: BteStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

pub(crate) type FfiResult = Result<(), Failure>;

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording its failure or panic.
pub(crate) fn guard(f: impl FnOnce() -> FfiResult) -> BteStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BteStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_owned());
            set_last_error(&format!("internal panic: {msg}"));
            BteStatus::Panic
        }
    }
}

pub(crate) fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass pointers that are either null or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(BteStatus::NullArgument, format!("{name} is NULL")))
}

pub(crate) fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass pointers that are either null or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| Failure::new(BteStatus::NullArgument, format!("{name} is NULL")))
}

pub(crate) fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(BteStatus::NullArgument, format!("{name} is NULL")));
    }
    // SAFETY: non-null and, per the API contract, NUL-terminated.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(BteStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Message of the last failure on this thread, or NULL if none. Valid until
/// the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn bte_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Clears the stored message for this thread.
#[no_mangle]
pub extern "C" fn bte_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bte_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
