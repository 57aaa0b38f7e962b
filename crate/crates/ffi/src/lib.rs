//! C ABI surface: opaque handles over matrices and sparse sketches, integer
//! status codes, and a thread-local last-error message. The generated header
//! lands in `include/sketchlab.h`.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::slice;

use sketchlab::linalg::DenseMatrix;
use sketchlab::nystrom::nystrom_loss;
use sketchlab::pinv::{pinv_decell, DEFAULT_COEFF_TOL};
use sketchlab::scw::{scw, scw_loss};
use sketchlab::sketch::{random_sparse_init, SparseSketch};
use sketchlab::train::{surrogate_grad, surrogate_loss};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum skl_status {
    SKL_OK = 0,
    SKL_ERR_NULL_POINTER = 1,
    SKL_ERR_INVALID_ARGUMENT = 2,
    SKL_ERR_NUMERIC = 3,
}

/// Opaque dense matrix handle.
pub struct skl_matrix {
    inner: DenseMatrix,
}

/// Opaque sparse sketching-matrix handle.
pub struct skl_sketch {
    inner: SparseSketch,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let c = CString::new(msg.to_string()).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(msg: impl std::fmt::Display, code: skl_status) -> skl_status {
    set_error(msg);
    code
}

/// Message for the most recent error on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn skl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a matrix from a row-major buffer of `rows * cols` doubles.
/// Returns null on invalid input (see skl_last_error).
///
/// # Safety
/// `data` must point to at least `rows * cols` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn skl_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
) -> *mut skl_matrix {
    if data.is_null() {
        set_error("data pointer is null");
        return std::ptr::null_mut();
    }
    if rows == 0 || cols == 0 {
        set_error("rows and cols must be positive");
        return std::ptr::null_mut();
    }
    let values = slice::from_raw_parts(data, rows * cols).to_vec();
    if values.iter().any(|v| !v.is_finite()) {
        set_error("matrix entries must be finite");
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(skl_matrix {
        inner: DenseMatrix::from_vec(rows, cols, values),
    }))
}

/// # Safety
/// `m` must be a pointer from this library, not yet freed; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn skl_matrix_free(m: *mut skl_matrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn skl_matrix_rows(m: *const skl_matrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// # Safety
/// `m` must be a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn skl_matrix_cols(m: *const skl_matrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.cols())
}

/// Copies the matrix into `out` (row-major); `len` is the capacity of `out`
/// in doubles and must be at least rows * cols.
///
/// # Safety
/// `m` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn skl_matrix_copy_data(
    m: *const skl_matrix,
    out: *mut f64,
    len: usize,
) -> skl_status {
    let Some(m) = m.as_ref() else {
        return fail("matrix handle is null", skl_status::SKL_ERR_NULL_POINTER);
    };
    if out.is_null() {
        return fail("output pointer is null", skl_status::SKL_ERR_NULL_POINTER);
    }
    let need = m.inner.rows() * m.inner.cols();
    if len < need {
        return fail(
            format!("output capacity {len} below required {need}"),
            skl_status::SKL_ERR_INVALID_ARGUMENT,
        );
    }
    slice::from_raw_parts_mut(out, need).copy_from_slice(m.inner.data());
    skl_status::SKL_OK
}

/// Random sparse sketch with `s` nonzeros per column, seeded.
#[no_mangle]
pub extern "C" fn skl_sketch_random(m: usize, n: usize, s: usize, seed: u64) -> *mut skl_sketch {
    match random_sparse_init(m, n, s, seed) {
        Ok(sk) => Box::into_raw(Box::new(skl_sketch { inner: sk })),
        Err(e) => {
            set_error(e);
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be a pointer from this library, not yet freed; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn skl_sketch_free(s: *mut skl_sketch) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Densifies a sketch into a matrix handle.
///
/// # Safety
/// `s` must be a live sketch handle.
#[no_mangle]
pub unsafe extern "C" fn skl_sketch_densify(s: *const skl_sketch) -> *mut skl_matrix {
    let Some(s) = s.as_ref() else {
        set_error("sketch handle is null");
        return std::ptr::null_mut();
    };
    Box::into_raw(Box::new(skl_matrix {
        inner: s.inner.densify(),
    }))
}

unsafe fn two_handles<'a>(
    s: *const skl_sketch,
    a: *const skl_matrix,
) -> Result<(&'a skl_sketch, &'a skl_matrix), skl_status> {
    let s = s
        .as_ref()
        .ok_or_else(|| fail("sketch handle is null", skl_status::SKL_ERR_NULL_POINTER))?;
    let a = a
        .as_ref()
        .ok_or_else(|| fail("matrix handle is null", skl_status::SKL_ERR_NULL_POINTER))?;
    Ok((s, a))
}

/// Rank-k approximation through the sketch; writes a new matrix handle to
/// `out`.
///
/// # Safety
/// `s` and `a` must be live handles; `out` must be a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn skl_scw(
    s: *const skl_sketch,
    a: *const skl_matrix,
    k: usize,
    out: *mut *mut skl_matrix,
) -> skl_status {
    let (s, a) = match two_handles(s, a) {
        Ok(v) => v,
        Err(c) => return c,
    };
    if out.is_null() {
        return fail("output slot is null", skl_status::SKL_ERR_NULL_POINTER);
    }
    match scw(&s.inner, &a.inner, k) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(skl_matrix { inner: m }));
            skl_status::SKL_OK
        }
        Err(e) => fail(e, skl_status::SKL_ERR_NUMERIC),
    }
}

/// ‖A − scw(S, A, k)‖_F² for a unit-Frobenius-norm A.
///
/// # Safety
/// `s` and `a` must be live handles; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn skl_scw_loss(
    s: *const skl_sketch,
    a: *const skl_matrix,
    k: usize,
    out: *mut f64,
) -> skl_status {
    let (s, a) = match two_handles(s, a) {
        Ok(v) => v,
        Err(c) => return c,
    };
    if out.is_null() {
        return fail("output pointer is null", skl_status::SKL_ERR_NULL_POINTER);
    }
    match scw_loss(&s.inner, &a.inner, k) {
        Ok(v) => {
            *out = v;
            skl_status::SKL_OK
        }
        Err(e) => fail(e, skl_status::SKL_ERR_NUMERIC),
    }
}

/// Moore–Penrose pseudo-inverse via the characteristic-polynomial recursion.
/// Pass `coeff_tol <= 0` for the default tolerance.
///
/// # Safety
/// `z` must be a live handle; `out` must be a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn skl_pinv_decell(
    z: *const skl_matrix,
    coeff_tol: f64,
    out: *mut *mut skl_matrix,
) -> skl_status {
    let Some(z) = z.as_ref() else {
        return fail("matrix handle is null", skl_status::SKL_ERR_NULL_POINTER);
    };
    if out.is_null() {
        return fail("output slot is null", skl_status::SKL_ERR_NULL_POINTER);
    }
    let tol = if coeff_tol > 0.0 {
        coeff_tol
    } else {
        DEFAULT_COEFF_TOL
    };
    let p = pinv_decell(&z.inner, tol);
    *out = Box::into_raw(Box::new(skl_matrix { inner: p }));
    skl_status::SKL_OK
}

/// Nyström approximation error ‖A − AS(SᵀAS)†(AS)ᵀ‖_F² for symmetric PSD A;
/// `s` is a dense sketching matrix with as many rows as A.
///
/// # Safety
/// `s` and `a` must be live matrix handles; `out` must point to a writable
/// double.
#[no_mangle]
pub unsafe extern "C" fn skl_nystrom_loss(
    s: *const skl_matrix,
    a: *const skl_matrix,
    out: *mut f64,
) -> skl_status {
    let (Some(s), Some(a)) = (s.as_ref(), a.as_ref()) else {
        return fail("matrix handle is null", skl_status::SKL_ERR_NULL_POINTER);
    };
    if out.is_null() {
        return fail("output pointer is null", skl_status::SKL_ERR_NULL_POINTER);
    }
    match nystrom_loss(&s.inner, &a.inner) {
        Ok(v) => {
            *out = v;
            skl_status::SKL_OK
        }
        Err(e) => fail(e, skl_status::SKL_ERR_NUMERIC),
    }
}

/// Training surrogate loss ‖U_kᵀSᵀSU − I₀‖_F² for a dense sketch `s`.
///
/// # Safety
/// `s` and `a` must be live matrix handles; `out` must point to a writable
/// double.
#[no_mangle]
pub unsafe extern "C" fn skl_surrogate_loss(
    s: *const skl_matrix,
    a: *const skl_matrix,
    k: usize,
    out: *mut f64,
) -> skl_status {
    let (Some(s), Some(a)) = (s.as_ref(), a.as_ref()) else {
        return fail("matrix handle is null", skl_status::SKL_ERR_NULL_POINTER);
    };
    if out.is_null() {
        return fail("output pointer is null", skl_status::SKL_ERR_NULL_POINTER);
    }
    match surrogate_loss(&s.inner, &a.inner, k) {
        Ok(v) => {
            *out = v;
            skl_status::SKL_OK
        }
        Err(e) => fail(e, skl_status::SKL_ERR_NUMERIC),
    }
}

/// Gradient of the surrogate loss with respect to the dense sketch.
///
/// # Safety
/// `s` and `a` must be live matrix handles; `out` must be a writable pointer
/// slot.
#[no_mangle]
pub unsafe extern "C" fn skl_surrogate_grad(
    s: *const skl_matrix,
    a: *const skl_matrix,
    k: usize,
    out: *mut *mut skl_matrix,
) -> skl_status {
    let (Some(s), Some(a)) = (s.as_ref(), a.as_ref()) else {
        return fail("matrix handle is null", skl_status::SKL_ERR_NULL_POINTER);
    };
    if out.is_null() {
        return fail("output slot is null", skl_status::SKL_ERR_NULL_POINTER);
    }
    match surrogate_grad(&s.inner, &a.inner, k) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(skl_matrix { inner: g }));
            skl_status::SKL_OK
        }
        Err(e) => fail(e, skl_status::SKL_ERR_NUMERIC),
    }
}
