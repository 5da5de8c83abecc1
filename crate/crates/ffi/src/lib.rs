//! C ABI over the shiftlab core: an opaque map handle, status codes and a
//! thread-local last-error message. Points cross the boundary as `2k`
//! doubles, real and imaginary parts interleaved.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use shiftlab::dynamics::{apply_shift, apply_shift_inverse, graph_residual, iterate};
use shiftlab::filtration::{classify_point, RegionLabel};
use shiftlab::potential::{green_minus, green_plus};
use shiftlab::{Error, Point, PolySpec, ShiftSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftlabStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid input; matches CLI exit code 2.
    Validation = 2,
    /// Escape, root-solve or other numerical failure; matches exit code 3.
    Numerical = 3,
    Panic = 4,
}

/// Region of a point relative to the filtration.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftlabRegion {
    Inner = 0,
    PlusCone = 1,
    MinusCone = 2,
}

/// Opaque handle to a validated shift-like map.
pub struct ShiftlabShift {
    spec: ShiftSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(err: Error) -> ShiftlabStatus {
    let status = if err.is_validation() {
        ShiftlabStatus::Validation
    } else {
        ShiftlabStatus::Numerical
    };
    set_error(err.to_string());
    status
}

fn guard(f: impl FnOnce() -> Result<(), ShiftlabStatus>) -> ShiftlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ShiftlabStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            ShiftlabStatus::Panic
        }
    }
}

fn null() -> ShiftlabStatus {
    set_error("null pointer argument".into());
    ShiftlabStatus::NullPointer
}

unsafe fn handle<'a>(h: *const ShiftlabShift) -> Result<&'a ShiftSpec, ShiftlabStatus> {
    h.as_ref().map(|h| &h.spec).ok_or_else(null)
}

unsafe fn read_point(s: &ShiftSpec, z: *const f64) -> Result<Point, ShiftlabStatus> {
    if z.is_null() {
        return Err(null());
    }
    let raw = std::slice::from_raw_parts(z, 2 * s.k);
    Ok(Point(raw.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()))
}

unsafe fn write_point(z: &Point, out: *mut f64) -> Result<(), ShiftlabStatus> {
    if out.is_null() {
        return Err(null());
    }
    let dst = std::slice::from_raw_parts_mut(out, 2 * z.len());
    for (c, d) in z.iter().zip(dst.chunks_mut(2)) {
        d[0] = c.re;
        d[1] = c.im;
    }
    Ok(())
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), ShiftlabStatus> {
    if out.is_null() {
        return Err(null());
    }
    *out = v;
    Ok(())
}

/// Creates a map of dimension `k` and type `nu`. `coeffs` holds
/// `n_coeffs` complex coefficients, lowest degree first, interleaved.
///
/// # Safety
/// `coeffs` must point to `2 * n_coeffs` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_shift_new(
    k: usize,
    nu: usize,
    a_re: f64,
    a_im: f64,
    coeffs: *const f64,
    n_coeffs: usize,
    out: *mut *mut ShiftlabShift,
) -> ShiftlabStatus {
    guard(|| {
        if coeffs.is_null() || out.is_null() {
            return Err(null());
        }
        let raw = std::slice::from_raw_parts(coeffs, 2 * n_coeffs);
        let p = PolySpec::new(raw.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect());
        let spec = ShiftSpec::new(k, nu, Complex64::new(a_re, a_im), p).map_err(fail)?;
        *out = Box::into_raw(Box::new(ShiftlabShift { spec }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `h` must come from `shiftlab_shift_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_shift_free(h: *mut ShiftlabShift) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Dimension `k` of the map, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_dimension(h: *const ShiftlabShift) -> usize {
    h.as_ref().map_or(0, |h| h.spec.k)
}

/// `out = S_a(z)`.
///
/// # Safety
/// `z` and `out` must each hold `2k` doubles.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_apply(h: *const ShiftlabShift, z: *const f64, out: *mut f64) -> ShiftlabStatus {
    guard(|| {
        let s = handle(h)?;
        let w = apply_shift(s, &read_point(s, z)?).map_err(fail)?;
        write_point(&w, out)
    })
}

/// `out = S_a^{-1}(z)`; fails for `a = 0`.
///
/// # Safety
/// `z` and `out` must each hold `2k` doubles.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_apply_inverse(h: *const ShiftlabShift, z: *const f64, out: *mut f64) -> ShiftlabStatus {
    guard(|| {
        let s = handle(h)?;
        let w = apply_shift_inverse(s, &read_point(s, z)?).map_err(fail)?;
        write_point(&w, out)
    })
}

/// `out = S_a^n(z)`, negative `n` iterating the inverse.
///
/// # Safety
/// `z` and `out` must each hold `2k` doubles.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_iterate(h: *const ShiftlabShift, z: *const f64, n: i64, out: *mut f64) -> ShiftlabStatus {
    guard(|| {
        let s = handle(h)?;
        let w = iterate(s, &read_point(s, z)?, n).map_err(fail)?;
        write_point(&w, out)
    })
}

/// Forward Green function truncated at `level` blocks.
///
/// # Safety
/// `z` must hold `2k` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_green_plus(h: *const ShiftlabShift, z: *const f64, level: usize, out: *mut f64) -> ShiftlabStatus {
    guard(|| {
        let s = handle(h)?;
        let g = green_plus(s, &read_point(s, z)?, level).map_err(fail)?;
        write(out, g.value)
    })
}

/// Backward Green function truncated at `level` blocks; fails for `a = 0`.
///
/// # Safety
/// `z` must hold `2k` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_green_minus(h: *const ShiftlabShift, z: *const f64, level: usize, out: *mut f64) -> ShiftlabStatus {
    guard(|| {
        let s = handle(h)?;
        let g = green_minus(s, &read_point(s, z)?, level).map_err(fail)?;
        write(out, g.value)
    })
}

/// Distance of `z` from the graph of `p` over its first `nu` coordinates.
///
/// # Safety
/// `z` must hold `2k` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_graph_residual(h: *const ShiftlabShift, z: *const f64, out: *mut f64) -> ShiftlabStatus {
    guard(|| {
        let s = handle(h)?;
        write(out, graph_residual(s, &read_point(s, z)?))
    })
}

/// Filtration region of `z` for radius `r`; `index` is the 1-based
/// dominating coordinate, 0 for the inner polydisc.
///
/// # Safety
/// `z` must hold `2k` doubles; `region` and `index` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_classify_point(
    h: *const ShiftlabShift,
    r: f64,
    z: *const f64,
    region: *mut ShiftlabRegion,
    index: *mut usize,
) -> ShiftlabStatus {
    guard(|| {
        let s = handle(h)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(fail(Error::InvalidParameter(format!("radius {r} must be positive"))));
        }
        let (kind, i) = match classify_point(s, r, &read_point(s, z)?) {
            RegionLabel::Inner => (ShiftlabRegion::Inner, 0),
            RegionLabel::PlusCone(i) => (ShiftlabRegion::PlusCone, i),
            RegionLabel::MinusCone(i) => (ShiftlabRegion::MinusCone, i),
        };
        write(region, kind)?;
        write(index, i)
    })
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes, into `buf`. Returns the full message length;
/// pass a null `buf` to query it.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
