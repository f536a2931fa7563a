//! C ABI over `markov-thermo`.
//!
//! Shifts and potentials live behind opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns an
//! `MtStatus`; on failure the message is kept per thread and can be copied
//! out with `mt_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use markov_thermo::counting::{count_orbits, CountOptions};
use markov_thermo::potential::{Constant, LocallyConstant, LogFirstLetter, PotentialRef};
use markov_thermo::shift::{Letter, ShiftSpec, TruncatedShift, TruncationRule};
use markov_thermo::thermo::{
    critical_exponent, fit_tail_model, solve_delta, sorted_letter_uppers, CriticalExponent, TailModel,
};
use markov_thermo::Error;

/// Status codes. Nonzero codes follow the command-line exit codes, with
/// extra values for misuse of the interface itself.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtStatus {
    Ok = 0,
    /// Bad input or configuration.
    InvalidInput = 2,
    /// A numerical method did not converge.
    Numerical = 3,
    /// An enumeration or memory budget was exceeded.
    Budget = 4,
    NullPointer = 5,
    /// Internal panic; the handle arguments should be considered suspect.
    Panic = 6,
}

/// A truncated Markov shift together with the full shift it came from.
pub struct MtShift {
    spec: ShiftSpec,
    shift: TruncatedShift,
    letters: usize,
}

/// A potential on a shift.
pub struct MtPotential {
    f: PotentialRef,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MtStatus {
    match e.exit_code() {
        3 => MtStatus::Numerical,
        4 => MtStatus::Budget,
        _ => MtStatus::InvalidInput,
    }
}

/// Runs `body`, translating errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), (MtStatus, String)>) -> MtStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MtStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {message}"));
            MtStatus::Panic
        }
    }
}

fn lib(e: Error) -> (MtStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (MtStatus, String) {
    (MtStatus::NullPointer, format!("`{name}` is null"))
}

fn invalid(message: impl Into<String>) -> (MtStatus, String) {
    (MtStatus::InvalidInput, message.into())
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (MtStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), (MtStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn emit_shift(spec: ShiftSpec, letters: usize, out: *mut *mut MtShift) -> Result<(), (MtStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let shift = spec.truncate(&TruncationRule::FirstK(letters)).map_err(lib)?;
    out.write(Box::into_raw(Box::new(MtShift { spec, shift, letters })));
    Ok(())
}

unsafe fn emit_potential(f: PotentialRef, out: *mut *mut MtPotential) -> Result<(), (MtStatus, String)> {
    write(out, Box::into_raw(Box::new(MtPotential { f })), "out")
}

/// Full shift on letters `0..n`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mt_shift_full(n: u32, out: *mut *mut MtShift) -> MtStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("full shift needs at least one letter"));
        }
        emit_shift(ShiftSpec::full(n), n as usize, out)
    })
}

/// Finite shift given by an `n x n` 0/1 transition matrix in row-major order.
///
/// # Safety
/// `entries` must point to `n * n` readable bytes and `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn mt_shift_matrix(entries: *const u8, n: u32, out: *mut *mut MtShift) -> MtStatus {
    guard(|| {
        if entries.is_null() {
            return Err(null("entries"));
        }
        let n = n as usize;
        let flat = std::slice::from_raw_parts(entries, n * n);
        let matrix = flat.chunks(n.max(1)).map(|row| row.iter().map(|&b| b != 0).collect()).collect();
        emit_shift(ShiftSpec::from_matrix(matrix).map_err(lib)?, n, out)
    })
}

/// Full shift on the letters `first, first + 1, ...`, truncated to the first
/// `letters` of them.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mt_shift_countable(first: u32, letters: usize, out: *mut *mut MtShift) -> MtStatus {
    guard(|| emit_shift(ShiftSpec::countable_full(first), letters, out))
}

/// Number of letters kept by the truncation.
///
/// # Safety
/// `shift` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mt_shift_letters(shift: *const MtShift) -> usize {
    shift.as_ref().map_or(0, |s| s.shift.len())
}

/// # Safety
/// `shift` must come from an `mt_shift_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mt_shift_free(shift: *mut MtShift) {
    if !shift.is_null() {
        drop(Box::from_raw(shift));
    }
}

/// Potential that is constant everywhere.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mt_potential_constant(value: f64, out: *mut *mut MtPotential) -> MtStatus {
    guard(|| emit_potential(Arc::new(Constant(value)), out))
}

/// Potential depending on the first letter: `values[i]` on letter `first + i`.
///
/// # Safety
/// `values` must point to `n` readable doubles and `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn mt_potential_per_letter(
    values: *const f64,
    n: usize,
    first: u32,
    out: *mut *mut MtPotential,
) -> MtStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let values = std::slice::from_raw_parts(values, n);
        let f = LocallyConstant::per_letter(values.iter().enumerate().map(|(i, &v)| (Letter(first + i as u32), v)));
        emit_potential(Arc::new(f), out)
    })
}

/// `f(x) = scale * log(x_0 + offset)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mt_potential_log_letter(scale: f64, offset: f64, out: *mut *mut MtPotential) -> MtStatus {
    guard(|| emit_potential(Arc::new(LogFirstLetter { scale, offset }), out))
}

/// # Safety
/// `f` must come from an `mt_potential_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mt_potential_free(f: *mut MtPotential) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

fn tail_and_exponent(s: &MtShift, f: &MtPotential) -> Result<(Option<TailModel>, CriticalExponent, bool), Error> {
    if s.spec.alphabet.is_finite() {
        return Ok((None, CriticalExponent::FiniteAlphabet, false));
    }
    let tail = fit_tail_model(&sorted_letter_uppers(f.f.as_ref(), &s.spec, s.letters), None)?;
    let report = critical_exponent(f.f.as_ref(), &s.spec, s.letters, (1e-6, 100.0), Some(tail))?;
    Ok((Some(tail), report.d_f, report.diverges_at_d))
}

/// Critical exponent `d(f)` and whether the series diverges there. Finite
/// alphabets report negative infinity.
///
/// # Safety
/// Handles must be live; `d` and `diverges` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mt_critical_exponent(
    shift: *const MtShift,
    f: *const MtPotential,
    d: *mut f64,
    diverges: *mut bool,
) -> MtStatus {
    guard(|| {
        let (s, f) = (deref(shift, "shift")?, deref(f, "f")?);
        let (_, d_f, div) = tail_and_exponent(s, f).map_err(lib)?;
        write(d, d_f.value().unwrap_or(f64::NEG_INFINITY), "d")?;
        write(diverges, div, "diverges")
    })
}

/// Bowen root `delta` with `P(-delta f) = 0`, to tolerance `tol`.
///
/// # Safety
/// Handles must be live; `delta` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mt_solve_delta(
    shift: *const MtShift,
    f: *const MtPotential,
    tol: f64,
    delta: *mut f64,
) -> MtStatus {
    guard(|| {
        let (s, f) = (deref(shift, "shift")?, deref(f, "f")?);
        if !(tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        let (tail, d_f, _) = tail_and_exponent(s, f).map_err(lib)?;
        let sol = solve_delta(f.f.as_ref(), &s.shift, d_f, 1, tol, tail).map_err(lib)?;
        write(delta, sol.delta, "delta")
    })
}

/// Closed-orbit counts at level `t`: `m` counts periodic points, `r` prime
/// orbits, both with `S_n f <= t`.
///
/// # Safety
/// Handles must be live; `m` and `r` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mt_count_orbits(
    shift: *const MtShift,
    f: *const MtPotential,
    delta: f64,
    t: f64,
    m: *mut f64,
    r: *mut f64,
) -> MtStatus {
    guard(|| {
        let (s, f) = (deref(shift, "shift")?, deref(f, "f")?);
        let records = count_orbits(f.f.as_ref(), &s.shift, &[t], delta, &CountOptions::default()).map_err(lib)?;
        let rec = records.first().ok_or_else(|| invalid("no record returned"))?;
        write(m, rec.m, "m")?;
        write(r, rec.r, "r")
    })
}

/// Copies the last error message of this thread into `buf` (nul-terminated,
/// truncated to `len`). Returns the full message length without the nul, or
/// 0 when there is no error.
///
/// # Safety
/// `buf` must be valid for `len` byte writes, or null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn mt_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let k = bytes.len().min(len - 1);
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, k);
                *buf.add(k) = 0;
            }
            bytes.len()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { mt_last_error(buf.as_mut_ptr(), buf.len()) };
        let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
        String::from_utf8(bytes).unwrap()
    }

    #[test]
    fn delta_of_two_lengths() {
        unsafe {
            let mut s = ptr::null_mut();
            let mut f = ptr::null_mut();
            assert_eq!(mt_shift_full(2, &mut s), MtStatus::Ok);
            assert_eq!(mt_shift_letters(s), 2);
            let v = [1.0, std::f64::consts::SQRT_2];
            assert_eq!(mt_potential_per_letter(v.as_ptr(), 2, 0, &mut f), MtStatus::Ok);
            let mut delta = 0.0;
            assert_eq!(mt_solve_delta(s, f, 1e-12, &mut delta), MtStatus::Ok);
            assert!(((-delta).exp() + (-v[1] * delta).exp() - 1.0).abs() < 1e-10);
            let (mut m, mut r) = (0.0, 0.0);
            assert_eq!(mt_count_orbits(s, f, delta, 6.0, &mut m, &mut r), MtStatus::Ok);
            assert!(r <= m && m > 0.0);
            mt_potential_free(f);
            mt_shift_free(s);
        }
    }

    #[test]
    fn zeta_exponent() {
        unsafe {
            let mut s = ptr::null_mut();
            let mut f = ptr::null_mut();
            assert_eq!(mt_shift_countable(1, 100_000, &mut s), MtStatus::Ok);
            assert_eq!(mt_potential_log_letter(2.0, 1.0, &mut f), MtStatus::Ok);
            let (mut d, mut div) = (0.0, false);
            assert_eq!(mt_critical_exponent(s, f, &mut d, &mut div), MtStatus::Ok);
            assert!((d - 0.5).abs() < 1e-3 && div);
            mt_potential_free(f);
            mt_shift_free(s);
        }
    }

    #[test]
    fn errors_are_reported() {
        unsafe {
            let mut delta = 0.0;
            assert_eq!(mt_solve_delta(ptr::null(), ptr::null(), 1e-10, &mut delta), MtStatus::NullPointer);
            assert!(last_error().contains("shift"));

            let mut s = ptr::null_mut();
            let zero = [0u8; 4];
            assert_eq!(mt_shift_matrix(zero.as_ptr(), 2, &mut s), MtStatus::InvalidInput);
            assert!(s.is_null());
            assert!(!last_error().is_empty());

            assert_eq!(mt_shift_full(2, &mut s), MtStatus::Ok);
            assert_eq!(mt_last_error(ptr::null_mut(), 0), 0);
            mt_shift_free(s);
            mt_shift_free(ptr::null_mut());
        }
    }
}
