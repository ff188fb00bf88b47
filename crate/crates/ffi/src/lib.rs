//! C interface. Every function returns an [`McStatus`]; results come back
//! through out-pointers, handles are opaque and released by their `_free`
//! function. After a non-zero status, [`mc_last_error`] describes it.

use multicut::ensemble_mc::{linear_statistic, run_chain, ChainConfig};
use multicut::equilibrium::EquilibriumMeasure;
use multicut::numerics::PrecisionConfig;
use multicut::orthopoly::{build_recurrence, default_order, RecurrenceTable};
use multicut::partition::{loop_correction, selberg_log_q};
use multicut::potential::{PolynomialPotential, Potential};
use multicut::skew::SkewMatrices;
use multicut::universality::sine_kernel;
use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

pub struct McPotential(PolynomialPotential);
pub struct McEquilibrium(EquilibriumMeasure);
pub struct McRecurrence(RecurrenceTable);
pub struct McSkew(SkewMatrices);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct McStats {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub variance_std_error: f64,
}

/// `S, DS, IS, S^T` at one pair of points.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct McMatrixKernel {
    pub s: f64,
    pub ds: f64,
    pub is: f64,
    pub st: f64,
}

pub type McTestFunction = Option<extern "C" fn(x: f64, user: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: McStatus, msg: &str) -> McStatus {
    set_error(msg);
    status
}

fn from_lib(e: multicut::Error) -> McStatus {
    let status = if e.is_numerical() {
        McStatus::NumericalFailure
    } else {
        McStatus::InvalidArgument
    };
    fail(status, &e.to_string())
}

fn guard<F: FnOnce() -> Result<(), McStatus>>(f: F) -> McStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            McStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(McStatus::Panic, "internal panic"),
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, McStatus> {
    p.as_ref()
        .ok_or_else(|| fail(McStatus::NullPointer, &format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), McStatus> {
    if out.is_null() {
        return Err(fail(McStatus::NullPointer, &format!("{what} is null")));
    }
    out.write(v);
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, v: T) -> Result<(), McStatus> {
    put(out, Box::into_raw(Box::new(v)), "output handle")
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Polynomial potential from `len` ascending coefficients.
///
/// # Safety
/// `coeffs` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_potential_new(
    coeffs: *const f64,
    len: usize,
    out: *mut *mut McPotential,
) -> McStatus {
    guard(|| {
        if coeffs.is_null() {
            return Err(fail(McStatus::NullPointer, "coefficients are null"));
        }
        let c = std::slice::from_raw_parts(coeffs, len).to_vec();
        let v = PolynomialPotential::new(c).map_err(from_lib)?;
        put_handle(out, McPotential(v))
    })
}

/// # Safety
/// `p` must come from [`mc_potential_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn mc_potential_free(p: *mut McPotential) {
    free(p)
}

/// Equilibrium measure with `q` cuts.
///
/// # Safety
/// Pointers must be valid; `out` receives a handle owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn mc_equilibrium_solve(
    potential: *const McPotential,
    q: usize,
    out: *mut *mut McEquilibrium,
) -> McStatus {
    guard(|| {
        let v = get(potential, "potential")?;
        let m = EquilibriumMeasure::solve_default(&v.0, q).map_err(from_lib)?;
        put_handle(out, McEquilibrium(m))
    })
}

/// # Safety
/// `m` must come from [`mc_equilibrium_solve`] or be null.
#[no_mangle]
pub unsafe extern "C" fn mc_equilibrium_free(m: *mut McEquilibrium) {
    free(m)
}

/// Copies the `2q` endpoints; `BufferTooSmall` when `len < 2q`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mc_equilibrium_endpoints(
    m: *const McEquilibrium,
    buf: *mut f64,
    len: usize,
) -> McStatus {
    guard(|| {
        let e = get(m, "measure")?.0.support().endpoints();
        if buf.is_null() {
            return Err(fail(McStatus::NullPointer, "buffer is null"));
        }
        if len < e.len() {
            return Err(fail(
                McStatus::BufferTooSmall,
                &format!("need {} slots", e.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, e.len()).copy_from_slice(e);
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_equilibrium_cuts(m: *const McEquilibrium, out: *mut usize) -> McStatus {
    guard(|| put(out, get(m, "measure")?.0.q(), "output"))
}

/// Density at `x`, zero off the support.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_equilibrium_density(
    m: *const McEquilibrium,
    x: f64,
    out: *mut f64,
) -> McStatus {
    guard(|| put(out, get(m, "measure")?.0.density_or_zero(x), "output"))
}

/// Stieltjes transform `∫ρ(λ)/(λ - z) dλ` off the support.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_equilibrium_stieltjes(
    m: *const McEquilibrium,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> McStatus {
    guard(|| {
        let g = get(m, "measure")?
            .0
            .stieltjes_g(Complex64::new(re, im))
            .map_err(from_lib)?;
        put(out_re, g.re, "real output")?;
        put(out_im, g.im, "imaginary output")
    })
}

/// First-order correction to the Stieltjes transform for `β ∈ {1, 2, 4}`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_loop_correction(
    m: *const McEquilibrium,
    beta: u32,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> McStatus {
    guard(|| {
        let u = loop_correction(&get(m, "measure")?.0, beta, Complex64::new(re, im))
            .map_err(from_lib)?;
        put(out_re, u.re, "real output")?;
        put(out_im, u.im, "imaginary output")
    })
}

/// Recurrence table for the weight `e^{-nV}` at the default depth.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_recurrence_build(
    potential: *const McPotential,
    n: usize,
    out: *mut *mut McRecurrence,
) -> McStatus {
    guard(|| {
        let v = get(potential, "potential")?;
        let depth = default_order(n, v.0.m());
        let arc: Arc<dyn Potential> = Arc::new(v.0.clone());
        let t = build_recurrence(arc, n, depth, &PrecisionConfig::default()).map_err(from_lib)?;
        put_handle(out, McRecurrence(t))
    })
}

/// # Safety
/// `t` must come from [`mc_recurrence_build`] or be null.
#[no_mangle]
pub unsafe extern "C" fn mc_recurrence_free(t: *mut McRecurrence) {
    free(t)
}

/// `K_{n,2}(x, y)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_recurrence_cd_kernel(
    t: *const McRecurrence,
    x: f64,
    y: f64,
    out: *mut f64,
) -> McStatus {
    guard(|| put(out, get(t, "table")?.0.cd_kernel(x, y), "output"))
}

/// `log Q_{n,2}` for the table's potential.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_recurrence_log_q2(t: *const McRecurrence, out: *mut f64) -> McStatus {
    guard(|| put(out, get(t, "table")?.0.beta2_log_q(), "output"))
}

/// β = 1, 4 matrices for an even-`n` table.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_skew_build(t: *const McRecurrence, out: *mut *mut McSkew) -> McStatus {
    guard(|| {
        let s = SkewMatrices::build(&get(t, "table")?.0).map_err(from_lib)?;
        put_handle(out, McSkew(s))
    })
}

/// # Safety
/// `s` must come from [`mc_skew_build`] or be null.
#[no_mangle]
pub unsafe extern "C" fn mc_skew_free(s: *mut McSkew) {
    free(s)
}

/// `det T_n`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_skew_det_t(s: *const McSkew, out: *mut f64) -> McStatus {
    guard(|| {
        put(
            out,
            get(s, "skew matrices")?.0.det_t().map_err(from_lib)?,
            "output",
        )
    })
}

/// Matrix kernel entries for `β ∈ {1, 4}`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_skew_matrix_kernel(
    s: *const McSkew,
    beta: u32,
    x: f64,
    y: f64,
    out: *mut McMatrixKernel,
) -> McStatus {
    guard(|| {
        let k = get(s, "skew matrices")?
            .0
            .matrix_kernel(beta, x, y)
            .map_err(from_lib)?;
        put(
            out,
            McMatrixKernel {
                s: k.s,
                ds: k.ds,
                is: k.is,
                st: k.st,
            },
            "output",
        )
    })
}

/// Gaussian-reference `log Q_{n,β}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_selberg_log_q(n: usize, beta: u32, out: *mut f64) -> McStatus {
    guard(|| {
        put(
            out,
            selberg_log_q(n, beta).map_err(from_lib)?.log_value,
            "output",
        )
    })
}

/// `sin(πt)/(πt)`.
#[no_mangle]
pub extern "C" fn mc_sine_kernel(t: f64) -> f64 {
    sine_kernel(t)
}

/// Metropolis estimate of mean and variance of `Σ φ(λ_i)` with default
/// chain settings; `φ` is called with `user` as its second argument.
///
/// # Safety
/// Pointers must be valid and `phi` callable from any thread.
#[no_mangle]
pub unsafe extern "C" fn mc_sample_linear_statistic(
    potential: *const McPotential,
    n: usize,
    beta: u32,
    steps: usize,
    burn_in: usize,
    seed: u64,
    phi: McTestFunction,
    user: *mut c_void,
    out: *mut McStats,
) -> McStatus {
    guard(|| {
        let v = get(potential, "potential")?;
        let phi = phi.ok_or_else(|| fail(McStatus::NullPointer, "test function is null"))?;
        let cfg = ChainConfig::new(n, beta, steps, burn_in, seed);
        let arc: Arc<dyn Potential> = Arc::new(v.0.clone());
        let samples = run_chain(arc, &cfg).map_err(from_lib)?;
        let user = user as usize;
        let st = linear_statistic(&samples, |x| phi(x, user as *mut c_void));
        put(
            out,
            McStats {
                mean: st.mean,
                variance: st.variance,
                std_error: st.std_error,
                variance_std_error: st.variance_std_error,
            },
            "output",
        )
    })
}
