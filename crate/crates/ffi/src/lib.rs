//! C ABI over `wignerlab`.
//!
//! Every entry point returns a [`WlStatus`]; results go through out
//! pointers. On failure the message is retrievable with
//! [`wl_last_error_message`] from the same thread. Measures are opaque
//! handles created by the `wl_measure_*` constructors and released with
//! [`wl_measure_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use wignerlab::clt::{self, ContourOptions, TestFunction};
use wignerlab::freeconv::{self, SolverOptions};
use wignerlab::measures::SpectralMeasure;
use wignerlab::Error;

/// Status codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMeasure = 3,
    Domain = 4,
    NoConvergence = 5,
    NonHerglotz = 6,
    EdgeNotBracketed = 7,
    KernelOutOfRange = 8,
    RegularityViolation = 9,
    EigensolverFailure = 10,
    Io = 11,
    Panic = 12,
}

impl From<&Error> for WlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => WlStatus::Domain,
            Error::InvalidMeasure(_) => WlStatus::InvalidMeasure,
            Error::NoConvergence { .. } => WlStatus::NoConvergence,
            Error::NonHerglotz { .. } => WlStatus::NonHerglotz,
            Error::EdgeNotBracketed { .. } => WlStatus::EdgeNotBracketed,
            Error::KernelOutOfRange(_) => WlStatus::KernelOutOfRange,
            Error::RegularityViolation { .. } => WlStatus::RegularityViolation,
            Error::ConvergenceFailure(_) => WlStatus::EigensolverFailure,
            Error::Parse(_) | Error::SchemaMismatch { .. } => WlStatus::InvalidArgument,
            Error::Io(_) | Error::Json(_) => WlStatus::Io,
        }
    }
}

/// Opaque spectral measure handle.
pub struct WlMeasure {
    inner: SpectralMeasure,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WlComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for WlComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Solution of the self-consistent equation at one point.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WlStieltjes {
    pub m: WlComplex,
    /// First derivative in z.
    pub m1: WlComplex,
    /// Second derivative in z.
    pub m2: WlComplex,
    pub residual: f64,
    pub iterations: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WlSupport {
    pub l_minus: f64,
    pub l_plus: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WlCltParams {
    pub m_phi: f64,
    pub v_phi: f64,
    /// NaN when not available.
    pub vtilde_phi: f64,
    pub quad_error: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), WlStatus>>(f: F) -> WlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            WlStatus::Panic
        }
    }
}

fn lift<T>(r: wignerlab::Result<T>) -> Result<T, WlStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        WlStatus::from(&e)
    })
}

fn null(what: &str) -> WlStatus {
    set_error(format!("null pointer: {what}"));
    WlStatus::NullPointer
}

unsafe fn measure_ref<'a>(m: *const WlMeasure) -> Result<&'a SpectralMeasure, WlStatus> {
    m.as_ref().map(|h| &h.inner).ok_or_else(|| null("measure"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, WlStatus> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        WlStatus::InvalidArgument
    })
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), WlStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(v);
    Ok(())
}

unsafe fn new_measure(r: wignerlab::Result<SpectralMeasure>, out: *mut *mut WlMeasure) -> Result<(), WlStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    let inner = lift(r)?;
    out.write(Box::into_raw(Box::new(WlMeasure { inner })));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn wl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Measure from a descriptor such as `two_point:0.5`, `uniform:1` or
/// `discrete:FILE`.
///
/// # Safety
/// `descriptor` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_measure_from_descriptor(descriptor: *const c_char, out: *mut *mut WlMeasure) -> WlStatus {
    guard(|| {
        let d = str_arg(descriptor, "descriptor")?;
        new_measure(SpectralMeasure::from_descriptor(d), out)
    })
}

/// Symmetric two-point law on `{-a, a}`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_measure_two_point(a: f64, out: *mut *mut WlMeasure) -> WlStatus {
    guard(|| new_measure(SpectralMeasure::two_point(a), out))
}

/// Uniform law on `[-a, a]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_measure_uniform(a: f64, out: *mut *mut WlMeasure) -> WlStatus {
    guard(|| new_measure(SpectralMeasure::uniform(a), out))
}

/// Finitely supported law with `len` atoms.
///
/// # Safety
/// `points` and `weights` must each point to `len` doubles, `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_measure_discrete(
    points: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut *mut WlMeasure,
) -> WlStatus {
    guard(|| {
        if points.is_null() || weights.is_null() {
            return Err(null("points/weights"));
        }
        let p = std::slice::from_raw_parts(points, len).to_vec();
        let w = std::slice::from_raw_parts(weights, len).to_vec();
        new_measure(SpectralMeasure::discrete(p, w), out)
    })
}

/// Releases a handle. NULL is a no-op.
///
/// # Safety
/// `m` must come from a `wl_measure_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wl_measure_free(m: *mut WlMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `k`-th moment, `k <= 8`.
///
/// # Safety
/// `m` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_measure_moment(m: *const WlMeasure, k: u32, out: *mut f64) -> WlStatus {
    guard(|| {
        let law = measure_ref(m)?;
        if k > 8 {
            set_error(format!("moment order {k} > 8"));
            return Err(WlStatus::InvalidArgument);
        }
        write_out(out, law.moment(k))
    })
}

/// Solves for the Stieltjes transform of the free convolution at `z`.
///
/// # Safety
/// `m` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_solve(m: *const WlMeasure, theta: f64, z: WlComplex, out: *mut WlStieltjes) -> WlStatus {
    guard(|| {
        let law = measure_ref(m)?;
        let s = lift(freeconv::solve_mfc(law, theta, Complex64::new(z.re, z.im), SolverOptions::default()))?;
        write_out(
            out,
            WlStieltjes {
                m: s.m.into(),
                m1: s.m1.into(),
                m2: s.m2.into(),
                residual: s.residual,
                iterations: s.iterations,
            },
        )
    })
}

/// Density at `e`; `eta_floor` in `[1e-9, 1e-3]`.
///
/// # Safety
/// `m` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_density(m: *const WlMeasure, theta: f64, e: f64, eta_floor: f64, out: *mut f64) -> WlStatus {
    guard(|| {
        let law = measure_ref(m)?;
        write_out(out, lift(freeconv::density(law, theta, e, eta_floor))?)
    })
}

/// Support edges.
///
/// # Safety
/// `m` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_support_edges(m: *const WlMeasure, theta: f64, out: *mut WlSupport) -> WlStatus {
    guard(|| {
        let law = measure_ref(m)?;
        let e = lift(freeconv::support_edges(law, theta))?;
        write_out(
            out,
            WlSupport {
                l_minus: e.l_minus,
                l_plus: e.l_plus,
            },
        )
    })
}

/// CLT mean and variance for a polynomial test function given by a
/// descriptor such as `poly:0,0,1`. `nodes_per_side == 0` selects the
/// default contour.
///
/// # Safety
/// `m` must be a live handle, `phi` a NUL-terminated string, `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_clt_params(
    m: *const WlMeasure,
    theta: f64,
    w2: f64,
    w4: f64,
    phi: *const c_char,
    margin: f64,
    v0: f64,
    nodes_per_side: usize,
    out: *mut WlCltParams,
) -> WlStatus {
    guard(|| {
        let law = measure_ref(m)?;
        let phi = lift(TestFunction::parse(str_arg(phi, "phi")?))?;
        let opts = if nodes_per_side == 0 {
            ContourOptions::default()
        } else {
            ContourOptions {
                margin,
                v0,
                nodes_per_side,
            }
        };
        let p = lift(clt::clt_parameters(law, theta, w2, w4, &phi, opts))?;
        write_out(
            out,
            WlCltParams {
                m_phi: p.m_phi,
                v_phi: p.v_phi,
                vtilde_phi: p.vtilde_phi.unwrap_or(f64::NAN),
                quad_error: p.quad_error,
            },
        )
    })
}

/// Chebyshev coefficient `τ_ℓ(φ)`.
///
/// # Safety
/// `phi` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_tau_ell(phi: *const c_char, ell: usize, out: *mut f64) -> WlStatus {
    guard(|| {
        let phi = lift(TestFunction::parse(str_arg(phi, "phi")?))?;
        write_out(out, clt::tau_ell(&phi, ell))
    })
}
