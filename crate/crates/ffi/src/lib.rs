//! C ABI over the `specreg` estimators.
//!
//! Objects are opaque heap handles created by `*_new`/`*_select_*` functions
//! and released with the matching `*_free`. Every fallible function returns a
//! [`SpecregStatus`]; on failure a message is available from
//! [`specreg_last_error_message`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use specreg::estimators::{self, EmpiricalSpectrum, EstimateReport, PenaltyOptions, SigmaUsed};
use specreg::inference;
use specreg::{Error, ObservationSet, WeightSequence};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecregStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    Domain = 2,
    Range = 3,
    Model = 4,
    Config = 5,
    /// A statistical precondition failed (for example n too small for γ(n)).
    Precondition = 6,
    Parse = 7,
    Io = 8,
    /// A requested value is not available for this handle.
    Unavailable = 9,
    /// An internal panic was caught at the boundary.
    Panic = 10,
}

impl From<&Error> for SpecregStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => SpecregStatus::Domain,
            Error::Range { .. } => SpecregStatus::Range,
            Error::Model(_) => SpecregStatus::Model,
            Error::Config { .. } => SpecregStatus::Config,
            Error::Precondition(_) => SpecregStatus::Precondition,
            Error::Parse { .. } | Error::Json(_) => SpecregStatus::Parse,
            Error::Io { .. } => SpecregStatus::Io,
        }
    }
}

/// Noisy samples y(i/n), i = 1..n.
pub struct SpecregObservations {
    obs: ObservationSet,
    spectrum: EmpiricalSpectrum,
}

/// Reciprocal kernel spectrum w(k).
pub struct SpecregKernel {
    weights: WeightSequence,
}

/// A selected truncation with its estimate of f.
pub struct SpecregSelection {
    report: EstimateReport,
}

/// Optional overrides for the penalized rule; a `has_*` flag of 0 leaves the
/// default in place.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpecregPenaltyOptions {
    pub has_gamma_override: bool,
    pub gamma_override: f64,
    pub has_coefficient_override: bool,
    pub coefficient_override: f64,
    pub has_big_gamma: bool,
    pub big_gamma: f64,
    pub accept_empirical_big_gamma: bool,
}

/// Energy estimate H(n,f) and its companions.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpecregEnergy {
    pub h_hat: f64,
    pub anti_penalty: f64,
    pub b_norm_sq_hat: f64,
    pub sigma_used: f64,
    pub m_used: usize,
    pub n: usize,
}

/// A closed interval [lower, upper].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpecregInterval {
    pub lower: f64,
    pub upper: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F>(f: F) -> SpecregStatus
where
    F: FnOnce() -> Result<(), SpecregStatus2>,
{
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpecregStatus::Ok,
        Ok(Err(SpecregStatus2(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".to_string());
            set_error(msg);
            SpecregStatus::Panic
        }
    }
}

/// A status with its message.
struct SpecregStatus2(SpecregStatus, String);

impl From<Error> for SpecregStatus2 {
    fn from(e: Error) -> Self {
        SpecregStatus2(SpecregStatus::from(&e), e.to_string())
    }
}

fn null(name: &str) -> SpecregStatus2 {
    SpecregStatus2(SpecregStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, SpecregStatus2> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), SpecregStatus2> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(data: *const f64, len: usize, name: &str) -> Result<&'a [f64], SpecregStatus2> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn specreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn specreg_status_name(status: SpecregStatus) -> *const c_char {
    let s: &'static CStr = match status {
        SpecregStatus::Ok => c"ok",
        SpecregStatus::NullPointer => c"null pointer",
        SpecregStatus::Domain => c"domain error",
        SpecregStatus::Range => c"range error",
        SpecregStatus::Model => c"model error",
        SpecregStatus::Config => c"configuration error",
        SpecregStatus::Precondition => c"precondition failed",
        SpecregStatus::Parse => c"parse error",
        SpecregStatus::Io => c"i/o error",
        SpecregStatus::Unavailable => c"value unavailable",
        SpecregStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Copies `n` samples y[i−1] = y(i/n) into a new handle.
///
/// # Safety
/// `y` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_observations_new(
    y: *const f64,
    n: usize,
    out: *mut *mut SpecregObservations,
) -> SpecregStatus {
    guard(|| {
        let values = slice(y, n, "y")?.to_vec();
        let obs = ObservationSet::from_values(values)?;
        let spectrum = EmpiricalSpectrum::new(&obs);
        write_out(out, Box::into_raw(Box::new(SpecregObservations { obs, spectrum })), "out")
    })
}

/// # Safety
/// `obs` must come from [`specreg_observations_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn specreg_observations_free(obs: *mut SpecregObservations) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `obs` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn specreg_observations_len(obs: *const SpecregObservations) -> usize {
    obs.as_ref().map_or(0, |o| o.obs.n())
}

/// Residual estimate of σ with preliminary truncation `pre_n` (0 selects
/// Ent(n^{1/3})).
///
/// # Safety
/// `obs` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_estimate_sigma(
    obs: *const SpecregObservations,
    pre_n: usize,
    out: *mut f64,
) -> SpecregStatus {
    guard(|| {
        let o = deref(obs, "obs")?;
        let s = SigmaUsed::estimated(&o.obs, (pre_n > 0).then_some(pre_n))?;
        write_out(out, s.value, "out")
    })
}

fn kernel_out(weights: Result<WeightSequence, Error>, out: *mut *mut SpecregKernel) -> Result<(), SpecregStatus2> {
    let weights = weights?;
    unsafe { write_out(out, Box::into_raw(Box::new(SpecregKernel { weights })), "out") }
}

/// w(k) = scale · max(⌊k/2⌋, 1)^θ.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_kernel_power_law(theta: f64, scale: f64, out: *mut *mut SpecregKernel) -> SpecregStatus {
    guard(|| kernel_out(WeightSequence::power_law(theta, scale), out))
}

/// w(k) = 1.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_kernel_identity(out: *mut *mut SpecregKernel) -> SpecregStatus {
    guard(|| kernel_out(Ok(WeightSequence::identity()), out))
}

/// Explicit weights w(1..=len).
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_kernel_explicit(
    values: *const f64,
    len: usize,
    out: *mut *mut SpecregKernel,
) -> SpecregStatus {
    guard(|| {
        let v = slice(values, len, "values")?.to_vec();
        kernel_out(WeightSequence::explicit(v), out)
    })
}

/// # Safety
/// `kernel` must come from a `specreg_kernel_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn specreg_kernel_free(kernel: *mut SpecregKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

unsafe fn selection_out(
    o: &SpecregObservations,
    k: &SpecregKernel,
    sel: estimators::AdaptiveSelection,
    out: *mut *mut SpecregSelection,
) -> Result<(), SpecregStatus2> {
    let report = o.spectrum.report(&k.weights, sel)?;
    write_out(out, Box::into_raw(Box::new(SpecregSelection { report })), "out")
}

/// Adaptive truncation M(n).
///
/// # Safety
/// `obs` and `kernel` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_select_adaptive(
    obs: *const SpecregObservations,
    kernel: *const SpecregKernel,
    out: *mut *mut SpecregSelection,
) -> SpecregStatus {
    guard(|| {
        let o = deref(obs, "obs")?;
        let k = deref(kernel, "kernel")?;
        let sel = o.spectrum.select_adaptive(&k.weights)?;
        selection_out(o, k, sel, out)
    })
}

/// Penalized truncation M₁(n) with known noise scale `sigma`; `options` may
/// be null.
///
/// # Safety
/// `obs` and `kernel` must be live handles; `options` must be null or
/// readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_select_penalized(
    obs: *const SpecregObservations,
    kernel: *const SpecregKernel,
    sigma: f64,
    options: *const SpecregPenaltyOptions,
    out: *mut *mut SpecregSelection,
) -> SpecregStatus {
    guard(|| {
        let o = deref(obs, "obs")?;
        let k = deref(kernel, "kernel")?;
        let c = options.as_ref().copied().unwrap_or_default();
        let opts = PenaltyOptions {
            gamma_override: c.has_gamma_override.then_some(c.gamma_override),
            coefficient_override: c.has_coefficient_override.then_some(c.coefficient_override),
            big_gamma: c.has_big_gamma.then_some(c.big_gamma),
            accept_empirical_big_gamma: c.accept_empirical_big_gamma,
        };
        let sel = o.spectrum.select_penalized(&k.weights, SigmaUsed::known(sigma)?, &opts)?;
        selection_out(o, k, sel, out)
    })
}

/// # Safety
/// `sel` must come from a `specreg_select_*` function or be null.
#[no_mangle]
pub unsafe extern "C" fn specreg_selection_free(sel: *mut SpecregSelection) {
    if !sel.is_null() {
        drop(Box::from_raw(sel));
    }
}

/// Selected truncation (M or M₁), or 0 for a null handle.
///
/// # Safety
/// `sel` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn specreg_selection_truncation(sel: *const SpecregSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.report.truncation)
}

/// Minimum of the curve the truncation was chosen from (τ* or τ₁*), or NaN.
///
/// # Safety
/// `sel` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn specreg_selection_tau_star(sel: *const SpecregSelection) -> f64 {
    sel.as_ref()
        .and_then(|s| s.report.selection.as_ref())
        .map_or(f64::NAN, |s| s.tau_star)
}

/// Whether the penalty coefficient was clamped at 0.
///
/// # Safety
/// `sel` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn specreg_selection_clamped(sel: *const SpecregSelection) -> bool {
    sel.as_ref()
        .and_then(|s| s.report.selection.as_ref())
        .is_some_and(|s| s.clamped)
}

/// Raw γ(n) of a penalized selection; `Unavailable` otherwise.
///
/// # Safety
/// `sel` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_selection_gamma_hat(sel: *const SpecregSelection, out: *mut f64) -> SpecregStatus {
    guard(|| {
        let s = deref(sel, "sel")?;
        match s.report.selection.as_ref().and_then(|s| s.gamma_hat) {
            Some(g) => write_out(out, g, "out"),
            None => Err(SpecregStatus2(
                SpecregStatus::Unavailable,
                "gamma(n) is only computed by the penalized rule without overrides".into(),
            )),
        }
    })
}

/// Copies up to `cap` estimate coefficients c(k,n)w(k) into `buf` and stores
/// the full count in `len`.
///
/// # Safety
/// `sel` must be a live handle; `buf` must have room for `cap` doubles (may
/// be null when `cap` is 0); `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_selection_coefficients(
    sel: *const SpecregSelection,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> SpecregStatus {
    guard(|| {
        let s = deref(sel, "sel")?;
        let c = s.report.coefficients.as_slice();
        if cap > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(c.as_ptr(), buf, cap.min(c.len()));
        }
        write_out(len, c.len(), "len")
    })
}

/// Evaluates the estimate of f at `t`.
///
/// # Safety
/// `sel` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_selection_eval(sel: *const SpecregSelection, t: f64, out: *mut f64) -> SpecregStatus {
    guard(|| {
        let s = deref(sel, "sel")?;
        if !t.is_finite() {
            return Err(SpecregStatus2(SpecregStatus::Domain, format!("t must be finite, got {t}")));
        }
        write_out(out, s.report.evaluate(t), "out")
    })
}

/// Energy estimate at the selection's truncation.
///
/// # Safety
/// All handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_energy(
    obs: *const SpecregObservations,
    kernel: *const SpecregKernel,
    sel: *const SpecregSelection,
    sigma: f64,
    out: *mut SpecregEnergy,
) -> SpecregStatus {
    guard(|| {
        let o = deref(obs, "obs")?;
        let k = deref(kernel, "kernel")?;
        let s = deref(sel, "sel")?;
        let e = inference::energy_at(&o.spectrum, &k.weights, s.report.truncation, sigma)?;
        write_out(
            out,
            SpecregEnergy {
                h_hat: e.h_hat,
                anti_penalty: e.anti_penalty,
                b_norm_sq_hat: e.b_norm_sq_hat,
                sigma_used: e.sigma_used,
                m_used: e.m_used,
                n: e.n,
            },
            "out",
        )
    })
}

fn energy_back(e: &SpecregEnergy) -> inference::EnergyEstimate {
    inference::EnergyEstimate {
        h_hat: e.h_hat,
        m_used: e.m_used,
        anti_penalty: e.anti_penalty,
        sigma_used: e.sigma_used,
        b_norm_sq_hat: e.b_norm_sq_hat,
        n: e.n,
    }
}

/// Two-sided asymptotic interval for the energy at `level`.
///
/// # Safety
/// `energy` must be readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_energy_ci(
    energy: *const SpecregEnergy,
    level: f64,
    out: *mut SpecregInterval,
) -> SpecregStatus {
    guard(|| {
        let e = deref(energy, "energy")?;
        let r = inference::energy_ci(&energy_back(e), e.sigma_used, e.n, level)?;
        write_out(out, SpecregInterval { lower: r.lower, upper: r.upper }, "out")
    })
}

/// Interval for ‖f̃ − f‖² from a penalized selection.
///
/// # Safety
/// `sel` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specreg_function_ci(
    sel: *const SpecregSelection,
    sigma: f64,
    level: f64,
    out: *mut SpecregInterval,
) -> SpecregStatus {
    guard(|| {
        let s = deref(sel, "sel")?;
        let selection = s.report.selection.as_ref().ok_or_else(|| {
            SpecregStatus2(SpecregStatus::Unavailable, "selection carries no curve".into())
        })?;
        let r = inference::function_ci(selection, sigma, level, inference::PivotScale::Sigma)?;
        write_out(out, SpecregInterval { lower: r.lower, upper: r.upper }, "out")
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn specreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
