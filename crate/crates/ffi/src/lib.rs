//! C interface to `gaussnm`.
//!
//! Objects are opaque handles created by `gnm_*_new` style functions and
//! released by the matching `gnm_*_free`. Every fallible function returns a
//! [`GnmStatus`]; on failure `gnm_last_error` holds a message for the calling
//! thread. Outputs are written through pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gaussnm::channels::Mode;
use gaussnm::experiments::{build_channel, compute_measure, MeasureSpec, MethodChoice};
use gaussnm::gauss::{bures_distance, fidelity, make_gaussian, GaussianState, StateParams};
use gaussnm::measure::{MeasureConfig, MeasureResult};
use gaussnm::spectral::{build_coefficients, settling_horizon, ChannelCoefficients, EnvironmentSpec};
use gaussnm::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnmStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    NonPhysical = 3,
    Range = 4,
    Config = 5,
    UnsupportedShape = 6,
    Convergence = 7,
    Numerical = 8,
    Io = 9,
    InvalidArgument = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnmFamily {
    Coherent = 0,
    Squeezed = 1,
    CoherentThermal = 2,
    GeneralPure = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnmMethod {
    Numeric = 0,
    Closed = 1,
    FirstOrder = 2,
}

/// A Gaussian state.
pub struct GnmState(GaussianState);

/// A channel: damping with a rate shape, or QBM with a coefficient table.
pub struct GnmChannel {
    spec: MeasureSpec,
    alpha: f64,
    unit: Option<ChannelCoefficients>,
}

/// Outcome of a measure computation.
pub struct GnmResult(MeasureResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> GnmStatus {
    match err {
        Error::Domain(_) => GnmStatus::Domain,
        Error::NonPhysical(_) => GnmStatus::NonPhysical,
        Error::Convergence { .. } => GnmStatus::Convergence,
        Error::Range { .. } => GnmStatus::Range,
        Error::UnsupportedShape(_) => GnmStatus::UnsupportedShape,
        Error::Numerical(_) => GnmStatus::Numerical,
        Error::Config(_) => GnmStatus::Config,
        Error::Io(_) => GnmStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> GnmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GnmStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            GnmStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            GnmStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic");
            GnmStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn put<T>(out: *mut T, value: T, name: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failure on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gnm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates `D(β) S(r e^{iφ}) ν_th(N) S† D†`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gnm_state_new(
    thermal: f64,
    squeeze: f64,
    squeeze_angle: f64,
    beta_mag: f64,
    beta_arg: f64,
    out: *mut *mut GnmState,
) -> GnmStatus {
    guard(|| {
        let state = make_gaussian(&StateParams {
            thermal,
            squeeze,
            squeeze_angle,
            beta_mag,
            beta_arg,
        })?;
        put(out, Box::into_raw(Box::new(GnmState(state))), "out")
    })
}

/// Writes `[⟨q⟩, ⟨p⟩, σ_qq, σ_qp, σ_pp]` into `out[0..5]`.
///
/// # Safety
/// `state` must be a live handle and `out` must point to five writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gnm_state_moments(state: *const GnmState, out: *mut f64) -> GnmStatus {
    guard(|| {
        let s = &get(state, "state")?.0;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let m = s.cov().to_matrix();
        let values = [s.mean()[0], s.mean()[1], m[0][0], m[0][1], m[1][1]];
        ptr::copy_nonoverlapping(values.as_ptr(), out, 5);
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gnm_state_free(state: *mut GnmState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Uhlmann fidelity `Tr √(√ρ₁ ρ₂ √ρ₁)`.
///
/// # Safety
/// `a` and `b` must be live handles, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnm_fidelity(a: *const GnmState, b: *const GnmState, out: *mut f64) -> GnmStatus {
    guard(|| {
        let f = fidelity(&get(a, "a")?.0, &get(b, "b")?.0)?;
        put(out, f, "out")
    })
}

/// # Safety
/// `a` and `b` must be live handles, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnm_bures_distance(a: *const GnmState, b: *const GnmState, out: *mut f64) -> GnmStatus {
    guard(|| {
        let d = bures_distance(&get(a, "a")?.0, &get(b, "b")?.0)?;
        put(out, d, "out")
    })
}

fn damping_channel(alpha: f64, rate: &str, gamma0: f64) -> Result<GnmChannel, Failure> {
    let spec = MeasureSpec {
        channel: "damping".into(),
        rate: rate.into(),
        gamma0,
        ..MeasureSpec::default()
    };
    build_channel(&spec, alpha, Mode::Exact, None)?;
    Ok(GnmChannel {
        spec,
        alpha,
        unit: None,
    })
}

/// Damping channel with the rate `½ e^{−t/10} sin t`, frozen after `5π/2`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnm_channel_damping_example(alpha: f64, out: *mut *mut GnmChannel) -> GnmStatus {
    guard(|| put(out, Box::into_raw(Box::new(damping_channel(alpha, "paper", 0.5)?)), "out"))
}

/// Damping channel with constant rate `γ₀`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnm_channel_damping_constant(alpha: f64, gamma0: f64, out: *mut *mut GnmChannel) -> GnmStatus {
    guard(|| put(out, Box::into_raw(Box::new(damping_channel(alpha, "constant", gamma0)?)), "out"))
}

/// QBM channel for an Ohmic bath; `temperature` is absolute `k_B T`. The
/// coefficient table covers the settling horizon with `steps` cells.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnm_channel_qbm(
    alpha: f64,
    omega0: f64,
    omega_c: f64,
    temperature: f64,
    steps: usize,
    out: *mut *mut GnmChannel,
) -> GnmStatus {
    guard(|| {
        if steps < 2 {
            return Err(Failure::Invalid(format!("steps must be at least 2, got {steps}")));
        }
        let env = EnvironmentSpec::new(omega0, omega_c, temperature)?;
        let unit = build_coefficients(&env, 1.0, settling_horizon(&env)?, steps)?;
        let spec = MeasureSpec {
            channel: "qbm".into(),
            ..MeasureSpec::default()
        };
        build_channel(&spec, alpha, Mode::Exact, Some(&unit))?;
        let ch = GnmChannel {
            spec,
            alpha,
            unit: Some(unit),
        };
        put(out, Box::into_raw(Box::new(ch)), "out")
    })
}

/// # Safety
/// `channel` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gnm_channel_free(channel: *mut GnmChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// Evolves `state` to time `t` under the exact channel map.
///
/// # Safety
/// `state` and `channel` must be live handles, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnm_evolve(
    state: *const GnmState,
    channel: *const GnmChannel,
    t: f64,
    out: *mut *mut GnmState,
) -> GnmStatus {
    guard(|| {
        let s = &get(state, "state")?.0;
        let c = get(channel, "channel")?;
        let ch = build_channel(&c.spec, c.alpha, Mode::Exact, c.unit.as_ref())?;
        let evolved = ch.evolve(s, t)?.state;
        put(out, Box::into_raw(Box::new(GnmState(evolved))), "out")
    })
}

/// Non-Markovianity of `channel` over `family`. For squeezed pairs `phi` fixes
/// the relative angle; pass NaN to optimize it too.
///
/// # Safety
/// `channel` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gnm_measure(
    channel: *const GnmChannel,
    family: GnmFamily,
    method: GnmMethod,
    phi: f64,
    out: *mut *mut GnmResult,
) -> GnmStatus {
    guard(|| {
        let c = get(channel, "channel")?;
        let spec = MeasureSpec {
            family: match family {
                GnmFamily::Coherent => "coherent",
                GnmFamily::Squeezed => "squeezed",
                GnmFamily::CoherentThermal => "coherent-thermal",
                GnmFamily::GeneralPure => "general-pure",
            }
            .into(),
            method: match method {
                GnmMethod::Numeric => MethodChoice::Numeric,
                GnmMethod::Closed => MethodChoice::Closed,
                GnmMethod::FirstOrder => MethodChoice::FirstOrder,
            },
            phi: (!phi.is_nan()).then_some(phi),
            ..c.spec.clone()
        };
        let r = compute_measure(&spec, c.alpha, c.unit.as_ref(), &MeasureConfig::default())?;
        put(out, Box::into_raw(Box::new(GnmResult(r))), "out")
    })
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gnm_result_value(result: *const GnmResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.value)
}

/// `K` of the maximizing coherent pair, or NaN when not applicable.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gnm_result_k(result: *const GnmResult) -> f64 {
    result.as_ref().and_then(|r| r.0.k).unwrap_or(f64::NAN)
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gnm_result_interval_count(result: *const GnmResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.intervals.len())
}

/// Endpoints and contribution of decrease interval `index`.
///
/// # Safety
/// `result` must be a live handle and the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gnm_result_interval(
    result: *const GnmResult,
    index: usize,
    t_plus: *mut f64,
    t_minus: *mut f64,
    contribution: *mut f64,
) -> GnmStatus {
    guard(|| {
        let r = &get(result, "result")?.0;
        let iv = r.intervals.get(index).ok_or_else(|| {
            Failure::Invalid(format!("interval {index} out of range ({} intervals)", r.intervals.len()))
        })?;
        put(t_plus, iv.t_plus, "t_plus")?;
        put(t_minus, iv.t_minus, "t_minus")?;
        put(contribution, iv.contribution, "contribution")
    })
}

/// # Safety
/// `result` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gnm_result_free(result: *mut GnmResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
