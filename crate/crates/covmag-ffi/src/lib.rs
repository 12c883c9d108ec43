//! C ABI for covmag.
//!
//! Every fallible function returns a [`CovmagStatus`] code and writes its
//! result through an out-pointer. On failure the message is kept per thread
//! and can be copied out with [`covmag_last_error_message`].
//!
//! Configs and run results live behind opaque handles that the caller owns
//! and must release with the matching `_free` function. Strings passed in
//! are NUL-terminated UTF-8. Strings passed out are copied into a caller
//! buffer: the required size including the NUL is always written to
//! `needed`, and `COVMAG_STATUS_BUFFER_TOO_SMALL` is returned when it does not fit.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use covmag::cli::{render, run_config, summary, write_artifacts, RunOutput, TableFormat};
use covmag::config::{ConfigFormat, ExperimentConfig};
use covmag::metrology::{self, ExperimentBudget};
use covmag::noisefield::correlated_sin_moment;
use covmag::selftest::{run_selftest, SelfTestHooks};
use covmag::Error;

/// Status codes returned by every fallible function.
#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovmagStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Domain = 4,
    Io = 5,
    Simulation = 6,
    BufferTooSmall = 7,
    Panic = 8,
    SelfTestFailed = 9,
}

/// Table format for rendered sweep files.
#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovmagFormat {
    Csv = 0,
    Json = 1,
}

/// Parsed experiment configuration.
pub struct CovmagConfig {
    inner: ExperimentConfig,
}

/// Completed run with its summary and output files.
pub struct CovmagRun {
    inner: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(CovmagStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config { .. } => CovmagStatus::Config,
            Error::Io(_) => CovmagStatus::Io,
            Error::Domain(_)
            | Error::InfeasibleBudget(_)
            | Error::DegenerateContrast
            | Error::DegenerateCoherence
            | Error::InvalidReadout(_)
            | Error::MiscalibratedGate { .. } => CovmagStatus::Domain,
            _ => CovmagStatus::Simulation,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CovmagStatus::NullArgument, format!("`{what}` is null"))
}

/// Runs `f`, records any failure for [`covmag_last_error_message`] and turns
/// panics into `COVMAG_STATUS_PANIC` so that they never cross the boundary.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CovmagStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure(CovmagStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            CovmagStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(CovmagStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies `bytes` plus a NUL into `buf` when it fits.
unsafe fn copy_out(bytes: &[u8], buf: *mut c_char, cap: usize, needed: *mut usize) -> Result<(), Failure> {
    let n = bytes.len() + 1;
    *out(needed, "needed")? = n;
    if buf.is_null() || cap < n {
        return Err(Failure(CovmagStatus::BufferTooSmall, format!("{n} bytes needed, {cap} available")));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Copies the calling thread's last error message. An empty string means the
/// last call succeeded.
///
/// # Safety
/// `buf` must be valid for `cap` bytes or null; `needed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_last_error_message(buf: *mut c_char, cap: usize, needed: *mut usize) -> CovmagStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match copy_out(msg.as_bytes(), buf, cap, needed) {
        Ok(()) => CovmagStatus::Ok,
        Err(Failure(s, _)) => s,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn covmag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a config from text. `json` selects JSON instead of TOML.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out_config` must be valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_config_parse(
    text: *const c_char,
    json: bool,
    out_config: *mut *mut CovmagConfig,
) -> CovmagStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        let format = if json { ConfigFormat::Json } else { ConfigFormat::Toml };
        let inner = ExperimentConfig::parse(c_str(text, "text")?, format)?;
        *slot = Box::into_raw(Box::new(CovmagConfig { inner }));
        Ok(())
    })
}

/// Loads a config file; the format follows the extension.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_config` must be valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_config_load(path: *const c_char, out_config: *mut *mut CovmagConfig) -> CovmagStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        let inner = ExperimentConfig::load(Path::new(c_str(path, "path")?))?;
        *slot = Box::into_raw(Box::new(CovmagConfig { inner }));
        Ok(())
    })
}

/// Replaces the master seed.
///
/// # Safety
/// `config` must come from a config constructor and not be freed.
#[no_mangle]
pub unsafe extern "C" fn covmag_config_set_seed(config: *mut CovmagConfig, seed: u64) -> CovmagStatus {
    guard(|| {
        out(config, "config")?.inner.run.seed = seed;
        Ok(())
    })
}

/// Copies the protocol id (for example `bell-covar`).
///
/// # Safety
/// `config` must be a live handle; `buf` valid for `cap` bytes or null; `needed` valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_config_protocol(
    config: *const CovmagConfig,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> CovmagStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        copy_out(c.inner.experiment.id().as_bytes(), buf, cap, needed)
    })
}

/// Releases a config. Null is ignored.
///
/// # Safety
/// `config` must be null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn covmag_config_free(config: *mut CovmagConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs every point of the config.
///
/// # Safety
/// `config` must be a live handle; `out_run` must be valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_run(config: *const CovmagConfig, out_run: *mut *mut CovmagRun) -> CovmagStatus {
    guard(|| {
        let slot = out(out_run, "out_run")?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let inner = run_config(&c.inner)?;
        *slot = Box::into_raw(Box::new(CovmagRun { inner }));
        Ok(())
    })
}

/// Whether every built-in consistency check of the run passed.
///
/// # Safety
/// `run` must be a live handle; `passed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_run_checks_passed(run: *const CovmagRun, passed: *mut bool) -> CovmagStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        *out(passed, "passed")? = r.inner.checks_passed();
        Ok(())
    })
}

/// Copies the summary document (config echo, results, checks) as JSON.
///
/// # Safety
/// `run` must be a live handle; `buf` valid for `cap` bytes or null; `needed` valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_run_summary_json(
    run: *const CovmagRun,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> CovmagStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let doc = covmag::io::json_bytes(&summary(&r.inner)?)?;
        copy_out(&doc, buf, cap, needed)
    })
}

/// Writes the summary, sweep table and per-shot files into `dir`.
///
/// # Safety
/// `run` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn covmag_run_write(
    run: *const CovmagRun,
    dir: *const c_char,
    format: CovmagFormat,
) -> CovmagStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let dir = c_str(dir, "dir")?;
        let format = match format {
            CovmagFormat::Csv => TableFormat::Csv,
            CovmagFormat::Json => TableFormat::Json,
        };
        write_artifacts(Path::new(dir), &render(&r.inner, format)?)?;
        Ok(())
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must be null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn covmag_run_free(run: *mut CovmagRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// SNR gain of the entangled protocol over a non-interacting pair at readout
/// noise `sigma_r` and gate decoherence exponent `chi_e`. `exact` selects the
/// full ratio instead of its large-noise limit.
///
/// # Safety
/// `gain` must be valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_snr_gain(sigma_r: f64, chi_e: f64, exact: bool, gain: *mut f64) -> CovmagStatus {
    guard(|| {
        if !(sigma_r > 0.0 && sigma_r.is_finite() && chi_e >= 0.0 && chi_e.is_finite()) {
            return Err(Failure(CovmagStatus::Domain, "need sigma_r > 0 and chi_e >= 0".into()));
        }
        *out(gain, "gain")? = metrology::snr_gain(sigma_r, chi_e, exact);
        Ok(())
    })
}

/// ⟨sin φ_a sin φ_b⟩ for perfectly correlated Gaussian phases with
/// decoherence exponent `chi_c`.
///
/// # Safety
/// `moment` must be valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_correlated_sin_moment(chi_c: f64, moment: *mut f64) -> CovmagStatus {
    guard(|| {
        *out(moment, "moment")? = correlated_sin_moment(chi_c)?;
        Ok(())
    })
}

/// Minimum detectable rms field (T) of the entangled protocol for a total
/// averaging time. Times in seconds.
///
/// # Safety
/// `sigma_b` must be valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_sensitivity_min(
    t: f64,
    t_e: f64,
    t_r: f64,
    total_time: f64,
    t2: f64,
    sigma_r: f64,
    sigma_b: *mut f64,
) -> CovmagStatus {
    guard(|| {
        let slot = out(sigma_b, "sigma_b")?;
        let budget = ExperimentBudget { t, t_e, t_r, total_time, t2 };
        *slot = metrology::sensitivity_min(&budget, sigma_r)?.exact.sqrt();
        Ok(())
    })
}

/// Runs the invariant suite. `failures` receives the number of failing
/// checks; the status is `COVMAG_STATUS_SELF_TEST_FAILED` when it is nonzero and
/// the last error message lists their ids.
///
/// # Safety
/// `failures` must be valid.
#[no_mangle]
pub unsafe extern "C" fn covmag_selftest(failures: *mut u32) -> CovmagStatus {
    guard(|| {
        let slot = out(failures, "failures")?;
        let report = run_selftest(SelfTestHooks::default())?;
        let failed = report.failures();
        *slot = failed.len() as u32;
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure(CovmagStatus::SelfTestFailed, failed.join(", ")))
        }
    })
}
