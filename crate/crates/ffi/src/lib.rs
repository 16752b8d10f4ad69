//! C ABI for the simulator.
//!
//! Configurations and simulators are opaque heap handles created and
//! released through this interface. Every fallible call returns an
//! [`OdmaStatus`]; on failure a description is available from
//! [`odma_last_error_message`] on the same thread until the next failing
//! call. Panics are caught at the boundary and reported as
//! `ODMA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use odma_ura::harness::{ResultRow, Simulation};
use odma_ura::{Error, SystemConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdmaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Numerical = 6,
    Panic = 7,
}

/// Opaque system configuration.
pub struct OdmaConfig(SystemConfig);

/// Opaque simulator: a configuration with its codebooks and polar code.
pub struct OdmaSimulator(Simulation);

/// Aggregate metrics of one simulated point. `mean_mse` is NaN when
/// `has_mse` is false.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdmaResultRow {
    pub ka: usize,
    pub m: usize,
    pub pp: f64,
    pub pd: f64,
    pub ebn0_db: f64,
    pub trials: usize,
    pub pmd: f64,
    pub pfa: f64,
    pub pe: f64,
    pub mean_iterations: f64,
    pub has_mse: bool,
    pub mean_mse: f64,
    pub collision_rate: f64,
    pub wall_clock_per_trial_s: f64,
    /// Trials dropped after an internal error.
    pub skipped: usize,
}

impl OdmaResultRow {
    fn new(row: &ResultRow, skipped: usize) -> Self {
        OdmaResultRow {
            ka: row.ka,
            m: row.m,
            pp: row.pp,
            pd: row.pd,
            ebn0_db: row.ebn0_db,
            trials: row.trials,
            pmd: row.pmd,
            pfa: row.pfa,
            pe: row.pe,
            mean_iterations: row.mean_iterations,
            has_mse: row.mean_mse.is_some(),
            mean_mse: row.mean_mse.unwrap_or(f64::NAN),
            collision_rate: row.collision_rate,
            wall_clock_per_trial_s: row.wall_clock_per_trial_s,
            skipped,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn status_of(error: &Error) -> OdmaStatus {
    match error {
        Error::InvalidConfig(_) | Error::CodebookTooSmall { .. } => OdmaStatus::InvalidConfig,
        Error::Io(_) => OdmaStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Dump(_) | Error::ReliabilityTable(_) => {
            OdmaStatus::Parse
        }
        Error::Singular { .. } => OdmaStatus::Numerical,
        _ => OdmaStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (OdmaStatus, String)>) -> OdmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OdmaStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("panic inside the simulator".into());
            OdmaStatus::Panic
        }
    }
}

fn fail(error: Error) -> (OdmaStatus, String) {
    (status_of(&error), error.to_string())
}

fn null(what: &str) -> (OdmaStatus, String) {
    (OdmaStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or a valid nul-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (OdmaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (OdmaStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn odma_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Desk-scale preset (n = 800, 4096 codewords, length-256 code).
#[no_mangle]
pub extern "C" fn odma_config_scaled(ka: usize, m: usize) -> *mut OdmaConfig {
    Box::into_raw(Box::new(OdmaConfig(SystemConfig::scaled(ka, m))))
}

/// Small preset (n = 200, 256 codewords, length-128 code).
#[no_mangle]
pub extern "C" fn odma_config_small(ka: usize, m: usize) -> *mut OdmaConfig {
    Box::into_raw(Box::new(OdmaConfig(SystemConfig::small(ka, m))))
}

/// Parses a JSON configuration into `*out`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn odma_config_from_json(
    json: *const c_char,
    out: *mut *mut OdmaConfig,
) -> OdmaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let cfg = SystemConfig::from_json(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(OdmaConfig(cfg)));
        Ok(())
    })
}

/// JSON text of a configuration; release it with [`odma_string_free`].
/// Returns null if `cfg` is null.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn odma_config_to_json(cfg: *const OdmaConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => CString::new(c.0.to_json()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn odma_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `cfg` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn odma_config_free(cfg: *mut OdmaConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Checks every parameter constraint; the error message lists all
/// violations.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn odma_config_validate(cfg: *const OdmaConfig) -> OdmaStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        cfg.0.check().map_err(fail)
    })
}

/// Sets the number of active users and receive antennas.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn odma_config_set_users(
    cfg: *mut OdmaConfig,
    ka: usize,
    m: usize,
) -> OdmaStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.ka = ka;
        cfg.0.m = m;
        Ok(())
    })
}

/// Sets the pilot and data symbol powers.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn odma_config_set_powers(
    cfg: *mut OdmaConfig,
    pp: f64,
    pd: f64,
) -> OdmaStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.pp = pp;
        cfg.0.pd = pd;
        Ok(())
    })
}

/// Sets both powers from a total Eb/N0 in dB and the pilot energy share.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn odma_config_set_energy(
    cfg: *mut OdmaConfig,
    ebn0_db: f64,
    pilot_fraction: f64,
) -> OdmaStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        if !ebn0_db.is_finite() || !(0.0..=1.0).contains(&pilot_fraction) {
            return Err((
                OdmaStatus::InvalidArgument,
                format!("bad energy split {ebn0_db} dB / {pilot_fraction}"),
            ));
        }
        cfg.0 = cfg.0.with_energy_split(ebn0_db, pilot_fraction);
        Ok(())
    })
}

/// Sets the seed of the codebooks and of every trial stream.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn odma_config_set_seed(cfg: *mut OdmaConfig, seed: u64) -> OdmaStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.seed = seed;
        Ok(())
    })
}

/// Energy per information bit over N0, in dB.
///
/// # Safety
/// `cfg` must be null or a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn odma_config_energy_per_bit_db(
    cfg: *const OdmaConfig,
    out: *mut f64,
) -> OdmaStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = cfg.0.energy_per_bit().db;
        Ok(())
    })
}

/// Builds codebooks and the polar code for a copy of `cfg`.
///
/// # Safety
/// `cfg` must be null or a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn odma_simulator_new(
    cfg: *const OdmaConfig,
    out: *mut *mut OdmaSimulator,
) -> OdmaStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sim = Simulation::new(cfg.0.clone()).map_err(fail)?;
        *out = Box::into_raw(Box::new(OdmaSimulator(sim)));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn odma_simulator_free(sim: *mut OdmaSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Simulates trials `0..trials` on `threads` workers (0 uses every core).
///
/// # Safety
/// `sim` must be null or a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn odma_simulator_run(
    sim: *const OdmaSimulator,
    trials: usize,
    threads: usize,
    out: *mut OdmaResultRow,
) -> OdmaStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if trials == 0 {
            return Err((
                OdmaStatus::InvalidArgument,
                "trials must be at least 1".into(),
            ));
        }
        let report = sim.0.run(trials, threads).map_err(fail)?;
        *out = OdmaResultRow::new(&report.row, report.skipped);
        Ok(())
    })
}

/// Writes the simulator's pilot codebook and pattern matrices to `path`.
///
/// # Safety
/// `sim` must be null or a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn odma_simulator_dump_codebooks(
    sim: *const OdmaSimulator,
    path: *const c_char,
) -> OdmaStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        let path = read_str(path, "path")?;
        let mut w = File::create(path)
            .map(BufWriter::new)
            .map_err(|e| fail(e.into()))?;
        sim.0.codebooks().dump(&mut w).map_err(fail)?;
        w.flush().map_err(|e| fail(e.into()))
    })
}
