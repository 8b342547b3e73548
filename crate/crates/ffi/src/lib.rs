//! C ABI over the admittance controller, the episode runner and the
//! stability checks.
//!
//! Every function returns a [`FadmitStatus`]. On failure the message is kept
//! per thread and can be read with [`fadmit_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fadmit::controller::{AdmittanceConfig, AdmittanceController, ControllerCommand, ControllerState, WrenchSample};
use fadmit::geometry::{Rotation, Vec3};
use fadmit::harness::{run_episode, RunLog, ScenarioConfig};
use fadmit::io::{parse_toml, write_trace};
use fadmit::verifier::{verify_prop1, NormalDynamicsParams, VerifyConfig, SETTLING_CONSTANTS};
use fadmit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadmitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonFinite = 3,
    Config = 4,
    Io = 5,
    CheckFailed = 6,
    Panic = 7,
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> FadmitStatus {
    match err {
        Error::NonFiniteState(_) => FadmitStatus::NonFinite,
        Error::ConfigParse(_) => FadmitStatus::Config,
        Error::Io(_) | Error::File { .. } | Error::Csv(_) => FadmitStatus::Io,
        Error::InvalidParameter(_)
        | Error::NonPositiveParameter { .. }
        | Error::DegenerateInput(_)
        | Error::DegenerateDirection => FadmitStatus::InvalidArgument,
        _ => FadmitStatus::Internal,
    }
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard<F: FnOnce() -> Result<(), (FadmitStatus, String)>>(f: F) -> FadmitStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FadmitStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside fadmit".into());
            FadmitStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (FadmitStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FadmitStatus, String) {
    (FadmitStatus::NullPointer, format!("`{what}` is null"))
}

fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FadmitStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a nul-terminated string that outlives the call.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (FadmitStatus::InvalidArgument, format!("`{what}` is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next fadmit call on the same thread.
#[no_mangle]
pub extern "C" fn fadmit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadmitAdmittanceConfig {
    pub mass: f64,
    pub stiffness: f64,
    pub damping_ratio: f64,
    pub rot_mass: f64,
    pub rot_stiffness: f64,
    pub tangent_scale: f64,
    pub enable_normal_regulation: bool,
    pub enable_tangent_stiffening: bool,
    pub target_force: f64,
    pub force_deadband: f64,
    pub torque_deadband: f64,
}

impl From<AdmittanceConfig> for FadmitAdmittanceConfig {
    fn from(c: AdmittanceConfig) -> Self {
        Self {
            mass: c.mass,
            stiffness: c.stiffness,
            damping_ratio: c.damping_ratio,
            rot_mass: c.rot_mass,
            rot_stiffness: c.rot_stiffness,
            tangent_scale: c.tangent_scale,
            enable_normal_regulation: c.enable_normal_regulation,
            enable_tangent_stiffening: c.enable_tangent_stiffening,
            target_force: c.target_force,
            force_deadband: c.force_deadband,
            torque_deadband: c.torque_deadband,
        }
    }
}

impl From<FadmitAdmittanceConfig> for AdmittanceConfig {
    fn from(c: FadmitAdmittanceConfig) -> Self {
        Self {
            mass: c.mass,
            stiffness: c.stiffness,
            damping_ratio: c.damping_ratio,
            rot_mass: c.rot_mass,
            rot_stiffness: c.rot_stiffness,
            tangent_scale: c.tangent_scale,
            enable_normal_regulation: c.enable_normal_regulation,
            enable_tangent_stiffening: c.enable_tangent_stiffening,
            target_force: c.target_force,
            force_deadband: c.force_deadband,
            torque_deadband: c.torque_deadband,
        }
    }
}

/// Reference command for one tick. `normal` is used only when `contact` is
/// set and is normalized internally.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadmitCommand {
    pub x_cmd: [f64; 3],
    /// Quaternion (w, x, y, z).
    pub q_cmd: [f64; 4],
    pub normal: [f64; 3],
    pub contact: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FadmitState {
    pub x_r: [f64; 3],
    pub v_r: [f64; 3],
    /// Quaternion (w, x, y, z).
    pub q_r: [f64; 4],
    pub w_r: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FadmitTickOutput {
    pub sensed_force: [f64; 3],
    pub sensed_torque: [f64; 3],
    pub f_cmd: [f64; 3],
    /// Eigenvalues of the effective stiffness, ascending.
    pub k_eig: [f64; 3],
}

/// Opaque controller handle.
pub struct FadmitController {
    inner: AdmittanceController,
}

/// Opaque finished-episode handle.
pub struct FadmitEpisode {
    log: RunLog,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FadmitMetrics {
    pub success: bool,
    pub safety_stop: bool,
    /// Opening angle (deg), insertion depth (mm) or remaining ink (cm) by task.
    pub primary_metric: f64,
    pub peak_force: f64,
    pub ticks: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FadmitVerifySummary {
    pub reports: u64,
    pub passed: u64,
    pub failed: u64,
}

fn rotation(q: [f64; 4]) -> Result<Rotation, (FadmitStatus, String)> {
    Rotation::from_quaternion(q[0], q[1], q[2], q[3]).map_err(lib_err)
}

fn command(c: &FadmitCommand) -> Result<ControllerCommand, (FadmitStatus, String)> {
    let x_cmd = Vec3::from_array(c.x_cmd);
    let q_cmd = rotation(c.q_cmd)?;
    if !c.contact {
        return Ok(ControllerCommand::free(x_cmd, q_cmd));
    }
    let n = Vec3::from_array(c.normal)
        .try_normalize(1e-12)
        .ok_or_else(|| (FadmitStatus::InvalidArgument, "contact command needs a non-zero normal".to_string()))?;
    Ok(ControllerCommand::in_contact(x_cmd, q_cmd, n))
}

/// Fills `out` with the library defaults.
///
/// # Safety
/// `out` must be null or point to writable memory for one config.
#[no_mangle]
pub unsafe extern "C" fn fadmit_admittance_config_default(out: *mut FadmitAdmittanceConfig) -> FadmitStatus {
    guard(|| {
        // SAFETY: checked for null; caller guarantees validity.
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = AdmittanceConfig::default().into();
        Ok(())
    })
}

/// Creates a controller at rest at `x0` with identity orientation.
///
/// # Safety
/// `cfg` must point to a config, `x0` to three doubles, `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn fadmit_controller_create(
    cfg: *const FadmitAdmittanceConfig,
    x0: *const f64,
    out: *mut *mut FadmitController,
) -> FadmitStatus {
    guard(|| {
        // SAFETY: pointers checked for null; caller guarantees validity.
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(|| null("cfg"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        if x0.is_null() {
            return Err(null("x0"));
        }
        let x0 = unsafe { std::slice::from_raw_parts(x0, 3) };
        let state = ControllerState::at_rest(Vec3::new(x0[0], x0[1], x0[2]), Rotation::IDENTITY);
        let inner = AdmittanceController::new((*cfg).into(), state).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(FadmitController { inner }));
        Ok(())
    })
}

/// Releases a controller. Null is ignored.
///
/// # Safety
/// `ctl` must come from `fadmit_controller_create` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fadmit_controller_free(ctl: *mut FadmitController) {
    if !ctl.is_null() {
        // SAFETY: created by Box::into_raw in fadmit_controller_create.
        drop(unsafe { Box::from_raw(ctl) });
    }
}

/// Advances the controller by `dt` seconds given a raw force/torque reading.
/// `out` may be null.
///
/// # Safety
/// `force` and `torque` must point to three doubles each; other pointers to
/// their types or (for `out`) null.
#[no_mangle]
pub unsafe extern "C" fn fadmit_controller_step(
    ctl: *mut FadmitController,
    cmd: *const FadmitCommand,
    force: *const f64,
    torque: *const f64,
    dt: f64,
    out: *mut FadmitTickOutput,
) -> FadmitStatus {
    guard(|| {
        // SAFETY: pointers checked for null; caller guarantees validity.
        let ctl = unsafe { ctl.as_mut() }.ok_or_else(|| null("ctl"))?;
        let cmd = unsafe { cmd.as_ref() }.ok_or_else(|| null("cmd"))?;
        if force.is_null() {
            return Err(null("force"));
        }
        if torque.is_null() {
            return Err(null("torque"));
        }
        let f = unsafe { std::slice::from_raw_parts(force, 3) };
        let tq = unsafe { std::slice::from_raw_parts(torque, 3) };
        let raw = WrenchSample { force: Vec3::new(f[0], f[1], f[2]), torque: Vec3::new(tq[0], tq[1], tq[2]) };
        if !(raw.force.is_finite() && raw.torque.is_finite()) {
            return Err((FadmitStatus::NonFinite, "wrench sample is not finite".into()));
        }
        let cmd = command(cmd)?;
        let tick = ctl.inner.tick(&cmd, raw, dt).map_err(lib_err)?;
        if let Some(out) = unsafe { out.as_mut() } {
            *out = FadmitTickOutput {
                sensed_force: tick.sensed.force.to_array(),
                sensed_torque: tick.sensed.torque.to_array(),
                f_cmd: tick.f_cmd.to_array(),
                k_eig: tick.k_eff.symmetric_eigenvalues(),
            };
        }
        Ok(())
    })
}

/// # Safety
/// `ctl` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fadmit_controller_state(ctl: *const FadmitController, out: *mut FadmitState) -> FadmitStatus {
    guard(|| {
        // SAFETY: pointers checked for null; caller guarantees validity.
        let ctl = unsafe { ctl.as_ref() }.ok_or_else(|| null("ctl"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let s = ctl.inner.state();
        *out = FadmitState { x_r: s.x_r.to_array(), v_r: s.v_r.to_array(), q_r: s.q_r.wxyz(), w_r: s.w_r.to_array() };
        Ok(())
    })
}

/// Runs one episode described by scenario TOML text.
///
/// # Safety
/// `config_toml` must be a nul-terminated string and `out` a handle slot.
#[no_mangle]
pub unsafe extern "C" fn fadmit_episode_run(config_toml: *const c_char, out: *mut *mut FadmitEpisode) -> FadmitStatus {
    guard(|| {
        let text = str_arg(config_toml, "config_toml")?;
        // SAFETY: checked for null; caller guarantees validity.
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let cfg: ScenarioConfig = parse_toml(text, "config").map_err(lib_err)?;
        let log = run_episode(&cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(FadmitEpisode { log }));
        Ok(())
    })
}

/// # Safety
/// `ep` must come from `fadmit_episode_run` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fadmit_episode_free(ep: *mut FadmitEpisode) {
    if !ep.is_null() {
        // SAFETY: created by Box::into_raw in fadmit_episode_run.
        drop(unsafe { Box::from_raw(ep) });
    }
}

/// # Safety
/// `ep` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fadmit_episode_metrics(ep: *const FadmitEpisode, out: *mut FadmitMetrics) -> FadmitStatus {
    guard(|| {
        // SAFETY: pointers checked for null; caller guarantees validity.
        let ep = unsafe { ep.as_ref() }.ok_or_else(|| null("ep"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let m = &ep.log.metrics;
        *out = FadmitMetrics {
            success: m.success,
            safety_stop: m.safety_stop,
            primary_metric: m.primary(ep.log.task),
            peak_force: m.peak_force,
            ticks: ep.log.records.len() as u64,
        };
        Ok(())
    })
}

/// Writes the per-tick trace CSV of an episode.
///
/// # Safety
/// `ep` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fadmit_episode_write_trace(ep: *const FadmitEpisode, path: *const c_char) -> FadmitStatus {
    guard(|| {
        // SAFETY: checked for null; caller guarantees validity.
        let ep = unsafe { ep.as_ref() }.ok_or_else(|| null("ep"))?;
        let path = Path::new(str_arg(path, "path")?);
        let f = File::create(path).map_err(|e| lib_err(fadmit::io::file_error(path, e)))?;
        write_trace(&ep.log, BufWriter::new(f)).map_err(lib_err)
    })
}

/// Checks contact convergence for one parameter set, starting at the surface
/// at rest and running for 20 time constants. `passed` receives the verdict.
///
/// # Safety
/// `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fadmit_verify_contact(m: f64, d: f64, k_e: f64, f_h: f64, passed: *mut bool) -> FadmitStatus {
    guard(|| {
        // SAFETY: checked for null; caller guarantees validity.
        let passed = unsafe { passed.as_mut() }.ok_or_else(|| null("passed"))?;
        let p = NormalDynamicsParams::new(m, d, k_e, f_h).map_err(lib_err)?;
        let r = verify_prop1(&p, 0.0, 0.0, SETTLING_CONSTANTS * p.contact_time_constant()).map_err(lib_err)?;
        *passed = r.pass;
        Ok(())
    })
}

/// Runs the default verification grid. Returns `CheckFailed` when any
/// report fails; `out` is filled either way.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fadmit_verify_default(out: *mut FadmitVerifySummary) -> FadmitStatus {
    guard(|| {
        // SAFETY: checked for null; caller guarantees validity.
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let reports = VerifyConfig::default().run().map_err(lib_err)?;
        let passed = reports.iter().filter(|r| r.pass).count() as u64;
        *out = FadmitVerifySummary { reports: reports.len() as u64, passed, failed: reports.len() as u64 - passed };
        if out.failed > 0 {
            return Err((FadmitStatus::CheckFailed, format!("{} verification reports failed", out.failed)));
        }
        Ok(())
    })
}
