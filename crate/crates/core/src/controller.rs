//! Force-aware Cartesian admittance controller.
//!
//! Translational law, integrated with semi-implicit Euler:
//!
//! ```text
//! m x_r'' + D_eff x_r' + K_eff (x_r - x_cmd) = F_ext - F_cmd
//! ```
//!
//! `F_cmd = f n` is active only when the command reports contact and normal
//! regulation is enabled, with `f = f_H + n.K(x_cmd - x_r) + n.D x_r'`. The
//! compensation terms cancel the spring along `n` and double the damping, so
//! the normal axis reduces to `m x_n'' + 2d x_n' = f_ext,n - f_H`.
//!
//! `n` is the outward contact normal: the direction of the reaction force the
//! environment exerts on the end-effector. The robot presses along `-n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tangent_direction, Mat3, Rotation, UnitVec3, Vec3};

/// Controller tick period used throughout the harness (1 kHz).
pub const CONTROL_DT: f64 = 1e-3;
/// Largest step accepted by the integrators.
pub const MAX_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceConfig {
    /// Translational virtual mass (kg).
    pub mass: f64,
    /// Translational stiffness (N/m).
    pub stiffness: f64,
    pub damping_ratio: f64,
    /// Rotational inertia (kg m^2).
    pub rot_mass: f64,
    /// Rotational stiffness (Nm/rad).
    pub rot_stiffness: f64,
    /// Stiffness multiplier along the tangent direction.
    pub tangent_scale: f64,
    pub enable_normal_regulation: bool,
    pub enable_tangent_stiffening: bool,
    /// Target normal force magnitude `f_H` (N).
    pub target_force: f64,
    /// Radial force deadband (N).
    pub force_deadband: f64,
    /// Radial torque deadband (Nm).
    pub torque_deadband: f64,
}

impl Default for AdmittanceConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            stiffness: 50.0,
            damping_ratio: 2.0,
            rot_mass: 0.1,
            rot_stiffness: 10.0,
            tangent_scale: 4.0,
            enable_normal_regulation: false,
            enable_tangent_stiffening: false,
            target_force: 0.0,
            force_deadband: 2.0,
            torque_deadband: 1.0,
        }
    }
}

impl AdmittanceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("mass", self.mass),
            ("stiffness", self.stiffness),
            ("damping_ratio", self.damping_ratio),
            ("rot_mass", self.rot_mass),
            ("rot_stiffness", self.rot_stiffness),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        if !(self.tangent_scale >= 1.0 && self.tangent_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("tangent_scale must be >= 1, got {}", self.tangent_scale)));
        }
        for (name, value) in [
            ("target_force", self.target_force),
            ("force_deadband", self.force_deadband),
            ("torque_deadband", self.torque_deadband),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {value}")));
            }
        }
        Ok(())
    }

    /// Translational damping `2 xi sqrt(m k)`.
    pub fn damping(&self) -> f64 {
        2.0 * self.damping_ratio * (self.mass * self.stiffness).sqrt()
    }

    pub fn rot_damping(&self) -> f64 {
        2.0 * self.damping_ratio * (self.rot_mass * self.rot_stiffness).sqrt()
    }
}

/// `d = 2 xi sqrt(m k)`.
pub fn compute_damping(mass: f64, stiffness: f64, damping_ratio: f64) -> Result<f64> {
    for (name, value) in [("mass", mass), ("stiffness", stiffness), ("damping_ratio", damping_ratio)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveParameter { name, value });
        }
    }
    Ok(2.0 * damping_ratio * (mass * stiffness).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub x_r: Vec3,
    pub v_r: Vec3,
    pub q_r: Rotation,
    pub w_r: Vec3,
}

impl ControllerState {
    pub fn at_rest(x_r: Vec3, q_r: Rotation) -> Self {
        Self { x_r, v_r: Vec3::ZERO, q_r, w_r: Vec3::ZERO }
    }

    fn check_finite(&self, what: &str) -> Result<()> {
        let q = self.q_r.wxyz();
        if self.x_r.is_finite() && self.v_r.is_finite() && self.w_r.is_finite() && q.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteState(what.to_string()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerCommand {
    pub x_cmd: Vec3,
    pub q_cmd: Rotation,
    /// 0 = open, 1 = closed.
    pub gripper: f64,
    /// Contact normal; `None` stands for the out-of-contact placeholder.
    pub normal: Option<UnitVec3>,
    pub contact: bool,
}

impl ControllerCommand {
    pub fn free(x_cmd: Vec3, q_cmd: Rotation) -> Self {
        Self { x_cmd, q_cmd, gripper: 0.0, normal: None, contact: false }
    }

    pub fn in_contact(x_cmd: Vec3, q_cmd: Rotation, normal: UnitVec3) -> Self {
        Self { x_cmd, q_cmd, gripper: 0.0, normal: Some(normal), contact: true }
    }

    /// Normal used by the force terms: present only while in contact.
    fn active_normal(&self) -> Option<UnitVec3> {
        if self.contact {
            self.normal
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WrenchSample {
    pub force: Vec3,
    pub torque: Vec3,
}

impl WrenchSample {
    pub const ZERO: WrenchSample = WrenchSample { force: Vec3::ZERO, torque: Vec3::ZERO };

    pub fn from_force(force: Vec3) -> Self {
        Self { force, torque: Vec3::ZERO }
    }
}

fn radial_deadband(v: Vec3, band: f64) -> Vec3 {
    let mag = v.norm();
    if mag <= band {
        Vec3::ZERO
    } else {
        v * ((mag - band) / mag)
    }
}

/// Shrinks the force and torque magnitudes by their deadbands, keeping direction.
pub fn apply_deadband(w: WrenchSample, cfg: &AdmittanceConfig) -> WrenchSample {
    WrenchSample {
        force: radial_deadband(w.force, cfg.force_deadband),
        torque: radial_deadband(w.torque, cfg.torque_deadband),
    }
}

pub fn commanded_force(cmd: &ControllerCommand, st: &ControllerState, cfg: &AdmittanceConfig) -> Vec3 {
    if !cfg.enable_normal_regulation {
        return Vec3::ZERO;
    }
    let Some(n) = cmd.active_normal() else {
        return Vec3::ZERO;
    };
    let n = n.get();
    let k = cfg.stiffness;
    let d = cfg.damping();
    let f = cfg.target_force + n.dot((cmd.x_cmd - st.x_r) * k) + n.dot(st.v_r * d);
    n * f
}

/// Tangent direction used for stiffening, or `None` for the isotropic path.
fn stiffening_direction(cmd: &ControllerCommand, st: &ControllerState, cfg: &AdmittanceConfig) -> Option<UnitVec3> {
    if !cfg.enable_tangent_stiffening || cfg.tangent_scale == 1.0 {
        return None;
    }
    let n = cmd.active_normal()?;
    tangent_direction(n, cmd.x_cmd, st.x_r).ok()
}

/// Effective stiffness and damping matrices for this tick.
///
/// Stiffening adds a rank-1 term along `t`; the damping along `t` is the
/// over-damped value for the scaled stiffness.
pub fn effective_gains(cmd: &ControllerCommand, st: &ControllerState, cfg: &AdmittanceConfig) -> (Mat3, Mat3) {
    let k = cfg.stiffness;
    let d = cfg.damping();
    let k_iso = Mat3::scaled_identity(k);
    let d_iso = Mat3::scaled_identity(d);
    match stiffening_direction(cmd, st, cfg) {
        None => (k_iso, d_iso),
        Some(t) => {
            let t = t.get();
            let tt = Mat3::outer(t, t);
            let k_t = cfg.tangent_scale * k;
            let d_t = 2.0 * cfg.damping_ratio * (cfg.mass * k_t).sqrt();
            (k_iso + tt * (k_t - k), d_iso + tt * (d_t - d))
        }
    }
}

pub fn effective_stiffness(cmd: &ControllerCommand, st: &ControllerState, cfg: &AdmittanceConfig) -> Mat3 {
    effective_gains(cmd, st, cfg).0
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= MAX_DT {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dt must be in (0, {MAX_DT}], got {dt}")))
    }
}

/// One semi-implicit Euler step of the translational law. `f_ext` is the
/// already-deadbanded external force.
pub fn step_translation(
    st: &ControllerState,
    cmd: &ControllerCommand,
    f_ext: Vec3,
    dt: f64,
    cfg: &AdmittanceConfig,
) -> Result<ControllerState> {
    check_dt(dt)?;
    let f_cmd = commanded_force(cmd, st, cfg);
    let (k_eff, d_eff) = effective_gains(cmd, st, cfg);
    Ok(integrate_translation(st, cmd, f_ext, f_cmd, &k_eff, &d_eff, dt, cfg)?.0)
}

#[allow(clippy::too_many_arguments)]
fn integrate_translation(
    st: &ControllerState,
    cmd: &ControllerCommand,
    f_ext: Vec3,
    f_cmd: Vec3,
    k_eff: &Mat3,
    d_eff: &Mat3,
    dt: f64,
    cfg: &AdmittanceConfig,
) -> Result<(ControllerState, Vec3)> {
    let spring = k_eff.mul_vec(st.x_r - cmd.x_cmd);
    let damper = d_eff.mul_vec(st.v_r);
    let acc = (f_ext - f_cmd - damper - spring) / cfg.mass;
    let v_r = st.v_r + acc * dt;
    let x_r = st.x_r + v_r * dt;
    let next = ControllerState { x_r, v_r, ..*st };
    next.check_finite("translational admittance step")?;
    Ok((next, acc))
}

/// Rotational admittance with zero commanded torque. The orientation error is
/// the world-frame rotation vector of `q_r q_cmd^-1`.
pub fn step_rotation(
    st: &ControllerState,
    cmd: &ControllerCommand,
    torque_ext: Vec3,
    dt: f64,
    cfg: &AdmittanceConfig,
) -> Result<ControllerState> {
    check_dt(dt)?;
    let err = st.q_r.compose(&cmd.q_cmd.inverse()).to_rotation_vector();
    let acc = (torque_ext - st.w_r * cfg.rot_damping() - err * cfg.rot_stiffness) / cfg.rot_mass;
    let w_r = st.w_r + acc * dt;
    let q_r = Rotation::from_rotation_vector(w_r * dt).compose(&st.q_r);
    let next = ControllerState { w_r, q_r, ..*st };
    next.check_finite("rotational admittance step")?;
    Ok(next)
}

/// What one controller tick computed, for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutput {
    pub sensed: WrenchSample,
    pub f_cmd: Vec3,
    pub k_eff: Mat3,
}

/// Stateful wrapper running the fixed per-tick order:
/// deadband, commanded force, effective gains, integrate.
#[derive(Debug, Clone)]
pub struct AdmittanceController {
    cfg: AdmittanceConfig,
    state: ControllerState,
}

impl AdmittanceController {
    pub fn new(cfg: AdmittanceConfig, initial: ControllerState) -> Result<Self> {
        cfg.validate()?;
        initial.check_finite("initial controller state")?;
        Ok(Self { cfg, state: initial })
    }

    pub fn config(&self) -> &AdmittanceConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn set_state(&mut self, state: ControllerState) {
        self.state = state;
    }

    pub fn tick(&mut self, cmd: &ControllerCommand, raw: WrenchSample, dt: f64) -> Result<TickOutput> {
        check_dt(dt)?;
        let sensed = apply_deadband(raw, &self.cfg);
        let f_cmd = commanded_force(cmd, &self.state, &self.cfg);
        let (k_eff, d_eff) = effective_gains(cmd, &self.state, &self.cfg);
        let (next, _) = integrate_translation(&self.state, cmd, sensed.force, f_cmd, &k_eff, &d_eff, dt, &self.cfg)?;
        let next = step_rotation(&next, cmd, sensed.torque, dt, &self.cfg)?;
        self.state = next;
        Ok(TickOutput { sensed, f_cmd, k_eff })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> AdmittanceConfig {
        AdmittanceConfig::default()
    }

    #[test]
    fn damping_examples() {
        assert!((compute_damping(1.0, 50.0, 2.0).unwrap() - 28.284271247461902).abs() < 1e-12);
        assert_eq!(compute_damping(1.0, 1.0, 0.5).unwrap(), 1.0);
        assert!((compute_damping(1.0, 800.0, 2.0).unwrap() - 113.13708498984761).abs() < 1e-9);
        assert!(matches!(compute_damping(0.0, 50.0, 2.0), Err(Error::NonPositiveParameter { name: "mass", .. })));
        assert!(compute_damping(1.0, -1.0, 2.0).is_err());
    }

    #[test]
    fn deadband_examples() {
        let c = cfg();
        let w = apply_deadband(WrenchSample::from_force(Vec3::new(1.5, 0.0, 0.0)), &c);
        assert_eq!(w.force, Vec3::ZERO);
        let w = apply_deadband(WrenchSample::from_force(Vec3::new(0.0, 0.0, 5.0)), &c);
        assert!((w.force - Vec3::new(0.0, 0.0, 3.0)).norm() < 1e-15);
        assert_eq!(apply_deadband(WrenchSample::ZERO, &c), WrenchSample::ZERO);
        let w = apply_deadband(WrenchSample { force: Vec3::ZERO, torque: Vec3::new(0.0, 1.5, 0.0) }, &c);
        assert!((w.torque.y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn commanded_force_examples() {
        let mut c = cfg();
        c.enable_normal_regulation = true;
        c.target_force = 4.0;
        let n = UnitVec3::new(Vec3::new(0.0, 0.0, -1.0)).unwrap();
        let st = ControllerState::at_rest(Vec3::ZERO, Rotation::IDENTITY);

        let free = ControllerCommand::free(Vec3::ZERO, Rotation::IDENTITY);
        assert_eq!(commanded_force(&free, &st, &c), Vec3::ZERO);

        let cmd = ControllerCommand::in_contact(Vec3::ZERO, Rotation::IDENTITY, n);
        assert_eq!(commanded_force(&cmd, &st, &c), Vec3::new(0.0, 0.0, -4.0));

        let cmd = ControllerCommand::in_contact(Vec3::new(0.0, 0.0, -0.01), Rotation::IDENTITY, n);
        let st = ControllerState { v_r: Vec3::new(0.0, 0.0, -0.02), ..st };
        let f = commanded_force(&cmd, &st, &c);
        // 4 + 50 * 0.01 + 28.2843 * 0.02
        let expected = 4.0 + 0.5 + 2.0 * 2.0 * 50f64.sqrt() * 0.02;
        assert!((f.z + expected).abs() < 1e-12);
        assert!((expected - 5.0657).abs() < 1e-4);

        c.enable_normal_regulation = false;
        assert_eq!(commanded_force(&cmd, &st, &c), Vec3::ZERO);
    }

    #[test]
    fn stiffness_examples() {
        let mut c = cfg();
        let st = ControllerState::at_rest(Vec3::ZERO, Rotation::IDENTITY);
        let cmd = ControllerCommand::in_contact(Vec3::new(0.1, 0.0, 0.05), Rotation::IDENTITY, UnitVec3::Z);
        assert_eq!(effective_stiffness(&cmd, &st, &c), Mat3::scaled_identity(50.0));

        c.enable_tangent_stiffening = true;
        let k = effective_stiffness(&cmd, &st, &c);
        let expected = Mat3([[200.0, 0.0, 0.0], [0.0, 50.0, 0.0], [0.0, 0.0, 50.0]]);
        assert!(k.frobenius_distance(&expected) < 1e-12);

        let (_, d) = effective_gains(&cmd, &st, &c);
        assert!((d.0[0][0] - compute_damping(1.0, 200.0, 2.0).unwrap()).abs() < 1e-12);
        assert!((d.0[1][1] - c.damping()).abs() < 1e-12);

        let parallel = ControllerCommand::in_contact(Vec3::new(0.0, 0.0, 0.05), Rotation::IDENTITY, UnitVec3::Z);
        assert_eq!(effective_stiffness(&parallel, &st, &c), Mat3::scaled_identity(50.0));

        let free = ControllerCommand::free(Vec3::new(0.1, 0.0, 0.0), Rotation::IDENTITY);
        assert_eq!(effective_stiffness(&free, &st, &c), Mat3::scaled_identity(50.0));
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let c = cfg();
        let st = ControllerState::at_rest(Vec3::new(0.1, 0.2, 0.3), Rotation::IDENTITY);
        let cmd = ControllerCommand::free(st.x_r, Rotation::IDENTITY);
        let next = step_translation(&st, &cmd, Vec3::ZERO, CONTROL_DT, &c).unwrap();
        assert_eq!(next, st);
        let next = step_rotation(&st, &cmd, Vec3::ZERO, CONTROL_DT, &c).unwrap();
        assert_eq!(next, st);
    }

    #[test]
    fn constant_force_static_offset() {
        let c = cfg();
        let mut st = ControllerState::at_rest(Vec3::ZERO, Rotation::IDENTITY);
        let cmd = ControllerCommand::free(Vec3::ZERO, Rotation::IDENTITY);
        for _ in 0..60_000 {
            st = step_translation(&st, &cmd, Vec3::new(0.0, 0.0, -4.0), CONTROL_DT, &c).unwrap();
        }
        assert!((st.x_r.z + 0.08).abs() < 1e-9, "{}", st.x_r.z);
    }

    #[test]
    fn rejects_bad_dt() {
        let c = cfg();
        let st = ControllerState::default();
        let cmd = ControllerCommand::free(Vec3::ZERO, Rotation::IDENTITY);
        assert!(step_translation(&st, &cmd, Vec3::ZERO, 0.0, &c).is_err());
        assert!(step_translation(&st, &cmd, Vec3::ZERO, 0.02, &c).is_err());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let c = cfg();
        let st = ControllerState::default();
        let cmd = ControllerCommand::free(Vec3::ZERO, Rotation::IDENTITY);
        let r = step_translation(&st, &cmd, Vec3::new(f64::NAN, 0.0, 0.0), CONTROL_DT, &c);
        assert!(matches!(r, Err(Error::NonFiniteState(_))));
    }

    #[test]
    fn rotational_damping_from_defaults() {
        assert!((cfg().rot_damping() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rotational_free_response_has_no_overshoot() {
        let c = cfg();
        let q0 = Rotation::from_axis_angle(UnitVec3::Z, 10f64.to_radians());
        let mut st = ControllerState::at_rest(Vec3::ZERO, q0);
        let cmd = ControllerCommand::free(Vec3::ZERO, Rotation::IDENTITY);
        let mut prev = st.q_r.to_rotation_vector().z;
        for _ in 0..20_000 {
            st = step_rotation(&st, &cmd, Vec3::ZERO, CONTROL_DT, &c).unwrap();
            let a = st.q_r.to_rotation_vector().z;
            assert!(a >= -1e-12, "overshoot: {a}");
            assert!(a <= prev + 1e-15);
            prev = a;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let bad = AdmittanceConfig { tangent_scale: 0.5, ..cfg() };
        assert!(bad.validate().is_err());
        let bad = AdmittanceConfig { stiffness: 0.0, ..cfg() };
        assert!(bad.validate().is_err());
        let bad = AdmittanceConfig { force_deadband: -1.0, ..cfg() };
        assert!(bad.validate().is_err());
    }
}
