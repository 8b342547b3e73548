//! Numerical checks of the normal-axis stability results against a bilateral
//! spring environment `f = k_e (x_e - x_n)`.
//!
//! Closed loop in contact: `m x'' + 2d x' = k_e (x_e - x) - f_H`.
//! Error state `e = x - (x_e - f_H / k_e)`, Lyapunov `V = m e'^2 / 2 + k_e e^2 / 2`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{
    apply_deadband, compute_damping, AdmittanceConfig, AdmittanceController, ControllerCommand, ControllerState,
    WrenchSample,
};
use crate::environment::SpringContact;
use crate::error::{Error, Result};
use crate::geometry::{Rotation, UnitVec3, Vec3};

/// Largest integration step used by the verifier (s).
pub const VERIFY_DT: f64 = 1e-4;
/// Max product of step and fastest pole magnitude.
pub const MAX_STEP_RATE: f64 = 0.01;
pub const TOL_X: f64 = 1e-4;
pub const TOL_V: f64 = 1e-4;
/// Relative force tolerance.
pub const TOL_F_REL: f64 = 0.01;
/// Force scale below which the force tolerance stops shrinking (N).
pub const TOL_F_FLOOR: f64 = 1.0;
/// Max error against the closed-form free-flight velocity (m/s).
pub const TOL_ANALYTIC_V: f64 = 1e-5;
/// Non-dimensional slack on Lyapunov rate checks.
pub const LYAPUNOV_SLACK: f64 = 1e-6;
/// Lyapunov values below this fraction of `V(0)` are not checked for decrease.
pub const LYAPUNOV_BAND: f64 = 1e-6;
pub const EQUIVALENCE_TOL: f64 = 1e-9;
/// Horizon in units of the slowest time constant.
pub const SETTLING_CONSTANTS: f64 = 20.0;
/// Allowed deviation of the half-amplitude gain from exactly one half.
pub const GAIN_TOL_REL: f64 = 0.05;

const EXCERPT_LEN: usize = 50;

/// Environment rest position over time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XeProfile {
    Constant { x_e: f64 },
    Step { before: f64, after: f64, at: f64 },
    Sinusoid { offset: f64, amplitude: f64, omega: f64 },
}

impl XeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            XeProfile::Constant { x_e } => x_e,
            XeProfile::Step { before, after, at } => {
                if t < at {
                    before
                } else {
                    after
                }
            }
            XeProfile::Sinusoid { offset, amplitude, omega } => offset + amplitude * (omega * t).sin(),
        }
    }

    /// Time derivative; zero for piecewise-constant profiles away from the step.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            XeProfile::Sinusoid { amplitude, omega, .. } => amplitude * omega * (omega * t).cos(),
            _ => 0.0,
        }
    }

    pub fn accel(&self, t: f64) -> f64 {
        match *self {
            XeProfile::Sinusoid { amplitude, omega, .. } => -amplitude * omega * omega * (omega * t).sin(),
            _ => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            XeProfile::Constant { x_e } => x_e.is_finite(),
            XeProfile::Step { before, after, at } => before.is_finite() && after.is_finite() && at.is_finite(),
            XeProfile::Sinusoid { offset, amplitude, omega } => {
                offset.is_finite() && amplitude.is_finite() && omega.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("x_e profile must be finite".into()))
        }
    }
}

/// Parameters of the normal-direction closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalDynamicsParams {
    pub m: f64,
    pub d: f64,
    pub k_e: f64,
    pub f_h: f64,
    pub x_e: XeProfile,
}

impl NormalDynamicsParams {
    /// Constant rest position at 0.
    pub fn new(m: f64, d: f64, k_e: f64, f_h: f64) -> Result<Self> {
        let p = Self { m, d, k_e, f_h, x_e: XeProfile::Constant { x_e: 0.0 } };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("m", self.m), ("d", self.d), ("k_e", self.k_e)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        if !(self.f_h >= 0.0 && self.f_h.is_finite()) {
            return Err(Error::InvalidParameter(format!("f_H must be >= 0, got {}", self.f_h)));
        }
        self.x_e.validate()
    }

    /// Slowest time constant of `m s^2 + 2d s + k_e`.
    pub fn contact_time_constant(&self) -> f64 {
        let disc = self.d * self.d - self.m * self.k_e;
        let rate = if disc >= 0.0 { (self.d - disc.sqrt()) / self.m } else { self.d / self.m };
        1.0 / rate
    }

    /// Largest pole magnitude of `m s^2 + 2d s + k_e`.
    pub fn fastest_rate(&self) -> f64 {
        let disc = self.d * self.d - self.m * self.k_e;
        if disc >= 0.0 {
            (self.d + disc.sqrt()) / self.m
        } else {
            (self.k_e / self.m).sqrt()
        }
    }

    /// Integration step: `VERIFY_DT`, shortened for fast poles.
    pub fn step(&self) -> f64 {
        VERIFY_DT.min(MAX_STEP_RATE / self.fastest_rate().max(2.0 * self.d / self.m))
    }

    /// Time constant of the free-flight velocity, `m / 2d`.
    pub fn free_time_constant(&self) -> f64 {
        self.m / (2.0 * self.d)
    }

    pub fn equilibrium(&self, x_e: f64) -> f64 {
        x_e - self.f_h / self.k_e
    }
}

impl fmt::Display for NormalDynamicsParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m={};d={:.6};k_e={};f_H={}", self.m, self.d, self.k_e, self.f_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Proposition {
    ContactConvergence,
    FreeFlight,
    DisturbanceIss,
    Equivalence,
}

impl Proposition {
    pub fn id(self) -> &'static str {
        match self {
            Proposition::ContactConvergence => "prop1",
            Proposition::FreeFlight => "prop2",
            Proposition::DisturbanceIss => "prop3",
            Proposition::Equivalence => "equivalence",
        }
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// One measured quantity; passes when `measured <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, measured: f64, bound: f64) -> Self {
        Self { name, measured, bound, pass: measured <= bound }
    }

    /// `measured / bound`, with a zero bound mapped to 0 or infinity.
    pub fn ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.measured / self.bound
        } else if self.measured > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub proposition: Proposition,
    pub params: String,
    pub checks: Vec<Check>,
    /// True when the proposition does not apply to the inputs (reported as passing).
    pub skipped: bool,
    pub pass: bool,
    pub excerpt: Vec<TrajectorySample>,
}

impl VerificationReport {
    fn new(proposition: Proposition, params: String, checks: Vec<Check>, excerpt: Vec<TrajectorySample>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { proposition, params, checks, skipped: false, pass, excerpt }
    }

    fn skipped(proposition: Proposition, params: String) -> Self {
        Self { proposition, params, checks: Vec::new(), skipped: true, pass: true, excerpt: Vec::new() }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The first failing check, otherwise the one closest to its bound.
    pub fn worst(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass).or_else(|| {
            self.checks.iter().max_by(|a, b| a.ratio().partial_cmp(&b.ratio()).unwrap_or(std::cmp::Ordering::Equal))
        })
    }
}

fn rk4<F: Fn(f64, f64, f64) -> f64>(t: f64, x: f64, v: f64, dt: f64, acc: &F) -> (f64, f64) {
    let h = dt / 2.0;
    let (k1x, k1v) = (v, acc(t, x, v));
    let (k2x, k2v) = (v + h * k1v, acc(t + h, x + h * k1x, v + h * k1v));
    let (k3x, k3v) = (v + h * k2v, acc(t + h, x + h * k2x, v + h * k2v));
    let (k4x, k4v) = (v + dt * k3v, acc(t + dt, x + dt * k3x, v + dt * k3v));
    (x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x), v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))
}

struct Trajectory {
    t: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
}

impl Trajectory {
    fn excerpt(&self) -> Vec<TrajectorySample> {
        let stride = (self.t.len() / EXCERPT_LEN).max(1);
        (0..self.t.len())
            .step_by(stride)
            .chain(std::iter::once(self.t.len() - 1))
            .map(|i| TrajectorySample { t: self.t[i], x: self.x[i], v: self.v[i] })
            .collect()
    }

    fn last(&self) -> (f64, f64) {
        (*self.x.last().expect("non-empty"), *self.v.last().expect("non-empty"))
    }
}

fn check_horizon(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::NonPositiveParameter { name: "T", value: t_end });
    }
    if !(dt > 0.0 && dt <= t_end) {
        return Err(Error::InvalidParameter(format!("dt must be in (0, T], got {dt}")));
    }
    Ok((t_end / dt).round().max(1.0) as usize)
}

fn integrate<F: Fn(f64, f64, f64) -> f64>(
    x0: f64,
    v0: f64,
    t_end: f64,
    dt: f64,
    what: &str,
    acc: F,
) -> Result<Trajectory> {
    let n = check_horizon(t_end, dt)?;
    let mut tr =
        Trajectory { t: Vec::with_capacity(n + 1), x: Vec::with_capacity(n + 1), v: Vec::with_capacity(n + 1) };
    let (mut x, mut v) = (x0, v0);
    tr.t.push(0.0);
    tr.x.push(x);
    tr.v.push(v);
    for i in 0..n {
        let t = i as f64 * dt;
        (x, v) = rk4(t, x, v, dt, &acc);
        if !(x.is_finite() && v.is_finite()) {
            return Err(Error::NonFiniteState(format!("{what} at t = {:.4}", t + dt)));
        }
        tr.t.push((i + 1) as f64 * dt);
        tr.x.push(x);
        tr.v.push(v);
    }
    Ok(tr)
}

/// Number of steps with `V[i+1] >= V[i]` while `V[i]` is above the band.
fn lyapunov_violations(v: &[f64]) -> usize {
    let v0 = v[0];
    if v0 <= 0.0 {
        return 0;
    }
    v.windows(2).filter(|w| w[0] / v0 > LYAPUNOV_BAND && w[1] >= w[0]).count()
}

/// Five-point central difference; `None` at the two samples on each end.
fn derivative(y: &[f64], dt: f64) -> Vec<Option<f64>> {
    (0..y.len())
        .map(|i| {
            (i >= 2 && i + 2 < y.len()).then(|| (-y[i + 2] + 8.0 * y[i + 1] - 8.0 * y[i - 1] + y[i - 2]) / (12.0 * dt))
        })
        .collect()
}

fn require_constant(p: &NormalDynamicsParams) -> Result<f64> {
    match p.x_e {
        XeProfile::Constant { x_e } => Ok(x_e),
        _ => Err(Error::InvalidParameter("this check needs a constant x_e profile".into())),
    }
}

/// Contact convergence from `(x0, v0)` with constant `x_e`.
pub fn verify_prop1(p: &NormalDynamicsParams, x0: f64, v0: f64, t_end: f64) -> Result<VerificationReport> {
    verify_prop1_dt(p, x0, v0, t_end, p.step())
}

pub fn verify_prop1_dt(p: &NormalDynamicsParams, x0: f64, v0: f64, t_end: f64, dt: f64) -> Result<VerificationReport> {
    p.validate()?;
    let x_e = require_constant(p)?;
    let (m, d, k_e, f_h) = (p.m, p.d, p.k_e, p.f_h);
    let tr = integrate(x0, v0, t_end, dt, "contact dynamics", |_, x, v| (k_e * (x_e - x) - f_h - 2.0 * d * v) / m)?;
    let x_eq = p.equilibrium(x_e);
    let (x_t, _) = tr.last();

    let lyap: Vec<f64> =
        tr.x.iter().zip(&tr.v).map(|(x, v)| 0.5 * m * v * v + 0.5 * k_e * (x - x_eq).powi(2)).collect();
    let dv = derivative(&lyap, dt);
    let expected: Vec<f64> = tr.v.iter().map(|v| -2.0 * d * v * v).collect();
    let scale = expected.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let rate_residual = if scale > 0.0 {
        dv.iter().zip(&expected).filter_map(|(m, e)| m.map(|m| (m - e).abs() / scale)).fold(0.0, f64::max)
    } else {
        0.0
    };

    let checks = vec![
        Check::new("position", (x_t - x_eq).abs(), TOL_X),
        Check::new("force", (k_e * (x_e - x_t) - f_h).abs(), TOL_F_REL * f_h.max(TOL_F_FLOOR)),
        Check::new("lyapunov_decrease", lyapunov_violations(&lyap) as f64, 0.0),
        Check::new("lyapunov_rate", rate_residual, LYAPUNOV_SLACK),
    ];
    Ok(VerificationReport::new(Proposition::ContactConvergence, p.to_string(), checks, tr.excerpt()))
}

/// Closed-form free-flight velocity.
pub fn free_flight_velocity(p: &NormalDynamicsParams, v0: f64, t: f64) -> f64 {
    let v_ss = -p.f_h / (2.0 * p.d);
    v_ss + (v0 - v_ss) * (-2.0 * p.d * t / p.m).exp()
}

/// Max deviation of the integrated free-flight velocity from the closed form.
pub fn free_flight_velocity_error(p: &NormalDynamicsParams, v0: f64, t_end: f64, dt: f64) -> Result<f64> {
    p.validate()?;
    let (m, d, f_h) = (p.m, p.d, p.f_h);
    let tr = integrate(0.0, v0, t_end, dt, "free flight", |_, _, v| (-f_h - 2.0 * d * v) / m)?;
    Ok(tr.t.iter().zip(&tr.v).map(|(t, v)| (v - free_flight_velocity(p, v0, *t)).abs()).fold(0.0, f64::max))
}

/// Free flight after contact loss, starting at `x = 0` with velocity `v0`.
pub fn verify_prop2(p: &NormalDynamicsParams, v0: f64, t_end: f64) -> Result<VerificationReport> {
    p.validate()?;
    let (m, d, f_h) = (p.m, p.d, p.f_h);
    let dt = p.step();
    let tr = integrate(0.0, v0, t_end, dt, "free flight", |_, _, v| (-f_h - 2.0 * d * v) / m)?;
    let v_ss = -f_h / (2.0 * d);
    let (_, v_t) = tr.last();

    let analytic = tr.t.iter().zip(&tr.v).map(|(t, v)| (v - free_flight_velocity(p, v0, *t)).abs()).fold(0.0, f64::max);

    let n = tr.t.len() - 1;
    let i0 = n - n / 10;
    let slope = (tr.x[n] - tr.x[i0]) / (tr.t[n] - tr.t[i0]);

    let lyap: Vec<f64> = tr.v.iter().map(|v| 0.5 * m * (v - v_ss).powi(2)).collect();

    let checks = vec![
        Check::new("velocity", (v_t - v_ss).abs(), TOL_V),
        Check::new("analytic_velocity", analytic, TOL_ANALYTIC_V),
        Check::new("late_drift", (slope - v_ss).abs(), TOL_V),
        Check::new("lyapunov_decrease", lyapunov_violations(&lyap) as f64, 0.0),
    ];
    Ok(VerificationReport::new(Proposition::FreeFlight, p.to_string(), checks, tr.excerpt()))
}

/// Steady-state amplitude of `e` under sinusoidal `x_e`.
pub fn sinusoid_gain(p: &NormalDynamicsParams, amplitude: f64, omega: f64) -> f64 {
    let u = amplitude.abs() * ((p.m * omega * omega).powi(2) + (2.0 * p.d * omega).powi(2)).sqrt();
    let re = p.k_e - p.m * omega * omega;
    let im = 2.0 * p.d * omega;
    u / (re * re + im * im).sqrt()
}

/// Bounds on `|e|` and `|e'|` for zero initial error under a sinusoidal
/// `x_e`: steady-state amplitude plus the decaying homogeneous part, whose
/// energy cannot exceed its initial value.
pub fn iss_bounds(p: &NormalDynamicsParams, amplitude: f64, omega: f64) -> (f64, f64) {
    let e = sinusoid_gain(p, amplitude, omega);
    let w = omega.abs();
    let energy = e * e * (p.k_e + p.m * w * w);
    (e + (energy / p.k_e).sqrt(), w * e + (energy / p.m).sqrt())
}

struct ErrorTrajectory {
    tr: Trajectory,
    u: Vec<f64>,
}

fn integrate_error(p: &NormalDynamicsParams, profile: XeProfile, t_end: f64, dt: f64) -> Result<ErrorTrajectory> {
    let (m, d, k_e) = (p.m, p.d, p.k_e);
    let u = move |t: f64| -(m * profile.accel(t) + 2.0 * d * profile.rate(t));
    let tr = integrate(0.0, 0.0, t_end, dt, "error dynamics", |t, e, v| (u(t) - 2.0 * d * v - k_e * e) / m)?;
    let u = tr.t.iter().map(|t| u(*t)).collect();
    Ok(ErrorTrajectory { tr, u })
}

/// `sup |e|` over the last `window` seconds.
pub fn steady_state_error(
    p: &NormalDynamicsParams,
    amplitude: f64,
    omega: f64,
    t_end: f64,
    window: f64,
) -> Result<f64> {
    p.validate()?;
    let profile = XeProfile::Sinusoid { offset: 0.0, amplitude, omega };
    let et = integrate_error(p, profile, t_end, p.step())?;
    let start = t_end - window;
    Ok(et.tr.t.iter().zip(&et.tr.x).filter(|(t, _)| **t >= start).map(|(_, e)| e.abs()).fold(0.0, f64::max))
}

/// Disturbed contact: `x_e(t) = x_e0 + A sin(w t)` with zero initial error.
pub fn verify_prop3(p: &NormalDynamicsParams, amplitude: f64, omega: f64, t_end: f64) -> Result<VerificationReport> {
    p.validate()?;
    if !(amplitude.is_finite() && omega.is_finite()) {
        return Err(Error::InvalidParameter("sinusoid amplitude and frequency must be finite".into()));
    }
    let offset = p.x_e.value(0.0);
    let profile = XeProfile::Sinusoid { offset, amplitude, omega };
    let (m, d, k_e) = (p.m, p.d, p.k_e);
    let dt = p.step();
    let et = integrate_error(p, profile, t_end, dt)?;
    let ErrorTrajectory { tr, u } = &et;

    let (b_e, b_v) = iss_bounds(p, amplitude, omega);
    let sup_e = tr.x.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let sup_v = tr.v.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let lyap: Vec<f64> = tr.x.iter().zip(&tr.v).map(|(e, v)| 0.5 * m * v * v + 0.5 * k_e * e * e).collect();
    let dv = derivative(&lyap, dt);
    let u_sup = u.iter().fold(0.0f64, |a, u| a.max(u.abs()));
    let scale = u_sup * u_sup / (4.0 * d);
    let (mut young, mut region) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    if scale > 0.0 {
        for i in 0..lyap.len() {
            let Some(vdot) = dv[i] else { continue };
            let (ev, ui) = (tr.v[i], u[i]);
            young = young.max((vdot - (-d * ev * ev + ui * ui / (4.0 * d))) / scale);
            if ev.abs() >= ui.abs() / (2.0 * d) {
                region = region.max(vdot / scale);
            }
        }
    }
    let young = young.max(0.0);
    let region = region.max(0.0);

    let mut checks = vec![
        Check::new("bounded_e", sup_e, b_e),
        Check::new("bounded_edot", sup_v, b_v),
        Check::new("young_inequality", young, LYAPUNOV_SLACK),
        Check::new("iss_region", region, LYAPUNOV_SLACK),
    ];
    if amplitude != 0.0 {
        let window = (t_end / 6.0).max(1e-3);
        let start = t_end - window;
        let full = tr.t.iter().zip(&tr.x).filter(|(t, _)| **t >= start).map(|(_, e)| e.abs()).fold(0.0, f64::max);
        let half = steady_state_error(p, amplitude / 2.0, omega, t_end, window)?;
        let ratio = if full > 0.0 { half / full } else { 0.0 };
        checks.push(Check::new("half_amplitude_gain", ratio, 0.5 * (1.0 + GAIN_TOL_REL)));
    }
    let excerpt = tr
        .excerpt()
        .into_iter()
        .map(|s| TrajectorySample { x: s.x + p.equilibrium(profile.value(s.t)), ..s })
        .collect();
    Ok(VerificationReport::new(Proposition::DisturbanceIss, p.to_string(), checks, excerpt))
}

/// Initial state and command for an equivalence run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceInputs {
    pub x0: Vec3,
    pub v0: Vec3,
    pub x_cmd: Vec3,
    pub contact: bool,
}

/// Runs the full controller against the bilateral spring and a direct scalar
/// integration of the reduced normal law at the same `dt`, then compares `x_n`
/// step by step. Skipped when the command is out of contact or regulation is off.
pub fn equivalence_check(
    cfg: &AdmittanceConfig,
    env: &SpringContact,
    inputs: &EquivalenceInputs,
    t_end: f64,
    dt: f64,
) -> Result<VerificationReport> {
    cfg.validate()?;
    SpringContact::new(env.stiffness, env.rest_point, env.normal)?;
    let params = format!("m={};k={};k_e={};f_H={}", cfg.mass, cfg.stiffness, env.stiffness, cfg.target_force);
    if !inputs.contact || !cfg.enable_normal_regulation {
        return Ok(VerificationReport::skipped(Proposition::Equivalence, params));
    }
    let steps = check_horizon(t_end, dt)?;
    let n = env.normal;
    let nv = n.get();
    let d = cfg.damping();
    let cmd = ControllerCommand::in_contact(inputs.x_cmd, Rotation::IDENTITY, n);
    let initial =
        ControllerState { x_r: inputs.x0, v_r: inputs.v0, ..ControllerState::at_rest(inputs.x0, Rotation::IDENTITY) };
    let mut ctl = AdmittanceController::new(*cfg, initial)?;

    let x_e = nv.dot(env.rest_point);
    let (mut x, mut v) = (nv.dot(inputs.x0), nv.dot(inputs.v0));
    let mut worst = 0.0f64;
    let mut excerpt = Vec::new();
    let stride = (steps / EXCERPT_LEN).max(1);
    for i in 0..steps {
        let raw = WrenchSample::from_force(nv * env.bilateral_force(ctl.state().x_r));
        ctl.tick(&cmd, raw, dt)?;

        let f_n = nv.dot(apply_deadband(WrenchSample::from_force(nv * (env.stiffness * (x_e - x))), cfg).force);
        v += (f_n - cfg.target_force - 2.0 * d * v) / cfg.mass * dt;
        x += v * dt;
        if !(x.is_finite() && v.is_finite()) {
            return Err(Error::NonFiniteState("direct normal integration".into()));
        }
        let x_pipe = nv.dot(ctl.state().x_r);
        worst = worst.max((x_pipe - x).abs());
        if i % stride == 0 {
            excerpt.push(TrajectorySample { t: (i + 1) as f64 * dt, x: x_pipe, v: nv.dot(ctl.state().v_r) });
        }
    }
    let checks = vec![Check::new("max_step_gap", worst, EQUIVALENCE_TOL)];
    Ok(VerificationReport::new(Proposition::Equivalence, params, checks, excerpt))
}

/// Parameter grid and scenario settings for a full verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub masses: Vec<f64>,
    pub surface_stiffness: Vec<f64>,
    pub target_forces: Vec<f64>,
    /// Admittance stiffness used to derive `d`.
    pub stiffness: f64,
    pub damping_ratio: f64,
    /// Overrides the derived damping for every grid point.
    pub damping: Option<f64>,
    /// Initial velocity after contact loss (m/s).
    pub free_velocity: f64,
    /// Disturbance amplitude (m) and angular frequency (rad/s).
    pub amplitude: f64,
    pub omega: f64,
    /// Simulated horizon for the disturbance check (s).
    pub disturbance_duration: f64,
    /// Tangential offset of the command in the equivalence runs (m).
    pub tangent_offset: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            masses: vec![0.5, 1.0, 2.0],
            surface_stiffness: vec![100.0, 1000.0, 5000.0],
            target_forces: vec![2.0, 4.0, 8.0],
            stiffness: 50.0,
            damping_ratio: 2.0,
            damping: None,
            free_velocity: 0.1,
            amplitude: 0.005,
            omega: 2.0 * std::f64::consts::PI,
            disturbance_duration: 60.0,
            tangent_offset: 0.02,
        }
    }
}

impl VerifyConfig {
    pub fn grid(&self) -> Result<Vec<NormalDynamicsParams>> {
        if let Some(d) = self.damping {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::NonPositiveParameter { name: "d", value: d });
            }
        }
        if !(self.disturbance_duration > 0.0) {
            return Err(Error::NonPositiveParameter { name: "disturbance_duration", value: self.disturbance_duration });
        }
        let mut out = Vec::new();
        for &m in &self.masses {
            let d = match self.damping {
                Some(d) => d,
                None => compute_damping(m, self.stiffness, self.damping_ratio)?,
            };
            for &k_e in &self.surface_stiffness {
                for &f_h in &self.target_forces {
                    out.push(NormalDynamicsParams::new(m, d, k_e, f_h)?);
                }
            }
        }
        Ok(out)
    }

    fn admittance(&self, p: &NormalDynamicsParams) -> Result<AdmittanceConfig> {
        // With a damping override, pick the stiffness that reproduces it.
        let stiffness = match self.damping {
            Some(d) => (d / (2.0 * self.damping_ratio)).powi(2) / p.m,
            None => self.stiffness,
        };
        let cfg = AdmittanceConfig {
            mass: p.m,
            stiffness,
            damping_ratio: self.damping_ratio,
            enable_normal_regulation: true,
            target_force: p.f_h,
            force_deadband: 0.0,
            ..AdmittanceConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// All four checks for one grid point.
    pub fn verify_point(&self, p: &NormalDynamicsParams) -> Result<Vec<VerificationReport>> {
        let x_e = p.x_e.value(0.0);
        let t1 = SETTLING_CONSTANTS * p.contact_time_constant();
        let t2 = SETTLING_CONSTANTS * p.free_time_constant();
        let cfg = self.admittance(p)?;
        let env = SpringContact::new(p.k_e, Vec3::new(0.0, 0.0, x_e), UnitVec3::Z)?;
        let inputs = EquivalenceInputs {
            x0: Vec3::new(0.0, 0.0, x_e),
            v0: Vec3::ZERO,
            x_cmd: Vec3::new(self.tangent_offset, 0.0, x_e - 0.01),
            contact: true,
        };
        Ok(vec![
            verify_prop1(p, x_e, 0.0, t1)?,
            verify_prop2(p, self.free_velocity, t2)?,
            verify_prop3(p, self.amplitude, self.omega, self.disturbance_duration)?,
            equivalence_check(&cfg, &env, &inputs, t1, VERIFY_DT)?,
        ])
    }

    /// Runs every grid point in parallel; report order follows the grid.
    pub fn run(&self) -> Result<Vec<VerificationReport>> {
        let grid = self.grid()?;
        let per_point = grid.par_iter().map(|p| self.verify_point(p)).collect::<Result<Vec<_>>>()?;
        Ok(per_point.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nominal(k_e: f64, f_h: f64) -> NormalDynamicsParams {
        NormalDynamicsParams::new(1.0, compute_damping(1.0, 50.0, 2.0).unwrap(), k_e, f_h).unwrap()
    }

    #[test]
    fn prop1_reaches_equilibrium() {
        let p = nominal(100.0, 4.0);
        let r = verify_prop1(&p, 0.0, 0.0, 20.0 * p.contact_time_constant()).unwrap();
        assert!(r.pass, "{r:?}");
        let last = r.excerpt.last().unwrap();
        assert!((last.x + 0.04).abs() < 1e-6);
    }

    #[test]
    fn prop1_zero_force_stays_put() {
        let p = nominal(1000.0, 0.0);
        let r = verify_prop1(&p, 0.0, 0.0, 1.0).unwrap();
        assert!(r.pass);
        assert!(r.excerpt.iter().all(|s| s.x == 0.0));
    }

    #[test]
    fn prop2_velocity_limit() {
        let p = nominal(100.0, 4.0);
        assert!((-p.f_h / (2.0 * p.d) + 0.07071).abs() < 1e-5);
        let r = verify_prop2(&p, 0.1, 20.0 * p.free_time_constant()).unwrap();
        assert!(r.pass, "{r:?}");
        let rest = NormalDynamicsParams { f_h: 0.0, ..p };
        let r = verify_prop2(&rest, 0.0, 1.0).unwrap();
        assert!(r.excerpt.iter().all(|s| s.v == 0.0 && s.x == 0.0));
    }

    #[test]
    fn prop3_zero_amplitude_is_quiet() {
        let p = nominal(1000.0, 4.0);
        let r = verify_prop3(&p, 0.0, 2.0 * std::f64::consts::PI, 5.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.check("bounded_e").unwrap().measured, 0.0);
    }

    #[test]
    fn equivalence_skips_without_contact() {
        let p = nominal(1000.0, 4.0);
        let cfg = VerifyConfig::default().admittance(&p).unwrap();
        let env = SpringContact::new(1000.0, Vec3::ZERO, UnitVec3::Z).unwrap();
        let inputs = EquivalenceInputs { x0: Vec3::ZERO, v0: Vec3::ZERO, x_cmd: Vec3::ZERO, contact: false };
        let r = equivalence_check(&cfg, &env, &inputs, 1.0, VERIFY_DT).unwrap();
        assert!(r.skipped && r.pass && r.checks.is_empty());
    }

    #[test]
    fn zero_damping_rejected() {
        let cfg = VerifyConfig { damping: Some(0.0), ..Default::default() };
        assert!(matches!(cfg.grid(), Err(Error::NonPositiveParameter { name: "d", .. })));
        assert!(NormalDynamicsParams::new(1.0, 0.0, 100.0, 4.0).is_err());
    }
}
