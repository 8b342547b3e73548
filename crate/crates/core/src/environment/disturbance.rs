use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    Raise,
    Lower,
    Shift,
    Tilt,
    ForcePulse,
    Sinusoid,
}

/// A scripted perturbation of the environment or the end-effector.
///
/// Displacement kinds (`raise`, `lower`, `shift`, `tilt`) ramp linearly to
/// `magnitude` over `ramp` seconds and then hold: the object stays where it
/// was moved. `force_pulse` is a trapezoid that ends after `duration`.
/// `sinusoid` oscillates as `magnitude * sin(omega (t - start))` during the
/// active window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceEvent {
    pub kind: DisturbanceKind,
    /// Start time (s).
    pub start: f64,
    /// Active window length (s).
    pub duration: f64,
    /// Metres for displacements, radians for tilt, newtons for force pulses.
    pub magnitude: f64,
    /// Direction for shift/force/sinusoid, rotation axis for tilt. Defaults
    /// per kind when omitted.
    #[serde(default)]
    pub direction: Option<[f64; 3]>,
    #[serde(default)]
    pub ramp: f64,
    /// Angular frequency for sinusoids (rad/s).
    #[serde(default)]
    pub omega: f64,
}

impl DisturbanceEvent {
    pub fn new(kind: DisturbanceKind, start: f64, duration: f64, magnitude: f64, ramp: f64) -> Self {
        Self { kind, start, duration, magnitude, direction: None, ramp, omega: 0.0 }
    }

    pub fn sinusoid(start: f64, duration: f64, amplitude: f64, omega: f64, direction: Vec3) -> Self {
        Self {
            kind: DisturbanceKind::Sinusoid,
            start,
            duration,
            magnitude: amplitude,
            direction: Some(direction.to_array()),
            ramp: 0.0,
            omega,
        }
    }

    pub fn with_direction(mut self, d: Vec3) -> Self {
        self.direction = Some(d.to_array());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter(format!("disturbance duration must be > 0, got {}", self.duration)));
        }
        if !(self.ramp >= 0.0 && self.ramp <= self.duration) {
            return Err(Error::InvalidParameter(format!(
                "disturbance ramp must be in [0, duration], got {}",
                self.ramp
            )));
        }
        if !(self.start.is_finite() && self.magnitude.is_finite() && self.omega.is_finite()) {
            return Err(Error::InvalidParameter("disturbance parameters must be finite".into()));
        }
        if let Some(d) = self.direction {
            if Vec3::from_array(d).try_normalize(1e-12).is_none() {
                return Err(Error::InvalidParameter("disturbance direction must be non-zero".into()));
            }
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.start + self.duration
    }

    /// Unit direction, falling back to `default` when none was configured.
    pub fn direction_or(&self, default: Vec3) -> Vec3 {
        self.direction.and_then(|d| Vec3::from_array(d).try_normalize(1e-12)).map(|u| u.get()).unwrap_or(default)
    }

    /// Fraction of the final displacement reached at `t` (0 before start, 1 after the ramp).
    pub fn ramp_fraction(&self, t: f64) -> f64 {
        if t < self.start {
            0.0
        } else if self.ramp <= 0.0 {
            1.0
        } else {
            ((t - self.start) / self.ramp).min(1.0)
        }
    }

    /// Translation of the object at `t`, for the displacement kinds.
    pub fn translation(&self, t: f64, normal: Vec3) -> Vec3 {
        match self.kind {
            DisturbanceKind::Raise => Vec3::Z * (self.magnitude * self.ramp_fraction(t)),
            DisturbanceKind::Lower => Vec3::Z * (-self.magnitude * self.ramp_fraction(t)),
            DisturbanceKind::Shift => self.direction_or(Vec3::X) * (self.magnitude * self.ramp_fraction(t)),
            DisturbanceKind::Sinusoid => {
                if self.is_active(t) {
                    self.direction_or(normal) * (self.magnitude * (self.omega * (t - self.start)).sin())
                } else {
                    Vec3::ZERO
                }
            }
            DisturbanceKind::Tilt | DisturbanceKind::ForcePulse => Vec3::ZERO,
        }
    }

    /// Tilt angle at `t` (rad) for `Tilt` events.
    pub fn tilt_angle(&self, t: f64) -> f64 {
        match self.kind {
            DisturbanceKind::Tilt => self.magnitude * self.ramp_fraction(t),
            _ => 0.0,
        }
    }

    /// Extra force on the end-effector at `t` for `ForcePulse` events.
    pub fn force(&self, t: f64) -> Vec3 {
        if self.kind != DisturbanceKind::ForcePulse || !self.is_active(t) {
            return Vec3::ZERO;
        }
        let dir = self.direction_or(Vec3::X);
        let since = t - self.start;
        let until = self.start + self.duration - t;
        let scale = if self.ramp > 0.0 { (since.min(until) / self.ramp).min(1.0) } else { 1.0 };
        dir * (self.magnitude * scale)
    }

    /// Rest-point velocity and acceleration along the sinusoid direction.
    pub fn sinusoid_derivatives(&self, t: f64) -> (f64, f64) {
        if self.kind != DisturbanceKind::Sinusoid || !self.is_active(t) {
            return (0.0, 0.0);
        }
        let ph = self.omega * (t - self.start);
        let a = self.magnitude;
        (a * self.omega * ph.cos(), -a * self.omega * self.omega * ph.sin())
    }

    /// Disturbance input `u = -(m x_e'' + 2 d x_e')` of the error dynamics.
    pub fn disturbance_input(&self, mass: f64, damping: f64, t: f64) -> f64 {
        let (vel, acc) = self.sinusoid_derivatives(t);
        -(mass * acc + 2.0 * damping * vel)
    }
}
