//! Task environments that turn an end-effector pose into an external wrench.
//!
//! Surfaces are unilateral linear springs: they push along the outward normal
//! and never pull. Tangential resistance is regularised Coulomb plus viscous
//! friction.

mod board;
mod disturbance;
mod door;
mod hole;

pub use board::{InkGrid, PlaneBoard, DEFAULT_INK_CELL, DEFAULT_MIN_WIPE_FORCE};
pub use disturbance::{DisturbanceEvent, DisturbanceKind};
pub use door::{DoorConstraint, DoorKind, HingedDoor};
pub use hole::{HoleFixture, DEFAULT_HOLE_DEPTH};

use serde::{Deserialize, Serialize};

use crate::controller::WrenchSample;
use crate::error::{Error, Result};
use crate::geometry::{Pose, UnitVec3, Vec3};

/// Default surface stiffness (N/m).
pub const DEFAULT_SURFACE_STIFFNESS: f64 = 1000.0;
/// Below this tangential speed Coulomb friction scales linearly (m/s).
pub const FRICTION_VELOCITY_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringContact {
    pub stiffness: f64,
    pub rest_point: Vec3,
    /// Outward surface normal.
    pub normal: UnitVec3,
}

impl SpringContact {
    pub fn new(stiffness: f64, rest_point: Vec3, normal: UnitVec3) -> Result<Self> {
        if !(stiffness > 0.0 && stiffness.is_finite()) {
            return Err(Error::NonPositiveParameter { name: "k_e", value: stiffness });
        }
        Ok(Self { stiffness, rest_point, normal })
    }

    /// Depth of `p` below the rest surface (positive inside).
    pub fn penetration(&self, p: Vec3) -> f64 {
        self.normal.get().dot(self.rest_point - p)
    }

    /// Unilateral normal force magnitude `k_e max(0, penetration)`.
    pub fn normal_force(&self, p: Vec3) -> f64 {
        self.stiffness * self.penetration(p).max(0.0)
    }

    /// Bilateral force along the normal, `k_e (x_e - x_n)`.
    pub fn bilateral_force(&self, p: Vec3) -> f64 {
        self.stiffness * self.penetration(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionModel {
    pub coulomb_mu: f64,
    /// Viscous coefficient (N s/m).
    pub viscous: f64,
}

impl Default for FrictionModel {
    fn default() -> Self {
        Self { coulomb_mu: 0.3, viscous: 2.0 }
    }
}

impl FrictionModel {
    pub fn validate(&self) -> Result<()> {
        if self.coulomb_mu >= 0.0 && self.viscous >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("friction coefficients must be >= 0".into()))
        }
    }

    /// Friction force opposing the tangential velocity `v_t`.
    pub fn force(&self, normal_force: f64, v_t: Vec3) -> Vec3 {
        let speed = v_t.norm();
        let coulomb = if speed > 0.0 {
            v_t * (self.coulomb_mu * normal_force.abs() / speed.max(FRICTION_VELOCITY_EPS))
        } else {
            Vec3::ZERO
        };
        -(coulomb + v_t * self.viscous)
    }
}

/// Normal spring force plus friction for a single point contact.
pub(crate) fn surface_wrench(contact: &SpringContact, friction: &FrictionModel, p: Vec3, vel: Vec3) -> Vec3 {
    let fn_mag = contact.normal_force(p);
    if fn_mag <= 0.0 {
        return Vec3::ZERO;
    }
    let n = contact.normal.get();
    let v_t = vel - n * n.dot(vel);
    n * fn_mag + friction.force(fn_mag, v_t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskEnvironment {
    PlaneBoard(PlaneBoard),
    HoleFixture(HoleFixture),
    HingedDoor(HingedDoor),
}

impl TaskEnvironment {
    pub fn variant_name(&self) -> &'static str {
        match self {
            TaskEnvironment::PlaneBoard(_) => "PlaneBoard",
            TaskEnvironment::HoleFixture(_) => "HoleFixture",
            TaskEnvironment::HingedDoor(_) => "HingedDoor",
        }
    }

    pub fn as_board(&self) -> Result<&PlaneBoard> {
        match self {
            TaskEnvironment::PlaneBoard(b) => Ok(b),
            other => Err(Error::WrongVariant { expected: "PlaneBoard", found: other.variant_name() }),
        }
    }

    pub fn as_board_mut(&mut self) -> Result<&mut PlaneBoard> {
        match self {
            TaskEnvironment::PlaneBoard(b) => Ok(b),
            other => Err(Error::WrongVariant { expected: "PlaneBoard", found: other.variant_name() }),
        }
    }

    pub fn as_hole(&self) -> Result<&HoleFixture> {
        match self {
            TaskEnvironment::HoleFixture(h) => Ok(h),
            other => Err(Error::WrongVariant { expected: "HoleFixture", found: other.variant_name() }),
        }
    }

    pub fn as_door(&self) -> Result<&HingedDoor> {
        match self {
            TaskEnvironment::HingedDoor(d) => Ok(d),
            other => Err(Error::WrongVariant { expected: "HingedDoor", found: other.variant_name() }),
        }
    }

    pub fn as_door_mut(&mut self) -> Result<&mut HingedDoor> {
        match self {
            TaskEnvironment::HingedDoor(d) => Ok(d),
            other => Err(Error::WrongVariant { expected: "HingedDoor", found: other.variant_name() }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TaskEnvironment::PlaneBoard(b) => b.validate(),
            TaskEnvironment::HoleFixture(h) => h.validate(),
            TaskEnvironment::HingedDoor(d) => d.validate(),
        }
    }

    /// Wrench the environment exerts on the end-effector.
    pub fn external_wrench(&self, eef: &Pose, vel: Vec3) -> WrenchSample {
        match self {
            TaskEnvironment::PlaneBoard(b) => WrenchSample::from_force(b.contact_force(eef.position, vel)),
            TaskEnvironment::HoleFixture(h) => WrenchSample::from_force(h.contact_force(eef.position, vel)),
            TaskEnvironment::HingedDoor(d) => d.grasp_wrench(eef, vel),
        }
    }

    /// Advances internal dynamics (door/handle) by `dt` given the current end-effector state.
    pub fn advance(&mut self, eef: &Pose, vel: Vec3, gripper: f64, dt: f64) {
        if let TaskEnvironment::HingedDoor(d) = self {
            d.advance(eef, vel, gripper, dt);
        }
    }

    /// Displaces the environment by a single event's profile at `t`.
    pub fn apply_disturbance(&mut self, ev: &DisturbanceEvent, t: f64) {
        match self {
            TaskEnvironment::PlaneBoard(b) => b.apply_disturbance(ev, t),
            TaskEnvironment::HoleFixture(h) => h.apply_disturbance(ev, t),
            TaskEnvironment::HingedDoor(_) => {}
        }
    }

    /// Resets displaced geometry to its base pose and applies all events at `t`.
    /// Doors are only disturbed through force pulses on the end-effector.
    pub fn apply_disturbances(&mut self, events: &[DisturbanceEvent], t: f64) {
        match self {
            TaskEnvironment::PlaneBoard(b) => b.apply_disturbances(events, t),
            TaskEnvironment::HoleFixture(h) => h.apply_disturbances(events, t),
            TaskEnvironment::HingedDoor(_) => {}
        }
    }

    pub fn latch_resistance(&self, handle_angle: f64, door_angle: f64) -> Result<Vec3> {
        Ok(self.as_door()?.latch_resistance(handle_angle, door_angle))
    }

    pub fn update_ink(&mut self, eef: &Pose, contact_active: bool, normal_force: f64) -> Result<usize> {
        Ok(self.as_board_mut()?.update_ink(eef, contact_active, normal_force))
    }

    /// Peg insertion depth below the rim (mm).
    pub fn insertion_depth(&self, eef: &Pose) -> Result<f64> {
        Ok(self.as_hole()?.insertion_depth(eef.position))
    }

    /// Remaining ink (cm).
    pub fn remaining_ink_length(&self) -> Result<f64> {
        Ok(self.as_board()?.remaining_ink_length())
    }

    /// Door opening angle (deg).
    pub fn opening_angle(&self) -> Result<f64> {
        Ok(self.as_door()?.opening_angle())
    }

    /// Contact normal (outward, the direction of the reaction force) at `eef`.
    pub fn manifold_normal(&self, eef: &Pose) -> Result<UnitVec3> {
        match self {
            TaskEnvironment::PlaneBoard(b) => Ok(b.contact.normal),
            TaskEnvironment::HoleFixture(h) => Ok(h.axis()),
            TaskEnvironment::HingedDoor(d) => d.manifold_normal(eef.position),
        }
    }
}
