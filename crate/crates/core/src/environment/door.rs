use serde::{Deserialize, Serialize};

use crate::controller::WrenchSample;
use crate::error::{Error, Result};
use crate::geometry::{rodrigues_rotate, Pose, Rotation, UnitVec3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoorKind {
    /// Snap lock released by pulling the door past a small angle.
    Microwave,
    /// Latch released by turning the handle past a threshold.
    Door,
}

/// Which circular constraint currently holds the grasped point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoorConstraint {
    Handle,
    Hinge,
}

/// Hinged panel with an optional turning handle, driven through a grasp
/// spring between the end-effector and the grip point.
#[derive(Debug, Clone, PartialEq)]
pub struct HingedDoor {
    pub kind: DoorKind,
    pub hinge_pivot: Vec3,
    pub hinge_axis: UnitVec3,
    /// Grip point with the door closed and the handle at rest.
    pub grip_point0: Vec3,
    pub grip_orientation0: Rotation,
    /// Handle pivot and axis with the door closed (door kind only).
    pub handle_pivot0: Vec3,
    pub handle_axis0: UnitVec3,

    pub door_angle: f64,
    pub door_rate: f64,
    pub handle_angle: f64,
    pub handle_rate: f64,

    pub door_inertia: f64,
    pub hinge_damping: f64,
    pub door_max: f64,
    pub handle_inertia: f64,
    pub handle_damping: f64,
    /// Return spring about the handle axis (Nm/rad) and its preload (Nm).
    pub handle_spring: f64,
    pub handle_preload: f64,
    pub handle_max: f64,
    /// Handle rotation the expert applies before pulling (rad).
    pub handle_turn: f64,

    /// Constant resisting force at the grip point while latched (N).
    pub latch_force: f64,
    /// Handle rotation that disengages the latch (rad).
    pub latch_threshold: f64,
    /// Door angle past which the latch no longer acts (rad).
    pub release_angle: f64,
    latch_engaged: bool,

    pub grasp_stiffness: f64,
    pub grasp_damping: f64,
    pub grasp_rot_stiffness: f64,
    pub capture_radius: f64,
    /// Time constant over which the fingers centre the handle after closing (s).
    pub centering_time: f64,
    grasped: bool,
    /// Residual eef-to-grip offset carried by the closing fingers.
    grasp_offset: Vec3,
}

impl HingedDoor {
    /// Microwave: vertical hinge at `pivot`, handle `radius` metres away along
    /// `+y` of the closed door, opening by rotating about `+z`.
    pub fn microwave(pivot: Vec3, yaw: f64, radius: f64) -> Self {
        let yaw_rot = Rotation::from_axis_angle(UnitVec3::Z, yaw);
        let grip = pivot + yaw_rot.rotate(Vec3::new(-0.05, radius, 0.0));
        Self {
            kind: DoorKind::Microwave,
            hinge_pivot: pivot,
            hinge_axis: UnitVec3::Z,
            grip_point0: grip,
            grip_orientation0: yaw_rot.compose(&Self::facing_gripper()),
            handle_pivot0: grip,
            handle_axis0: UnitVec3::new(yaw_rot.rotate(Vec3::X)).expect("unit"),
            door_angle: 0.0,
            door_rate: 0.0,
            handle_angle: 0.0,
            handle_rate: 0.0,
            door_inertia: 0.03,
            hinge_damping: 0.1,
            door_max: 110f64.to_radians(),
            handle_inertia: 1e-3,
            handle_damping: 0.01,
            handle_spring: 0.0,
            handle_preload: 0.0,
            handle_max: 0.0,
            handle_turn: 0.0,
            latch_force: 15.0,
            latch_threshold: 0.0,
            release_angle: 5f64.to_radians(),
            latch_engaged: true,
            grasp_stiffness: 3000.0,
            grasp_damping: 30.0,
            grasp_rot_stiffness: 5.0,
            capture_radius: 0.02,
            centering_time: 0.2,
            grasped: false,
            grasp_offset: Vec3::ZERO,
        }
    }

    /// Door with a lever handle: the handle sits `radius` from the hinge and
    /// turns downward about the door normal; the latch holds until the handle
    /// passes `latch_threshold`.
    pub fn door(pivot: Vec3, yaw: f64, radius: f64) -> Self {
        let yaw_rot = Rotation::from_axis_angle(UnitVec3::Z, yaw);
        let handle_pivot = pivot + yaw_rot.rotate(Vec3::new(-0.06, radius, 0.0));
        // lever points back toward the hinge; turning about +x moves it down
        let grip = handle_pivot + yaw_rot.rotate(Vec3::new(0.0, -0.1, 0.0));
        Self {
            kind: DoorKind::Door,
            handle_pivot0: handle_pivot,
            handle_axis0: UnitVec3::new(yaw_rot.rotate(Vec3::X)).expect("unit"),
            grip_point0: grip,
            door_inertia: 1.5,
            hinge_damping: 2.0,
            door_max: 100f64.to_radians(),
            handle_inertia: 2e-3,
            handle_damping: 0.02,
            handle_spring: 0.6,
            handle_preload: 0.1,
            handle_max: 70f64.to_radians(),
            handle_turn: 60f64.to_radians(),
            latch_force: 15.0,
            latch_threshold: 30f64.to_radians(),
            release_angle: 5f64.to_radians(),
            ..Self::microwave(pivot, yaw, radius)
        }
    }

    /// Gripper z axis along `+x` of the door frame, into the door face.
    fn facing_gripper() -> Rotation {
        Rotation::from_axis_angle(UnitVec3::Y, std::f64::consts::FRAC_PI_2)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.hinge_axis.get().norm() - 1.0).abs() > 1e-9 || (self.handle_axis0.get().norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("door axes must be unit".into()));
        }
        for (name, v) in [
            ("door_inertia", self.door_inertia),
            ("handle_inertia", self.handle_inertia),
            ("grasp_stiffness", self.grasp_stiffness),
        ] {
            if !(v > 0.0) {
                return Err(Error::NonPositiveParameter { name, value: v });
            }
        }
        if self.latch_force < 0.0 || self.hinge_damping < 0.0 {
            return Err(Error::InvalidParameter("latch force and hinge damping must be >= 0".into()));
        }
        Ok(())
    }

    pub fn is_grasped(&self) -> bool {
        self.grasped
    }

    pub fn latch_engaged(&self) -> bool {
        self.latch_engaged
    }

    /// Door opening angle in degrees.
    pub fn opening_angle(&self) -> f64 {
        self.door_angle.to_degrees()
    }

    fn door_rotation(&self) -> Rotation {
        Rotation::from_axis_angle(self.hinge_axis, self.door_angle)
    }

    pub fn handle_pivot(&self) -> Vec3 {
        rodrigues_rotate(self.handle_pivot0, self.hinge_axis, self.hinge_pivot, self.door_angle)
    }

    pub fn handle_axis(&self) -> UnitVec3 {
        UnitVec3::new(self.door_rotation().rotate(self.handle_axis0.get())).expect("unit")
    }

    /// Grip point for given door and handle angles.
    pub fn grip_point_at(&self, door_angle: f64, handle_angle: f64) -> Vec3 {
        let turned = rodrigues_rotate(self.grip_point0, self.handle_axis0, self.handle_pivot0, handle_angle);
        rodrigues_rotate(turned, self.hinge_axis, self.hinge_pivot, door_angle)
    }

    pub fn grip_orientation_at(&self, door_angle: f64, handle_angle: f64) -> Rotation {
        Rotation::from_axis_angle(self.hinge_axis, door_angle)
            .compose(&Rotation::from_axis_angle(self.handle_axis0, handle_angle))
            .compose(&self.grip_orientation0)
    }

    pub fn grip_point(&self) -> Vec3 {
        self.grip_point_at(self.door_angle, self.handle_angle)
    }

    pub fn grip_orientation(&self) -> Rotation {
        self.grip_orientation_at(self.door_angle, self.handle_angle)
    }

    /// Partial derivatives of the grip point w.r.t. door and handle angle.
    fn jacobians(&self) -> (Vec3, Vec3) {
        let p = self.grip_point();
        let j_door = self.hinge_axis.get().cross(p - self.hinge_pivot);
        let j_handle = self.handle_axis().get().cross(p - self.handle_pivot());
        (j_door, j_handle)
    }

    /// The circular constraint the grip point is currently moving on.
    pub fn active_constraint(&self) -> DoorConstraint {
        if self.kind == DoorKind::Door && self.latch_engaged {
            DoorConstraint::Handle
        } else {
            DoorConstraint::Hinge
        }
    }

    /// Radial direction from the constraint axis to `p`.
    pub fn constraint_normal(&self, constraint: DoorConstraint, p: Vec3) -> Result<UnitVec3> {
        let (pivot, axis) = match constraint {
            DoorConstraint::Hinge => (self.hinge_pivot, self.hinge_axis.get()),
            DoorConstraint::Handle => (self.handle_pivot(), self.handle_axis().get()),
        };
        let v = p - pivot;
        (v - axis * axis.dot(v)).try_normalize(1e-9).ok_or(Error::NoContactManifold)
    }

    pub fn manifold_normal(&self, p: Vec3) -> Result<UnitVec3> {
        self.constraint_normal(self.active_constraint(), p)
    }

    /// Resisting force at the grip point, along the closing direction.
    pub fn latch_resistance(&self, handle_angle: f64, door_angle: f64) -> Vec3 {
        if !self.latch_engaged || door_angle >= self.release_angle {
            return Vec3::ZERO;
        }
        if self.kind == DoorKind::Door && handle_angle >= self.latch_threshold {
            return Vec3::ZERO;
        }
        let p = self.grip_point_at(door_angle, handle_angle);
        let tangent = self.hinge_axis.get().cross(p - self.hinge_pivot);
        match tangent.try_normalize(1e-12) {
            Some(t) => -t.get() * self.latch_force,
            None => Vec3::ZERO,
        }
    }

    fn grasp_force_on_handle(&self, eef: &Pose, vel: Vec3) -> Vec3 {
        if !self.grasped {
            return Vec3::ZERO;
        }
        let (j_door, j_handle) = self.jacobians();
        let p_dot = j_door * self.door_rate + j_handle * self.handle_rate;
        (eef.position - self.grip_point() - self.grasp_offset) * self.grasp_stiffness
            + (vel - p_dot) * self.grasp_damping
    }

    /// Reaction of the grasp on the end-effector.
    pub fn grasp_wrench(&self, eef: &Pose, vel: Vec3) -> WrenchSample {
        if !self.grasped {
            return WrenchSample::ZERO;
        }
        let force = -self.grasp_force_on_handle(eef, vel);
        let err = self.grip_orientation().compose(&eef.orientation.inverse()).to_rotation_vector();
        WrenchSample { force, torque: err * self.grasp_rot_stiffness }
    }

    /// Steps door and handle dynamics with semi-implicit Euler.
    pub fn advance(&mut self, eef: &Pose, vel: Vec3, gripper: f64, dt: f64) {
        if gripper < 0.5 {
            self.grasped = false;
        } else if !self.grasped && (eef.position - self.grip_point()).norm() <= self.capture_radius {
            self.grasped = true;
            self.grasp_offset = eef.position - self.grip_point();
        }
        if self.centering_time > 0.0 {
            self.grasp_offset = self.grasp_offset * (-dt / self.centering_time).exp();
        } else {
            self.grasp_offset = Vec3::ZERO;
        }

        let f = self.grasp_force_on_handle(eef, vel);
        let (j_door, j_handle) = self.jacobians();
        let latch = self.latch_resistance(self.handle_angle, self.door_angle);

        let tau_door = f.dot(j_door) + latch.dot(j_door) - self.hinge_damping * self.door_rate;
        self.door_rate += tau_door / self.door_inertia * dt;
        self.door_angle += self.door_rate * dt;
        if self.door_angle <= 0.0 {
            self.door_angle = 0.0;
            self.door_rate = self.door_rate.max(0.0);
        } else if self.door_angle >= self.door_max {
            self.door_angle = self.door_max;
            self.door_rate = self.door_rate.min(0.0);
        }

        if self.kind == DoorKind::Door {
            let spring = self.handle_preload + self.handle_spring * self.handle_angle;
            let tau = f.dot(j_handle) - spring - self.handle_damping * self.handle_rate;
            self.handle_rate += tau / self.handle_inertia * dt;
            self.handle_angle += self.handle_rate * dt;
            if self.handle_angle <= 0.0 {
                self.handle_angle = 0.0;
                self.handle_rate = self.handle_rate.max(0.0);
            } else if self.handle_angle >= self.handle_max {
                self.handle_angle = self.handle_max;
                self.handle_rate = self.handle_rate.min(0.0);
            }
        }

        // once released the latch stays released
        let released = match self.kind {
            DoorKind::Microwave => self.door_angle >= self.release_angle,
            DoorKind::Door => self.handle_angle >= self.latch_threshold || self.door_angle >= self.release_angle,
        };
        if released {
            self.latch_engaged = false;
        }
    }

    /// Sets the articulation directly (kinematic playback).
    pub fn set_angles(&mut self, door_angle: f64, handle_angle: f64) {
        self.door_angle = door_angle;
        self.handle_angle = handle_angle;
        self.door_rate = 0.0;
        self.handle_rate = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn door_latch_examples() {
        let d = HingedDoor::door(Vec3::ZERO, 0.0, 0.7);
        assert_eq!(d.latch_resistance(40f64.to_radians(), 0.0), Vec3::ZERO);
        let f = d.latch_resistance(0.0, 0.0);
        assert!((f.norm() - 15.0).abs() < 1e-12);
        // closing direction is opposite to the opening tangent
        let p = d.grip_point();
        assert!(f.dot(d.hinge_axis.get().cross(p - d.hinge_pivot)) < 0.0);
    }

    #[test]
    fn microwave_snap_lock() {
        let m = HingedDoor::microwave(Vec3::ZERO, 0.0, 0.3);
        assert!((m.latch_resistance(0.0, 0.0).norm() - 15.0).abs() < 1e-12);
        assert_eq!(m.latch_resistance(0.0, 6f64.to_radians()), Vec3::ZERO);
    }

    #[test]
    fn closed_door_reads_zero() {
        let m = HingedDoor::microwave(Vec3::ZERO, 0.3, 0.3);
        assert_eq!(m.opening_angle(), 0.0);
        let mut m = m;
        m.set_angles(60f64.to_radians(), 0.0);
        assert!((m.opening_angle() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn latch_hysteresis() {
        let mut m = HingedDoor::microwave(Vec3::ZERO, 0.0, 0.3);
        let pose = Pose::new(m.grip_point(), m.grip_orientation());
        m.set_angles(6f64.to_radians(), 0.0);
        m.advance(&pose, Vec3::ZERO, 0.0, 1e-3);
        assert!(!m.latch_engaged());
        m.set_angles(0.0, 0.0);
        assert_eq!(m.latch_resistance(0.0, 0.0), Vec3::ZERO);
    }

    #[test]
    fn normal_is_radial() {
        let mut d = HingedDoor::microwave(Vec3::ZERO, 0.0, 0.3);
        for deg in [0.0, 20.0, 45.0, 80.0] {
            d.set_angles(f64::to_radians(deg), 0.0);
            let p = d.grip_point();
            let n = d.manifold_normal(p).unwrap().get();
            let tangent = d.hinge_axis.get().cross(p - d.hinge_pivot);
            assert!(n.dot(tangent).abs() < 1e-12);
            assert!(n.dot(d.hinge_axis.get()).abs() < 1e-12);
        }
    }

    #[test]
    fn pulling_opens_after_snap() {
        let mut m = HingedDoor::microwave(Vec3::ZERO, 0.0, 0.3);
        let q = m.grip_orientation();
        let mut target = m.grip_point();
        m.advance(&Pose::new(target, q), Vec3::ZERO, 1.0, 1e-3);
        assert!(m.is_grasped());
        // drag the end-effector along the opening arc
        for i in 0..2000 {
            let a = (i as f64 / 2000.0) * 60f64.to_radians();
            target = rodrigues_rotate(m.grip_point0, m.hinge_axis, m.hinge_pivot, a);
            m.advance(&Pose::new(target, q), Vec3::ZERO, 1.0, 1e-3);
        }
        for _ in 0..500 {
            m.advance(&Pose::new(target, q), Vec3::ZERO, 1.0, 1e-3);
        }
        assert!(m.opening_angle() > 55.0, "{}", m.opening_angle());
        assert!(!m.latch_engaged());
    }
}
