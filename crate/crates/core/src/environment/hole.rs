use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, UnitVec3, Vec3};

use super::{surface_wrench, DisturbanceEvent, FrictionModel, SpringContact, DEFAULT_SURFACE_STIFFNESS};

pub const DEFAULT_HOLE_DEPTH: f64 = 0.025;

/// A round hole with a 45 degree entry chamfer in a flat fixture.
///
/// The pose sits at the centre of the rim; local z is the hole axis pointing
/// out of the hole. The peg is modelled by its tip point, which may move
/// `clearance` off-axis without touching the bore.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleFixture {
    base_pose: Pose,
    pose: Pose,
    pub depth: f64,
    pub clearance: f64,
    pub chamfer: f64,
    pub stiffness: f64,
    pub friction: FrictionModel,
}

impl Default for HoleFixture {
    fn default() -> Self {
        Self::new(Pose::from_position(Vec3::ZERO))
    }
}

impl HoleFixture {
    pub fn new(pose: Pose) -> Self {
        Self {
            base_pose: pose,
            pose,
            depth: DEFAULT_HOLE_DEPTH,
            clearance: 0.001,
            chamfer: 0.003,
            stiffness: DEFAULT_SURFACE_STIFFNESS,
            friction: FrictionModel { coulomb_mu: 0.2, viscous: 2.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.depth > 0.0) {
            return Err(Error::NonPositiveParameter { name: "hole depth", value: self.depth });
        }
        if !(self.clearance >= 0.0 && self.chamfer >= 0.0) {
            return Err(Error::InvalidParameter("clearance and chamfer must be >= 0".into()));
        }
        if !(self.stiffness > 0.0) {
            return Err(Error::NonPositiveParameter { name: "k_e", value: self.stiffness });
        }
        self.friction.validate()
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn base_pose(&self) -> &Pose {
        &self.base_pose
    }

    pub fn set_pose(&mut self, pose: Pose) {
        self.pose = pose;
    }

    /// Hole axis pointing out of the hole.
    pub fn axis(&self) -> UnitVec3 {
        UnitVec3::new(self.pose.orientation.rotate(Vec3::Z)).expect("rotation preserves unit length")
    }

    pub fn rim_center(&self) -> Vec3 {
        self.pose.position
    }

    pub fn bottom_center(&self) -> Vec3 {
        self.pose.position - self.axis().get() * self.depth
    }

    pub fn to_local(&self, p: Vec3) -> Vec3 {
        self.pose.orientation.inverse().rotate(p - self.pose.position)
    }

    fn local_dir_to_world(&self, d: Vec3) -> UnitVec3 {
        UnitVec3::new(self.pose.orientation.rotate(d)).expect("non-zero contact normal")
    }

    /// Depth of the tip below the rim along the axis, clamped to `[0, depth]` (mm).
    pub fn insertion_depth(&self, tip: Vec3) -> f64 {
        (-self.to_local(tip).z).clamp(0.0, self.depth) * 1000.0
    }

    /// Lateral distance of `tip` from the axis (m).
    pub fn lateral_offset(&self, tip: Vec3) -> f64 {
        let l = self.to_local(tip);
        (l.x * l.x + l.y * l.y).sqrt()
    }

    /// Contact force on the peg tip.
    ///
    /// Side contact picks the shallowest of the candidate surfaces (fixture
    /// top, chamfer cone, bore wall); the bottom adds independently.
    pub fn contact_force(&self, tip: Vec3, vel: Vec3) -> Vec3 {
        let l = self.to_local(tip);
        let r = (l.x * l.x + l.y * l.y).sqrt();
        let radial = if r > 1e-12 { Vec3::new(l.x / r, l.y / r, 0.0) } else { Vec3::X };
        let mouth = self.clearance + self.chamfer;
        let mut total = Vec3::ZERO;

        // (penetration, local normal)
        let mut side: Option<(f64, Vec3)> = None;
        let mut consider = |pen: f64, n: Vec3| {
            if pen > 0.0 && side.is_none_or(|(p, _)| pen < p) {
                side = Some((pen, n));
            }
        };
        if r >= mouth && l.z < 0.0 {
            consider(-l.z, Vec3::Z);
        }
        if r > self.clearance && r < mouth && self.chamfer > 0.0 {
            let surface = -(mouth - r);
            if l.z < surface {
                consider((surface - l.z) * FRAC_1_SQRT_2, (Vec3::Z - radial) * FRAC_1_SQRT_2);
            }
        }
        if r > self.clearance && l.z < -self.chamfer {
            consider(r - self.clearance, -radial);
        }
        if let Some((pen, n)) = side {
            let normal = self.local_dir_to_world(n);
            let rest = tip + normal.get() * pen;
            let c = SpringContact { stiffness: self.stiffness, rest_point: rest, normal };
            total += surface_wrench(&c, &self.friction, tip, vel);
        }

        if l.z < -self.depth {
            let c = SpringContact { stiffness: self.stiffness, rest_point: self.bottom_center(), normal: self.axis() };
            total += surface_wrench(&c, &self.friction, tip, vel);
        }
        total
    }

    pub fn apply_disturbance(&mut self, ev: &DisturbanceEvent, t: f64) {
        self.apply_disturbances(std::slice::from_ref(ev), t);
    }

    pub fn apply_disturbances(&mut self, events: &[DisturbanceEvent], t: f64) {
        let axis = self.base_pose.orientation.rotate(Vec3::Z);
        let mut position = self.base_pose.position;
        let mut orientation = self.base_pose.orientation;
        for ev in events {
            position += ev.translation(t, axis);
            let angle = ev.tilt_angle(t);
            if angle != 0.0 {
                let a = UnitVec3::new(ev.direction_or(Vec3::X)).unwrap_or(UnitVec3::X);
                orientation = Rotation::from_axis_angle(a, angle).compose(&orientation);
            }
        }
        self.pose = Pose::new(position, orientation);
    }
}
