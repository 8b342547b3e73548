use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, UnitVec3, Vec3};

use super::{surface_wrench, DisturbanceEvent, FrictionModel, SpringContact, DEFAULT_SURFACE_STIFFNESS};

/// Default ink cell edge (m).
pub const DEFAULT_INK_CELL: f64 = 0.005;
/// Minimum normal force for the eraser to remove ink (N).
pub const DEFAULT_MIN_WIPE_FORCE: f64 = 1.0;

/// Boolean ink mask over the board, row-major with `cols` along the board's
/// local x axis. Cell `(i, j)` has its centre at
/// `(-sx/2 + (i + 0.5) c, -sy/2 + (j + 0.5) c)` in board coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct InkGrid {
    cols: usize,
    rows: usize,
    cell: f64,
    cells: Vec<bool>,
}

impl InkGrid {
    /// A clean grid covering `size` exactly; fails if `size` is not a whole
    /// number of cells.
    pub fn new(size: (f64, f64), cell: f64) -> Result<Self> {
        if !(cell > 0.0) {
            return Err(Error::NonPositiveParameter { name: "ink cell size", value: cell });
        }
        let fit = |len: f64| -> Result<usize> {
            let n = (len / cell).round();
            if n < 1.0 || (n * cell - len).abs() > 1e-9 {
                Err(Error::InvalidParameter(format!("board extent {len} m is not a multiple of the ink cell {cell} m")))
            } else {
                Ok(n as usize)
            }
        };
        let (cols, rows) = (fit(size.0)?, fit(size.1)?);
        Ok(Self { cols, rows, cell, cells: vec![false; cols * rows] })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn is_inked(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.cols + i]
    }

    pub fn set(&mut self, i: usize, j: usize, inked: bool) {
        self.cells[j * self.cols + i] = inked;
    }

    pub fn inked_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let hx = 0.5 * self.cols as f64 * self.cell;
        let hy = 0.5 * self.rows as f64 * self.cell;
        (-hx + (i as f64 + 0.5) * self.cell, -hy + (j as f64 + 0.5) * self.cell)
    }

    /// Cell containing board-local point `(u, v)`, if on the board.
    pub fn cell_at(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let hx = 0.5 * self.cols as f64 * self.cell;
        let hy = 0.5 * self.rows as f64 * self.cell;
        let fi = ((u + hx) / self.cell).floor();
        let fj = ((v + hy) / self.cell).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.cols as f64 || fj >= self.rows as f64 {
            None
        } else {
            Some((fi as usize, fj as usize))
        }
    }

    /// Inks every cell the polyline passes through.
    pub fn draw_stroke(&mut self, points: &[(f64, f64)]) {
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            let steps = ((len / (0.25 * self.cell)).ceil() as usize).max(1);
            for k in 0..=steps {
                let s = k as f64 / steps as f64;
                if let Some((i, j)) = self.cell_at(a.0 + (b.0 - a.0) * s, a.1 + (b.1 - a.1) * s) {
                    self.set(i, j, true);
                }
            }
        }
        if let [only] = points {
            if let Some((i, j)) = self.cell_at(only.0, only.1) {
                self.set(i, j, true);
            }
        }
    }

    /// Board-local bounding box of inked cell centres: `(u_min, u_max, v_min, v_max)`.
    pub fn inked_bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let mut bounds: Option<(f64, f64, f64, f64)> = None;
        for j in 0..self.rows {
            for i in 0..self.cols {
                if self.is_inked(i, j) {
                    let (u, v) = self.cell_center(i, j);
                    bounds = Some(match bounds {
                        None => (u, u, v, v),
                        Some((a, b, c, d)) => (a.min(u), b.max(u), c.min(v), d.max(v)),
                    });
                }
            }
        }
        bounds
    }

    /// Clears cells whose centres lie inside the axis-aligned rectangle
    /// centred at `(u, v)` with half extents `(hu, hv)`. Returns cells cleared.
    pub fn wipe_rect(&mut self, u: f64, v: f64, hu: f64, hv: f64) -> usize {
        const EPS: f64 = 1e-9;
        let hx = 0.5 * self.cols as f64 * self.cell;
        let hy = 0.5 * self.rows as f64 * self.cell;
        // candidate index range, widened by one cell and filtered exactly below
        let range = |c: f64, h: f64, half: f64, n: usize| {
            let lo = ((c - h + half) / self.cell - 1.5).floor().max(0.0);
            let hi = ((c + h + half) / self.cell + 0.5).ceil().min(n as f64);
            (lo as usize, (hi.max(lo)) as usize)
        };
        let (i0, i1) = range(u, hu, hx, self.cols);
        let (j0, j1) = range(v, hv, hy, self.rows);
        let mut cleared = 0;
        for j in j0..j1 {
            let (_, cv) = self.cell_center(0, j);
            if (cv - v).abs() > hv + EPS {
                continue;
            }
            for i in i0..i1 {
                let (cu, _) = self.cell_center(i, j);
                if (cu - u).abs() <= hu + EPS && self.is_inked(i, j) {
                    self.set(i, j, false);
                    cleared += 1;
                }
            }
        }
        cleared
    }
}

/// Flat whiteboard. The pose is the centre of the writing surface; its local
/// z axis is the outward normal.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneBoard {
    base_pose: Pose,
    pose: Pose,
    /// Extent along local x and y (m).
    pub size: (f64, f64),
    pub contact: SpringContact,
    pub friction: FrictionModel,
    pub ink: InkGrid,
    /// Eraser footprint: length along local x, width along local y (m).
    pub eraser: (f64, f64),
    pub min_wipe_force: f64,
}

impl Default for PlaneBoard {
    fn default() -> Self {
        Self::new(
            Pose::from_position(Vec3::ZERO),
            (0.3, 0.2),
            DEFAULT_SURFACE_STIFFNESS,
            FrictionModel::default(),
            DEFAULT_INK_CELL,
        )
        .expect("default board geometry is valid")
    }
}

impl PlaneBoard {
    pub fn new(pose: Pose, size: (f64, f64), stiffness: f64, friction: FrictionModel, ink_cell: f64) -> Result<Self> {
        let contact = SpringContact::new(stiffness, pose.position, Self::normal_of(&pose))?;
        Ok(Self {
            base_pose: pose,
            pose,
            size,
            contact,
            friction,
            ink: InkGrid::new(size, ink_cell)?,
            eraser: (0.03, 0.02),
            min_wipe_force: DEFAULT_MIN_WIPE_FORCE,
        })
    }

    fn normal_of(pose: &Pose) -> UnitVec3 {
        UnitVec3::new(pose.orientation.rotate(Vec3::Z)).expect("rotation preserves unit length")
    }

    pub fn validate(&self) -> Result<()> {
        self.friction.validate()?;
        if !(self.eraser.0 > 0.0 && self.eraser.1 > 0.0) {
            return Err(Error::InvalidParameter("eraser footprint must be positive".into()));
        }
        if self.min_wipe_force < 0.0 {
            return Err(Error::InvalidParameter("min wipe force must be >= 0".into()));
        }
        Ok(())
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn base_pose(&self) -> &Pose {
        &self.base_pose
    }

    /// Moves the board and keeps the spring rest point and normal in sync.
    pub fn set_pose(&mut self, pose: Pose) {
        self.pose = pose;
        self.contact.rest_point = pose.position;
        self.contact.normal = Self::normal_of(&pose);
    }

    /// Board-local coordinates `(u, v, height above surface)` of a world point.
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        self.pose.orientation.inverse().rotate(p - self.pose.position)
    }

    pub fn to_world(&self, local: Vec3) -> Vec3 {
        self.pose.position + self.pose.orientation.rotate(local)
    }

    pub fn on_board(&self, p: Vec3) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= 0.5 * self.size.0 && l.y.abs() <= 0.5 * self.size.1
    }

    pub fn contact_force(&self, p: Vec3, vel: Vec3) -> Vec3 {
        if !self.on_board(p) {
            return Vec3::ZERO;
        }
        surface_wrench(&self.contact, &self.friction, p, vel)
    }

    /// Clears ink under the eraser when pressed with at least `min_wipe_force`.
    pub fn update_ink(&mut self, eef: &Pose, contact_active: bool, normal_force: f64) -> usize {
        if !contact_active || normal_force < self.min_wipe_force {
            return 0;
        }
        let l = self.to_local(eef.position);
        self.ink.wipe_rect(l.x, l.y, 0.5 * self.eraser.0, 0.5 * self.eraser.1)
    }

    /// Remaining ink as stroke length (cm).
    pub fn remaining_ink_length(&self) -> f64 {
        self.ink.inked_count() as f64 * self.ink.cell_size() * 100.0
    }

    pub fn apply_disturbance(&mut self, ev: &DisturbanceEvent, t: f64) {
        self.apply_disturbances(std::slice::from_ref(ev), t);
    }

    /// Resets to the base pose and applies every event's displacement at `t`.
    pub fn apply_disturbances(&mut self, events: &[DisturbanceEvent], t: f64) {
        let base_normal = Self::normal_of(&self.base_pose).get();
        let mut position = self.base_pose.position;
        let mut orientation = self.base_pose.orientation;
        for ev in events {
            position += ev.translation(t, base_normal);
            let angle = ev.tilt_angle(t);
            if angle != 0.0 {
                let axis = ev.direction_or(self.base_pose.orientation.rotate(Vec3::X));
                let axis = UnitVec3::new(axis).unwrap_or(UnitVec3::X);
                orientation = Rotation::from_axis_angle(axis, angle).compose(&orientation);
            }
        }
        self.set_pose(Pose::new(position, orientation));
    }
}
