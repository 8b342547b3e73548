//! Vector, rotation and pose primitives shared by the controller, the
//! environments and the planners.
//!
//! Everything here is a plain `Copy` value; there is no interior state.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Minimum length of `x_cmd - x_r` before a tangent direction is defined (m).
pub const EPS_POS: f64 = 1e-6;
/// Minimum norm of the projected motion direction.
pub const EPS_PROJ: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector along `self`, or `None` if the norm is below `eps`.
    pub fn try_normalize(self, eps: f64) -> Option<UnitVec3> {
        let n = self.norm();
        if n <= eps || !n.is_finite() {
            None
        } else {
            Some(UnitVec3(self / n))
        }
    }

    pub fn lerp(self, o: Vec3, s: f64) -> Vec3 {
        self + (o - self) * s
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// A direction; norm is 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::X);
    pub const Y: UnitVec3 = UnitVec3(Vec3::Y);
    pub const Z: UnitVec3 = UnitVec3(Vec3::Z);

    pub fn new(v: Vec3) -> Result<Self> {
        v.try_normalize(1e-12).ok_or(Error::DegenerateInput("zero-length direction"))
    }

    /// Wraps `v` without renormalising. The caller guarantees unit norm.
    pub(crate) fn new_unchecked(v: Vec3) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-9);
        UnitVec3(v)
    }

    pub fn get(self) -> Vec3 {
        self.0
    }
}

impl std::ops::Neg for UnitVec3 {
    type Output = UnitVec3;

    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(u: UnitVec3) -> Vec3 {
        u.0
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn scaled_identity(s: f64) -> Mat3 {
        Mat3([[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]])
    }

    pub fn outer(a: Vec3, b: Vec3) -> Mat3 {
        let (a, b) = (a.to_array(), b.to_array());
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i] * b[j];
            }
        }
        Mat3(m)
    }

    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }

    pub fn frobenius_distance(&self, o: &Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d = self.0[i][j] - o.0[i][j];
                s += d * d;
            }
        }
        s.sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let m = &self.0;
        (m[0][1] - m[1][0]).abs() <= tol && (m[0][2] - m[2][0]).abs() <= tol && (m[1][2] - m[2][1]).abs() <= tol
    }

    /// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi
    /// rotations; exact to rounding even for repeated eigenvalues).
    pub fn symmetric_eigenvalues(&self) -> [f64; 3] {
        let mut a = self.0;
        for _ in 0..32 {
            let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
            let diag = a[0][0].powi(2) + a[1][1].powi(2) + a[2][2].powi(2);
            if off <= f64::EPSILON.powi(2) * diag || off == 0.0 {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (kp, kq) = (row[p], row[q]);
                    row[p] = c * kp - s * kq;
                    row[q] = s * kp + c * kq;
                }
                let (rp, rq) = (a[p], a[q]);
                a[p] = std::array::from_fn(|k| c * rp[k] - s * rq[k]);
                a[q] = std::array::from_fn(|k| s * rp[k] + c * rq[k]);
            }
        }
        let mut ev = [a[0][0], a[1][1], a[2][2]];
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut r = self.0;
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += o.0[i][j];
            }
        }
        Mat3(r)
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        let mut r = self.0;
        r.iter_mut().flatten().for_each(|v| *v *= s);
        Mat3(r)
    }
}

/// Unit quaternion, canonicalised to `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalises and canonicalises the sign. Fails on a zero or non-finite quaternion.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 1e-12) {
            return Err(Error::DegenerateInput("zero quaternion"));
        }
        Ok(Self::canonical(w / n, x / n, y / n, z / n))
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        if w < 0.0 {
            Rotation { w: -w, x: -x, y: -y, z: -z }
        } else {
            Rotation { w, x, y, z }
        }
    }

    fn renormalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self::canonical(w / n, x / n, y / n, z / n)
    }

    pub fn wxyz(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: UnitVec3, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis.get();
        Self::renormalized(c, a.x * s, a.y * s, a.z * s)
    }

    /// Exponential map of a rotation vector (axis * angle).
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            // first-order expansion keeps tiny increments exact to rounding
            return Self::renormalized(1.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z);
        }
        Self::from_axis_angle(UnitVec3::new_unchecked(v / angle), angle)
    }

    /// Logarithm map: rotation vector with angle in `[0, pi]`.
    pub fn to_rotation_vector(&self) -> Vec3 {
        let v = Vec3::new(self.x, self.y, self.z);
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(self.w);
        v * (angle / s)
    }

    pub fn angle(&self) -> f64 {
        self.to_rotation_vector().norm()
    }

    pub fn inverse(&self) -> Rotation {
        Rotation { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self * o` (apply `o` first).
    pub fn compose(&self, o: &Rotation) -> Rotation {
        let (a, b) = (self, o);
        Self::renormalized(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        self.to_matrix().mul_vec(v)
    }

    pub fn to_matrix(&self) -> Mat3 {
        let Rotation { w, x, y, z } = *self;
        Mat3([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }

    /// Converts an orthonormal matrix (Shepperd's method).
    pub fn from_matrix(m: &Mat3) -> Rotation {
        let m = &m.0;
        let tr = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z);
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[2][1] - m[1][2]) / s;
            y = (m[0][2] - m[2][0]) / s;
            z = (m[1][0] - m[0][1]) / s;
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            w = (m[2][1] - m[1][2]) / s;
            x = 0.25 * s;
            y = (m[0][1] + m[1][0]) / s;
            z = (m[0][2] + m[2][0]) / s;
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            w = (m[0][2] - m[2][0]) / s;
            x = (m[0][1] + m[1][0]) / s;
            y = 0.25 * s;
            z = (m[1][2] + m[2][1]) / s;
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            w = (m[1][0] - m[0][1]) / s;
            x = (m[0][2] + m[2][0]) / s;
            y = (m[1][2] + m[2][1]) / s;
            z = 0.25 * s;
        }
        Self::renormalized(w, x, y, z)
    }

    /// Shortest-arc spherical interpolation.
    pub fn slerp(&self, o: &Rotation, s: f64) -> Rotation {
        let mut b = [o.w, o.x, o.y, o.z];
        let a = [self.w, self.x, self.y, self.z];
        let mut dot: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
        if dot < 0.0 {
            b.iter_mut().for_each(|v| *v = -*v);
            dot = -dot;
        }
        let (ka, kb) = if dot > 1.0 - 1e-12 {
            (1.0 - s, s)
        } else {
            let theta = dot.min(1.0).acos();
            let st = theta.sin();
            (((1.0 - s) * theta).sin() / st, (s * theta).sin() / st)
        };
        Self::renormalized(ka * a[0] + kb * b[0], ka * a[1] + kb * b[1], ka * a[2] + kb * b[2], ka * a[3] + kb * b[3])
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// First two columns of a rotation matrix, column-major: `(c0, c1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub fn columns(&self) -> (Vec3, Vec3) {
        let a = &self.0;
        (Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]))
    }
}

pub fn rot6d_encode(r: &Rotation) -> Rot6D {
    let m = r.to_matrix();
    let (c0, c1) = (m.column(0), m.column(1));
    Rot6D([c0.x, c0.y, c0.z, c1.x, c1.y, c1.z])
}

/// Gram-Schmidt on the two columns, third column by cross product.
pub fn rot6d_decode(v: &Rot6D) -> Result<Rotation> {
    let (a, b) = v.columns();
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::DegenerateInput("non-finite 6D rotation"));
    }
    let e0 = a.try_normalize(1e-6).ok_or(Error::DegenerateInput("first 6D column near zero"))?.get();
    let e1 = (b - e0 * e0.dot(b)).try_normalize(1e-6).ok_or(Error::DegenerateInput("6D columns parallel"))?.get();
    let e2 = e0.cross(e1);
    Ok(Rotation::from_matrix(&Mat3::from_columns(e0, e1, e2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Rotation,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Rotation) -> Self {
        Self { position, orientation }
    }

    pub fn from_position(position: Vec3) -> Self {
        Self { position, orientation: Rotation::IDENTITY }
    }
}

/// Rotates `p` by `angle` about the line through `pivot` along `axis`.
pub fn rodrigues_rotate(p: Vec3, axis: UnitVec3, pivot: Vec3, angle: f64) -> Vec3 {
    let k = axis.get();
    let v = p - pivot;
    let (s, c) = angle.sin_cos();
    let rotated = v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c));
    pivot + rotated
}

/// Motion direction `x_cmd - x_r` projected onto the plane orthogonal to `n`.
pub fn tangent_direction(n: UnitVec3, x_cmd: Vec3, x_r: Vec3) -> Result<UnitVec3> {
    let n = n.get();
    let v = (x_cmd - x_r).try_normalize(EPS_POS).ok_or(Error::DegenerateDirection)?.get();
    let proj = v - n * n.dot(v);
    let t = proj.try_normalize(EPS_PROJ).ok_or(Error::DegenerateDirection)?.get();
    // one re-projection pass removes the O(eps) residual along n
    let t = (t - n * n.dot(t)).try_normalize(EPS_PROJ).ok_or(Error::DegenerateDirection)?;
    Ok(t)
}

/// Linear blend of positions, slerp of orientations. `s` is clamped to `[0, 1]`.
pub fn interpolate_pose(a: &Pose, b: &Pose, s: f64) -> Pose {
    let s = s.clamp(0.0, 1.0);
    if s == 0.0 {
        return *a;
    }
    if s == 1.0 {
        return *b;
    }
    Pose { position: a.position.lerp(b.position, s), orientation: a.orientation.slerp(&b.orientation, s) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn rot6d_identity_and_quarter_turn() {
        assert_eq!(rot6d_encode(&Rotation::IDENTITY).0, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        // Rz(90) = [[0,-1,0],[1,0,0],[0,0,1]]: columns (0,1,0), (-1,0,0)
        let r = Rotation::from_axis_angle(UnitVec3::Z, FRAC_PI_2);
        let e = rot6d_encode(&r).0;
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rot6d_decode_examples() {
        let id = Rotation::IDENTITY.to_matrix();
        for v in [[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], [2.0, 0.0, 0.0, 0.0, 3.0, 0.0], [1.0, 0.0, 0.0, 1.0, 1.0, 0.0]] {
            let r = rot6d_decode(&Rot6D(v)).unwrap();
            assert!(r.to_matrix().frobenius_distance(&id) < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn rot6d_decode_rejects_degenerate() {
        assert!(rot6d_decode(&Rot6D([0.0; 6])).is_err());
        assert!(rot6d_decode(&Rot6D([1.0, 0.0, 0.0, 2.0, 0.0, 0.0])).is_err());
        assert!(rot6d_decode(&Rot6D([1e-9, 0.0, 0.0, 0.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn rodrigues_examples() {
        let p = rodrigues_rotate(Vec3::X, UnitVec3::Z, Vec3::ZERO, FRAC_PI_2);
        assert!(close(p, Vec3::Y, 1e-12));
        let p0 = Vec3::new(0.3, -1.2, 4.0);
        assert!(close(rodrigues_rotate(p0, UnitVec3::Y, Vec3::X, 0.0), p0, 1e-15));
        let p = rodrigues_rotate(Vec3::new(2.0, 0.0, 0.0), UnitVec3::Z, Vec3::X, PI);
        assert!(close(p, Vec3::ZERO, 1e-12));
    }

    #[test]
    fn tangent_examples() {
        let t = tangent_direction(UnitVec3::Z, Vec3::new(1.0, 0.0, 1.0), Vec3::ZERO).unwrap();
        assert!(close(t.get(), Vec3::X, 1e-12));
        assert!(matches!(tangent_direction(UnitVec3::Z, Vec3::Z, Vec3::ZERO), Err(Error::DegenerateDirection)));
        let t = tangent_direction(UnitVec3::Y, Vec3::new(3.0, 4.0, 0.0), Vec3::ZERO).unwrap();
        assert!(close(t.get(), Vec3::X, 1e-12));
        // too short a motion
        assert!(tangent_direction(UnitVec3::Z, Vec3::new(1e-7, 0.0, 0.0), Vec3::ZERO).is_err());
    }

    #[test]
    fn interpolate_examples() {
        let a = Pose::from_position(Vec3::ZERO);
        let b = Pose::new(Vec3::X, Rotation::from_axis_angle(UnitVec3::Z, FRAC_PI_2));
        assert_eq!(interpolate_pose(&a, &b, 0.0), a);
        assert_eq!(interpolate_pose(&a, &b, 1.0), b);
        let mid = interpolate_pose(&a, &b, 0.5);
        assert!(close(mid.position, Vec3::new(0.5, 0.0, 0.0), 1e-15));
        let expected = Rotation::from_axis_angle(UnitVec3::Z, FRAC_PI_4);
        assert!(mid.orientation.to_matrix().frobenius_distance(&expected.to_matrix()) < 1e-12);
    }

    #[test]
    fn slerp_takes_short_arc() {
        let a = Rotation::from_axis_angle(UnitVec3::Z, 170f64.to_radians());
        let b = Rotation::from_axis_angle(UnitVec3::Z, -170f64.to_radians());
        let mid = a.slerp(&b, 0.5);
        assert!((mid.angle() - PI).abs() < 1e-9);
    }

    #[test]
    fn symmetric_eigenvalues_rank_one_update() {
        let t = Vec3::new(1.0, 2.0, -0.5).try_normalize(0.0).unwrap().get();
        let k = Mat3::scaled_identity(50.0) + Mat3::outer(t, t) * 150.0;
        let ev = k.symmetric_eigenvalues();
        assert!((ev[0] - 50.0).abs() < 1e-9);
        assert!((ev[1] - 50.0).abs() < 1e-9);
        assert!((ev[2] - 200.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_vector_round_trip() {
        let v = Vec3::new(0.2, -0.4, 1.1);
        let r = Rotation::from_rotation_vector(v);
        assert!(close(r.to_rotation_vector(), v, 1e-12));
        assert_eq!(Rotation::IDENTITY.to_rotation_vector(), Vec3::ZERO);
    }
}
