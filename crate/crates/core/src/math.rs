//! Small fixed-size vector and rigid-transform types.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

pub type V3 = Vec3<f64>;

impl<S: Scalar> Vec3<S> {
    pub const fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn from_array(a: [S; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [S; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> S {
        self.dot(self).sqrt()
    }

    /// Unit vector, or zero for a zero input.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > S::zero() {
            self * (S::one() / n)
        } else {
            Self::zero()
        }
    }

    pub fn min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn axis(self, i: usize) -> S {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn cast<T: Scalar>(self) -> Vec3<T> {
        let c = |v: S| T::lit(v.to_f64().unwrap_or(f64::NAN));
        Vec3::new(c(self.x), c(self.y), c(self.z))
    }

    /// Mirror of `self` about the unit vector `n`.
    pub fn reflect(self, n: Self) -> Self {
        n * (S::lit(2.0) * self.dot(n)) - self
    }
}

impl<S: Scalar> Add for Vec3<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Scalar> AddAssign for Vec3<S> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Scalar> Sub for Vec3<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<S: Scalar> Neg for Vec3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<S: Scalar> Mul<S> for Vec3<S> {
    type Output = Self;
    fn mul(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn rot_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// `Rz(c) * Ry(b) * Rx(a)` for angles `[a, b, c]`.
    pub fn from_euler(e: [f64; 3]) -> Self {
        Self::rot_z(e[2]) * Self::rot_y(e[1]) * Self::rot_x(e[0])
    }

    /// Rotation taking +y onto the unit vector `dir` along the shortest arc.
    pub fn align_y(dir: V3) -> Self {
        let y = V3::new(0.0, 1.0, 0.0);
        let d = dir.normalized();
        let axis = y.cross(d);
        let s = axis.norm();
        let c = y.dot(d);
        if s < 1e-12 {
            return if c > 0.0 { Self::IDENTITY } else { Self::rot_x(std::f64::consts::PI) };
        }
        Self::axis_angle(axis * (1.0 / s), s.atan2(c))
    }

    pub fn axis_angle(k: V3, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Mat3([
            [t * k.x * k.x + c, t * k.x * k.y - s * k.z, t * k.x * k.z + s * k.y],
            [t * k.x * k.y + s * k.z, t * k.y * k.y + c, t * k.y * k.z - s * k.x],
            [t * k.x * k.z - s * k.y, t * k.y * k.z + s * k.x, t * k.z * k.z + c],
        ])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat3([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn apply(&self, v: V3) -> V3 {
        let m = &self.0;
        V3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }
}

/// `p -> rot * p + trans`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rigid {
    pub rot: Mat3,
    pub trans: V3,
}

impl Default for Rigid {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rigid {
    pub const IDENTITY: Rigid = Rigid {
        rot: Mat3::IDENTITY,
        trans: Vec3 { x: 0.0, y: 0.0, z: 0.0 },
    };

    pub fn new(rot: Mat3, trans: V3) -> Self {
        Self { rot, trans }
    }

    pub fn translation(t: V3) -> Self {
        Self::new(Mat3::IDENTITY, t)
    }

    pub fn point(&self, p: V3) -> V3 {
        self.rot.apply(p) + self.trans
    }

    pub fn vector(&self, v: V3) -> V3 {
        self.rot.apply(v)
    }

    /// `self ∘ o`: apply `o` first.
    pub fn compose(&self, o: &Rigid) -> Rigid {
        Rigid::new(self.rot * o.rot, self.rot.apply(o.trans) + self.trans)
    }

    pub fn inverse(&self) -> Rigid {
        let rt = self.rot.transpose();
        Rigid::new(rt, -rt.apply(self.trans))
    }
}

/// Affine 3x4 matrix that need not be rigid (blended skinning transforms).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Affine {
    pub m: [[f64; 4]; 3],
}

impl Affine {
    pub fn from_rigid(r: &Rigid) -> Self {
        let mut m = [[0.0; 4]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[..3].copy_from_slice(&r.rot.0[i]);
            row[3] = r.trans.axis(i);
        }
        Self { m }
    }

    pub fn add_scaled(&mut self, o: &Affine, w: f64) {
        for (a, b) in self.m.iter_mut().flatten().zip(o.m.iter().flatten()) {
            *a += w * b;
        }
    }

    pub fn point(&self, p: V3) -> V3 {
        let r = |i: usize| self.m[i][0] * p.x + self.m[i][1] * p.y + self.m[i][2] * p.z + self.m[i][3];
        V3::new(r(0), r(1), r(2))
    }

    pub fn vector(&self, v: V3) -> V3 {
        let r = |i: usize| self.m[i][0] * v.x + self.m[i][1] * v.y + self.m[i][2] * v.z;
        V3::new(r(0), r(1), r(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: V3, b: V3) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn rigid_inverse_roundtrip() {
        let r = Rigid::new(Mat3::from_euler([0.3, -1.1, 2.0]), V3::new(1.0, 2.0, -3.0));
        let p = V3::new(0.4, -0.2, 5.0);
        assert!(close(r.inverse().point(r.point(p)), p));
        assert!(close(r.compose(&r.inverse()).point(p), p));
    }

    #[test]
    fn align_y_maps_up_to_target() {
        for d in [V3::new(1.0, 0.0, 0.0), V3::new(0.0, -1.0, 0.0), V3::new(0.3, 0.4, -0.5)] {
            let m = Mat3::align_y(d);
            assert!(close(m.apply(V3::new(0.0, 1.0, 0.0)), d.normalized()));
        }
    }

    #[test]
    fn rot_z_quarter_turn() {
        let v = Mat3::rot_z(std::f64::consts::FRAC_PI_2).apply(V3::new(1.0, 0.0, 0.0));
        assert!(close(v, V3::new(0.0, 1.0, 0.0)));
    }
}
