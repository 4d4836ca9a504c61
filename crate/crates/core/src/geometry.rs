//! Vector, rotation, box, ray and pinhole-camera math.
//!
//! Frame convention: Y up, Z forward, X right. Positive yaw turns from +Z
//! toward +X and positive pitch looks down. Rotations are stored as Euler
//! triples in degrees and applied yaw, then pitch, then roll.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("zero-length vector has no direction")]
    ZeroLength,
}

/// A 3D vector in meters (or degrees when used as a rotation triple).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).length()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn normalized(self) -> Result<Vec3, GeometryError> {
        let len = self.length();
        if len <= f64::EPSILON || !len.is_finite() {
            return Err(GeometryError::ZeroLength);
        }
        Ok(self.scale(1.0 / len))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn abs(self) -> Vec3 {
        Vec3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn with_component(mut self, axis: usize, value: f64) -> Vec3 {
        match axis {
            0 => self.x = value,
            1 => self.y = value,
            _ => self.z = value,
        }
        self
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
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
        self.scale(s)
    }
}

pub fn deg_to_rad(d: f64) -> f64 {
    d * std::f64::consts::PI / 180.0
}

pub fn rad_to_deg(r: f64) -> f64 {
    r * 180.0 / std::f64::consts::PI
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn normalize_deg(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Maps an angle in `[0, 360)` onto `(-180, 180]`.
pub fn signed_deg(d: f64) -> f64 {
    let n = normalize_deg(d);
    if n > 180.0 {
        n - 360.0
    } else {
        n
    }
}

/// Euler rotation in degrees, each component kept in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct EulerRot {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

impl From<[f64; 3]> for EulerRot {
    fn from(v: [f64; 3]) -> Self {
        EulerRot::new(v[0], v[1], v[2])
    }
}

impl From<EulerRot> for [f64; 3] {
    fn from(r: EulerRot) -> Self {
        [r.pitch, r.yaw, r.roll]
    }
}

impl EulerRot {
    pub fn new(pitch: f64, yaw: f64, roll: f64) -> Self {
        EulerRot {
            pitch: normalize_deg(pitch),
            yaw: normalize_deg(yaw),
            roll: normalize_deg(roll),
        }
    }

    pub fn from_yaw(yaw: f64) -> Self {
        EulerRot::new(0.0, yaw, 0.0)
    }

    /// Componentwise addition of a `(pitch, yaw, roll)` delta, renormalized.
    pub fn rotated(self, delta: Vec3) -> Self {
        EulerRot::new(self.pitch + delta.x, self.yaw + delta.y, self.roll + delta.z)
    }

    pub fn signed_pitch(self) -> f64 {
        signed_deg(self.pitch)
    }

    pub fn matrix(self) -> Mat3 {
        Mat3::rot_y(self.yaw) * Mat3::rot_x(self.pitch) * Mat3::rot_z(self.roll)
    }

    pub fn forward(self) -> Vec3 {
        self.matrix().mul_vec(Vec3::Z)
    }

    pub fn as_vec(self) -> Vec3 {
        Vec3::new(self.pitch, self.yaw, self.roll)
    }
}

/// Row-major 3x3 matrix; used for orthonormal rotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn rot_y(deg: f64) -> Mat3 {
        let (s, c) = sin_cos_deg(deg);
        Mat3 {
            m: [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        }
    }

    pub fn rot_x(deg: f64) -> Mat3 {
        let (s, c) = sin_cos_deg(deg);
        Mat3 {
            m: [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        }
    }

    pub fn rot_z(deg: f64) -> Mat3 {
        let (s, c) = sin_cos_deg(deg);
        Mat3 {
            m: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.m;
        Mat3 {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn column(&self, c: usize) -> Vec3 {
        Vec3::new(self.m[0][c], self.m[1][c], self.m[2][c])
    }

    /// Inverse of [`EulerRot::matrix`] for an orthonormal rotation.
    pub fn to_euler(&self) -> EulerRot {
        let m = &self.m;
        // R = Ry Rx Rz: m[1][2] = -sin(pitch).
        let sp = (-m[1][2]).clamp(-1.0, 1.0);
        let pitch = libm::asin(sp);
        let (yaw, roll) = if libm::cos(pitch).abs() > 1e-9 {
            (libm::atan2(m[0][2], m[2][2]), libm::atan2(m[1][0], m[1][1]))
        } else {
            (libm::atan2(-m[2][0], m[0][0]), 0.0)
        };
        EulerRot::new(rad_to_deg(pitch), rad_to_deg(yaw), rad_to_deg(roll))
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        Mat3 { m: r }
    }
}

fn sin_cos_deg(deg: f64) -> (f64, f64) {
    // Exact values on the quarter turns keep cardinal poses free of drift.
    let n = normalize_deg(deg);
    if n == 0.0 {
        (0.0, 1.0)
    } else if n == 90.0 {
        (1.0, 0.0)
    } else if n == 180.0 {
        (0.0, -1.0)
    } else if n == 270.0 {
        (-1.0, 0.0)
    } else {
        libm::sincos(deg_to_rad(n))
    }
}

/// World axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Aabb { min, max }
    }

    pub fn from_center_half(center: Vec3, half: Vec3) -> Self {
        Aabb::new(center - half, center + half)
    }

    /// Enclosing box of an oriented box.
    pub fn from_oriented(center: Vec3, half: Vec3, rot: &Mat3) -> Self {
        let mut ext = Vec3::ZERO;
        for i in 0..3 {
            let row = Vec3::new(rot.m[i][0], rot.m[i][1], rot.m[i][2]);
            let e = row.abs().dot(half);
            ext = ext.with_component(i, e);
        }
        Aabb::from_center_half(center, ext)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max).scale(0.5)
    }

    pub fn half_extents(&self) -> Vec3 {
        (self.max - self.min).scale(0.5)
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x <= self.max.x
            && self.min.y <= self.max.y
            && self.min.z <= self.max.z
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn inflated(&self, by: f64) -> Aabb {
        let d = Vec3::new(by, by, by);
        Aabb::new(self.min - d, self.max + d)
    }

    /// Strict interior overlap (touching faces do not count).
    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x < o.max.x
            && self.max.x > o.min.x
            && self.min.y < o.max.y
            && self.max.y > o.min.y
            && self.min.z < o.max.z
            && self.max.z > o.min.z
    }

    pub fn overlaps_xz(&self, o: &Aabb) -> bool {
        self.min.x < o.max.x && self.max.x > o.min.x && self.min.z < o.max.z && self.max.z > o.min.z
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }

    /// The 3x3x3 lattice of corner, edge-midpoint, face-center and center points.
    pub fn lattice(&self) -> [Vec3; 27] {
        let c = self.center();
        let xs = [self.min.x, c.x, self.max.x];
        let ys = [self.min.y, c.y, self.max.y];
        let zs = [self.min.z, c.z, self.max.z];
        let mut out = [Vec3::ZERO; 27];
        let mut n = 0;
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    out[n] = Vec3::new(x, y, z);
                    n += 1;
                }
            }
        }
        out
    }
}

/// Half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Result<Self, GeometryError> {
        Ok(Ray {
            origin,
            dir: dir.normalized()?,
        })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir.scale(t)
    }
}

/// Smallest nonnegative `t` with `origin + t * dir` on or inside `b`.
///
/// Returns `Some(0.0)` when the origin is already inside the box.
pub fn ray_aabb_intersect(ray: &Ray, b: &Aabb) -> Option<f64> {
    let mut t_enter = 0.0_f64;
    let mut t_exit = f64::INFINITY;
    for axis in 0..3 {
        let o = ray.origin.component(axis);
        let d = ray.dir.component(axis);
        let lo = b.min.component(axis);
        let hi = b.max.component(axis);
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (mut t0, mut t1) = ((lo - o) * inv, (hi - o) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_enter = t_enter.max(t0);
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return None;
        }
    }
    Some(t_enter)
}

/// Angle between two vectors in degrees, in `[0, 180]`.
///
/// Uses `atan2(|a×b|, a·b)`, which stays accurate near 0 and 180 where
/// `acos` of the dot product loses half its digits.
pub fn angle_between(a: Vec3, b: Vec3) -> Result<f64, GeometryError> {
    let a = a.normalized()?;
    let b = b.normalized()?;
    Ok(rad_to_deg(libm::atan2(a.cross(b).length(), a.dot(b))))
}

/// Pinhole camera. Image `v` grows downward; `(0, 0)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub position: Vec3,
    pub rotation: EulerRot,
    pub fov_y_deg: f64,
    pub width: u32,
    pub height: u32,
}

/// Depth below which a point counts as behind the camera plane.
pub const NEAR_PLANE: f64 = 1e-3;

impl CameraModel {
    pub fn new(position: Vec3, rotation: EulerRot, fov_y_deg: f64, width: u32, height: u32) -> Self {
        debug_assert!(fov_y_deg > 0.0 && fov_y_deg < 180.0 && width > 0 && height > 0);
        CameraModel {
            position,
            rotation,
            fov_y_deg,
            width,
            height,
        }
    }

    /// Focal length in pixels: `(H/2) / tan(fov/2)`.
    pub fn focal_px(&self) -> f64 {
        (self.height as f64 / 2.0) / libm::tan(deg_to_rad(self.fov_y_deg / 2.0))
    }

    pub fn center_px(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation.forward()
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.matrix().transpose().mul_vec(p - self.position)
    }

    pub fn to_world_dir(&self, local: Vec3) -> Vec3 {
        self.rotation.matrix().mul_vec(local)
    }

    /// Projects a camera-space point with positive depth.
    pub fn project_camera_space(&self, c: Vec3) -> (f64, f64) {
        let f = self.focal_px();
        let (cx, cy) = self.center_px();
        (cx + f * c.x / c.z, cy - f * c.y / c.z)
    }

    /// World ray through pixel `(u, v)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Ray {
        let f = self.focal_px();
        let (cx, cy) = self.center_px();
        let local = Vec3::new((u - cx) / f, -(v - cy) / f, 1.0);
        Ray {
            origin: self.position,
            dir: self
                .to_world_dir(local)
                .normalized()
                .expect("pixel ray has unit z component"),
        }
    }

    pub fn in_image(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u <= self.width as f64 && v >= 0.0 && v <= self.height as f64
    }

    /// Conservative frustum test against the near and four side planes.
    pub fn box_in_frustum(&self, b: &Aabb) -> bool {
        let f = self.focal_px();
        let tx = (self.width as f64 / 2.0) / f;
        let ty = (self.height as f64 / 2.0) / f;
        let pts = b.corners().map(|c| self.to_camera(c));
        let planes: [&dyn Fn(&Vec3) -> bool; 5] = [
            &|c| c.z < NEAR_PLANE,
            &|c| c.x > tx * c.z,
            &|c| c.x < -tx * c.z,
            &|c| c.y > ty * c.z,
            &|c| c.y < -ty * c.z,
        ];
        !planes.iter().any(|outside| pts.iter().all(|p| outside(p)))
    }

    /// Screen rectangle `[ymin, xmin, ymax, xmax]` of a box, clipped to the
    /// near plane and the image. `None` when nothing lies in front of the camera
    /// or the clipped rectangle is empty.
    pub fn screen_bbox(&self, b: &Aabb) -> Option<[f64; 4]> {
        let pts = b.corners().map(|c| self.to_camera(c));
        let mut front: Vec<Vec3> = pts.iter().copied().filter(|p| p.z >= NEAR_PLANE).collect();
        if front.is_empty() {
            return None;
        }
        if front.len() < 8 {
            for (i, j) in BOX_EDGES {
                let (a, c) = (pts[i], pts[j]);
                if (a.z < NEAR_PLANE) != (c.z < NEAR_PLANE) {
                    let s = (NEAR_PLANE - a.z) / (c.z - a.z);
                    front.push(a + (c - a).scale(s));
                }
            }
        }
        let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
        let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &front {
            let (u, v) = self.project_camera_space(Vec3::new(p.x, p.y, p.z.max(NEAR_PLANE)));
            xmin = xmin.min(u);
            xmax = xmax.max(u);
            ymin = ymin.min(v);
            ymax = ymax.max(v);
        }
        let (w, h) = (self.width as f64, self.height as f64);
        let r = [ymin.clamp(0.0, h), xmin.clamp(0.0, w), ymax.clamp(0.0, h), xmax.clamp(0.0, w)];
        (r[2] > r[0] && r[3] > r[1]).then_some(r)
    }
}

/// Corner index pairs of the 12 box edges for [`Aabb::corners`] ordering.
pub const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Pinhole projection of a world point; `None` behind the camera plane.
/// The result may fall outside the image rectangle.
pub fn project_to_screen(cam: &CameraModel, p: Vec3) -> Option<(f64, f64)> {
    let c = cam.to_camera(p);
    if c.z < NEAR_PLANE {
        return None;
    }
    Some(cam.project_camera_space(c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibleEntry<Id> {
    pub id: Id,
    /// `[ymin, xmin, ymax, xmax]` in pixels.
    pub bbox: [f64; 4],
    pub distance: f64,
    pub occluded_fraction: f64,
}

/// Frustum and lattice-occlusion culling.
///
/// An instance is kept when its box meets the view frustum and at least one
/// of its 27 lattice points inside the view is reached first by the eye ray.
/// Output is sorted by id.
pub fn visible_set<Id: Copy + Ord>(cam: &CameraModel, instances: &[(Id, Aabb)]) -> Vec<VisibleEntry<Id>> {
    let candidates: Vec<&(Id, Aabb)> = instances
        .iter()
        .filter(|(_, b)| cam.box_in_frustum(b))
        .collect();
    let mut out = Vec::new();
    for (idx, &&(id, ref bx)) in candidates.iter().enumerate() {
        let Some(bbox) = cam.screen_bbox(bx) else {
            continue;
        };
        let mut in_view = 0usize;
        let mut visible = 0usize;
        for sample in bx.lattice() {
            match project_to_screen(cam, sample) {
                Some((u, v)) if cam.in_image(u, v) => {}
                _ => continue,
            }
            let Ok(ray) = Ray::new(cam.position, sample - cam.position) else {
                continue;
            };
            in_view += 1;
            let own = ray_aabb_intersect(&ray, bx).unwrap_or(ray.origin.distance(sample));
            let blocked = candidates.iter().enumerate().any(|(j, (_, other))| {
                j != idx && ray_aabb_intersect(&ray, other).is_some_and(|t| t < own - 1e-9)
            });
            if !blocked {
                visible += 1;
            }
        }
        if visible > 0 {
            out.push(VisibleEntry {
                id,
                bbox,
                distance: cam.position.distance(bx.center()),
                occluded_fraction: 1.0 - visible as f64 / in_view as f64,
            });
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}
