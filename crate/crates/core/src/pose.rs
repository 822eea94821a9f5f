//! Pose algebra for the 4-DoF arm (x, y, z, yaw) and shear-pose extraction.
//!
//! A [`Pose4`] is a rigid transform restricted to translation plus rotation
//! about the local z axis. Yaw is stored in degrees, normalized to
//! [-180, 180). Poses compose like homogeneous transforms:
//! `a.compose(&b)` applies `b` in `a`'s frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wrap an angle in degrees to [-180, 180).
pub fn wrap_deg(deg: f64) -> f64 {
    let mut a = deg.rem_euclid(360.0);
    if a >= 180.0 {
        a -= 360.0;
    }
    a
}

/// 4-DoF pose: position in mm, yaw about +z in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose4 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Degrees, normalized to [-180, 180).
    pub yaw: f64,
}

impl Pose4 {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite() && yaw.is_finite()) {
            return Err(Error::InvalidParameter {
                what: "Pose4",
                why: format!("non-finite component ({x}, {y}, {z}, {yaw})"),
            });
        }
        Ok(Self { x, y, z, yaw: wrap_deg(yaw) })
    }

    pub const fn identity() -> Self {
        Self { x: 0.0, y: 0.0, z: 0.0, yaw: 0.0 }
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Rotate a vector by this pose's yaw.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        rotate_z(self.yaw, v)
    }

    /// Map a point from this pose's frame to the parent frame.
    pub fn transform_point(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotate(p);
        [r[0] + self.x, r[1] + self.y, r[2] + self.z]
    }

    /// Map a point from the parent frame into this pose's frame.
    pub fn inverse_transform_point(&self, p: [f64; 3]) -> [f64; 3] {
        rotate_z(-self.yaw, [p[0] - self.x, p[1] - self.y, p[2] - self.z])
    }

    /// `self` then `other`: the pose of `other` expressed through `self`'s frame.
    pub fn compose(&self, other: &Pose4) -> Pose4 {
        let t = self.transform_point(other.xyz());
        Pose4 { x: t[0], y: t[1], z: t[2], yaw: wrap_deg(self.yaw + other.yaw) }
    }

    pub fn inverse(&self) -> Pose4 {
        let t = rotate_z(-self.yaw, [-self.x, -self.y, -self.z]);
        Pose4 { x: t[0], y: t[1], z: t[2], yaw: wrap_deg(-self.yaw) }
    }

    /// Pose of `self` expressed in `reference`'s frame.
    pub fn relative_to(&self, reference: &Pose4) -> Pose4 {
        reference.inverse().compose(self)
    }

    /// Translate by a delta expressed in this pose's own frame.
    pub fn offset_local(&self, delta: [f64; 3], dyaw: f64) -> Pose4 {
        let t = self.transform_point(delta);
        Pose4 { x: t[0], y: t[1], z: t[2], yaw: wrap_deg(self.yaw + dyaw) }
    }
}

fn rotate_z(yaw_deg: f64, v: [f64; 3]) -> [f64; 3] {
    let r = yaw_deg.to_radians();
    let (s, c) = r.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

/// 4-DoF shear pose accumulated since first contact: lateral (x, y),
/// vertical (z) and rotational (yaw, degrees) displacement, expressed in the
/// anchor's sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShearVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl ShearVector {
    pub const ZERO: ShearVector = ShearVector { x: 0.0, y: 0.0, z: 0.0, yaw: 0.0 };

    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self { x, y, z, yaw }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.yaw]
    }

    /// Euclidean norm of the translational part in mm.
    pub fn lateral_norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Displacement of `current` relative to `anchor`, expressed in the anchor's
/// sensor frame. The anchor is the pose at first contact of the current
/// contact episode.
pub fn compute_shear_pose(anchor: &Pose4, current: &Pose4) -> ShearVector {
    let d = rotate_z(
        -anchor.yaw,
        [current.x - anchor.x, current.y - anchor.y, current.z - anchor.z],
    );
    ShearVector { x: d[0], y: d[1], z: d[2], yaw: wrap_deg(current.yaw - anchor.yaw) }
}
