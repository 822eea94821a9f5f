//! Penetration-depth rendering for the hemispherical sensor tip.
//!
//! The sensor is modeled as a downward-pointing hemispherical tip. Each pixel
//! of the square sensing aperture maps to the tip surface point directly
//! below it; its depth is the penetration of that point into the object.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose4;
use crate::shape::{sdf_eval, ObjectShape};

/// Sensor tip and imaging geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorGeometry {
    /// Radius of the hemispherical tip, mm.
    pub tip_radius: f64,
    /// Image height = width, pixels.
    pub image_size: usize,
    /// Side of the square footprint mapped to the image, mm.
    pub sensing_aperture: f64,
    /// Depth saturation, mm.
    pub max_depth: f64,
}

impl SensorGeometry {
    pub fn new(
        tip_radius: f64,
        image_size: usize,
        sensing_aperture: f64,
        max_depth: f64,
    ) -> Result<Self> {
        if !(tip_radius > 0.0) {
            return Err(Error::InvalidParameter {
                what: "SensorGeometry",
                why: format!("tip_radius must be > 0, got {tip_radius}"),
            });
        }
        if image_size < 16 {
            return Err(Error::InvalidParameter {
                what: "SensorGeometry",
                why: format!("image_size must be >= 16, got {image_size}"),
            });
        }
        if !(sensing_aperture > 0.0) || !(max_depth > 0.0) {
            return Err(Error::InvalidParameter {
                what: "SensorGeometry",
                why: "sensing_aperture and max_depth must be > 0".into(),
            });
        }
        Ok(Self { tip_radius, image_size, sensing_aperture, max_depth })
    }

    /// Defaults used throughout: 10 mm tip, 64 px over a 20 mm aperture,
    /// saturating at 2.5 mm penetration.
    pub fn default_desk() -> Self {
        Self { tip_radius: 10.0, image_size: 64, sensing_aperture: 20.0, max_depth: 2.5 }
    }

    /// mm per pixel.
    pub fn scale(&self) -> f64 {
        self.sensing_aperture / self.image_size as f64
    }

    /// Sensor-plane mm coordinates of the center of pixel (row, col).
    /// Rows advance along -y so the image is viewed from above.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let s = self.scale();
        let half = self.sensing_aperture / 2.0;
        let u = (col as f64 + 0.5) * s - half;
        let v = half - (row as f64 + 0.5) * s;
        (u, v)
    }

    /// Inverse of [`Self::pixel_center`]: fractional (row, col) for a
    /// sensor-plane position.
    pub fn mm_to_pixel(&self, u: f64, v: f64) -> (f64, f64) {
        let s = self.scale();
        let half = self.sensing_aperture / 2.0;
        let col = (u + half) / s - 0.5;
        let row = (half - v) / s - 0.5;
        (row, col)
    }
}

/// H x W grid of penetration depths in mm, each in [0, max_depth].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub values: Array2<f64>,
    pub max_depth: f64,
}

impl DepthImage {
    pub fn zeros(size: usize, max_depth: f64) -> Self {
        Self { values: Array2::zeros((size, size)), max_depth }
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Render the penetration-depth image of the sensor at `sensor_pose` against
/// `shape`. The pose locates the center of the tip sphere; the tip points
/// along the sensor frame's -z axis.
pub fn render_depth(
    sensor_pose: &Pose4,
    shape: &ObjectShape,
    geom: &SensorGeometry,
) -> Result<DepthImage> {
    let center_sdf = sdf_eval(shape, sensor_pose.xyz());
    if center_sdf < -geom.tip_radius {
        return Err(Error::OverPenetration { depth: -center_sdf - geom.tip_radius });
    }
    let n = geom.image_size;
    let r2 = geom.tip_radius * geom.tip_radius;
    let mut out = Array2::zeros((n, n));
    for row in 0..n {
        for col in 0..n {
            let (u, v) = geom.pixel_center(row, col);
            let rr = u * u + v * v;
            if rr >= r2 {
                continue; // outside the hemispherical tip footprint
            }
            let tip_z = -(r2 - rr).sqrt();
            let world = sensor_pose.transform_point([u, v, tip_z]);
            let pen = -sdf_eval(shape, world);
            if pen > 0.0 {
                out[[row, col]] = pen.min(geom.max_depth);
            }
        }
    }
    Ok(DepthImage { values: out, max_depth: geom.max_depth })
}
