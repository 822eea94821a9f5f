//! Grayscale tactile images and their 8-bit PNG serialization.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sensor::DepthImage;

/// Which of the three image domains a tactile image belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    /// Shear-free image rendered from simulated contact depth.
    Sim,
    /// Deterministic synthetic stand-in for the physical marker sensor.
    RealSynthetic,
    /// Output of a sim-to-real translator.
    Generated,
}

/// H x W grayscale image with every pixel in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TactileImage {
    pub values: Array2<f32>,
    pub domain: DomainTag,
}

impl TactileImage {
    pub fn new(values: Array2<f32>, domain: DomainTag) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0 && *v <= 1.0)) {
            return Err(Error::InvalidParameter {
                what: "TactileImage",
                why: "pixels must be finite and in [0, 1]".into(),
            });
        }
        Ok(Self { values, domain })
    }

    pub fn zeros(size: usize, domain: DomainTag) -> Self {
        Self { values: Array2::zeros((size, size)), domain }
    }

    pub fn shape(&self) -> (usize, usize) {
        let d = self.values.dim();
        (d.0, d.1)
    }

    /// Quantize to 8-bit and write as grayscale PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (h, w) = self.shape();
        let mut buf = image::GrayImage::new(w as u32, h as u32);
        for ((r, c), &v) in self.values.indexed_iter() {
            buf.put_pixel(c as u32, r as u32, image::Luma([quantize(v)]));
        }
        buf.save(path)?;
        Ok(())
    }

    pub fn load_png(path: &Path, domain: DomainTag) -> Result<Self> {
        let img = image::open(path)?.into_luma8();
        let (w, h) = img.dimensions();
        let mut values = Array2::zeros((h as usize, w as usize));
        for (c, r, p) in img.enumerate_pixels() {
            values[[r as usize, c as usize]] = p.0[0] as f32 / 255.0;
        }
        Ok(Self { values, domain })
    }
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Normalize a depth image into the shear-free simulated tactile image:
/// pixel value = depth / max_depth. By construction this image carries no
/// shear information.
pub fn sim_tactile_image(depth: &DepthImage) -> TactileImage {
    let values = depth.values.mapv(|d| ((d / depth.max_depth).clamp(0.0, 1.0)) as f32);
    TactileImage { values, domain: DomainTag::Sim }
}
