//! Deterministic synthetic "real" tactile sensor.
//!
//! The physical sensor images a membrane of pin markers that displace under
//! contact and shear. Here that membrane is an analytic model: a hexagonal
//! marker grid whose displacement field is driven by the smoothed contact
//! depth and the shear vector, rendered as a sum of Gaussian blobs. The model
//! is deterministic, so it doubles as a ground-truth oracle for the
//! generated-image domain.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::image_types::{DomainTag, TactileImage};
use crate::pose::ShearVector;
use crate::sensor::{DepthImage, SensorGeometry};

/// Reference marker layout: hexagonally packed centers in sensor-plane mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerGrid {
    pub positions: Vec<[f64; 2]>,
    /// Resting blob standard deviation, mm.
    pub blob_sigma: f64,
    /// Nearest-neighbor spacing, mm.
    pub spacing: f64,
}

impl MarkerGrid {
    /// Hexagonal grid of `rings` rings around a center marker
    /// (331 markers for 10 rings).
    pub fn hexagonal(rings: usize, spacing: f64, blob_sigma: f64) -> Result<Self> {
        if !(spacing > 0.0 && blob_sigma > 0.0) {
            return Err(Error::InvalidParameter {
                what: "MarkerGrid",
                why: "spacing and blob_sigma must be > 0".into(),
            });
        }
        if spacing <= 2.0 * blob_sigma {
            return Err(Error::InvalidParameter {
                what: "MarkerGrid",
                why: format!(
                    "marker spacing {spacing} must exceed 2 * blob_sigma = {}",
                    2.0 * blob_sigma
                ),
            });
        }
        let mut positions = vec![[0.0, 0.0]];
        // Axial hex directions, ordered so a ring walk stays on the ring.
        const DIRS: [(i64, i64); 6] =
            [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
        for k in 1..=rings as i64 {
            // Start at DIRS[4] * k and walk k steps in each direction.
            let (mut q, mut r) = (-k, k);
            for &(dq, dr) in DIRS.iter() {
                for _ in 0..k {
                    let x = spacing * (q as f64 + r as f64 / 2.0);
                    let y = spacing * (3f64.sqrt() / 2.0) * r as f64;
                    positions.push([x, y]);
                    q += dq;
                    r += dr;
                }
            }
        }
        Ok(Self { positions, blob_sigma, spacing })
    }

    /// 331-pin layout spanning an 18 mm circle, blobs about 3 px wide on the
    /// default 64 px / 20 mm aperture.
    pub fn default_desk() -> Self {
        Self::hexagonal(10, 0.9, 0.3).expect("valid default grid")
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Coefficients of the analytic membrane response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembraneParams {
    /// Indentation-bulge coefficient, mm per unit depth gradient.
    pub alpha: f64,
    /// Lateral shear coupling, dimensionless.
    pub beta: f64,
    /// Rotational shear coupling, dimensionless.
    pub gamma: f64,
    /// Vertical-shear blob-size coupling, per mm.
    pub kappa: f64,
    /// Brightness of the contact-region glow added under the markers,
    /// in [0, 1]. Purely geometric: it follows the smoothed depth and is
    /// unaffected by shear, like the contrast change a real illuminated
    /// membrane shows where it presses against an object.
    pub shading: f64,
    /// Weight-field smoothing length, mm.
    pub contact_softness: f64,
    /// Additive uniform pixel noise amplitude on synthetic-real images.
    /// Applied only by callers that hold an explicit noise seed.
    pub noise_amplitude: f64,
}

impl MembraneParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 || self.kappa < 0.0 {
            return Err(Error::InvalidParameter {
                what: "MembraneParams",
                why: "alpha, beta, gamma, kappa must be >= 0".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.shading) {
            return Err(Error::InvalidParameter {
                what: "MembraneParams",
                why: "shading must be in [0, 1]".into(),
            });
        }
        if !(self.contact_softness > 0.0) {
            return Err(Error::InvalidParameter {
                what: "MembraneParams",
                why: "contact_softness must be > 0".into(),
            });
        }
        if self.noise_amplitude < 0.0 {
            return Err(Error::InvalidParameter {
                what: "MembraneParams",
                why: "noise_amplitude must be >= 0".into(),
            });
        }
        Ok(())
    }
}

impl Default for MembraneParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 2.0,
            gamma: 1.5,
            kappa: 0.5,
            shading: 0.5,
            contact_softness: 2.0,
            noise_amplitude: 0.0,
        }
    }
}

/// Displaced marker positions (mm) and per-marker blob sigmas (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerField {
    pub positions: Vec<[f64; 2]>,
    pub scales: Vec<f64>,
}

/// Separable Gaussian blur with a kernel truncated at 3 sigma. Exactly zero
/// input stays exactly zero, which keeps the contact weight's support tight.
fn gaussian_blur(src: &Array2<f64>, sigma_px: f64) -> Array2<f64> {
    if sigma_px <= 0.0 {
        return src.clone();
    }
    let radius = (3.0 * sigma_px).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0;
    for i in -radius..=radius {
        let v = (-(i as f64).powi(2) / (2.0 * sigma_px * sigma_px)).exp();
        kernel.push(v);
        sum += v;
    }
    for v in kernel.iter_mut() {
        *v /= sum;
    }
    let (h, w) = src.dim();
    let mut tmp = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let cc = c as i64 + k as i64 - radius;
                if cc >= 0 && (cc as usize) < w {
                    acc += kv * src[[r, cc as usize]];
                }
            }
            tmp[[r, c]] = acc;
        }
    }
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let rr = r as i64 + k as i64 - radius;
                if rr >= 0 && (rr as usize) < h {
                    acc += kv * tmp[[rr as usize, c]];
                }
            }
            out[[r, c]] = acc;
        }
    }
    out
}

/// Bilinear sample of a grid at fractional (row, col); zero outside.
fn sample_bilinear(grid: &Array2<f64>, row: f64, col: f64) -> f64 {
    let (h, w) = grid.dim();
    let r0 = row.floor();
    let c0 = col.floor();
    let fr = row - r0;
    let fc = col - c0;
    let mut acc = 0.0;
    for (dr, wr) in [(0i64, 1.0 - fr), (1, fr)] {
        for (dc, wc) in [(0i64, 1.0 - fc), (1, fc)] {
            let r = r0 as i64 + dr;
            let c = c0 as i64 + dc;
            if r >= 0 && (r as usize) < h && c >= 0 && (c as usize) < w {
                acc += wr * wc * grid[[r as usize, c as usize]];
            }
        }
    }
    acc
}

/// Compute displaced marker positions and blob scales for a contact.
///
/// With c(m) the smoothed, max-depth-normalized contact weight at marker m:
///
/// ```text
/// u(m)     = alpha * grad(d_smooth)(m)
///          + beta  * c(m) * (s_x, s_y)
///          + gamma * c(m) * s_yaw_rad * perp(m - centroid)
/// sigma(m) = blob_sigma * (1 + kappa * c(m) * s_z)
/// ```
///
/// Markers with zero contact weight do not move.
pub fn marker_displacement_field(
    depth: &DepthImage,
    shear: &ShearVector,
    grid: &MarkerGrid,
    params: &MembraneParams,
    geom: &SensorGeometry,
) -> MarkerField {
    let scale = geom.scale();
    let smoothed = gaussian_blur(&depth.values, params.contact_softness / scale);

    // Depth-weighted contact centroid in mm.
    let (h, w) = smoothed.dim();
    let mut total = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for r in 0..h {
        for c in 0..w {
            let v = smoothed[[r, c]];
            if v > 0.0 {
                let (u, vv) = geom.pixel_center(r, c);
                total += v;
                cx += v * u;
                cy += v * vv;
            }
        }
    }
    let centroid = if total > 0.0 { [cx / total, cy / total] } else { [0.0, 0.0] };

    let yaw_rad = shear.yaw.to_radians();
    let mut positions = Vec::with_capacity(grid.len());
    let mut scales = Vec::with_capacity(grid.len());
    for &m in &grid.positions {
        let (row, col) = geom.mm_to_pixel(m[0], m[1]);
        let d_here = sample_bilinear(&smoothed, row, col);
        let c_m = (d_here / depth.max_depth).clamp(0.0, 1.0);
        if c_m == 0.0 {
            positions.push(m);
            scales.push(grid.blob_sigma);
            continue;
        }
        // Central-difference gradient of the smoothed depth, mm/mm. Rows run
        // along -y, so the row derivative is negated.
        let gx = (sample_bilinear(&smoothed, row, col + 1.0)
            - sample_bilinear(&smoothed, row, col - 1.0))
            / (2.0 * scale);
        let gy = -(sample_bilinear(&smoothed, row + 1.0, col)
            - sample_bilinear(&smoothed, row - 1.0, col))
            / (2.0 * scale);
        let rel = [m[0] - centroid[0], m[1] - centroid[1]];
        let perp = [-rel[1], rel[0]];
        let ux = params.alpha * gx
            + params.beta * c_m * shear.x
            + params.gamma * c_m * yaw_rad * perp[0];
        let uy = params.alpha * gy
            + params.beta * c_m * shear.y
            + params.gamma * c_m * yaw_rad * perp[1];
        positions.push([m[0] + ux, m[1] + uy]);
        scales.push(grid.blob_sigma * (1.0 + params.kappa * c_m * shear.z));
    }
    MarkerField { positions, scales }
}

/// Rasterize isotropic Gaussian blobs onto the pixel grid, clamped to [0, 1].
pub fn render_markers(
    field: &MarkerField,
    geom: &SensorGeometry,
) -> TactileImage {
    let n = geom.image_size;
    let scale = geom.scale();
    let mut img = Array2::<f32>::zeros((n, n));
    for (pos, sigma_mm) in field.positions.iter().zip(field.scales.iter()) {
        debug_assert!(
            pos[0].abs() <= geom.sensing_aperture && pos[1].abs() <= geom.sensing_aperture,
            "marker far outside the aperture: {pos:?}"
        );
        let sigma_px = sigma_mm / scale;
        if sigma_px <= 0.0 {
            continue;
        }
        let (row_f, col_f) = geom.mm_to_pixel(pos[0], pos[1]);
        let radius = (4.0 * sigma_px).ceil() as i64;
        let r_lo = ((row_f.floor() as i64) - radius).max(0);
        let r_hi = ((row_f.ceil() as i64) + radius).min(n as i64 - 1);
        let c_lo = ((col_f.floor() as i64) - radius).max(0);
        let c_hi = ((col_f.ceil() as i64) + radius).min(n as i64 - 1);
        let inv = 1.0 / (2.0 * sigma_px * sigma_px);
        for r in r_lo..=r_hi {
            for c in c_lo..=c_hi {
                let dr = r as f64 - row_f;
                let dc = c as f64 - col_f;
                let v = (-(dr * dr + dc * dc) * inv).exp();
                img[[r as usize, c as usize]] += v as f32;
            }
        }
    }
    img.mapv_inplace(|v| v.clamp(0.0, 1.0));
    TactileImage { values: img, domain: DomainTag::RealSynthetic }
}

/// The synthetic real sensor: reference grid, membrane coefficients, and
/// imaging geometry, with a cached resting-state template.
#[derive(Debug)]
pub struct SensorModel {
    pub grid: MarkerGrid,
    pub params: MembraneParams,
    pub geom: SensorGeometry,
    resting: OnceLock<TactileImage>,
}

impl SensorModel {
    pub fn new(grid: MarkerGrid, params: MembraneParams, geom: SensorGeometry) -> Result<Self> {
        params.validate()?;
        let half = geom.sensing_aperture / 2.0;
        if grid
            .positions
            .iter()
            .any(|p| p[0].abs() > half || p[1].abs() > half)
        {
            return Err(Error::InvalidParameter {
                what: "SensorModel",
                why: "markers must lie inside the sensing aperture".into(),
            });
        }
        Ok(Self { grid, params, geom, resting: OnceLock::new() })
    }

    pub fn default_desk() -> Self {
        Self::new(
            MarkerGrid::default_desk(),
            MembraneParams::default(),
            SensorGeometry::default_desk(),
        )
        .expect("valid default sensor model")
    }

    /// Image of the undisplaced marker grid.
    pub fn resting_template(&self) -> &TactileImage {
        self.resting.get_or_init(|| {
            let field = MarkerField {
                positions: self.grid.positions.clone(),
                scales: vec![self.grid.blob_sigma; self.grid.len()],
            };
            render_markers(&field, &self.geom)
        })
    }

    /// Deterministic synthetic-real tactile image for a contact depth map and
    /// accumulated shear.
    pub fn real_image(&self, depth: &DepthImage, shear: &ShearVector) -> TactileImage {
        let field =
            marker_displacement_field(depth, shear, &self.grid, &self.params, &self.geom);
        let mut img = render_markers(&field, &self.geom);
        if self.params.shading > 0.0 {
            let smoothed = gaussian_blur(
                &depth.values,
                self.params.contact_softness / self.geom.scale(),
            );
            let gain = self.params.shading / depth.max_depth;
            ndarray::Zip::from(&mut img.values).and(&smoothed).for_each(|v, &d| {
                *v = (*v + (gain * d.clamp(0.0, depth.max_depth)) as f32).clamp(0.0, 1.0);
            });
        }
        img
    }
}

impl Clone for SensorModel {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            params: self.params,
            geom: self.geom,
            resting: OnceLock::new(),
        }
    }
}

/// Add seeded uniform pixel noise in [-amplitude, amplitude], clamped back to
/// [0, 1]. A zero amplitude returns the input unchanged.
pub fn add_uniform_noise(img: &TactileImage, amplitude: f64, seed: u64) -> TactileImage {
    if amplitude == 0.0 {
        return img.clone();
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let values = img.values.mapv(|v| {
        let n: f64 = rng.random_range(-amplitude..=amplitude);
        (v + n as f32).clamp(0.0, 1.0)
    });
    TactileImage { values, domain: img.domain }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Pose4;
    use crate::sensor::render_depth;
    use crate::shape::ObjectShape;

    fn contact_depth(model: &SensorModel, indent: f64) -> DepthImage {
        let pose = Pose4::new(0.0, 0.0, model.geom.tip_radius - indent, 0.0).unwrap();
        render_depth(&pose, &ObjectShape::half_space(Pose4::identity()), &model.geom).unwrap()
    }

    #[test]
    fn hex_grid_has_331_markers_for_10_rings() {
        let grid = MarkerGrid::default_desk();
        assert_eq!(grid.len(), 331);
        assert!(grid.max_radius() <= 10.0);
        // Nearest-neighbor spacing equals the lattice constant.
        let mut min_d = f64::INFINITY;
        for i in 0..grid.len() {
            for j in (i + 1)..grid.len() {
                let dx = grid.positions[i][0] - grid.positions[j][0];
                let dy = grid.positions[i][1] - grid.positions[j][1];
                min_d = min_d.min((dx * dx + dy * dy).sqrt());
            }
        }
        assert!((min_d - 0.9).abs() < 1e-9, "min spacing {min_d}");
        assert!(min_d > 2.0 * grid.blob_sigma);
    }

    #[test]
    fn zero_depth_means_no_motion() {
        let model = SensorModel::default_desk();
        let depth = DepthImage::zeros(model.geom.image_size, model.geom.max_depth);
        let shear = ShearVector::new(2.0, -1.0, 0.3, 5.0);
        let field =
            marker_displacement_field(&depth, &shear, &model.grid, &model.params, &model.geom);
        assert_eq!(field.positions, model.grid.positions);
        assert!(field.scales.iter().all(|&s| s == model.grid.blob_sigma));
    }

    #[test]
    fn zero_shear_leaves_only_the_bulge_term() {
        let model = SensorModel::default_desk();
        let depth = contact_depth(&model, 1.0);
        let zero = marker_displacement_field(
            &depth,
            &ShearVector::ZERO,
            &model.grid,
            &model.params,
            &model.geom,
        );
        // With zero shear the beta/gamma/kappa terms vanish: scales resting,
        // displacement purely radial-ish from the alpha term.
        assert!(zero.scales.iter().all(|&s| s == model.grid.blob_sigma));
        // Recompute with alpha = 0: everything must be at rest.
        let mut p = model.params;
        p.alpha = 0.0;
        let no_alpha =
            marker_displacement_field(&depth, &ShearVector::ZERO, &model.grid, &p, &model.geom);
        assert_eq!(no_alpha.positions, model.grid.positions);
    }

    #[test]
    fn pure_lateral_shear_moves_contact_markers_along_x() {
        let model = SensorModel::default_desk();
        let depth = contact_depth(&model, 1.0);
        let sheared = marker_displacement_field(
            &depth,
            &ShearVector::new(2.0, 0.0, 0.0, 0.0),
            &model.grid,
            &model.params,
            &model.geom,
        );
        let mut net = [0.0, 0.0];
        let mut moved = 0;
        for (disp, rest) in sheared.positions.iter().zip(model.grid.positions.iter()) {
            let u = [disp[0] - rest[0], disp[1] - rest[1]];
            if u[0] != 0.0 || u[1] != 0.0 {
                moved += 1;
            }
            net[0] += u[0];
            net[1] += u[1];
        }
        assert!(moved > 10, "expected markers inside the contact to move");
        let angle = net[1].atan2(net[0]).to_degrees().abs();
        assert!(angle < 1.0, "net displacement {angle} deg off +x");
    }

    #[test]
    fn beta_gamma_terms_are_linear_in_shear() {
        let model = SensorModel::default_desk();
        let depth = contact_depth(&model, 1.5);
        let f = |s: ShearVector| {
            marker_displacement_field(&depth, &s, &model.grid, &model.params, &model.geom)
        };
        let base = f(ShearVector::ZERO);
        let s1 = ShearVector::new(1.2, -0.4, 0.0, 4.0);
        let s2 = ShearVector::new(-0.5, 0.9, 0.0, -7.0);
        let sum = ShearVector::new(s1.x + s2.x, s1.y + s2.y, 0.0, s1.yaw + s2.yaw);
        let a = f(s1);
        let b = f(s2);
        let ab = f(sum);
        for i in 0..model.grid.len() {
            for k in 0..2 {
                let lhs = ab.positions[i][k] - base.positions[i][k];
                let rhs = (a.positions[i][k] - base.positions[i][k])
                    + (b.positions[i][k] - base.positions[i][k]);
                assert!((lhs - rhs).abs() < 1e-9, "marker {i} axis {k}");
            }
        }
    }

    #[test]
    fn render_empty_field_is_black() {
        let geom = SensorGeometry::default_desk();
        let img = render_markers(&MarkerField { positions: vec![], scales: vec![] }, &geom);
        assert!(img.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_center_blob_is_symmetric_with_max_at_center() {
        let geom = SensorGeometry::default_desk();
        let sigma = 2.0 * geom.scale(); // 2 px
        let img = render_markers(
            &MarkerField { positions: vec![[0.0, 0.0]], scales: vec![sigma] },
            &geom,
        );
        let n = geom.image_size;
        let peak = img.values.iter().cloned().fold(0.0f32, f32::max);
        // Center in mm (0,0) lies between the four middle pixels.
        assert_eq!(img.values[[n / 2, n / 2]], peak);
        assert_eq!(img.values[[n / 2 - 1, n / 2]], peak);
        assert_eq!(img.values[[n / 2, n / 2 - 1]], peak);
        assert_eq!(img.values[[n / 2 - 1, n / 2 - 1]], peak);
        for r in 0..n {
            for c in 0..n {
                assert_eq!(img.values[[r, c]], img.values[[n - 1 - r, c]]);
                assert_eq!(img.values[[r, c]], img.values[[r, n - 1 - c]]);
            }
        }
    }

    #[test]
    fn oracle_is_deterministic_and_rests_at_zero_depth() {
        let model = SensorModel::default_desk();
        let depth = DepthImage::zeros(model.geom.image_size, model.geom.max_depth);
        let img = model.real_image(&depth, &ShearVector::new(1.0, 2.0, 0.1, 3.0));
        assert_eq!(&img, model.resting_template());

        let contact = contact_depth(&model, 1.0);
        let s = ShearVector::new(1.5, -0.5, 0.2, 4.0);
        let a = model.real_image(&contact, &s);
        let b = model.real_image(&contact, &s);
        assert_eq!(a, b, "oracle must be bit-deterministic");
    }

    #[test]
    fn opposite_lateral_shears_mirror_about_the_y_axis() {
        let model = SensorModel::default_desk();
        let depth = contact_depth(&model, 1.0);
        let pos = model.real_image(&depth, &ShearVector::new(1.0, 0.0, 0.0, 0.0));
        let neg = model.real_image(&depth, &ShearVector::new(-1.0, 0.0, 0.0, 0.0));
        let n = model.geom.image_size;
        for r in 0..n {
            for c in 0..n {
                let mirrored = pos.values[[r, n - 1 - c]];
                assert!(
                    (neg.values[[r, c]] - mirrored).abs() < 1e-5,
                    "({r},{c}): {} vs {}",
                    neg.values[[r, c]],
                    mirrored
                );
            }
        }
    }

    #[test]
    fn image_difference_grows_monotonically_with_shear_magnitude() {
        let model = SensorModel::default_desk();
        let depth = contact_depth(&model, 1.0);
        let reference = model.real_image(&depth, &ShearVector::ZERO);
        let dir = [0.8, 0.6];
        let mut last = 0.0;
        for k in 1..=5 {
            let mag = 0.6 * k as f64;
            let img = model.real_image(
                &depth,
                &ShearVector::new(dir[0] * mag, dir[1] * mag, 0.0, 0.0),
            );
            let mape = crate::metrics::mape(&img, &reference).unwrap();
            assert!(mape > last, "magnitude {mag}: {mape} <= {last}");
            last = mape;
        }
        // Distinct shears within range are distinguishable.
        assert!(last > 1e-3);
    }

    #[test]
    fn rendered_grid_has_one_maximum_per_marker() {
        // Higher resolution avoids pixel-quantization plateaus between
        // neighboring markers; spacing still exceeds 2 * sigma.
        let geom = SensorGeometry::new(10.0, 128, 20.0, 2.5).unwrap();
        let grid = MarkerGrid::default_desk();
        let field = MarkerField {
            positions: grid.positions.clone(),
            scales: vec![grid.blob_sigma; grid.len()],
        };
        let img = render_markers(&field, &geom);
        assert_eq!(count_local_maxima(&img.values), grid.len());
    }

    /// Count plateau-aware local maxima: connected regions of equal value
    /// strictly above every bordering pixel.
    fn count_local_maxima(img: &Array2<f32>) -> usize {
        let (h, w) = img.dim();
        let mut visited = Array2::<bool>::from_elem((h, w), false);
        let mut count = 0;
        for r in 0..h {
            for c in 0..w {
                if visited[[r, c]] || img[[r, c]] == 0.0 {
                    continue;
                }
                // Flood the plateau of equal value.
                let v = img[[r, c]];
                let mut stack = vec![(r, c)];
                let mut plateau = vec![];
                visited[[r, c]] = true;
                let mut is_max = true;
                while let Some((pr, pc)) = stack.pop() {
                    plateau.push((pr, pc));
                    for dr in -1i64..=1 {
                        for dc in -1i64..=1 {
                            if dr == 0 && dc == 0 {
                                continue;
                            }
                            let nr = pr as i64 + dr;
                            let nc = pc as i64 + dc;
                            if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                                continue;
                            }
                            let (nr, nc) = (nr as usize, nc as usize);
                            if img[[nr, nc]] > v {
                                is_max = false;
                            } else if img[[nr, nc]] == v && !visited[[nr, nc]] {
                                visited[[nr, nc]] = true;
                                stack.push((nr, nc));
                            }
                        }
                    }
                }
                if is_max {
                    count += 1;
                }
            }
        }
        count
    }
}
