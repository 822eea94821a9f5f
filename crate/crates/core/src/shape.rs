//! Signed-distance object geometry.
//!
//! Three primitives cover the contact scenarios: a half-space for flat
//! surfaces, a box whose top edges give edge contacts, and an ellipsoid for
//! curved objects. All three signed distances are exact (and therefore
//! 1-Lipschitz): negative inside, positive outside, zero on the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShapeKind {
    /// Occupies z <= 0 in the object frame.
    HalfSpace,
    /// Axis-aligned box in the object frame, given by half extents in mm.
    Box { half_extents: [f64; 3] },
    /// Axis-aligned ellipsoid in the object frame, given by semi-axes in mm.
    Ellipsoid { semi_axes: [f64; 3] },
}

/// A rigid object: a primitive signed-distance shape placed at a pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectShape {
    pub kind: ShapeKind,
    pub pose: Pose4,
}

impl ObjectShape {
    pub fn new(kind: ShapeKind, pose: Pose4) -> Result<Self> {
        let dims: &[f64] = match &kind {
            ShapeKind::HalfSpace => &[],
            ShapeKind::Box { half_extents } => half_extents,
            ShapeKind::Ellipsoid { semi_axes } => semi_axes,
        };
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidParameter {
                what: "ObjectShape",
                why: format!("dimensions must be strictly positive, got {dims:?}"),
            });
        }
        Ok(Self { kind, pose })
    }

    pub fn half_space(pose: Pose4) -> Self {
        Self { kind: ShapeKind::HalfSpace, pose }
    }

    pub fn with_pose(&self, pose: Pose4) -> Self {
        Self { kind: self.kind, pose }
    }
}

/// Exact signed distance from a world-frame point to the object surface, mm.
pub fn sdf_eval(shape: &ObjectShape, point: [f64; 3]) -> f64 {
    let p = shape.pose.inverse_transform_point(point);
    match shape.kind {
        ShapeKind::HalfSpace => p[2],
        ShapeKind::Box { half_extents } => sdf_box(p, half_extents),
        ShapeKind::Ellipsoid { semi_axes } => sdf_ellipsoid(p, semi_axes),
    }
}

fn sdf_box(p: [f64; 3], h: [f64; 3]) -> f64 {
    let q = [p[0].abs() - h[0], p[1].abs() - h[1], p[2].abs() - h[2]];
    let outside = [q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)];
    let out_len = (outside[0] * outside[0] + outside[1] * outside[1] + outside[2] * outside[2]).sqrt();
    let inside = q[0].max(q[1]).max(q[2]).min(0.0);
    out_len + inside
}

/// Exact point-ellipsoid distance. The nearest surface point satisfies
/// x_i = a_i^2 p_i / (t + a_i^2) where t is the unique root of
/// F(t) = sum_i (a_i p_i / (t + a_i^2))^2 - 1 on (-min(a_i^2), inf).
/// Components of p on a symmetry plane are handled by dimensional reduction,
/// since there the nearest point may leave the plane (medial-axis case).
fn sdf_ellipsoid(p: [f64; 3], a: [f64; 3]) -> f64 {
    // Snap numerically-zero components onto the symmetry plane so the
    // reduction below applies; the induced distance error is < 1e-8.
    let y: Vec<f64> = p
        .iter()
        .map(|&v| if v.abs() < 1e-9 { 0.0 } else { v.abs() })
        .collect();
    let axes = a.to_vec();
    let nearest = nearest_on_ellipsoid(&y, &axes);
    let mut d2 = 0.0;
    for i in 0..3 {
        d2 += (nearest[i] - y[i]) * (nearest[i] - y[i]);
    }
    let d = d2.sqrt();
    let level: f64 = (0..3).map(|i| (y[i] / a[i]).powi(2)).sum();
    if level < 1.0 {
        -d
    } else {
        d
    }
}

/// Nearest point on the axis-aligned ellipsoid with the given semi-axes to a
/// point with non-negative components (zeros exact). Works for any dimension.
fn nearest_on_ellipsoid(y: &[f64], a: &[f64]) -> Vec<f64> {
    let n = y.len();
    let nz: Vec<usize> = (0..n).filter(|&i| y[i] > 0.0).collect();
    let z: Vec<usize> = (0..n).filter(|&i| y[i] == 0.0).collect();

    if nz.is_empty() {
        // Center: nearest point sits on the shortest axis.
        let j = (0..n)
            .min_by(|&i, &k| a[i].partial_cmp(&a[k]).unwrap())
            .unwrap();
        let mut x = vec![0.0; n];
        x[j] = a[j];
        return x;
    }

    if !z.is_empty() {
        // Candidate off the symmetry plane: x_j != 0 for the shortest zeroed
        // axis j, with t = -a_j^2. Valid only when a_j is strictly shortest
        // among the active axes and the reduced point lies inside.
        let j = *z
            .iter()
            .min_by(|&&i, &&k| a[i].partial_cmp(&a[k]).unwrap())
            .unwrap();
        if nz.iter().all(|&i| a[j] < a[i]) {
            let mut level = 0.0;
            let mut x = vec![0.0; n];
            let mut valid = true;
            for &i in &nz {
                let xi = a[i] * a[i] * y[i] / (a[i] * a[i] - a[j] * a[j]);
                if xi.abs() >= a[i] {
                    valid = false;
                    break;
                }
                x[i] = xi;
                level += (xi / a[i]) * (xi / a[i]);
            }
            if valid && level < 1.0 {
                x[j] = a[j] * (1.0 - level).sqrt();
                return x;
            }
        }
        // Otherwise the nearest point stays on the plane: solve the reduced
        // problem over the active axes.
        let y_red: Vec<f64> = nz.iter().map(|&i| y[i]).collect();
        let a_red: Vec<f64> = nz.iter().map(|&i| a[i]).collect();
        let x_red = nearest_on_ellipsoid(&y_red, &a_red);
        let mut x = vec![0.0; n];
        for (k, &i) in nz.iter().enumerate() {
            x[i] = x_red[k];
        }
        return x;
    }

    // All components positive: bisect F(t) on (-min a_i^2, inf).
    let f = |t: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            let v = a[i] * y[i] / (t + a[i] * a[i]);
            s += v * v;
        }
        s - 1.0
    };
    let a_min2 = a.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    let a_max = a.iter().cloned().fold(0.0_f64, f64::max);
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let level: f64 = (0..n).map(|i| (y[i] / a[i]).powi(2)).sum();

    let (mut lo, mut hi) = if level >= 1.0 {
        let mut hi = a_max * norm + a_max * a_max;
        while f(hi) > 0.0 {
            hi = hi * 2.0 + 1.0;
        }
        (0.0, hi)
    } else {
        // Interior: root in (-a_min^2, 0]. Walk lo toward -a_min^2 until the
        // bracket is sign-valid.
        let mut lo = -a_min2 * 0.5 - 0.5 * a_min2 * 0.5;
        let mut frac = 0.75;
        while f(lo) < 0.0 {
            frac = 0.5 + 0.5 * frac;
            let next = -a_min2 * frac;
            if next == lo {
                break;
            }
            lo = next;
        }
        (lo, 0.0)
    };

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let mut x: Vec<f64> = (0..n)
        .map(|i| a[i] * a[i] * y[i] / (t + a[i] * a[i]))
        .collect();
    // Re-project exactly onto the surface; the distance is stationary in the
    // tangential direction, so residual root error only enters at second
    // order after this.
    let lv: f64 = (0..n).map(|i| (x[i] / a[i]).powi(2)).sum();
    if lv > 0.0 {
        let scale = 1.0 / lv.sqrt();
        for v in x.iter_mut() {
            *v *= scale;
        }
    }
    x
}
