//! Leader trajectories in the task plane.
//!
//! Every trajectory is parameterized by normalized time t in [0, 1] and
//! returns the pose offset from its start, so `offset_at(0)` is the
//! identity. Polygonal paths (square, star) share a rounded-corner closed
//! polyline with arc-length parameterization.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pose::Pose4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrajectorySpec {
    /// Circle of radius `radius` starting at the origin heading +x.
    Circle { radius: f64 },
    /// Axis-aligned square with side `side` and rounded corners.
    Square { side: f64 },
    /// Circle plus a linear height ramp of `z_delta` over the run.
    Spiral { radius: f64, z_delta: f64 },
    /// Figure-eight (Lissajous) of amplitude `amplitude`. Its path speed
    /// varies over the period and peaks well above the circle's, which is
    /// what makes it the harder tracking case.
    Loop { amplitude: f64 },
    /// Circle plus a sinusoidal height oscillation of amplitude `z_amp`.
    Wave { radius: f64, z_amp: f64 },
    /// Five-pointed star with outer radius `radius` and rounded corners.
    Star { radius: f64 },
}

impl TrajectorySpec {
    /// Desk-scale default for a trajectory name.
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "circle" => Self::Circle { radius: 25.0 },
            "square" => Self::Square { side: 40.0 },
            "spiral" => Self::Spiral { radius: 25.0, z_delta: 0.8 },
            "loop" => Self::Loop { amplitude: 40.0 },
            "wave" => Self::Wave { radius: 25.0, z_amp: 0.4 },
            "star" => Self::Star { radius: 25.0 },
            other => {
                return Err(Error::Config(format!(
                    "unknown trajectory {other:?} (expected circle, square, spiral, loop, wave, or star)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Circle { .. } => "circle",
            Self::Square { .. } => "square",
            Self::Spiral { .. } => "spiral",
            Self::Loop { .. } => "loop",
            Self::Wave { .. } => "wave",
            Self::Star { .. } => "star",
        }
    }

    /// Pose offset from the trajectory start at normalized time t in [0, 1].
    pub fn offset_at(&self, t: f64) -> Pose4 {
        let t = t.clamp(0.0, 1.0);
        match *self {
            Self::Circle { radius } => circle(radius, t),
            Self::Spiral { radius, z_delta } => {
                let mut p = circle(radius, t);
                p.z = z_delta * t;
                p
            }
            Self::Wave { radius, z_amp } => {
                let mut p = circle(radius, t);
                p.z = z_amp * (4.0 * PI * t).sin();
                p
            }
            Self::Square { side } => {
                let half = side / 2.0;
                let verts =
                    vec![[0.0, 0.0], [side, 0.0], [side, -side], [0.0, -side]];
                let _ = half;
                RoundedPath::new(&verts, 4.0).position(t)
            }
            Self::Star { radius } => {
                let inner = radius * 0.5;
                let mut verts = Vec::with_capacity(10);
                // Ten alternating outer/inner vertices, shifted so the path
                // starts at the first outer point.
                let mut pts = Vec::new();
                for i in 0..10 {
                    let r = if i % 2 == 0 { radius } else { inner };
                    let a = PI / 2.0 + i as f64 * PI / 5.0;
                    pts.push([r * a.cos(), r * a.sin()]);
                }
                let origin = pts[0];
                for p in pts {
                    verts.push([p[0] - origin[0], p[1] - origin[1]]);
                }
                RoundedPath::new(&verts, 2.0).position(t)
            }
            Self::Loop { amplitude } => {
                let th = 2.0 * PI * t;
                let x = amplitude * th.sin();
                let y = amplitude / 2.0 * (2.0 * th).sin();
                Pose4 { x, y, z: 0.0, yaw: 0.0 }
            }
        }
    }
}

fn circle(radius: f64, t: f64) -> Pose4 {
    let th = 2.0 * PI * t;
    Pose4 { x: radius * th.sin(), y: radius * (1.0 - th.cos()), z: 0.0, yaw: 0.0 }
}

enum Element {
    Line { p0: [f64; 2], dir: [f64; 2], len: f64 },
    Arc { center: [f64; 2], radius: f64, a0: f64, sweep: f64, len: f64 },
}

impl Element {
    fn len(&self) -> f64 {
        match self {
            Element::Line { len, .. } | Element::Arc { len, .. } => *len,
        }
    }

    fn point(&self, s: f64) -> [f64; 2] {
        match self {
            Element::Line { p0, dir, .. } => [p0[0] + dir[0] * s, p0[1] + dir[1] * s],
            Element::Arc { center, radius, a0, sweep, len } => {
                let a = a0 + sweep * (s / len);
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
        }
    }
}

/// A closed polyline with circular corner fillets, parameterized by arc
/// length.
struct RoundedPath {
    elements: Vec<Element>,
    total: f64,
    start: [f64; 2],
}

impl RoundedPath {
    fn new(vertices: &[[f64; 2]], corner_radius: f64) -> Self {
        let n = vertices.len();
        assert!(n >= 3, "closed polyline needs at least three vertices");
        // Per-corner fillet: arc entry/exit points and the arc itself.
        let mut entries = Vec::with_capacity(n); // (entry point, exit point, arc)
        for i in 0..n {
            let prev = vertices[(i + n - 1) % n];
            let v = vertices[i];
            let next = vertices[(i + 1) % n];
            let u = norm2([v[0] - prev[0], v[1] - prev[1]]);
            let w = norm2([next[0] - v[0], next[1] - v[1]]);
            let cosphi = (u[0] * w[0] + u[1] * w[1]).clamp(-1.0, 1.0);
            let phi = cosphi.acos();
            if phi < 1e-9 {
                entries.push((v, v, None));
                continue;
            }
            let cut = corner_radius * (phi / 2.0).tan();
            let pa = [v[0] - u[0] * cut, v[1] - u[1] * cut];
            let pb = [v[0] + w[0] * cut, v[1] + w[1] * cut];
            let bis = norm2([w[0] - u[0], w[1] - u[1]]);
            let dist = corner_radius / (phi / 2.0).cos();
            let center = [v[0] + bis[0] * dist, v[1] + bis[1] * dist];
            let a0 = (pa[1] - center[1]).atan2(pa[0] - center[0]);
            let a1 = (pb[1] - center[1]).atan2(pb[0] - center[0]);
            // Sweep by the turn angle, signed by the cross product.
            let cross = u[0] * w[1] - u[1] * w[0];
            let mut sweep = a1 - a0;
            while sweep > PI {
                sweep -= 2.0 * PI;
            }
            while sweep < -PI {
                sweep += 2.0 * PI;
            }
            debug_assert!(sweep * cross >= 0.0 || sweep.abs() < 1e-9);
            let arc = Element::Arc {
                center,
                radius: corner_radius,
                a0,
                sweep,
                len: corner_radius * sweep.abs(),
            };
            entries.push((pa, pb, Some(arc)));
        }
        // Stitch: line from exit of corner i to entry of corner i+1, then the
        // arc of corner i+1. The path starts at the exit of corner 0.
        let mut elements = Vec::new();
        for i in 0..n {
            let from = entries[i].1;
            let j = (i + 1) % n;
            let to = entries[j].0;
            let d = [to[0] - from[0], to[1] - from[1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len > 1e-12 {
                elements.push(Element::Line {
                    p0: from,
                    dir: [d[0] / len, d[1] / len],
                    len,
                });
            }
            if let Some(Element::Arc { center, radius, a0, sweep, len }) = entries[j].2.as_ref()
            {
                if *len > 1e-12 {
                    elements.push(Element::Arc {
                        center: *center,
                        radius: *radius,
                        a0: *a0,
                        sweep: *sweep,
                        len: *len,
                    });
                }
            }
        }
        let total = elements.iter().map(Element::len).sum();
        let start = entries[0].1;
        Self { elements, total, start }
    }

    /// Position at normalized arc length t in [0, 1], relative to the start.
    fn position(&self, t: f64) -> Pose4 {
        let mut s = t.clamp(0.0, 1.0) * self.total;
        let mut p = self.start;
        for e in &self.elements {
            if s <= e.len() {
                p = e.point(s);
                break;
            }
            s -= e.len();
            p = e.point(e.len());
        }
        Pose4 { x: p[0] - self.start[0], y: p[1] - self.start[1], z: 0.0, yaw: 0.0 }
    }
}

fn norm2(v: [f64; 2]) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}
