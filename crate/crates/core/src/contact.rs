//! Randomized contact sampling for dataset collection.
//!
//! A sample is an in-contact current pose plus the anchor pose the membrane
//! first stuck at, displaced within configured shear ranges, together with
//! the ground-truth contact label. The current pose is what gets imaged, so
//! it is sampled directly and the anchor derived from it; this keeps the
//! rendered geometry statistically independent of the shear label — the
//! depth map alone must not reveal which way the sensor was dragged.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{wrap_deg, Pose4, ShearVector};
use crate::sensor::SensorGeometry;
use crate::shape::{sdf_eval, ObjectShape, ShapeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactType {
    Surface,
    Edge,
}

/// Ground-truth label of a contact sample: pose of the contact relative to
/// the sensor plus the accumulated shear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactLabel {
    /// Indentation at the current (imaged) pose, mm.
    pub pose_depth: f64,
    /// Object feature orientation relative to the current sensor frame,
    /// degrees (edge yaw; 0 for surfaces).
    pub pose_angle: f64,
    /// Shear accumulated between anchor and current pose.
    pub shear: ShearVector,
}

/// Per-component sampling bounds for [`sample_contact`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRanges {
    /// Indentation at the current pose, mm (min, max).
    pub indent: (f64, f64),
    /// Lateral shear bound, mm (+/-).
    pub lateral_shear: f64,
    /// Rotational shear bound, degrees (+/-).
    pub yaw_shear: f64,
    /// Vertical shear bound, mm (+/-).
    pub vertical_shear: f64,
    /// Feature angle bound, degrees (+/-): sensor yaw relative to the edge.
    pub feature_angle: f64,
    /// Anchor position jitter in the surface plane, mm (+/-).
    pub lateral_position: f64,
    /// Signed offset of the tip axis from an edge toward the face, mm
    /// (min, max); only used for edge contacts.
    pub edge_offset: (f64, f64),
}

impl Default for SampleRanges {
    fn default() -> Self {
        Self {
            indent: (0.5, 2.0),
            lateral_shear: 3.0,
            yaw_shear: 10.0,
            vertical_shear: 0.5,
            feature_angle: 45.0,
            lateral_position: 4.0,
            edge_offset: (-2.0, 0.0),
        }
    }
}

/// One object the sensor can interact with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactScenario {
    pub object_id: String,
    pub contact_type: ContactType,
    pub shape: ObjectShape,
    /// Height of the contacted face/edge in the world frame, mm.
    pub top_z: f64,
}

impl ContactScenario {
    /// A flat plate: half-space with top at z = 0.
    pub fn flat_plate(id: &str) -> Self {
        Self {
            object_id: id.to_string(),
            contact_type: ContactType::Surface,
            shape: ObjectShape::half_space(Pose4::identity()),
            top_z: 0.0,
        }
    }

    /// A long bar whose top edge runs along the x axis through the origin;
    /// the face extends toward -y.
    pub fn edge_bar(id: &str) -> Self {
        Self {
            object_id: id.to_string(),
            contact_type: ContactType::Edge,
            shape: ObjectShape::new(
                ShapeKind::Box { half_extents: [60.0, 25.0, 10.0] },
                Pose4 { x: 0.0, y: -25.0, z: -10.0, yaw: 0.0 },
            )
            .expect("valid bar"),
            top_z: 0.0,
        }
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn symmetric(rng: &mut impl Rng, bound: f64) -> f64 {
    uniform(rng, -bound, bound)
}

const MAX_ATTEMPTS: usize = 100;
/// Minimum analytic tip penetration for a pose to count as in contact, mm.
const CONTACT_MARGIN: f64 = 0.05;

/// Analytic maximum penetration of the hemispherical tip: tip radius minus
/// the distance from the tip center to the object.
pub fn tip_penetration(shape: &ObjectShape, pose: &Pose4, geom: &SensorGeometry) -> f64 {
    geom.tip_radius - sdf_eval(shape, pose.xyz())
}

/// Draw a random in-contact (anchor, current) pose pair within `ranges`.
/// Deterministic for a given seed.
pub fn sample_contact(
    scenario: &ContactScenario,
    ranges: &SampleRanges,
    geom: &SensorGeometry,
    rng_seed: u64,
) -> Result<(Pose4, Pose4, ContactLabel)> {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    sample_contact_with_rng(scenario, ranges, geom, &mut rng)
}

pub fn sample_contact_with_rng(
    scenario: &ContactScenario,
    ranges: &SampleRanges,
    geom: &SensorGeometry,
    rng: &mut impl Rng,
) -> Result<(Pose4, Pose4, ContactLabel)> {
    for _ in 0..MAX_ATTEMPTS {
        let indent = uniform(rng, ranges.indent.0, ranges.indent.1);
        let angle = symmetric(rng, ranges.feature_angle);
        // The current pose is imaged, so it is sampled directly: its
        // geometry (and hence the depth map) is independent of the shear.
        let current = match scenario.contact_type {
            ContactType::Surface => Pose4 {
                x: symmetric(rng, ranges.lateral_position),
                y: symmetric(rng, ranges.lateral_position),
                z: scenario.top_z + geom.tip_radius - indent,
                yaw: wrap_deg(symmetric(rng, ranges.feature_angle)),
            },
            ContactType::Edge => Pose4 {
                x: symmetric(rng, ranges.lateral_position),
                y: uniform(rng, ranges.edge_offset.0, ranges.edge_offset.1),
                z: scenario.top_z + geom.tip_radius - indent,
                // pose_angle is the edge orientation in the sensor frame:
                // yawing the sensor by -angle rotates the edge by +angle.
                yaw: wrap_deg(-angle),
            },
        };
        let shear = ShearVector {
            x: symmetric(rng, ranges.lateral_shear),
            y: symmetric(rng, ranges.lateral_shear),
            z: symmetric(rng, ranges.vertical_shear),
            yaw: symmetric(rng, ranges.yaw_shear),
        };
        // Invert `anchor.offset_local(shear) == current` for the anchor.
        let anchor_yaw = wrap_deg(current.yaw - shear.yaw);
        let d = Pose4 { x: 0.0, y: 0.0, z: 0.0, yaw: anchor_yaw }
            .rotate([shear.x, shear.y, shear.z]);
        let anchor = Pose4 {
            x: current.x - d[0],
            y: current.y - d[1],
            z: current.z - d[2],
            yaw: anchor_yaw,
        };

        let pen_anchor = tip_penetration(&scenario.shape, &anchor, geom);
        let pen_current = tip_penetration(&scenario.shape, &current, geom);
        let over = geom.tip_radius * 2.0;
        if pen_anchor < CONTACT_MARGIN
            || pen_current < CONTACT_MARGIN
            || pen_anchor > over
            || pen_current > over
        {
            continue;
        }
        let pose_angle = match scenario.contact_type {
            ContactType::Surface => 0.0,
            ContactType::Edge => angle,
        };
        let label = ContactLabel { pose_depth: indent, pose_angle, shear };
        return Ok((anchor, current, label));
    }
    Err(Error::ContactSampling {
        attempts: MAX_ATTEMPTS,
        detail: format!(
            "object {} with indent range {:?}",
            scenario.object_id, ranges.indent
        ),
    })
}
