//! Closed-loop tactile servo tasks: leader/follower tracking and co-lifting.
//!
//! A leader object slides along a trajectory while the follower sensor stays
//! in contact, servoing on the estimated shear, depth, and yaw. The shear
//! convention is the drag direction: the displacement of the contact anchor
//! relative to the current sensor pose, both expressed in the object frame,
//! so a positive-x shear means the object has dragged ahead in +x and the
//! proportional controller moves the sensor the same way.

mod traj;

pub use traj::TrajectorySpec;

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::contact::tip_penetration;
use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::markers::SensorModel;
use crate::pose::{compute_shear_pose, Pose4, ShearVector};
use crate::sensor::render_depth;
use crate::shape::{ObjectShape, ShapeKind};

/// Proportional servo gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoGains {
    /// Lateral (and vertical-shear) correction gain.
    pub k_shear_xy: f64,
    /// Rotational correction gain.
    pub k_shear_yaw: f64,
    /// Depth regulation gain.
    pub k_depth: f64,
    /// Per-component translational step clamp, mm.
    pub step_limit: f64,
}

impl Default for ServoGains {
    fn default() -> Self {
        Self { k_shear_xy: 0.8, k_shear_yaw: 0.5, k_depth: 0.5, step_limit: 2.0 }
    }
}

/// How the sensor is mounted relative to gravity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mount {
    /// Sensor axis parallel to gravity: no lateral gravity component.
    Vertical,
    /// Sensor axis horizontal: gravity drags the membrane along the sensor's
    /// -y axis.
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub trajectory: TrajectorySpec,
    pub steps: usize,
    /// Indentation setpoint, mm.
    pub depth_ref: f64,
    pub gains: ServoGains,
    pub mount: Mount,
    /// Magnitude of the constant membrane shear induced by the held load
    /// under a non-vertical mount, mm.
    pub gravity_bias: f64,
    /// Initial lateral offset of the sensor from the contact center, mm.
    pub initial_offset: [f64; 2],
}

impl TaskConfig {
    pub fn tracking(trajectory: TrajectorySpec) -> Self {
        Self {
            trajectory,
            steps: 200,
            depth_ref: 1.0,
            gains: ServoGains::default(),
            mount: Mount::Vertical,
            gravity_bias: 0.0,
            initial_offset: [0.0, 0.0],
        }
    }

    /// Co-lifting: the pair carries the object on a horizontal mount, so the
    /// load leaves a constant gravity shear on the membrane.
    pub fn colift(trajectory: TrajectorySpec, gravity_bias: f64) -> Self {
        Self {
            mount: Mount::Horizontal,
            gravity_bias,
            ..Self::tracking(trajectory)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be > 0".into()));
        }
        if !(self.depth_ref > 0.0) || self.gravity_bias < 0.0 {
            return Err(Error::Config("depth_ref must be > 0, gravity_bias >= 0".into()));
        }
        Ok(())
    }

    /// Constant shear offset the mount adds to what the membrane feels.
    fn bias_vector(&self) -> ShearVector {
        match self.mount {
            Mount::Vertical => ShearVector::ZERO,
            Mount::Horizontal => ShearVector::new(0.0, -self.gravity_bias, 0.0, 0.0),
        }
    }
}

/// Where the servo gets its shear and depth estimates.
pub enum ShearSource<'a> {
    /// Ground-truth poses (what the membrane feels, including gravity bias).
    Oracle,
    /// A trained estimator reading the synthetic-real tactile image.
    Estimator(&'a mut Estimator),
}

/// One control cycle of the log.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub object_pose: Pose4,
    pub sensor_pose: Pose4,
    /// Shear used by the controller (estimated or oracle).
    pub shear: ShearVector,
    /// Depth used by the controller, mm.
    pub depth: f64,
    pub in_contact: bool,
    /// Lateral tracking error after the servo step, mm.
    pub error: f64,
    /// Signed tracking error along the sensor-frame y axis (the gravity axis
    /// under a horizontal mount), mm.
    pub error_y: f64,
}

/// Full task trace plus summary statistics over in-contact steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskLog {
    pub config: TaskConfig,
    pub steps: Vec<StepLog>,
    pub mean_error: f64,
    pub std_error: f64,
    pub max_error: f64,
    /// Mean signed error along the sensor-frame y axis.
    pub mean_error_y: f64,
    pub first_contact_loss: Option<usize>,
}

impl TaskLog {
    /// One JSON object per line: the summary first, then every step.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        serde_json::to_writer(
            &mut out,
            &serde_json::json!({
                "config": self.config,
                "mean_error": self.mean_error,
                "std_error": self.std_error,
                "max_error": self.max_error,
                "mean_error_y": self.mean_error_y,
                "first_contact_loss": self.first_contact_loss,
            }),
        )?;
        out.push(b'\n');
        for s in &self.steps {
            serde_json::to_writer(&mut out, s)?;
            out.push(b'\n');
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&out)?;
        Ok(())
    }
}

/// The object both tasks manipulate: a flat-topped block large enough for
/// the contact patch, small enough that a stalled follower slides off.
fn task_object() -> ObjectShape {
    ObjectShape::new(
        ShapeKind::Box { half_extents: [12.0, 12.0, 10.0] },
        Pose4 { x: 0.0, y: 0.0, z: -10.0, yaw: 0.0 },
    )
    .expect("valid task object")
}

/// Run a tracking or co-lifting task. The leader object follows the
/// trajectory; the follower sensor servos on the shear source each cycle.
pub fn run_task(
    config: &TaskConfig,
    sensor_model: &SensorModel,
    mut source: ShearSource<'_>,
) -> Result<TaskLog> {
    config.validate()?;
    let geom = &sensor_model.geom;
    let local = task_object();
    let bias = config.bias_vector();

    // Initial contact: sensor over the object center with the configured
    // indentation, optionally offset laterally.
    let mut sensor = Pose4 {
        x: config.initial_offset[0],
        y: config.initial_offset[1],
        z: geom.tip_radius - config.depth_ref,
        yaw: 0.0,
    };
    let mut anchor_rel: Option<Pose4> = None;
    let mut steps = Vec::with_capacity(config.steps);
    let mut first_loss = None;

    for step in 0..config.steps {
        // Leader moves first.
        let t = (step + 1) as f64 / config.steps as f64;
        let object_pose = config.trajectory.offset_at(t);
        let shape = ObjectShape { kind: local.kind.clone(), pose: object_pose.compose(&local.pose) };

        let sensor_rel = sensor.relative_to(&object_pose);
        let penetration = tip_penetration(&shape, &sensor, geom);
        let in_contact = penetration > 0.0;

        let (shear, depth) = if in_contact {
            let anchor = *anchor_rel.get_or_insert(sensor_rel);
            // Drag convention: anchor displacement relative to the current
            // pose, in the object frame.
            let felt = compute_shear_pose(&sensor_rel, &anchor);
            let felt = ShearVector::new(
                felt.x + bias.x,
                felt.y + bias.y,
                felt.z + bias.z,
                felt.yaw + bias.yaw,
            );
            match &mut source {
                ShearSource::Oracle => (felt, penetration.min(geom.max_depth)),
                ShearSource::Estimator(est) => {
                    let depth_img = render_depth(&sensor, &shape, geom)?;
                    let image = sensor_model.real_image(&depth_img, &felt);
                    let (mean, _) = est.predict(&image);
                    let s = if mean.len() >= 6 {
                        ShearVector::new(mean[2], mean[3], mean[4], mean[5])
                    } else {
                        ShearVector::new(mean[2], mean[3], 0.0, 0.0)
                    };
                    (s, mean[0])
                }
            }
        } else {
            // Contact lost: the membrane reads zero shear and zero depth, so
            // the depth term drives the sensor back down until it re-contacts;
            // re-anchor on the next contact.
            anchor_rel = None;
            first_loss.get_or_insert(step);
            (ShearVector::ZERO, 0.0)
        };

        // Proportional servo with per-component translational clamping.
        let g = &config.gains;
        let clamp = |v: f64| v.clamp(-g.step_limit, g.step_limit);
        let dx = clamp(g.k_shear_xy * shear.x);
        let dy = clamp(g.k_shear_xy * shear.y);
        let dz = clamp(g.k_depth * (depth - config.depth_ref) + g.k_shear_xy * shear.z);
        let dyaw = g.k_shear_yaw * shear.yaw;
        sensor = sensor.offset_local([dx, dy, dz], dyaw);

        // Error after the servo step: lateral distance from where the anchor
        // point now sits on the moving object.
        let target_rel = anchor_rel.unwrap_or(Pose4 {
            x: 0.0,
            y: 0.0,
            z: geom.tip_radius - config.depth_ref,
            yaw: 0.0,
        });
        let target = object_pose.transform_point(target_rel.xyz());
        let ex = sensor.x - target[0];
        let ey = sensor.y - target[1];
        let error = (ex * ex + ey * ey).sqrt();
        // Signed error along the sensor-frame y axis.
        let yr = (-sensor.yaw).to_radians();
        let error_y = yr.sin() * ex + yr.cos() * ey;

        steps.push(StepLog {
            step,
            object_pose,
            sensor_pose: sensor,
            shear,
            depth,
            in_contact,
            error,
            error_y,
        });
    }

    let contact_steps: Vec<&StepLog> = steps.iter().filter(|s| s.in_contact).collect();
    if contact_steps.is_empty() {
        return Err(Error::ContactLost { step: 0 });
    }
    let n = contact_steps.len() as f64;
    let mean_error = contact_steps.iter().map(|s| s.error).sum::<f64>() / n;
    let var = contact_steps
        .iter()
        .map(|s| (s.error - mean_error) * (s.error - mean_error))
        .sum::<f64>()
        / n;
    let max_error = contact_steps.iter().map(|s| s.error).fold(0.0, f64::max);
    let mean_error_y = contact_steps.iter().map(|s| s.error_y).sum::<f64>() / n;

    Ok(TaskLog {
        config: *config,
        steps,
        mean_error,
        std_error: var.sqrt(),
        max_error,
        mean_error_y,
        first_contact_loss: first_loss,
    })
}
