use thiserror::Error;

/// Errors shared across the contact simulation and learning pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid {what}: {why}")]
    InvalidParameter { what: &'static str, why: String },

    #[error("sensor over-penetration: tip center is {depth:.3} mm inside the object")]
    OverPenetration { depth: f64 },

    #[error("failed to sample an in-contact pose after {attempts} attempts ({detail})")]
    ContactSampling { attempts: usize, detail: String },

    #[error("image shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize), b: (usize, usize) },

    #[error("image {size}x{size} smaller than the {window}x{window} comparison window")]
    WindowTooLarge { size: usize, window: usize },

    #[error("dataset record {index}: {why}")]
    Record { index: usize, why: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("contact lost at step {step}")]
    ContactLost { step: usize },

    #[error("task failed at step {step}: {why}")]
    Task { step: usize, why: String },

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
