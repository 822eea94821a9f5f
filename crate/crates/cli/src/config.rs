//! Config-file loading and flag/file/default precedence.
//!
//! Every subcommand resolves its parameters in three layers: built-in
//! preset defaults, then an optional TOML config file, then command-line
//! flags. Later layers win field by field.

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use std::fmt;
use std::fs;
use std::path::PathBuf;

/// A user error: bad arguments or an invalid configuration. Mapped to
/// exit code 2 by `main`.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for Usage {}

/// Load the override layer from a TOML file, or the empty default when no
/// file was given. Unknown keys are rejected.
pub fn load_file_overrides<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config file {}", p.display()))?;
            toml::from_str(&text).map_err(|e| {
                anyhow::Error::new(Usage(format!("invalid config file {}: {e}", p.display())))
            })
        }
    }
}

/// Field-wise merge of two override layers; `flags` wins where set.
macro_rules! merge_overrides {
    ($file:expr, $flags:expr, { $($field:ident),* $(,)? }) => {{
        let mut merged = $file;
        $(
            if $flags.$field.is_some() {
                merged.$field = $flags.$field.clone();
            }
        )*
        merged
    }};
}

pub(crate) use merge_overrides;
