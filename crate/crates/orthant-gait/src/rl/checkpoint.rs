//! Policy checkpoints: a versioned JSON dump of all parameter arrays
//! (with their shapes) and the training configuration that produced them.
//! Written atomically (temp file + rename); the format is stable across
//! crate versions and validated on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rl::policy::PolicyParams;
use crate::rl::ppo::TrainConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub train_config: TrainConfig,
    pub policy: PolicyParams,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("checkpoint version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    Version { found: u32 },
    #[error("checkpoint parameter arrays have inconsistent shapes")]
    BadShapes,
}

/// Serializes `policy` + `train_config` to `path`, atomically.
pub fn save_checkpoint(
    path: &Path,
    policy: &PolicyParams,
    train_config: &TrainConfig,
) -> Result<(), CheckpointError> {
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        train_config: train_config.clone(),
        policy: policy.clone(),
    };
    let json = serde_json::to_string(&checkpoint)?;
    write_atomic(path, json.as_bytes())?;
    Ok(())
}

/// Loads and validates a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<(PolicyParams, TrainConfig), CheckpointError> {
    let text = fs::read_to_string(path)?;
    let checkpoint: Checkpoint = serde_json::from_str(&text)?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version { found: checkpoint.version });
    }
    if !checkpoint.policy.shapes_valid() {
        return Err(CheckpointError::BadShapes);
    }
    Ok((checkpoint.policy, checkpoint.train_config))
}

/// Writes bytes to a sibling temp file then renames over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = match path.file_name().and_then(|n| n.to_str()) {
        Some(name) => path.with_file_name(format!("{name}.tmp")),
        None => return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "bad path")),
    };
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
