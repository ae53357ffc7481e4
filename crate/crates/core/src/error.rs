use std::path::PathBuf;

use thiserror::Error;

use crate::material::MaterialError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Material(#[from] MaterialError),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in input field")]
    NonFiniteInput,

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("position ({x}, {z}) lies outside the grid")]
    PositionOutsideGrid { x: f64, z: f64 },

    #[error("instability detected at step {step}")]
    InstabilityDetected { step: usize },

    #[error("invalid step plan: {0}")]
    InvalidPlan(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reciprocity legs are not a valid source/receiver swap: {0}")]
    ConfigMismatch(String),

    #[error("trace length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
