use thiserror::Error;

use crate::cell_physics::CellState;
use crate::device::{PageAddr, RefIndex};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("block {block} out of range (device has {blocks})")]
    BlockOutOfRange { block: usize, blocks: usize },

    #[error("wordline {wordline} out of range (block has {wordlines})")]
    WordlineOutOfRange { wordline: usize, wordlines: usize },

    #[error("wordline {block}/{wordline} already programmed since last erase")]
    NotErased { block: usize, wordline: usize },

    #[error("wordline {block}/{wordline} is not programmed")]
    NotProgrammed { block: usize, wordline: usize },

    #[error("page length {got} bits, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("offset {offset} for {reference:?} outside register range [{min}, {max}]")]
    OffsetOutOfRange { reference: RefIndex, offset: i32, min: i32, max: i32 },

    #[error("{reference:?} would sit at {volts:.4} V, below the sensing floor {floor:.4} V")]
    BelowSensingFloor { reference: RefIndex, volts: f64, floor: f64 },

    #[error("copyback destination {0:?} is not writable")]
    DestinationNotWritable(PageAddr),

    #[error("states {lower:?} and {upper:?} are not adjacent")]
    NotAdjacent { lower: CellState, upper: CellState },

    #[error("NOT requires an all-zero LSB page")]
    NotRequiresZeroLsb,

    #[error("insufficient capacity: need {needed} erased wordlines, {available} available")]
    InsufficientCapacity { needed: usize, available: usize },

    #[error("the {op} plan does not use {reference:?}")]
    ReferenceNotUsed { op: String, reference: RefIndex },

    #[error("unknown {kind} name `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("{0} out of range: {1}")]
    ScaleOutOfRange(&'static str, String),

    #[error("missing baseline parameters for {0}")]
    MissingParams(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("calibration infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
