use alloc::string::String;

use crate::space::{ChannelFactor, OperatorId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("layer {layer} out of range (space has {layers} layers)")]
    UnknownLayer { layer: usize, layers: usize },
    #[error("operator {op} is not declared for layer {layer}")]
    UnknownOperator { layer: usize, op: OperatorId },
    #[error("layer {layer} is already fixed to operator {fixed}")]
    AlreadyFixed { layer: usize, fixed: OperatorId },
    #[error("architecture does not belong to the space: {0}")]
    InvalidArchitecture(String),
    #[error("no table entry for (layer {layer}, operator {op}, channel factor {factor})")]
    MissingEntry {
        layer: usize,
        op: OperatorId,
        factor: ChannelFactor,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("space has {size} architectures, above the enumeration cap of {cap}")]
    SpaceTooLarge { size: String, cap: String },
    #[error("accuracy oracle: {0}")]
    Oracle(String),
}
