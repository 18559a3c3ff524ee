//! Affordance descriptors, oracle clients and the translation of descriptors
//! into motion primitives.

mod descriptor;
mod oracle;
mod parse;
mod primitive;

use thiserror::Error;

pub use descriptor::{AffordanceDescriptor, Arrangement, SwitchType, SymbolHint};
pub use oracle::{
    oracle_from_env, AffordanceOracle, ElementRef, MockOracle, OracleRequest, SubprocessOracle,
    ORACLE_CMD_ENV, ORACLE_ENV, ORACLE_MAP_ENV,
};
pub use parse::{parse_affordance_response, parse_json_response};
pub use primitive::{
    primitives_from_descriptor, switch_plane_axes, GripperOffsets, MotionPrimitive, MotionType,
    PrimitiveSet,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffordanceError {
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("malformed oracle response: {0}")]
    MalformedResponse(String),
    #[error("inconsistent descriptor: {0}")]
    InconsistentDescriptor(String),
    #[error("toggle switches are identified but have no executable motion primitive")]
    ToggleUnsupported,
    #[error("gripper offsets must be positive, got ({0}, {1})")]
    InvalidOffsets(f64, f64),
    #[error("invalid motion primitive: {0}")]
    InvalidPrimitive(String),
}
