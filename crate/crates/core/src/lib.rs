//! Decentralized coordination of wind-disturbed unicycle agents.
//!
//! Agents steer along a blended attractive/repulsive vector field, coordinate
//! speeds with neighbors inside a communication radius, and act on their own
//! extended Kalman filter estimates. Separation thresholds are inflated by
//! bounds on the estimation error.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod disturbance;
pub mod error;
pub mod estimator;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod types;
pub mod vector_field;

pub use error::{Error, Result};
pub use types::{
    AgentParams, AgentSpec, AgentState, ControlCommand, ErrorBounds, Mode, NoiseParams, SafetyParams, ScenarioConfig,
    Vec2,
};
