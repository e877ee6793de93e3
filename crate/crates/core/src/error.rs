use thiserror::Error;

use crate::multitensor::Shape;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: Shape, right: Shape },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("component {index} out of range for order {order}")]
    ComponentOutOfRange { index: usize, order: usize },

    #[error("domain error at {path}: {message}")]
    Domain { path: String, message: String },

    #[error("base point mismatch: outer tower evaluated at {expected:?}, inner value is {got:?}")]
    BasePointMismatch { expected: Vec<f64>, got: Vec<f64> },

    #[error("order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),

    #[error("cannot reduce the order of an order-0 tower")]
    NothingToReduce,

    #[error("empty program chain")]
    EmptyChain,

    #[error("fixed point search did not converge after {iterations} iterations (last iterate {last})")]
    NoConvergence { iterations: usize, last: f64 },

    #[error("singular Newton step at {at}: p'(v) - 1 vanishes")]
    SingularNewtonStep { at: f64 },

    #[error("fixed point {at} is not hyperbolic (multiplier {lambda})")]
    NotHyperbolic { at: f64, lambda: f64 },

    #[error("resonant multiplier {lambda}: Schroeder recurrence denominator vanishes at degree {degree}")]
    Resonance { lambda: f64, degree: usize },

    #[error("fractional iterate of order {x} is complex for negative multiplier {lambda}")]
    NegativeMultiplier { x: f64, lambda: f64 },

    #[error("singular iterating velocity at {at}: h'(v) = {derivative}")]
    SingularVelocity { at: f64, derivative: f64 },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
