//! Arbitrary-order differentiation of programs by propagating truncated
//! multi-tensor series, with an operator layer on top: generalized shifts,
//! the composition operator, order reduction, closed-form reductions and
//! fractional iteration.

pub mod error;
pub mod iterators;
pub mod multitensor;
pub mod operators;
pub mod program;
pub mod reducesum;
pub mod sexpr;

pub use error::{Error, Result};
pub use multitensor::{AlgebraProduct, BilinearMap, MultiTensor, Shape};
pub use operators::{Partition, TensorSeries};
pub use program::{tensor_network, DerivativeTower, Node, Primitive, Program, ProgramSignature};
