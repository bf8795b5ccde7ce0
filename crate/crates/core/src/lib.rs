//! Verification-first computation graphs.
//!
//! A single op-tagged SSA graph ([`ir::Graph`]) is evaluated over any
//! [`scalar::ScalarDomain`], differentiated in forward and reverse mode,
//! executed under a bit-level binary32 kernel ([`ieee32`]), bounded with
//! interval and affine relaxations ([`bounds`]), and used to replay
//! externally produced bound certificates ([`cert`]).

pub mod autodiff;
pub mod bounds;
pub mod bundle;
pub mod cert;
pub mod codec;
pub mod error;
pub mod eval;
pub mod ieee32;
pub mod ir;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod shape;
pub mod tensor;

pub use eval::{eval_graph, Context, NodeValues};
pub use ieee32::{B32Interval, B32};
pub use ir::{validate_graph, Graph, GraphBuilder, Node, NodeId, OpKind, WellTypedGraph};
pub use params::ParamStore;
pub use scalar::{Fp32, Interval, RoundingMode, ScalarDomain};
pub use shape::Shape;
pub use tensor::TensorValue;

/// Reference semantics: binary64 standing in for the reals.
pub type RealRef = f64;
/// Round-on-reals binary32 model.
pub type FP32Rounded = Fp32;
/// Outward-rounded binary64 intervals.
pub type RealInterval = Interval<f64>;
