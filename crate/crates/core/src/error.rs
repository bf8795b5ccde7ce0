use thiserror::Error;

use crate::shape::Shape;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("shape {0:?} has a zero dimension")]
    ZeroDim(Vec<usize>),
    #[error("data length {actual} does not match shape size {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Mismatch { expected: Shape, actual: Shape },
}

/// Failure of a scalar-domain operation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("overflow beyond the finite binary32 range")]
    Overflow,
    #[error("invalid operation: {0}")]
    Invalid(&'static str),
}

/// `inferShape` failure: which parent is wrong and why.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypingError {
    #[error("{op} expects {expected} parents, got {actual}")]
    Arity {
        op: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: parent {index} expected {expected}, got {actual}")]
    ParentShape {
        op: &'static str,
        index: usize,
        expected: String,
        actual: Shape,
    },
    #[error("{op}: {detail}")]
    Invalid { op: &'static str, detail: String },
}

/// Which well-typedness rule a node broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationRule {
    SsaOrder,
    Arity,
    Shape,
    ParamResolution,
    Output,
}

impl std::fmt::Display for ValidationRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ValidationRule::SsaOrder => "ssa-order",
            ValidationRule::Arity => "arity",
            ValidationRule::Shape => "shape",
            ValidationRule::ParamResolution => "param-resolution",
            ValidationRule::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("node {node}: {rule} violation: {detail}")]
pub struct ValidationError {
    pub node: usize,
    pub rule: ValidationRule,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("context entry {index}: expected shape {expected}, got {actual}")]
    Context {
        index: usize,
        expected: Shape,
        actual: Shape,
    },
    #[error("context has {actual} entries, graph needs {expected}")]
    ContextLength { expected: usize, actual: usize },
    #[error("node {node}: {cause}")]
    Domain { node: usize, cause: DomainError },
    #[error("node {node}: {detail}")]
    Unsupported { node: usize, detail: String },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Failure during bound propagation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("input box {index}: expected shape {expected}, got {actual}")]
    InputBox {
        index: usize,
        expected: Shape,
        actual: Shape,
    },
    #[error("expected {expected} input boxes, got {actual}")]
    InputCount { expected: usize, actual: usize },
    #[error("node {node}: {detail}")]
    Unsupported { node: usize, detail: String },
    #[error("node {node}: {cause}")]
    Domain { node: usize, cause: DomainError },
    #[error("node {node}: {cause}")]
    Relax { node: usize, cause: RelaxError },
    #[error("objective has length {actual}, output size is {expected}")]
    Objective { expected: usize, actual: usize },
}

/// Rejected relaxation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RelaxError {
    #[error("phase {beta} is inconsistent with pre-activation box [{lo}, {hi}]")]
    Phase { lo: f64, hi: f64, beta: i8 },
    #[error("alpha {0} is outside [0, 1]")]
    Alpha(f64),
    #[error("beta {0} is not one of -1, 0, 1")]
    Beta(i8),
    #[error("invalid box [{0}, {1}]")]
    Box(f64, f64),
}
