//! The op-tagged SSA graph, shape inference and validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{TypingError, ValidationError, ValidationRule};
use crate::params::ParamStore;
use crate::shape::Shape;

pub type NodeId = usize;

/// Primitive operations. Each tag carries only what is needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpKind {
    /// External graph input; its shape is the node's declared shape.
    Input,
    /// Named entry of the parameter store.
    Param {
        key: String,
    },
    /// `y = W x + b` with `W: [out, in]` and `b: [out]` read from the store.
    /// Accepts `[in]` or a batch `[n, in]`.
    Linear {
        in_dim: usize,
        out_dim: usize,
        weight: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<String>,
    },
    /// `[m, k] x [k, n] -> [m, n]` or `[m, k] x [k] -> [m]`.
    Matmul,
    Add,
    Sub,
    MulElem,
    Relu,
    Tanh,
    Sigmoid,
    Exp,
    /// Sum of every entry, to a scalar.
    ReduceSum,
    ReduceMean,
    Reshape {
        target: Shape,
    },
    Flatten,
    /// Mean of squared differences of two equally shaped tensors.
    MseLoss,
    Softmax {
        axis: usize,
    },
}

impl OpKind {
    pub fn arity(&self) -> usize {
        use OpKind::*;
        match self {
            Input | Param { .. } => 0,
            Linear { .. } | Relu | Tanh | Sigmoid | Exp | ReduceSum | ReduceMean => 1,
            Reshape { .. } | Flatten | Softmax { .. } => 1,
            Matmul | Add | Sub | MulElem | MseLoss => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        use OpKind::*;
        match self {
            Input => "input",
            Param { .. } => "param",
            Linear { .. } => "linear",
            Matmul => "matmul",
            Add => "add",
            Sub => "sub",
            MulElem => "mul_elem",
            Relu => "relu",
            Tanh => "tanh",
            Sigmoid => "sigmoid",
            Exp => "exp",
            ReduceSum => "reduce_sum",
            ReduceMean => "reduce_mean",
            Reshape { .. } => "reshape",
            Flatten => "flatten",
            MseLoss => "mse_loss",
            Softmax { .. } => "softmax",
        }
    }

    pub fn is_elementwise_unary(&self) -> bool {
        matches!(
            self,
            OpKind::Relu | OpKind::Tanh | OpKind::Sigmoid | OpKind::Exp
        )
    }

    /// Parameter keys this node reads.
    pub fn param_keys(&self) -> Vec<&str> {
        match self {
            OpKind::Param { key } => vec![key],
            OpKind::Linear { weight, bias, .. } => {
                let mut v = vec![weight.as_str()];
                if let Some(b) = bias {
                    v.push(b);
                }
                v
            }
            _ => vec![],
        }
    }
}

fn parent_err(
    op: &OpKind,
    index: usize,
    expected: impl Into<String>,
    actual: &Shape,
) -> TypingError {
    TypingError::ParentShape {
        op: op.name(),
        index,
        expected: expected.into(),
        actual: actual.clone(),
    }
}

/// Output shape of a non-leaf primitive from its parent shapes.
///
/// Leaves (`input`, `param`) have no inferred shape; their declared shape is
/// checked against the store during validation instead.
pub fn infer_shape(kind: &OpKind, parents: &[Shape]) -> Result<Shape, TypingError> {
    if parents.len() != kind.arity() {
        return Err(TypingError::Arity {
            op: kind.name(),
            expected: kind.arity(),
            actual: parents.len(),
        });
    }
    use OpKind::*;
    match kind {
        Input | Param { .. } => Err(TypingError::Invalid {
            op: kind.name(),
            detail: "leaf shapes are declared, not inferred".into(),
        }),
        Linear {
            in_dim, out_dim, ..
        } => {
            if *in_dim == 0 || *out_dim == 0 {
                return Err(TypingError::Invalid {
                    op: kind.name(),
                    detail: "dimensions must be positive".into(),
                });
            }
            match parents[0].dims().as_slice() {
                [n] if n == in_dim => Ok(Shape::vector(*out_dim)),
                [b, n] if n == in_dim => Ok(Shape::matrix(*b, *out_dim)),
                _ => Err(parent_err(
                    kind,
                    0,
                    format!("[{in_dim}] or [n, {in_dim}]"),
                    &parents[0],
                )),
            }
        }
        Matmul => {
            let a = parents[0].dims();
            let b = parents[1].dims();
            let (m, k) = match a.as_slice() {
                [m, k] => (*m, *k),
                _ => return Err(parent_err(kind, 0, "[m, k]", &parents[0])),
            };
            match b.as_slice() {
                [k2, n] if *k2 == k => Ok(Shape::matrix(m, *n)),
                [k2] if *k2 == k => Ok(Shape::vector(m)),
                _ => Err(parent_err(
                    kind,
                    1,
                    format!("[{k}, n] or [{k}]"),
                    &parents[1],
                )),
            }
        }
        Add | Sub | MulElem | MseLoss => {
            if parents[0] != parents[1] {
                return Err(parent_err(kind, 1, parents[0].to_string(), &parents[1]));
            }
            if matches!(kind, MseLoss) {
                Ok(Shape::Scalar)
            } else {
                Ok(parents[0].clone())
            }
        }
        Relu | Tanh | Sigmoid | Exp => Ok(parents[0].clone()),
        ReduceSum | ReduceMean => Ok(Shape::Scalar),
        Reshape { target } => {
            if target.size() != parents[0].size() {
                return Err(parent_err(
                    kind,
                    0,
                    format!("size {}", target.size()),
                    &parents[0],
                ));
            }
            Ok(target.clone())
        }
        Flatten => Ok(Shape::vector(parents[0].size())),
        Softmax { axis } => {
            if *axis >= parents[0].rank() {
                return Err(parent_err(kind, 0, format!("rank > {axis}"), &parents[0]));
            }
            Ok(parents[0].clone())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub parents: Vec<NodeId>,
    pub kind: OpKind,
    pub out_shape: Shape,
}

/// Raw, unvalidated graph. Nodes are indexed by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub nodes: Vec<Node>,
    pub output: NodeId,
}

/// Incremental graph construction. Convenience methods infer the output
/// shape; a typing failure leaves a scalar placeholder that validation reports.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape_of(&self, id: NodeId) -> &Shape {
        &self.nodes[id].out_shape
    }

    /// Appends a node with an explicit declared shape.
    pub fn push(&mut self, kind: OpKind, parents: Vec<NodeId>, out_shape: Shape) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            parents,
            kind,
            out_shape,
        });
        id
    }

    /// Appends a node whose shape is inferred from its parents.
    pub fn op(&mut self, kind: OpKind, parents: &[NodeId]) -> NodeId {
        let shapes: Option<Vec<Shape>> = parents
            .iter()
            .map(|&p| self.nodes.get(p).map(|n| n.out_shape.clone()))
            .collect();
        let shape = shapes
            .and_then(|s| infer_shape(&kind, &s).ok())
            .unwrap_or(Shape::Scalar);
        self.push(kind, parents.to_vec(), shape)
    }

    pub fn input(&mut self, shape: Shape) -> NodeId {
        self.push(OpKind::Input, vec![], shape)
    }

    pub fn param(&mut self, key: &str, shape: Shape) -> NodeId {
        self.push(OpKind::Param { key: key.into() }, vec![], shape)
    }

    pub fn linear(
        &mut self,
        x: NodeId,
        in_dim: usize,
        out_dim: usize,
        weight: &str,
        bias: Option<&str>,
    ) -> NodeId {
        self.op(
            OpKind::Linear {
                in_dim,
                out_dim,
                weight: weight.into(),
                bias: bias.map(Into::into),
            },
            &[x],
        )
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(OpKind::Matmul, &[a, b])
    }
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(OpKind::Add, &[a, b])
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(OpKind::Sub, &[a, b])
    }
    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(OpKind::MulElem, &[a, b])
    }
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::Relu, &[x])
    }
    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::Tanh, &[x])
    }
    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::Sigmoid, &[x])
    }
    pub fn exp(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::Exp, &[x])
    }
    pub fn reduce_sum(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::ReduceSum, &[x])
    }
    pub fn reduce_mean(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::ReduceMean, &[x])
    }
    pub fn reshape(&mut self, x: NodeId, target: Shape) -> NodeId {
        self.op(OpKind::Reshape { target }, &[x])
    }
    pub fn flatten(&mut self, x: NodeId) -> NodeId {
        self.op(OpKind::Flatten, &[x])
    }
    pub fn mse_loss(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(OpKind::MseLoss, &[a, b])
    }
    pub fn softmax(&mut self, x: NodeId, axis: usize) -> NodeId {
        self.op(OpKind::Softmax { axis }, &[x])
    }

    pub fn finish(self, output: NodeId) -> Graph {
        Graph {
            nodes: self.nodes,
            output,
        }
    }
}

/// A graph that passed [`validate_graph`]. Immutable; every semantic
/// operation takes this rather than a raw [`Graph`].
#[derive(Debug, Clone, PartialEq)]
pub struct WellTypedGraph {
    graph: Graph,
    inputs: Vec<NodeId>,
    param_shapes: BTreeMap<String, Shape>,
}

impl WellTypedGraph {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn nodes(&self) -> &[Node] {
        &self.graph.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.graph.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.graph.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.nodes.is_empty()
    }

    pub fn output(&self) -> NodeId {
        self.graph.output
    }

    pub fn output_shape(&self) -> &Shape {
        &self.graph.nodes[self.graph.output].out_shape
    }

    /// Input node ids in ascending order; this is the context order.
    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn input_shapes(&self) -> Vec<Shape> {
        self.inputs
            .iter()
            .map(|&i| self.node(i).out_shape.clone())
            .collect()
    }

    /// Length of the flattened graph input (concatenation of all inputs).
    pub fn input_size(&self) -> usize {
        self.inputs
            .iter()
            .map(|&i| self.node(i).out_shape.size())
            .sum()
    }

    /// Offset of each input inside the flattened graph input.
    pub fn input_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.inputs
            .iter()
            .map(|&i| {
                let o = off;
                off += self.node(i).out_shape.size();
                o
            })
            .collect()
    }

    /// Shapes of every store entry the graph reads.
    pub fn param_shapes(&self) -> &BTreeMap<String, Shape> {
        &self.param_shapes
    }

    pub fn into_graph(self) -> Graph {
        self.graph
    }
}

fn fail(node: NodeId, rule: ValidationRule, detail: impl Into<String>) -> ValidationError {
    ValidationError {
        node,
        rule,
        detail: detail.into(),
    }
}

fn expect_param<S>(
    params: &ParamStore<S>,
    node: NodeId,
    key: &str,
    shape: &Shape,
    seen: &mut BTreeMap<String, Shape>,
) -> Result<(), ValidationError> {
    let Some(found) = params.shape_of(key) else {
        return Err(fail(
            node,
            ValidationRule::ParamResolution,
            format!("no store entry '{key}'"),
        ));
    };
    if found != shape {
        return Err(fail(
            node,
            ValidationRule::ParamResolution,
            format!("entry '{key}' has shape {found}, expected {shape}"),
        ));
    }
    seen.insert(key.to_string(), shape.clone());
    Ok(())
}

/// Checks SSA order, arities, shapes and parameter resolution node by node,
/// reporting the first failure.
pub fn validate_graph<S>(
    graph: &Graph,
    params: &ParamStore<S>,
) -> Result<WellTypedGraph, ValidationError> {
    let mut inputs = Vec::new();
    let mut seen = BTreeMap::new();
    for (idx, node) in graph.nodes.iter().enumerate() {
        if node.id != idx {
            return Err(fail(
                idx,
                ValidationRule::SsaOrder,
                format!("node at position {idx} has id {}", node.id),
            ));
        }
        if let Some(&p) = node.parents.iter().find(|&&p| p >= idx) {
            return Err(fail(
                idx,
                ValidationRule::SsaOrder,
                format!("parent {p} is not below {idx}"),
            ));
        }
        if node.parents.len() != node.kind.arity() {
            return Err(fail(
                idx,
                ValidationRule::Arity,
                format!(
                    "{} expects {} parents, got {}",
                    node.kind.name(),
                    node.kind.arity(),
                    node.parents.len()
                ),
            ));
        }
        match &node.kind {
            OpKind::Input => inputs.push(idx),
            OpKind::Param { key } => expect_param(params, idx, key, &node.out_shape, &mut seen)?,
            kind => {
                let shapes: Vec<Shape> = node
                    .parents
                    .iter()
                    .map(|&p| graph.nodes[p].out_shape.clone())
                    .collect();
                let inferred = infer_shape(kind, &shapes)
                    .map_err(|e| fail(idx, ValidationRule::Shape, e.to_string()))?;
                if inferred != node.out_shape {
                    return Err(fail(
                        idx,
                        ValidationRule::Shape,
                        format!("declared {}, inferred {}", node.out_shape, inferred),
                    ));
                }
                if let OpKind::Linear {
                    in_dim,
                    out_dim,
                    weight,
                    bias,
                } = kind
                {
                    expect_param(
                        params,
                        idx,
                        weight,
                        &Shape::matrix(*out_dim, *in_dim),
                        &mut seen,
                    )?;
                    if let Some(b) = bias {
                        expect_param(params, idx, b, &Shape::vector(*out_dim), &mut seen)?;
                    }
                }
            }
        }
    }
    if graph.output >= graph.nodes.len() {
        return Err(fail(
            graph.output,
            ValidationRule::Output,
            "output id is not a node",
        ));
    }
    Ok(WellTypedGraph {
        graph: graph.clone(),
        inputs,
        param_shapes: seen,
    })
}
