//! Forward evaluation over any scalar domain.

use crate::error::{DomainError, EvalError};
use crate::ir::{NodeId, OpKind, WellTypedGraph};
use crate::params::ParamStore;
use crate::scalar::ScalarDomain;
use crate::shape::Shape;
use crate::tensor::TensorValue;

/// Typed input context: one tensor per graph input (ascending node id), then
/// the parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct Context<S> {
    pub inputs: Vec<TensorValue<S>>,
    pub params: ParamStore<S>,
}

impl<S> Context<S> {
    pub fn new(inputs: Vec<TensorValue<S>>, params: ParamStore<S>) -> Self {
        Context { inputs, params }
    }

    /// All context tensors in order: inputs, then store entries.
    pub fn tensors(&self) -> impl Iterator<Item = &TensorValue<S>> {
        self.inputs.iter().chain(self.params.values())
    }

    pub fn map<T>(&self, mut f: impl FnMut(&TensorValue<S>) -> TensorValue<T>) -> Context<T> {
        Context {
            inputs: self.inputs.iter().map(&mut f).collect(),
            params: self.params.map(f),
        }
    }
}

impl<S: ScalarDomain> Context<S> {
    /// Zero context with the layout of `other`.
    pub fn zeros_like<T>(other: &Context<T>) -> Self {
        Context {
            inputs: other
                .inputs
                .iter()
                .map(|t| TensorValue::zeros(t.shape().clone()))
                .collect(),
            params: ParamStore::zeros_like(&other.params),
        }
    }
}

impl Context<f64> {
    /// Context inner product: sum of the per-tensor inner products.
    pub fn dot(&self, other: &Context<f64>) -> f64 {
        self.tensors()
            .zip(other.tensors())
            .map(|(a, b)| {
                a.data()
                    .iter()
                    .zip(b.data())
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn convert<S: ScalarDomain>(&self) -> Result<Context<S>, DomainError> {
        Ok(Context {
            inputs: self
                .inputs
                .iter()
                .map(|t| t.convert())
                .collect::<Result<_, _>>()?,
            params: self.params.convert()?,
        })
    }
}

/// Forward trace: one value per node id.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeValues<S> {
    values: Vec<TensorValue<S>>,
    output: NodeId,
}

impl<S> NodeValues<S> {
    pub fn get(&self, id: NodeId) -> &TensorValue<S> {
        &self.values[id]
    }

    pub fn output(&self) -> &TensorValue<S> {
        &self.values[self.output]
    }

    pub fn all(&self) -> &[TensorValue<S>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Checks that `ctx` matches the graph's inputs and the parameters it reads.
pub fn check_context<S>(g: &WellTypedGraph, ctx: &Context<S>) -> Result<(), EvalError> {
    if ctx.inputs.len() != g.inputs().len() {
        return Err(EvalError::ContextLength {
            expected: g.inputs().len(),
            actual: ctx.inputs.len(),
        });
    }
    for (index, (&id, t)) in g.inputs().iter().zip(&ctx.inputs).enumerate() {
        let expected = &g.node(id).out_shape;
        if t.shape() != expected {
            return Err(EvalError::Context {
                index,
                expected: expected.clone(),
                actual: t.shape().clone(),
            });
        }
    }
    for (key, shape) in g.param_shapes() {
        let position = ctx.params.keys().position(|k| k == key);
        match position.and_then(|p| ctx.params.values().nth(p)) {
            Some(t) if t.shape() == shape => {}
            found => {
                return Err(EvalError::Context {
                    index: g.inputs().len() + position.unwrap_or(ctx.params.len()),
                    expected: shape.clone(),
                    actual: found.map(|t| t.shape().clone()).unwrap_or(Shape::Scalar),
                })
            }
        }
    }
    Ok(())
}

pub(crate) fn sum<S: ScalarDomain>(xs: impl IntoIterator<Item = S>) -> Result<S, DomainError> {
    let mut it = xs.into_iter();
    let Some(mut acc) = it.next() else {
        return Ok(S::zero());
    };
    for x in it {
        acc = acc.add(&x)?;
    }
    Ok(acc)
}

/// Splits a shape around `axis` into `(outer, n, inner)` for lane iteration:
/// lane `(o, i)` holds offsets `o*n*inner + k*inner + i` for `k < n`.
pub(crate) fn lanes(shape: &Shape, axis: usize) -> (usize, usize, usize) {
    let dims = shape.dims();
    let outer = dims[..axis].iter().product();
    let inner = dims[axis + 1..].iter().product();
    (outer, dims[axis], inner)
}

pub(crate) fn linear_apply<S: ScalarDomain>(
    w: &TensorValue<S>,
    b: Option<&TensorValue<S>>,
    x: &TensorValue<S>,
    in_dim: usize,
    out_dim: usize,
    out_shape: &Shape,
) -> Result<TensorValue<S>, DomainError> {
    let rows = x.len() / in_dim;
    let (wd, xd) = (w.data(), x.data());
    let mut out = Vec::with_capacity(rows * out_dim);
    for r in 0..rows {
        let xr = &xd[r * in_dim..(r + 1) * in_dim];
        for o in 0..out_dim {
            let wr = &wd[o * in_dim..(o + 1) * in_dim];
            let mut acc = sum(wr
                .iter()
                .zip(xr)
                .map(|(a, b)| a.mul(b))
                .collect::<Result<Vec<_>, _>>()?)?;
            if let Some(b) = b {
                acc = acc.add(&b.data()[o])?;
            }
            out.push(acc);
        }
    }
    Ok(TensorValue::new(out_shape.clone(), out).expect("linear output size"))
}

pub(crate) fn matmul_apply<S: ScalarDomain>(
    a: &TensorValue<S>,
    b: &TensorValue<S>,
    out_shape: &Shape,
) -> Result<TensorValue<S>, DomainError> {
    let ad = a.shape().dims();
    let (m, k) = (ad[0], ad[1]);
    let n = b.len() / k;
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let terms = (0..k)
                .map(|t| a.data()[i * k + t].mul(&b.data()[t * n + j]))
                .collect::<Result<Vec<_>, _>>()?;
            out.push(sum(terms)?);
        }
    }
    Ok(TensorValue::new(out_shape.clone(), out).expect("matmul output size"))
}

/// Max-shifted softmax along `axis`.
pub(crate) fn softmax_apply<S: ScalarDomain>(
    x: &TensorValue<S>,
    axis: usize,
) -> Result<TensorValue<S>, DomainError> {
    let (outer, n, inner) = lanes(x.shape(), axis);
    let mut out = x.data().to_vec();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| o * n * inner + k * inner + i;
            let mut m = x.data()[idx(0)].clone();
            for k in 1..n {
                m = m.max(&x.data()[idx(k)]);
            }
            let e = (0..n)
                .map(|k| x.data()[idx(k)].sub(&m)?.exp())
                .collect::<Result<Vec<_>, _>>()?;
            let s = sum(e.iter().cloned())?;
            for (k, ek) in e.iter().enumerate() {
                out[idx(k)] = ek.div(&s)?;
            }
        }
    }
    Ok(TensorValue::new(x.shape().clone(), out).expect("softmax shape"))
}

pub(crate) fn mse_apply<S: ScalarDomain>(
    a: &TensorValue<S>,
    b: &TensorValue<S>,
) -> Result<S, DomainError> {
    let sq = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x.sub(y)?.sqr())
        .collect::<Result<Vec<_>, _>>()?;
    sum(sq)?.div(&S::from_f64(a.len() as f64)?)
}

/// Applies a non-input primitive to its parent values.
pub fn apply_op<S: ScalarDomain>(
    kind: &OpKind,
    out_shape: &Shape,
    parents: &[&TensorValue<S>],
    params: &ParamStore<S>,
) -> Result<TensorValue<S>, DomainError> {
    let missing = || DomainError::Invalid("parameter missing from store");
    use OpKind::*;
    Ok(match kind {
        Input => return Err(DomainError::Invalid("input nodes read the context")),
        Param { key } => params.get(key).ok_or_else(missing)?.clone(),
        Linear {
            in_dim,
            out_dim,
            weight,
            bias,
        } => {
            let w = params.get(weight).ok_or_else(missing)?;
            let b = match bias {
                Some(k) => Some(params.get(k).ok_or_else(missing)?),
                None => None,
            };
            linear_apply(w, b, parents[0], *in_dim, *out_dim, out_shape)?
        }
        Matmul => matmul_apply(parents[0], parents[1], out_shape)?,
        Add => parents[0].zip_with(parents[1], |a, b| a.add(b))?,
        Sub => parents[0].zip_with(parents[1], |a, b| a.sub(b))?,
        MulElem => parents[0].zip_with(parents[1], |a, b| a.mul(b))?,
        Relu => parents[0].map(|a| a.relu()),
        Tanh => parents[0].try_map(|a| a.tanh())?,
        Sigmoid => parents[0].try_map(|a| a.sigmoid())?,
        Exp => parents[0].try_map(|a| a.exp())?,
        ReduceSum => TensorValue::scalar(sum(parents[0].data().iter().cloned())?),
        ReduceMean => {
            let s = sum(parents[0].data().iter().cloned())?;
            TensorValue::scalar(s.div(&S::from_f64(parents[0].len() as f64)?)?)
        }
        Reshape { .. } | Flatten => parents[0]
            .clone()
            .reshaped(out_shape.clone())
            .expect("validated size"),
        MseLoss => TensorValue::scalar(mse_apply(parents[0], parents[1])?),
        Softmax { axis } => softmax_apply(parents[0], *axis)?,
    })
}

/// Evaluates every node in ascending id order.
pub fn eval_graph<S: ScalarDomain>(
    g: &WellTypedGraph,
    ctx: &Context<S>,
) -> Result<NodeValues<S>, EvalError> {
    check_context(g, ctx)?;
    let mut values: Vec<TensorValue<S>> = Vec::with_capacity(g.len());
    let mut next_input = 0;
    for node in g.nodes() {
        let v = if matches!(node.kind, OpKind::Input) {
            next_input += 1;
            ctx.inputs[next_input - 1].clone()
        } else {
            let parents: Vec<&TensorValue<S>> = node.parents.iter().map(|&p| &values[p]).collect();
            apply_op(&node.kind, &node.out_shape, &parents, &ctx.params).map_err(|cause| {
                EvalError::Domain {
                    node: node.id,
                    cause,
                }
            })?
        };
        values.push(v);
    }
    Ok(NodeValues {
        values,
        output: g.output(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{validate_graph, GraphBuilder};
    use crate::Fp32;

    fn t(shape: Shape, d: &[f64]) -> TensorValue<f64> {
        TensorValue::new(shape, d.to_vec()).unwrap()
    }

    #[test]
    fn linear_example() {
        let mut b = GraphBuilder::new();
        let x = b.input(Shape::vector(1));
        let y = b.linear(x, 1, 1, "w", Some("b"));
        let mut p = ParamStore::new();
        p.insert("w", t(Shape::matrix(1, 1), &[2.0]));
        p.insert("b", t(Shape::vector(1), &[-1.0]));
        let g = validate_graph(&b.finish(y), &p).unwrap();
        let v = eval_graph(&g, &Context::new(vec![t(Shape::vector(1), &[3.0])], p)).unwrap();
        assert_eq!(v.output().data(), &[5.0]);
    }

    #[test]
    fn relu_and_mse() {
        let mut b = GraphBuilder::new();
        let x = b.input(Shape::vector(3));
        let r = b.relu(x);
        let l = b.mse_loss(x, x);
        let _ = r;
        let g = validate_graph(&b.finish(l), &ParamStore::<f64>::new()).unwrap();
        let v = eval_graph(
            &g,
            &Context::new(
                vec![t(Shape::vector(3), &[-2.0, 0.0, 3.0])],
                ParamStore::new(),
            ),
        )
        .unwrap();
        assert_eq!(v.get(1).data(), &[0.0, 0.0, 3.0]);
        assert_eq!(v.output().data(), &[0.0]);
    }

    #[test]
    fn softmax_shift_matches_unshifted() {
        let x = t(Shape::matrix(2, 3), &[0.5, -1.0, 2.0, 10.0, 11.0, 9.5]);
        for axis in 0..2 {
            let s = softmax_apply(&x, axis).unwrap();
            let (outer, n, inner) = lanes(x.shape(), axis);
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |k: usize| o * n * inner + k * inner + i;
                    let z: f64 = (0..n).map(|k| x.data()[idx(k)].exp()).sum();
                    for k in 0..n {
                        let want = x.data()[idx(k)].exp() / z;
                        assert!((s.data()[idx(k)] - want).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn fp32_overflow_reports_node() {
        let mut b = GraphBuilder::new();
        let x = b.input(Shape::vector(1));
        let e = b.exp(x);
        let g = validate_graph(&b.finish(e), &ParamStore::<f64>::new()).unwrap();
        let ctx = Context::new(
            vec![TensorValue::scalar(Fp32::new(100.0).unwrap())
                .reshaped(Shape::vector(1))
                .unwrap()],
            ParamStore::new(),
        );
        let err = eval_graph(&g, &ctx).unwrap_err();
        assert_eq!(
            err,
            EvalError::Domain {
                node: 1,
                cause: DomainError::Overflow
            }
        );
    }

    #[test]
    fn context_shape_mismatch() {
        let mut b = GraphBuilder::new();
        let x = b.input(Shape::vector(2));
        let g = validate_graph(&b.finish(x), &ParamStore::<f64>::new()).unwrap();
        let ctx = Context::new(
            vec![t(Shape::vector(3), &[1.0, 2.0, 3.0])],
            ParamStore::new(),
        );
        assert!(matches!(
            eval_graph(&g, &ctx),
            Err(EvalError::Context { index: 0, .. })
        ));
    }
}
