//! Forward-mode (JVP) and reverse-mode (VJP) differentiation on the static graph.
//!
//! Both modes are generic over the scalar domain; the calculus claims are
//! tested over `f64`. ReLU uses derivative 0 at a pre-activation of exactly 0.

use crate::error::{DomainError, EvalError, ShapeError};
use crate::eval::{eval_graph, lanes, linear_apply, matmul_apply, sum, Context, NodeValues};
use crate::ir::{OpKind, WellTypedGraph};
use crate::scalar::ScalarDomain;
use crate::tensor::TensorValue;

type DResult<T> = Result<T, DomainError>;

fn relu_mask<S: ScalarDomain>(x: &TensorValue<S>, d: &TensorValue<S>) -> TensorValue<S> {
    let zero = S::zero();
    TensorValue::from_fn(x.shape().clone(), |i| {
        if zero.lt(&x.data()[i]) {
            d.data()[i].clone()
        } else {
            S::zero()
        }
    })
}

/// Elementwise derivative factor of a smooth unary op, from its output `y`.
fn unary_factor<S: ScalarDomain>(kind: &OpKind, y: &S) -> DResult<S> {
    match kind {
        OpKind::Tanh => S::one().sub(&y.sqr()?),
        OpKind::Sigmoid => y.mul(&S::one().sub(y)?),
        OpKind::Exp => Ok(y.clone()),
        _ => Err(DomainError::Invalid("not a smooth unary op")),
    }
}

/// `s ⊙ (d − <s, d> 1)` along each softmax lane. The map is self-adjoint, so
/// it serves both modes.
fn softmax_differential<S: ScalarDomain>(
    s: &TensorValue<S>,
    d: &TensorValue<S>,
    axis: usize,
) -> DResult<TensorValue<S>> {
    let (outer, n, inner) = lanes(s.shape(), axis);
    let mut out = d.data().to_vec();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| o * n * inner + k * inner + i;
            let inner_prod = sum((0..n)
                .map(|k| s.data()[idx(k)].mul(&d.data()[idx(k)]))
                .collect::<DResult<Vec<_>>>()?)?;
            for k in 0..n {
                out[idx(k)] = s.data()[idx(k)].mul(&d.data()[idx(k)].sub(&inner_prod)?)?;
            }
        }
    }
    Ok(TensorValue::new(s.shape().clone(), out).expect("softmax shape"))
}

fn add_t<S: ScalarDomain>(a: &TensorValue<S>, b: &TensorValue<S>) -> DResult<TensorValue<S>> {
    a.zip_with(b, |x, y| x.add(y))
}

fn count<S: ScalarDomain>(n: usize) -> DResult<S> {
    S::from_f64(n as f64)
}

/// Output tangent of the graph at `ctx` in direction `tangent`.
pub fn jvp<S: ScalarDomain>(
    g: &WellTypedGraph,
    ctx: &Context<S>,
    tangent: &Context<S>,
) -> Result<TensorValue<S>, EvalError> {
    let (_, dv) = jvp_trace(g, ctx, tangent)?;
    Ok(dv[g.output()].clone())
}

/// Forward values and per-node tangents.
pub fn jvp_trace<S: ScalarDomain>(
    g: &WellTypedGraph,
    ctx: &Context<S>,
    tangent: &Context<S>,
) -> Result<(NodeValues<S>, Vec<TensorValue<S>>), EvalError> {
    let values = eval_graph(g, ctx)?;
    crate::eval::check_context(g, tangent)?;
    let mut dv: Vec<TensorValue<S>> = Vec::with_capacity(g.len());
    let mut next_input = 0;
    for node in g.nodes() {
        let p = &node.parents;
        let x = |k: usize| values.get(p[k]);
        let dx = |k: usize, dv: &Vec<TensorValue<S>>| dv[p[k]].clone();
        let step = || -> DResult<TensorValue<S>> {
            use OpKind::*;
            Ok(match &node.kind {
                Input => unreachable!(),
                Param { key } => tangent.params.get(key).expect("checked context").clone(),
                Linear {
                    in_dim,
                    out_dim,
                    weight,
                    bias,
                } => {
                    let w = ctx.params.get(weight).expect("checked context");
                    let dw = tangent.params.get(weight).expect("checked context");
                    let db = bias
                        .as_ref()
                        .map(|b| tangent.params.get(b).expect("checked context"));
                    let a = linear_apply(w, None, &dv[p[0]], *in_dim, *out_dim, &node.out_shape)?;
                    let b = linear_apply(dw, db, x(0), *in_dim, *out_dim, &node.out_shape)?;
                    add_t(&a, &b)?
                }
                Matmul => {
                    let a = matmul_apply(&dv[p[0]], x(1), &node.out_shape)?;
                    let b = matmul_apply(x(0), &dv[p[1]], &node.out_shape)?;
                    add_t(&a, &b)?
                }
                Add => add_t(&dv[p[0]], &dv[p[1]])?,
                Sub => dv[p[0]].zip_with(&dv[p[1]], |a, b| a.sub(b))?,
                MulElem => {
                    let a = dv[p[0]].zip_with(x(1), |d, y| d.mul(y))?;
                    let b = x(0).zip_with(&dv[p[1]], |y, d| y.mul(d))?;
                    add_t(&a, &b)?
                }
                Relu => relu_mask(x(0), &dv[p[0]]),
                Tanh | Sigmoid | Exp => {
                    let y = values.get(node.id);
                    let f = y.try_map(|v| unary_factor(&node.kind, v))?;
                    f.zip_with(&dv[p[0]], |a, b| a.mul(b))?
                }
                ReduceSum => TensorValue::scalar(sum(dv[p[0]].data().iter().cloned())?),
                ReduceMean => {
                    let s = sum(dv[p[0]].data().iter().cloned())?;
                    TensorValue::scalar(s.div(&count(dv[p[0]].len())?)?)
                }
                Reshape { .. } | Flatten => dx(0, &dv)
                    .reshaped(node.out_shape.clone())
                    .expect("validated size"),
                MseLoss => {
                    let n = count::<S>(x(0).len())?;
                    let two = S::from_f64(2.0)?;
                    let diff = x(0).zip_with(x(1), |a, b| a.sub(b))?;
                    let ddiff = dv[p[0]].zip_with(&dv[p[1]], |a, b| a.sub(b))?;
                    let prods = diff.zip_with(&ddiff, |a, b| a.mul(b))?;
                    TensorValue::scalar(sum(prods.into_data())?.mul(&two)?.div(&n)?)
                }
                Softmax { axis } => softmax_differential(values.get(node.id), &dv[p[0]], *axis)?,
            })
        };
        let d = if matches!(node.kind, OpKind::Input) {
            next_input += 1;
            tangent.inputs[next_input - 1].clone()
        } else {
            step().map_err(|cause| EvalError::Domain {
                node: node.id,
                cause,
            })?
        };
        dv.push(d);
    }
    Ok((values, dv))
}

fn accumulate<S: ScalarDomain>(
    slot: &mut Option<TensorValue<S>>,
    contrib: TensorValue<S>,
) -> DResult<()> {
    match slot {
        Some(t) => t.accumulate(&contrib),
        None => {
            *slot = Some(contrib);
            Ok(())
        }
    }
}

/// Cotangents of every context tensor for output cotangent `seed`.
pub fn vjp<S: ScalarDomain>(
    g: &WellTypedGraph,
    ctx: &Context<S>,
    seed: &TensorValue<S>,
) -> Result<Context<S>, EvalError> {
    let values = eval_graph(g, ctx)?;
    vjp_with_values(g, ctx, &values, seed)
}

/// [`vjp`] reusing an existing forward trace.
pub fn vjp_with_values<S: ScalarDomain>(
    g: &WellTypedGraph,
    ctx: &Context<S>,
    values: &NodeValues<S>,
    seed: &TensorValue<S>,
) -> Result<Context<S>, EvalError> {
    if seed.shape() != g.output_shape() {
        return Err(EvalError::Shape(ShapeError::Mismatch {
            expected: g.output_shape().clone(),
            actual: seed.shape().clone(),
        }));
    }
    let mut out = Context::<S>::zeros_like(ctx);
    let mut bar: Vec<Option<TensorValue<S>>> = vec![None; g.len()];
    bar[g.output()] = Some(seed.clone());
    let input_pos: Vec<Option<usize>> = {
        let mut v = vec![None; g.len()];
        for (k, &id) in g.inputs().iter().enumerate() {
            v[id] = Some(k);
        }
        v
    };
    for node in g.nodes().iter().rev() {
        let Some(ybar) = bar[node.id].take() else {
            continue;
        };
        let p = node.parents.clone();
        let step = || -> DResult<()> {
            use OpKind::*;
            let x = |k: usize| values.get(p[k]);
            match &node.kind {
                Input => {
                    let k = input_pos[node.id].expect("input position");
                    out.inputs[k].accumulate(&ybar)?;
                }
                Param { key } => out
                    .params
                    .get_mut(key)
                    .expect("checked context")
                    .accumulate(&ybar)?,
                Linear {
                    in_dim,
                    out_dim,
                    weight,
                    bias,
                } => {
                    let (i_n, o_n) = (*in_dim, *out_dim);
                    let w = ctx.params.get(weight).expect("checked context");
                    let xv = x(0);
                    let rows = xv.len() / i_n;
                    let (wd, xd, yd) = (w.data(), xv.data(), ybar.data());
                    let mut xbar = Vec::with_capacity(xv.len());
                    for r in 0..rows {
                        for j in 0..i_n {
                            let terms = (0..o_n)
                                .map(|o| wd[o * i_n + j].mul(&yd[r * o_n + o]))
                                .collect::<DResult<Vec<_>>>()?;
                            xbar.push(sum(terms)?);
                        }
                    }
                    let mut wbar = Vec::with_capacity(w.len());
                    for o in 0..o_n {
                        for j in 0..i_n {
                            let terms = (0..rows)
                                .map(|r| yd[r * o_n + o].mul(&xd[r * i_n + j]))
                                .collect::<DResult<Vec<_>>>()?;
                            wbar.push(sum(terms)?);
                        }
                    }
                    let wbar = TensorValue::new(w.shape().clone(), wbar).expect("weight shape");
                    out.params
                        .get_mut(weight)
                        .expect("checked context")
                        .accumulate(&wbar)?;
                    if let Some(b) = bias {
                        let bbar = (0..o_n)
                            .map(|o| sum((0..rows).map(|r| yd[r * o_n + o].clone())))
                            .collect::<DResult<Vec<_>>>()?;
                        let bbar = TensorValue::new(crate::shape::Shape::vector(o_n), bbar)
                            .expect("bias shape");
                        out.params
                            .get_mut(b)
                            .expect("checked context")
                            .accumulate(&bbar)?;
                    }
                    accumulate(
                        &mut bar[p[0]],
                        TensorValue::new(xv.shape().clone(), xbar).expect("input shape"),
                    )?;
                }
                Matmul => {
                    let (a, b) = (x(0), x(1));
                    let ad = a.shape().dims();
                    let (m, k) = (ad[0], ad[1]);
                    let n = b.len() / k;
                    let (adata, bdata, cd) = (a.data(), b.data(), ybar.data());
                    let mut abar = Vec::with_capacity(m * k);
                    for i in 0..m {
                        for t in 0..k {
                            let terms = (0..n)
                                .map(|j| cd[i * n + j].mul(&bdata[t * n + j]))
                                .collect::<DResult<Vec<_>>>()?;
                            abar.push(sum(terms)?);
                        }
                    }
                    let mut bbar = Vec::with_capacity(k * n);
                    for t in 0..k {
                        for j in 0..n {
                            let terms = (0..m)
                                .map(|i| adata[i * k + t].mul(&cd[i * n + j]))
                                .collect::<DResult<Vec<_>>>()?;
                            bbar.push(sum(terms)?);
                        }
                    }
                    accumulate(
                        &mut bar[p[0]],
                        TensorValue::new(a.shape().clone(), abar).expect("lhs shape"),
                    )?;
                    accumulate(
                        &mut bar[p[1]],
                        TensorValue::new(b.shape().clone(), bbar).expect("rhs shape"),
                    )?;
                }
                Add => {
                    accumulate(&mut bar[p[0]], ybar.clone())?;
                    accumulate(&mut bar[p[1]], ybar)?;
                }
                Sub => {
                    accumulate(&mut bar[p[0]], ybar.clone())?;
                    accumulate(&mut bar[p[1]], ybar.map(|v| v.neg()))?;
                }
                MulElem => {
                    let da = ybar.zip_with(x(1), |a, b| a.mul(b))?;
                    let db = ybar.zip_with(x(0), |a, b| a.mul(b))?;
                    accumulate(&mut bar[p[0]], da)?;
                    accumulate(&mut bar[p[1]], db)?;
                }
                Relu => accumulate(&mut bar[p[0]], relu_mask(x(0), &ybar))?,
                Tanh | Sigmoid | Exp => {
                    let y = values.get(node.id);
                    let f = y.try_map(|v| unary_factor(&node.kind, v))?;
                    accumulate(&mut bar[p[0]], f.zip_with(&ybar, |a, b| a.mul(b))?)?;
                }
                ReduceSum | ReduceMean => {
                    let mut g = ybar.data()[0].clone();
                    if matches!(node.kind, ReduceMean) {
                        g = g.div(&count(x(0).len())?)?;
                    }
                    accumulate(&mut bar[p[0]], TensorValue::filled(x(0).shape().clone(), g))?;
                }
                Reshape { .. } | Flatten => {
                    accumulate(
                        &mut bar[p[0]],
                        ybar.reshaped(x(0).shape().clone()).expect("validated size"),
                    )?;
                }
                MseLoss => {
                    let k = ybar.data()[0]
                        .mul(&S::from_f64(2.0)?)?
                        .div(&count(x(0).len())?)?;
                    let da = x(0).zip_with(x(1), |a, b| a.sub(b)?.mul(&k))?;
                    accumulate(&mut bar[p[1]], da.map(|v| v.neg()))?;
                    accumulate(&mut bar[p[0]], da)?;
                }
                Softmax { axis } => {
                    let d = softmax_differential(values.get(node.id), &ybar, *axis)?;
                    accumulate(&mut bar[p[0]], d)?;
                }
            }
            Ok(())
        };
        step().map_err(|cause| EvalError::Domain {
            node: node.id,
            cause,
        })?;
    }
    Ok(out)
}

/// Gradient of a scalar-output graph with respect to the parameters.
pub fn param_grad<S: ScalarDomain>(
    g: &WellTypedGraph,
    ctx: &Context<S>,
) -> Result<(S, crate::params::ParamStore<S>), EvalError> {
    let values = eval_graph(g, ctx)?;
    let loss = values.output().data()[0].clone();
    let seed = TensorValue::filled(g.output_shape().clone(), S::one());
    let cot = vjp_with_values(g, ctx, &values, &seed)?;
    Ok((loss, cot.params))
}
