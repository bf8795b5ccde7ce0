use super::ibp::{check_input_box, enclose_params, ibp_step};
use crate::error::{BoundError, DomainError};
use crate::eval::{apply_op, linear_apply, sum};
use crate::ir::{OpKind, WellTypedGraph};
use crate::params::ParamStore;
use crate::scalar::IntervalDomain;
use crate::tensor::TensorValue;

/// `1 - tanh(x)^2` over a value box, with `tanh` enclosed monotonically and
/// the square taken tightly.
fn sech2<I: IntervalDomain>(x: &I) -> Result<I, DomainError> {
    let t = x.tanh()?;
    I::one().sub(&t.sqr()?)
}

/// Value and first-derivative enclosures `(v_i, dv_i/dx)` for every node of
/// a graph with a single scalar-sized input.
///
/// Supported: input, param, linear, add, sub, tanh, sigmoid, exp, mul_elem
/// with one input-independent side, reductions and reshapes.
pub fn deriv_ibp1<I: IntervalDomain>(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
    input_box: &[TensorValue<I>],
) -> Result<Vec<(TensorValue<I>, TensorValue<I>)>, BoundError> {
    check_input_box(g, input_box)?;
    if g.input_size() != 1 {
        return Err(BoundError::Unsupported {
            node: g.inputs().first().copied().unwrap_or(0),
            detail: "derivative pass needs a single scalar input".into(),
        });
    }
    let iparams = enclose_params::<I>(params);
    let consts = super::crown::constant_values(g, params);
    let mut out: Vec<(TensorValue<I>, TensorValue<I>)> = Vec::with_capacity(g.len());
    for node in g.nodes() {
        let domain = |cause| BoundError::Domain {
            node: node.id,
            cause,
        };
        let p = &node.parents;
        let zero_d = || TensorValue::zeros(node.out_shape.clone());
        let value = if matches!(node.kind, OpKind::Input) {
            input_box[0].clone()
        } else {
            let parents: Vec<&TensorValue<I>> = p.iter().map(|&q| &out[q].0).collect();
            ibp_step(&node.kind, &node.out_shape, &parents, &iparams).map_err(domain)?
        };
        if consts[node.id].is_some() {
            out.push((value, zero_d()));
            continue;
        }
        let d = |k: usize| &out[p[k]].1;
        use OpKind::*;
        let deriv = match &node.kind {
            Input => TensorValue::filled(node.out_shape.clone(), I::one()),
            Linear {
                in_dim,
                out_dim,
                weight,
                ..
            } => {
                let w = iparams.get(weight).expect("validated");
                linear_apply(w, None, d(0), *in_dim, *out_dim, &node.out_shape).map_err(domain)?
            }
            Add => d(0).zip_with(d(1), |a, b| a.add(b)).map_err(domain)?,
            Sub => d(0).zip_with(d(1), |a, b| a.sub(b)).map_err(domain)?,
            Tanh => {
                let f = out[p[0]].0.try_map(sech2).map_err(domain)?;
                f.zip_with(d(0), |a, b| a.mul(b)).map_err(domain)?
            }
            Sigmoid => {
                // sigmoid' = (1 - tanh(x/2)^2) / 4
                let half = I::point(0.5);
                let quarter = I::point(0.25);
                let f = out[p[0]]
                    .0
                    .try_map(|x| sech2(&x.mul(&half)?)?.mul(&quarter))
                    .map_err(domain)?;
                f.zip_with(d(0), |a, b| a.mul(b)).map_err(domain)?
            }
            Exp => value.zip_with(d(0), |a, b| a.mul(b)).map_err(domain)?,
            MulElem => {
                let (k, c) = match (&consts[p[0]], &consts[p[1]]) {
                    (_, Some(c)) => (0, c),
                    (Some(c), _) => (1, c),
                    _ => {
                        return Err(BoundError::Unsupported {
                            node: node.id,
                            detail: "mul_elem needs an input-independent side".into(),
                        })
                    }
                };
                let c = c.map(|&v| I::point(v));
                c.zip_with(d(k), |a, b| a.mul(b)).map_err(domain)?
            }
            ReduceSum | ReduceMean => {
                let s = sum(d(0).data().iter().cloned()).map_err(domain)?;
                let s = if matches!(node.kind, ReduceMean) {
                    s.div(&I::point(d(0).len() as f64)).map_err(domain)?
                } else {
                    s
                };
                TensorValue::scalar(s)
            }
            Reshape { .. } | Flatten => {
                apply_op(&node.kind, &node.out_shape, &[d(0)], &iparams).map_err(domain)?
            }
            other => {
                return Err(BoundError::Unsupported {
                    node: node.id,
                    detail: format!("{} is outside the derivative pass roster", other.name()),
                })
            }
        };
        out.push((value, deriv));
    }
    Ok(out)
}
