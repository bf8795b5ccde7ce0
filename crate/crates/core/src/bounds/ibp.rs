//! Interval bound propagation.

use crate::error::{BoundError, DomainError};
use crate::eval::{apply_op, lanes, sum};
use crate::ir::{OpKind, WellTypedGraph};
use crate::params::ParamStore;
use crate::scalar::IntervalDomain;
use crate::shape::Shape;
use crate::tensor::TensorValue;

/// Per-coordinate softmax enclosure. Coordinate `j` of a lane is written as
/// `1 / (1 + sum_{k != j} exp(x_k - x_j))`, which puts the numerator at its
/// own endpoint and the rest of the denominator at the opposite endpoints.
fn softmax_ibp<I: IntervalDomain>(
    x: &TensorValue<I>,
    axis: usize,
) -> Result<TensorValue<I>, DomainError> {
    let (outer, n, inner) = lanes(x.shape(), axis);
    let mut out = x.data().to_vec();
    let one = I::one();
    let unit = I::enclose(0.0, 1.0);
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| o * n * inner + k * inner + i;
            for j in 0..n {
                let xj = &x.data()[idx(j)];
                let terms = (0..n)
                    .filter(|&k| k != j)
                    .map(|k| x.data()[idx(k)].sub(xj)?.exp())
                    .collect::<Result<Vec<_>, _>>()?;
                let den = one.add(&sum(terms)?)?;
                let q = one.div(&den)?;
                out[idx(j)] = q.intersect(&unit).unwrap_or(unit.clone());
            }
        }
    }
    Ok(TensorValue::new(x.shape().clone(), out).expect("softmax shape"))
}

/// One node's enclosure from its parents' enclosures. Parameters are
/// binary64 constants enclosed into `I`.
pub fn ibp_step<I: IntervalDomain>(
    kind: &OpKind,
    out_shape: &Shape,
    parents: &[&TensorValue<I>],
    params: &ParamStore<I>,
) -> Result<TensorValue<I>, DomainError> {
    match kind {
        OpKind::Softmax { axis } => softmax_ibp(parents[0], *axis),
        // everything else is the generic evaluator run over intervals: point
        // weights times boxes is the W+ / W- split, sub is [l1-u2, u1-l2],
        // products take the four corners and monotone maps their endpoints
        _ => apply_op(kind, out_shape, parents, params),
    }
}

/// Encloses the binary64 parameters into the interval backing.
pub fn enclose_params<I: IntervalDomain>(params: &ParamStore<f64>) -> ParamStore<I> {
    params.map(|t| t.map(|&x| I::point(x)))
}

pub(crate) fn check_input_box<I: IntervalDomain>(
    g: &WellTypedGraph,
    input_box: &[TensorValue<I>],
) -> Result<(), BoundError> {
    if input_box.len() != g.inputs().len() {
        return Err(BoundError::InputCount {
            expected: g.inputs().len(),
            actual: input_box.len(),
        });
    }
    for (index, (&id, b)) in g.inputs().iter().zip(input_box).enumerate() {
        if b.shape() != &g.node(id).out_shape {
            return Err(BoundError::InputBox {
                index,
                expected: g.node(id).out_shape.clone(),
                actual: b.shape().clone(),
            });
        }
    }
    Ok(())
}

/// Boxes for every node, in id order.
pub fn run_ibp<I: IntervalDomain>(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
    input_box: &[TensorValue<I>],
) -> Result<Vec<TensorValue<I>>, BoundError> {
    check_input_box(g, input_box)?;
    let iparams = enclose_params::<I>(params);
    let mut boxes: Vec<TensorValue<I>> = Vec::with_capacity(g.len());
    let mut next_input = 0;
    for node in g.nodes() {
        let b = if matches!(node.kind, OpKind::Input) {
            next_input += 1;
            input_box[next_input - 1].clone()
        } else {
            let parents: Vec<&TensorValue<I>> = node.parents.iter().map(|&p| &boxes[p]).collect();
            ibp_step(&node.kind, &node.out_shape, &parents, &iparams).map_err(|cause| {
                BoundError::Domain {
                    node: node.id,
                    cause,
                }
            })?
        };
        boxes.push(b);
    }
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{validate_graph, GraphBuilder};
    use crate::{Interval, RealInterval};

    #[test]
    fn linear_box_matches_corners() {
        let mut b = GraphBuilder::new();
        let x = b.input(Shape::vector(2));
        let y = b.linear(x, 2, 1, "w", Some("b"));
        let mut p = ParamStore::new();
        p.insert(
            "w",
            TensorValue::new(Shape::matrix(1, 2), vec![1.0, -2.0]).unwrap(),
        );
        p.insert("b", TensorValue::new(Shape::vector(1), vec![0.5]).unwrap());
        let g = validate_graph(&b.finish(y), &p).unwrap();
        let ib = TensorValue::filled(Shape::vector(2), Interval::new(0.0, 1.0));
        let boxes = run_ibp::<RealInterval>(&g, &p, &[ib]).unwrap();
        let out = &boxes[1].data()[0];
        let corners =
            [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)].map(|(a, c)| a - 2.0 * c + 0.5);
        let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((out.lo(), out.hi()), (lo, hi));
    }

    #[test]
    fn relu_toy_boxes() {
        let mut b = GraphBuilder::new();
        let x = b.input(Shape::vector(1));
        let r = b.relu(x);
        let g = validate_graph(&b.finish(r), &ParamStore::<f64>::new()).unwrap();
        let ib = TensorValue::filled(Shape::vector(1), Interval::new(-1.0, 1.0));
        let boxes = run_ibp::<RealInterval>(&g, &ParamStore::new(), &[ib]).unwrap();
        assert_eq!(
            (boxes[1].data()[0].lo(), boxes[1].data()[0].hi()),
            (0.0, 1.0)
        );
    }

    #[test]
    fn softmax_box_contains_samples() {
        let x = TensorValue::new(
            Shape::vector(3),
            vec![
                Interval::new(-1.0, 0.5),
                Interval::new(0.0, 0.2),
                Interval::new(2.0, 3.0),
            ],
        )
        .unwrap();
        let s = softmax_ibp(&x, 0).unwrap();
        for a in [-1.0, 0.5] {
            for c in [2.0, 3.0] {
                let v = [a, 0.1f64, c];
                let z: f64 = v.iter().map(|t| f64::exp(*t)).sum();
                for k in 0..3 {
                    assert!(s.data()[k].contains(f64::exp(v[k]) / z));
                }
            }
        }
    }
}
