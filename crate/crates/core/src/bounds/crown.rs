//! Affine (CROWN-style) bound propagation.
//!
//! Every node gets a lower and an upper affine form over the flattened graph
//! input `x` (all input tensors concatenated in id order). Affine ops route
//! forms through the sign split of their weights; activations apply the line
//! pairs of [`super::relax`] on the node's pre-activation box; ops without a
//! relaxation fall back to constant forms taken from the interval box.

use std::collections::BTreeMap;

use super::ibp::{check_input_box, enclose_params, ibp_step};
use super::relax::{exp_relax, relu_relax, sigmoid_relax, tanh_relax, LinePair, DEFAULT_ALPHA};
use crate::error::{BoundError, RelaxError};
use crate::eval::apply_op;
use crate::ir::{NodeId, OpKind, WellTypedGraph};
use crate::params::ParamStore;
use crate::scalar::IntervalDomain;
use crate::tensor::TensorValue;

/// `rows` affine maps `x -> a[r] . x + b[r]`, with `a` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl AffineForm {
    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.cols..(r + 1) * self.cols]
    }

    pub fn constant(cols: usize, b: Vec<f64>) -> Self {
        AffineForm {
            cols,
            a: vec![0.0; b.len() * cols],
            b,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|r| self.b[r] + self.row(r).iter().zip(x).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }
}

/// Lower and upper forms of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct AffBounds {
    pub lower: AffineForm,
    pub upper: AffineForm,
}

impl AffBounds {
    fn constant(cols: usize, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        AffBounds {
            lower: AffineForm::constant(cols, lo),
            upper: AffineForm::constant(cols, hi),
        }
    }
}

/// Minimum (`lower = true`) or maximum of each row over the input box.
pub fn concretize(form: &AffineForm, lo: &[f64], hi: &[f64], lower: bool) -> Vec<f64> {
    (0..form.rows())
        .map(|r| {
            let mut acc = form.b[r];
            for (j, &a) in form.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let x = if (a > 0.0) == lower { lo[j] } else { hi[j] };
                acc += a * x;
            }
            acc
        })
        .collect()
}

/// Bound on the rounding error of evaluating one row with [`concretize`].
pub fn row_error(row: &[f64], b: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let mass: f64 = row
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(j, a)| a.abs() * lo[j].abs().max(hi[j].abs()))
        .sum();
    (row.len() as f64 + 2.0) * f64::EPSILON * (mass + b.abs())
}

/// [`concretize`] moved outward by [`row_error`], so the result bounds the
/// exact row minimum (maximum) of the form.
pub fn concretize_outward(form: &AffineForm, lo: &[f64], hi: &[f64], lower: bool) -> Vec<f64> {
    concretize(form, lo, hi, lower)
        .into_iter()
        .enumerate()
        .map(|(r, v)| {
            let e = row_error(form.row(r), form.b[r], lo, hi);
            if lower {
                v - e
            } else {
                v + e
            }
        })
        .collect()
}

/// Per-ReLU-node slopes `alpha` and phases `beta`, one entry per unit.
/// Absent entries use [`DEFAULT_ALPHA`] and phase 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelaxParams {
    pub alpha: BTreeMap<NodeId, Vec<f64>>,
    pub beta: BTreeMap<NodeId, Vec<i8>>,
}

/// Everything one node step reads.
pub struct StepInput<'a, I> {
    pub graph: &'a WellTypedGraph,
    pub node: NodeId,
    pub parent_forms: Vec<&'a AffBounds>,
    pub parent_boxes: Vec<&'a TensorValue<I>>,
    pub consts: &'a [Option<TensorValue<f64>>],
    pub params: &'a ParamStore<f64>,
    pub iparams: &'a ParamStore<I>,
    /// This node's box when it is an input node.
    pub input_box: Option<&'a TensorValue<I>>,
    pub input_lo: &'a [f64],
    pub input_hi: &'a [f64],
    pub alpha: Option<&'a [f64]>,
    pub beta: Option<&'a [i8]>,
}

/// Result of one node step. `alpha` and `beta` are the values actually used
/// at a ReLU node.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<I> {
    pub forms: AffBounds,
    pub boxed: TensorValue<I>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<i8>>,
}

/// `sum_k w_k z_k + c` routed through a parent's forms: positive weights take
/// the same-side form, negative weights the opposite one.
fn route(
    parent: &AffBounds,
    terms: &[(f64, usize)],
    c: f64,
    lo_row: &mut [f64],
    hi_row: &mut [f64],
) -> (f64, f64) {
    let (mut bl, mut bu) = (c, c);
    for &(w, k) in terms {
        if w == 0.0 {
            continue;
        }
        let (same_l, same_u) = if w > 0.0 {
            (&parent.lower, &parent.upper)
        } else {
            (&parent.upper, &parent.lower)
        };
        bl += w * same_l.b[k];
        bu += w * same_u.b[k];
        for (dst, src) in lo_row.iter_mut().zip(same_l.row(k)) {
            *dst += w * src;
        }
        for (dst, src) in hi_row.iter_mut().zip(same_u.row(k)) {
            *dst += w * src;
        }
    }
    (bl, bu)
}

/// Builds forms row by row from `(parent index, terms, constant)` contributions.
fn build<F>(parents: &[&AffBounds], rows: usize, cols: usize, mut contrib: F) -> AffBounds
where
    F: FnMut(usize) -> Vec<(usize, Vec<(f64, usize)>, f64)>,
{
    let mut lower = AffineForm::constant(cols, vec![0.0; rows]);
    let mut upper = AffineForm::constant(cols, vec![0.0; rows]);
    for r in 0..rows {
        for (p, terms, c) in contrib(r) {
            let (lo_row, hi_row) = (
                &mut lower.a[r * cols..(r + 1) * cols],
                &mut upper.a[r * cols..(r + 1) * cols],
            );
            let (bl, bu) = route(parents[p], &terms, c, lo_row, hi_row);
            lower.b[r] += bl;
            upper.b[r] += bu;
        }
    }
    AffBounds { lower, upper }
}

fn activation_lines(
    kind: &OpKind,
    l: f64,
    u: f64,
    alpha: f64,
    beta: i8,
) -> Result<LinePair, RelaxError> {
    match kind {
        OpKind::Relu => relu_relax(l, u, alpha, beta),
        OpKind::Tanh => tanh_relax(l, u),
        OpKind::Sigmoid => sigmoid_relax(l, u),
        OpKind::Exp => exp_relax(l, u),
        _ => unreachable!("not an activation"),
    }
}

/// One node of the forward affine pass.
pub fn crown_step<I: IntervalDomain>(s: &StepInput<'_, I>) -> Result<StepOutput<I>, BoundError> {
    let node = s.graph.node(s.node);
    let cols = s.input_lo.len();
    let rows = node.out_shape.size();
    let unsupported = |detail: &str| BoundError::Unsupported {
        node: s.node,
        detail: detail.to_string(),
    };
    let ibp = match &node.kind {
        OpKind::Input => s
            .input_box
            .ok_or_else(|| unsupported("missing input box"))?
            .clone(),
        kind => ibp_step(kind, &node.out_shape, &s.parent_boxes, s.iparams).map_err(|cause| {
            BoundError::Domain {
                node: s.node,
                cause,
            }
        })?,
    };
    let from_box = || AffBounds::constant(cols, super::lower(&ibp), super::upper(&ibp));
    let pconst = |k: usize| s.consts[node.parents[k]].as_ref();
    let mut alpha_used = None;
    let mut beta_used = None;

    use OpKind::*;
    let forms = if let Some(v) = &s.consts[s.node] {
        AffBounds::constant(cols, v.vec(), v.vec())
    } else {
        match &node.kind {
            Input => {
                let pos = s
                    .graph
                    .inputs()
                    .iter()
                    .position(|&i| i == s.node)
                    .expect("input node");
                let off = s.graph.input_offsets()[pos];
                let mut f = AffineForm::constant(cols, vec![0.0; rows]);
                for r in 0..rows {
                    f.a[r * cols + off + r] = 1.0;
                }
                AffBounds {
                    lower: f.clone(),
                    upper: f,
                }
            }
            Param { .. } => unreachable!("params are constant"),
            Linear {
                in_dim,
                out_dim,
                weight,
                bias,
            } => {
                let w = s.params.get(weight).expect("validated").data();
                let b = bias
                    .as_ref()
                    .map(|k| s.params.get(k).expect("validated").data());
                build(&s.parent_forms, rows, cols, |r| {
                    let (row, o) = (r / out_dim, r % out_dim);
                    let terms = (0..*in_dim)
                        .map(|j| (w[o * in_dim + j], row * in_dim + j))
                        .collect();
                    vec![(0, terms, b.map_or(0.0, |b| b[o]))]
                })
            }
            Matmul => {
                let ad = s.graph.node(node.parents[0]).out_shape.dims();
                let (k, n) = (ad[1], rows / ad[0]);
                if let Some(bm) = pconst(1) {
                    let bm = bm.data();
                    build(&s.parent_forms, rows, cols, |r| {
                        let (i, j) = (r / n, r % n);
                        vec![(0, (0..k).map(|t| (bm[t * n + j], i * k + t)).collect(), 0.0)]
                    })
                } else if let Some(am) = pconst(0) {
                    let am = am.data();
                    build(&s.parent_forms, rows, cols, |r| {
                        let (i, j) = (r / n, r % n);
                        vec![(1, (0..k).map(|t| (am[i * k + t], t * n + j)).collect(), 0.0)]
                    })
                } else {
                    from_box()
                }
            }
            Add => build(&s.parent_forms, rows, cols, |r| {
                vec![(0, vec![(1.0, r)], 0.0), (1, vec![(1.0, r)], 0.0)]
            }),
            Sub => build(&s.parent_forms, rows, cols, |r| {
                vec![(0, vec![(1.0, r)], 0.0), (1, vec![(-1.0, r)], 0.0)]
            }),
            MulElem => match (pconst(0), pconst(1)) {
                (_, Some(c)) => build(&s.parent_forms, rows, cols, |r| {
                    vec![(0, vec![(c.data()[r], r)], 0.0)]
                }),
                (Some(c), _) => build(&s.parent_forms, rows, cols, |r| {
                    vec![(1, vec![(c.data()[r], r)], 0.0)]
                }),
                _ => from_box(),
            },
            Relu | Tanh | Sigmoid | Exp => {
                let pb = s.parent_boxes[0];
                if let Some(a) = s.alpha {
                    if a.len() != rows {
                        return Err(unsupported("alpha length does not match the node size"));
                    }
                }
                if let Some(b) = s.beta {
                    if b.len() != rows {
                        return Err(unsupported("beta length does not match the node size"));
                    }
                }
                let mut lines = Vec::with_capacity(rows);
                let mut alphas = Vec::with_capacity(rows);
                for r in 0..rows {
                    let (l, u) = (pb.data()[r].lo(), pb.data()[r].hi());
                    let a = s.alpha.map_or(DEFAULT_ALPHA, |a| a[r]);
                    let b = s.beta.map_or(0, |b| b[r]);
                    lines.push(activation_lines(&node.kind, l, u, a, b).map_err(|cause| {
                        BoundError::Relax {
                            node: s.node,
                            cause,
                        }
                    })?);
                    alphas.push(a);
                }
                if matches!(node.kind, Relu) {
                    alpha_used = Some(alphas);
                    beta_used = Some(s.beta.map_or_else(|| vec![0; rows], |b| b.to_vec()));
                }
                let parent = s.parent_forms[0];
                let mut lower = AffineForm::constant(cols, vec![0.0; rows]);
                let mut upper = AffineForm::constant(cols, vec![0.0; rows]);
                for (r, lp) in lines.iter().enumerate() {
                    let (lo_row, hi_row) = (
                        &mut lower.a[r * cols..(r + 1) * cols],
                        &mut upper.a[r * cols..(r + 1) * cols],
                    );
                    let (bl, _) = route(
                        parent,
                        &[(lp.lower.slope, r)],
                        lp.lower.intercept,
                        lo_row,
                        &mut vec![0.0; cols],
                    );
                    let (_, bu) = route(
                        parent,
                        &[(lp.upper.slope, r)],
                        lp.upper.intercept,
                        &mut vec![0.0; cols],
                        hi_row,
                    );
                    lower.b[r] = bl;
                    upper.b[r] = bu;
                }
                AffBounds { lower, upper }
            }
            ReduceSum | ReduceMean => {
                let n = s.parent_boxes[0].len();
                let summed = build(&s.parent_forms, rows, cols, |_| {
                    vec![(0, (0..n).map(|k| (1.0, k)).collect(), 0.0)]
                });
                if matches!(node.kind, ReduceSum) {
                    summed
                } else {
                    let scale = |f: AffineForm| AffineForm {
                        cols,
                        a: f.a.iter().map(|x| x / n as f64).collect(),
                        b: f.b.iter().map(|x| x / n as f64).collect(),
                    };
                    AffBounds {
                        lower: scale(summed.lower),
                        upper: scale(summed.upper),
                    }
                }
            }
            Reshape { .. } | Flatten => s.parent_forms[0].clone(),
            MseLoss | Softmax { .. } => from_box(),
        }
    };
    let forms = sanitize(forms, &ibp);
    let clo = concretize_outward(&forms.lower, s.input_lo, s.input_hi, true);
    let chi = concretize_outward(&forms.upper, s.input_lo, s.input_hi, false);
    let boxed = TensorValue::from_fn(ibp.shape().clone(), |r| {
        let i = &ibp.data()[r];
        let (lo, hi) = (i.lo().max(clo[r]), i.hi().min(chi[r]));
        if lo <= hi {
            I::enclose(lo, hi)
        } else {
            i.clone()
        }
    });
    Ok(StepOutput {
        forms,
        boxed,
        alpha: alpha_used,
        beta: beta_used,
    })
}

/// Replaces rows containing NaN (from `0 * inf` style cancellations) by the
/// constant rows of the interval box.
fn sanitize<I: IntervalDomain>(mut f: AffBounds, ibp: &TensorValue<I>) -> AffBounds {
    let cols = f.lower.cols;
    for r in 0..f.lower.rows() {
        if f.lower.b[r].is_nan()
            || f.lower.row(r).iter().any(|x| !x.is_finite())
            || f.lower.b[r] == f64::INFINITY
        {
            f.lower.a[r * cols..(r + 1) * cols].fill(0.0);
            f.lower.b[r] = ibp.data()[r].lo();
        }
        if f.upper.b[r].is_nan()
            || f.upper.row(r).iter().any(|x| !x.is_finite())
            || f.upper.b[r] == f64::NEG_INFINITY
        {
            f.upper.a[r * cols..(r + 1) * cols].fill(0.0);
            f.upper.b[r] = ibp.data()[r].hi();
        }
    }
    f
}

/// Values of the nodes that do not depend on any graph input.
pub(crate) fn constant_values(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
) -> Vec<Option<TensorValue<f64>>> {
    let mut out: Vec<Option<TensorValue<f64>>> = Vec::with_capacity(g.len());
    for node in g.nodes() {
        let v = match node.kind {
            OpKind::Input => None,
            _ => {
                let parents: Option<Vec<&TensorValue<f64>>> =
                    node.parents.iter().map(|&p| out[p].as_ref()).collect();
                parents.and_then(|ps| apply_op(&node.kind, &node.out_shape, &ps, params).ok())
            }
        };
        out.push(v);
    }
    out
}

/// Flattened input box endpoints.
pub(crate) fn input_bounds<I: IntervalDomain>(
    input_box: &[TensorValue<I>],
) -> (Vec<f64>, Vec<f64>) {
    let lo = input_box.iter().flat_map(super::lower).collect();
    let hi = input_box.iter().flat_map(super::upper).collect();
    (lo, hi)
}

/// Forward pass output for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct CrownResult<I> {
    pub forms: Vec<AffBounds>,
    /// Interval step on the parents' boxes, intersected with the concretized forms.
    pub boxes: Vec<TensorValue<I>>,
    pub alpha: BTreeMap<NodeId, Vec<f64>>,
    pub beta: BTreeMap<NodeId, Vec<i8>>,
}

pub fn crown_forward<I: IntervalDomain>(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
    input_box: &[TensorValue<I>],
    relax: &RelaxParams,
) -> Result<CrownResult<I>, BoundError> {
    check_input_box(g, input_box)?;
    let iparams = enclose_params::<I>(params);
    let consts = constant_values(g, params);
    let (lo, hi) = input_bounds(input_box);
    let mut res = CrownResult {
        forms: Vec::with_capacity(g.len()),
        boxes: Vec::with_capacity(g.len()),
        alpha: BTreeMap::new(),
        beta: BTreeMap::new(),
    };
    let mut next_input = 0;
    for node in g.nodes() {
        let input_box = if matches!(node.kind, OpKind::Input) {
            next_input += 1;
            Some(&input_box[next_input - 1])
        } else {
            None
        };
        let out = {
            let step = StepInput {
                graph: g,
                node: node.id,
                parent_forms: node.parents.iter().map(|&p| &res.forms[p]).collect(),
                parent_boxes: node.parents.iter().map(|&p| &res.boxes[p]).collect(),
                consts: &consts,
                params,
                iparams: &iparams,
                input_box,
                input_lo: &lo,
                input_hi: &hi,
                alpha: relax.alpha.get(&node.id).map(|v| v.as_slice()),
                beta: relax.beta.get(&node.id).map(|v| v.as_slice()),
            };
            crown_step(&step)?
        };
        if let Some(a) = out.alpha {
            res.alpha.insert(node.id, a);
        }
        if let Some(b) = out.beta {
            res.beta.insert(node.id, b);
        }
        res.forms.push(out.forms);
        res.boxes.push(out.boxed);
    }
    Ok(res)
}

/// Lower bounds on `min <c, output>` over the input box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardBound {
    /// `max(backsub, forward)`; the reported bound.
    pub lower: f64,
    /// Back-substitution through the graph to the input.
    pub backsub: f64,
    /// Objective applied to the forward pass's output box.
    pub forward: f64,
}

fn box_objective<I: IntervalDomain>(lambda: &[f64], b: &TensorValue<I>) -> f64 {
    lambda
        .iter()
        .zip(b.data())
        .filter(|(l, _)| **l != 0.0)
        .map(|(&l, i)| if l > 0.0 { l * i.lo() } else { l * i.hi() })
        .sum()
}

/// Objective-dependent backward pass. Relaxations use the pre-activation
/// boxes of [`crown_forward`] with the same `relax` parameters.
pub fn crown_backward<I: IntervalDomain>(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
    input_box: &[TensorValue<I>],
    objective: &[f64],
    relax: &RelaxParams,
) -> Result<BackwardBound, BoundError> {
    let out_size = g.output_shape().size();
    if objective.len() != out_size {
        return Err(BoundError::Objective {
            expected: out_size,
            actual: objective.len(),
        });
    }
    let fwd = crown_forward(g, params, input_box, relax)?;
    let forward = box_objective(objective, &fwd.boxes[g.output()]);
    let consts = constant_values(g, params);
    let (lo, hi) = input_bounds(input_box);
    let offsets = g.input_offsets();
    let mut input_coeff = vec![0.0; lo.len()];
    let mut constant = 0.0;
    let mut lam: Vec<Option<Vec<f64>>> = vec![None; g.len()];
    lam[g.output()] = Some(objective.to_vec());

    fn add_into(slot: &mut Option<Vec<f64>>, v: Vec<f64>) {
        match slot {
            Some(s) => s.iter_mut().zip(v).for_each(|(a, b)| *a += b),
            None => *slot = Some(v),
        }
    }

    for node in g.nodes().iter().rev() {
        let Some(l) = lam[node.id].take() else {
            continue;
        };
        if l.iter().all(|&x| x == 0.0) {
            continue;
        }
        if let Some(v) = &consts[node.id] {
            constant += l.iter().zip(v.data()).map(|(a, b)| a * b).sum::<f64>();
            continue;
        }
        let p = &node.parents;
        let psize = |k: usize| g.node(p[k]).out_shape.size();
        let fallback = |constant: &mut f64| *constant += box_objective(&l, &fwd.boxes[node.id]);
        use OpKind::*;
        match &node.kind {
            Input => {
                let pos = g
                    .inputs()
                    .iter()
                    .position(|&i| i == node.id)
                    .expect("input node");
                for (k, v) in l.iter().enumerate() {
                    input_coeff[offsets[pos] + k] += v;
                }
            }
            Param { .. } => unreachable!("params are constant"),
            Linear {
                in_dim,
                out_dim,
                weight,
                bias,
            } => {
                let w = params.get(weight).expect("validated").data();
                let rows = l.len() / out_dim;
                let mut lx = vec![0.0; rows * in_dim];
                for r in 0..rows {
                    for o in 0..*out_dim {
                        let lo_ = l[r * out_dim + o];
                        if lo_ == 0.0 {
                            continue;
                        }
                        for j in 0..*in_dim {
                            lx[r * in_dim + j] += lo_ * w[o * in_dim + j];
                        }
                        if let Some(b) = bias {
                            constant += lo_ * params.get(b).expect("validated").data()[o];
                        }
                    }
                }
                add_into(&mut lam[p[0]], lx);
            }
            Matmul => {
                let ad = g.node(p[0]).out_shape.dims();
                let (m, k) = (ad[0], ad[1]);
                let n = l.len() / m;
                if let Some(bm) = &consts[p[1]] {
                    let mut la = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..n {
                            for t in 0..k {
                                la[i * k + t] += l[i * n + j] * bm.data()[t * n + j];
                            }
                        }
                    }
                    add_into(&mut lam[p[0]], la);
                } else if let Some(am) = &consts[p[0]] {
                    let mut lb = vec![0.0; k * n];
                    for i in 0..m {
                        for j in 0..n {
                            for t in 0..k {
                                lb[t * n + j] += l[i * n + j] * am.data()[i * k + t];
                            }
                        }
                    }
                    add_into(&mut lam[p[1]], lb);
                } else {
                    fallback(&mut constant);
                }
            }
            Add => {
                add_into(&mut lam[p[0]], l.clone());
                add_into(&mut lam[p[1]], l);
            }
            Sub => {
                add_into(&mut lam[p[0]], l.clone());
                add_into(&mut lam[p[1]], l.iter().map(|x| -x).collect());
            }
            MulElem => match (&consts[p[0]], &consts[p[1]]) {
                (_, Some(c)) => add_into(
                    &mut lam[p[0]],
                    l.iter().zip(c.data()).map(|(a, b)| a * b).collect(),
                ),
                (Some(c), _) => add_into(
                    &mut lam[p[1]],
                    l.iter().zip(c.data()).map(|(a, b)| a * b).collect(),
                ),
                _ => fallback(&mut constant),
            },
            Relu | Tanh | Sigmoid | Exp => {
                let pb = &fwd.boxes[p[0]];
                let alpha = fwd.alpha.get(&node.id);
                let beta = fwd.beta.get(&node.id);
                let mut lp = vec![0.0; l.len()];
                for (r, &c) in l.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let (lo_, hi_) = (pb.data()[r].lo(), pb.data()[r].hi());
                    let a = alpha.map_or(0.0, |v| v[r]);
                    let b = beta.map_or(0, |v| v[r]);
                    let lines = activation_lines(&node.kind, lo_, hi_, a, b).map_err(|cause| {
                        BoundError::Relax {
                            node: node.id,
                            cause,
                        }
                    })?;
                    let line = if c > 0.0 { lines.lower } else { lines.upper };
                    if !line.slope.is_finite() || !line.intercept.is_finite() {
                        let i = &fwd.boxes[node.id].data()[r];
                        constant += if c > 0.0 { c * i.lo() } else { c * i.hi() };
                        continue;
                    }
                    lp[r] = c * line.slope;
                    constant += c * line.intercept;
                }
                add_into(&mut lam[p[0]], lp);
            }
            ReduceSum => add_into(&mut lam[p[0]], vec![l[0]; psize(0)]),
            ReduceMean => add_into(&mut lam[p[0]], vec![l[0] / psize(0) as f64; psize(0)]),
            Reshape { .. } | Flatten => add_into(&mut lam[p[0]], l),
            MseLoss | Softmax { .. } => fallback(&mut constant),
        }
    }
    let form = AffineForm {
        cols: lo.len(),
        a: input_coeff,
        b: vec![constant],
    };
    let backsub = concretize_outward(&form, &lo, &hi, true)[0];
    let backsub = if backsub.is_nan() {
        f64::NEG_INFINITY
    } else {
        backsub
    };
    Ok(BackwardBound {
        lower: backsub.max(forward),
        backsub,
        forward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{validate_graph, GraphBuilder};
    use crate::shape::Shape;
    use crate::{Interval, RealInterval};

    fn unit_box(n: usize) -> Vec<TensorValue<RealInterval>> {
        vec![TensorValue::filled(
            Shape::vector(n),
            Interval::new(0.0, 1.0),
        )]
    }

    #[test]
    fn sum_of_inputs_backward_is_exact() {
        let mut b = GraphBuilder::new();
        let x = b.input(Shape::vector(2));
        let s = b.reduce_sum(x);
        let g = validate_graph(&b.finish(s), &ParamStore::<f64>::new()).unwrap();
        let r = crown_backward(
            &g,
            &ParamStore::new(),
            &unit_box(2),
            &[1.0],
            &RelaxParams::default(),
        )
        .unwrap();
        assert_eq!(r.lower, 0.0);
        let r = crown_backward(
            &g,
            &ParamStore::new(),
            &unit_box(2),
            &[0.0],
            &RelaxParams::default(),
        )
        .unwrap();
        assert_eq!(r.lower, 0.0);
    }

    #[test]
    fn alpha_zero_gives_zero_lower_line() {
        let mut b = GraphBuilder::new();
        let x = b.input(Shape::vector(1));
        let h = b.linear(x, 1, 1, "w", None);
        let r = b.relu(h);
        let mut p = ParamStore::new();
        p.insert(
            "w",
            TensorValue::new(Shape::matrix(1, 1), vec![2.0]).unwrap(),
        );
        let g = validate_graph(&b.finish(r), &p).unwrap();
        let ib = vec![TensorValue::filled(
            Shape::vector(1),
            Interval::new(-1.0, 1.0),
        )];
        let mut relax = RelaxParams::default();
        relax.alpha.insert(2, vec![0.0]);
        let res = crown_forward(&g, &p, &ib, &relax).unwrap();
        assert_eq!(res.forms[2].lower.a, vec![0.0]);
        assert_eq!(res.forms[2].lower.b, vec![0.0]);
        // secant through (-2, 0) and (2, 2) composed with h = 2x
        assert_eq!(res.forms[2].upper.a, vec![1.0]);
        assert_eq!(res.forms[2].upper.b, vec![1.0]);
    }
}
