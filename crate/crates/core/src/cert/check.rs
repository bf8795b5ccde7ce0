use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::goals::{
    check_leaves, check_margin, check_unsat, objective_lower, GoalError, LeavesVerdict,
};
use super::{Certificate, Goal, Leaf, NodePayload, Region};
use crate::bounds::relax::phase_consistent;
use crate::bounds::{
    box_from_bounds, concretize_outward, constant_values, crown_step, enclose_params, ibp_step,
    row_error, AffBounds, AffineForm, RelaxParams, StepInput,
};
use crate::codec::{canonical, canonical_directed, to_hex};
use crate::error::{BoundError, RelaxError};
use crate::ieee32::B32Interval;
use crate::ir::{NodeId, OpKind, WellTypedGraph};
use crate::params::ParamStore;
use crate::scalar::IntervalDomain;
use crate::tensor::TensorValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectRule {
    Schema,
    TopoOrder,
    Phase,
    BoundMismatch,
    Goal,
}

/// Machine-readable reason for a rejection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub rule: RejectRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provided: Option<String>,
    pub detail: String,
}

impl Rejection {
    fn new(rule: RejectRule, node: Option<NodeId>, detail: impl Into<String>) -> Self {
        Rejection {
            rule,
            node,
            leaf: None,
            field: None,
            index: None,
            expected: None,
            provided: None,
            detail: detail.into(),
        }
    }

    fn schema(node: Option<NodeId>, detail: impl Into<String>) -> Self {
        Self::new(RejectRule::Schema, node, detail)
    }

    fn in_leaf(mut self, leaf: usize) -> Self {
        self.leaf = Some(leaf);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<Rejection>,
}

impl CheckReport {
    fn from_result(r: Result<(), Rejection>) -> Self {
        match r {
            Ok(()) => CheckReport {
                verdict: Verdict::Accepted,
                reason: None,
            },
            Err(e) => CheckReport {
                verdict: Verdict::Rejected,
                reason: Some(e),
            },
        }
    }

    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    pub fn rule(&self) -> Option<RejectRule> {
        self.reason.as_ref().map(|r| r.rule)
    }
}

/// Which payloads the producer emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitMode {
    /// Boxes only.
    Ibp,
    /// Boxes, affine forms, and ReLU `alpha` / `beta`.
    Crown,
}

fn zero_sign(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// Magnitude of the binary64 evaluation error allowed for one affine row.
/// Snaps a form onto the binary32 grid: coefficients to nearest, the bias
/// outward by the coefficient error over the region plus the evaluation
/// margin. Rows that do not survive fall back to the constant `fallback`.
fn canonical_form(
    f: &AffineForm,
    lo: &[f64],
    hi: &[f64],
    lower: bool,
    fallback: &[f64],
) -> AffineForm {
    let cols = f.cols;
    let mut out = AffineForm::constant(cols, vec![0.0; f.rows()]);
    for r in 0..f.rows() {
        let row = f.row(r);
        let snapped: Vec<f64> = row.iter().map(|&a| canonical(a)).collect();
        let slack: f64 = row
            .iter()
            .zip(&snapped)
            .enumerate()
            .map(|(j, (a, s))| (a - s).abs() * lo[j].abs().max(hi[j].abs()))
            .sum::<f64>()
            + row_error(row, f.b[r], lo, hi);
        let b = if lower {
            f.b[r] - slack
        } else {
            f.b[r] + slack
        };
        let b = canonical_directed(b, lower);
        let bad = snapped.iter().any(|a| !a.is_finite())
            || b.is_nan()
            || b == if lower {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        if bad {
            out.b[r] = fallback[r];
        } else {
            out.a[r * cols..(r + 1) * cols].copy_from_slice(&snapped);
            out.b[r] = b;
        }
    }
    out
}

fn box_bounds(b: &TensorValue<B32Interval>) -> (Vec<f64>, Vec<f64>) {
    (
        b.data().iter().map(|i| zero_sign(i.lo())).collect(),
        b.data().iter().map(|i| zero_sign(i.hi())).collect(),
    )
}

/// Certified lower bound of `c . y` from an output payload: the box bound,
/// improved by the affine forms when present.
fn payload_objective_lower(c: &[f64], p: &NodePayload, lo: &[f64], hi: &[f64]) -> f64 {
    let from_box = objective_lower(c, &p.lo, &p.hi);
    let Some(f) = &p.forms else { return from_box };
    let cols = f.lower.cols;
    let mut row = vec![0.0; cols];
    let mut b = 0.0;
    for (k, &w) in c.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let side = if w > 0.0 { &f.lower } else { &f.upper };
        b += w * side.b[k];
        for (dst, src) in row.iter_mut().zip(side.row(k)) {
            *dst += w * src;
        }
    }
    let form = AffineForm {
        cols,
        a: row,
        b: vec![b],
    };
    let v = concretize_outward(&form, lo, hi, true)[0];
    if v.is_nan() {
        from_box
    } else {
        from_box.max(v)
    }
}

struct RegionData {
    boxes: Vec<TensorValue<B32Interval>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

struct Replay<'a> {
    g: &'a WellTypedGraph,
    params: &'a ParamStore<f64>,
    iparams: ParamStore<B32Interval>,
    consts: Vec<Option<TensorValue<f64>>>,
}

impl<'a> Replay<'a> {
    fn new(g: &'a WellTypedGraph, params: &'a ParamStore<f64>) -> Self {
        Replay {
            g,
            params,
            iparams: enclose_params(params),
            consts: constant_values(g, params),
        }
    }

    fn region(&self, r: &BTreeMap<NodeId, Region>) -> Result<RegionData, Rejection> {
        let inputs = self.g.inputs();
        if let Some(k) = r.keys().find(|k| !inputs.contains(k)) {
            return Err(Rejection::schema(
                Some(*k),
                "input_region entry for a node that is not an input",
            ));
        }
        let mut rd = RegionData {
            boxes: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
        };
        for &id in inputs {
            let b = r.get(&id).ok_or_else(|| {
                Rejection::schema(Some(id), "input_region has no box for this input")
            })?;
            let shape = self.g.node(id).out_shape.clone();
            if b.lo.len() != shape.size() {
                return Err(Rejection::schema(
                    Some(id),
                    format!(
                        "input box has {} entries, expected {}",
                        b.lo.len(),
                        shape.size()
                    ),
                ));
            }
            if b.lo
                .iter()
                .zip(&b.hi)
                .any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite())
            {
                return Err(Rejection::schema(
                    Some(id),
                    "input box sides must be finite with lo <= hi",
                ));
            }
            rd.boxes.push(box_from_bounds(shape, &b.lo, &b.hi));
            rd.lo.extend(b.lo.iter().map(|&x| zero_sign(x)));
            rd.hi.extend(b.hi.iter().map(|&x| zero_sign(x)));
        }
        Ok(rd)
    }

    fn relax_error(&self, id: NodeId, e: BoundError) -> Rejection {
        match e {
            BoundError::Relax {
                cause: RelaxError::Phase { lo, hi, beta },
                ..
            } => Rejection::new(
                RejectRule::Phase,
                Some(id),
                format!("phase {beta} is inconsistent with pre-activation box [{lo}, {hi}]"),
            ),
            other => Rejection::schema(Some(id), other.to_string()),
        }
    }

    /// Recomputes the canonical payload of `id` from certified parents.
    fn step(
        &self,
        rd: &RegionData,
        done: &[Option<NodePayload>],
        id: NodeId,
        with_forms: bool,
        alpha: Option<&[f64]>,
        beta: Option<&[i8]>,
    ) -> Result<NodePayload, Rejection> {
        let node = self.g.node(id);
        let rows = node.out_shape.size();
        let is_relu = matches!(node.kind, OpKind::Relu);
        if (alpha.is_some() || beta.is_some()) && !is_relu {
            return Err(Rejection::schema(
                Some(id),
                "alpha and beta are only defined on relu nodes",
            ));
        }
        if alpha.is_some_and(|a| a.len() != rows) || beta.is_some_and(|b| b.len() != rows) {
            return Err(Rejection::schema(
                Some(id),
                "alpha or beta length does not match the node size",
            ));
        }
        let mut parents = Vec::with_capacity(node.parents.len());
        for &p in &node.parents {
            match &done[p] {
                None => {
                    return Err(Rejection::new(
                        RejectRule::TopoOrder,
                        Some(id),
                        format!("parent {p} has no certified payload"),
                    ))
                }
                Some(pp) if with_forms && pp.forms.is_none() => {
                    return Err(Rejection::new(
                        RejectRule::TopoOrder,
                        Some(id),
                        format!("parent {p} has no certified affine forms"),
                    ))
                }
                Some(pp) => parents.push(pp),
            }
        }
        let pboxes: Vec<TensorValue<B32Interval>> = node
            .parents
            .iter()
            .zip(&parents)
            .map(|(&p, pp)| box_from_bounds(self.g.node(p).out_shape.clone(), &pp.lo, &pp.hi))
            .collect();
        let pbox_refs: Vec<&TensorValue<B32Interval>> = pboxes.iter().collect();
        let input_box = if matches!(node.kind, OpKind::Input) {
            let pos = self
                .g
                .inputs()
                .iter()
                .position(|&i| i == id)
                .expect("input node");
            Some(&rd.boxes[pos])
        } else {
            None
        };
        let ibp = match input_box {
            Some(b) => b.clone(),
            None => ibp_step(&node.kind, &node.out_shape, &pbox_refs, &self.iparams)
                .map_err(|e| Rejection::schema(Some(id), e.to_string()))?,
        };

        if !with_forms {
            if let Some(b) = beta {
                let pb = &pboxes[0];
                for (r, &beta) in b.iter().enumerate() {
                    let (l, u) = (pb.data()[r].lo(), pb.data()[r].hi());
                    if !phase_consistent(l, u, beta) {
                        let mut rej = Rejection::new(
                            RejectRule::Phase,
                            Some(id),
                            format!(
                                "phase {beta} is inconsistent with pre-activation box [{l}, {u}]"
                            ),
                        );
                        rej.field = Some("beta".into());
                        rej.index = Some(r);
                        return Err(rej);
                    }
                }
            }
            let (lo, hi) = box_bounds(&ibp);
            return Ok(NodePayload {
                lo,
                hi,
                forms: None,
                alpha: alpha.map(|a| a.to_vec()),
                beta: beta.map(|b| b.to_vec()),
            });
        }

        if let Some(pp) = parents.iter().find(|pp| {
            pp.forms
                .as_ref()
                .is_some_and(|f| f.lower.cols != rd.lo.len())
        }) {
            let cols = pp.forms.as_ref().map_or(0, |f| f.lower.cols);
            return Err(Rejection::schema(
                Some(id),
                format!(
                    "parent forms have {cols} columns, the input has {}",
                    rd.lo.len()
                ),
            ));
        }
        let step = StepInput {
            graph: self.g,
            node: id,
            parent_forms: parents
                .iter()
                .map(|pp| pp.forms.as_ref().expect("checked"))
                .collect(),
            parent_boxes: pbox_refs,
            consts: &self.consts,
            params: self.params,
            iparams: &self.iparams,
            input_box,
            input_lo: &rd.lo,
            input_hi: &rd.hi,
            alpha,
            beta,
        };
        let out = crown_step(&step).map_err(|e| self.relax_error(id, e))?;
        let clo = concretize_outward(&out.forms.lower, &rd.lo, &rd.hi, true);
        let chi = concretize_outward(&out.forms.upper, &rd.lo, &rd.hi, false);
        let boxed = TensorValue::from_fn(ibp.shape().clone(), |r| {
            let i = &ibp.data()[r];
            let (l, h) = (i.lo().max(clo[r]), i.hi().min(chi[r]));
            if l <= h {
                B32Interval::enclose(l, h)
            } else {
                *i
            }
        });
        let (lo, hi) = box_bounds(&boxed);
        let forms = AffBounds {
            lower: canonical_form(&out.forms.lower, &rd.lo, &rd.hi, true, &lo),
            upper: canonical_form(&out.forms.upper, &rd.lo, &rd.hi, false, &hi),
        };
        Ok(NodePayload {
            lo,
            hi,
            forms: Some(forms),
            alpha: out.alpha.map(|a| a.into_iter().map(canonical).collect()),
            beta: out.beta,
        })
    }

    fn check_lengths(&self, id: NodeId, p: &NodePayload, cols: usize) -> Result<(), Rejection> {
        let rows = self.g.node(id).out_shape.size();
        if p.lo.len() != rows {
            return Err(Rejection::schema(
                Some(id),
                format!("box has {} entries, node has {rows}", p.lo.len()),
            ));
        }
        if let Some(f) = &p.forms {
            if f.lower.cols != cols || f.lower.a.len() != rows * cols {
                return Err(Rejection::schema(
                    Some(id),
                    format!("affine forms must be {rows} x {cols}"),
                ));
            }
        }
        Ok(())
    }

    /// Replays every supplied payload in ascending id order.
    fn replay(
        &self,
        region: &BTreeMap<NodeId, Region>,
        bounds: &BTreeMap<NodeId, NodePayload>,
    ) -> Result<(RegionData, Vec<Option<NodePayload>>), Rejection> {
        if let Some(&k) = bounds.keys().find(|&&k| k >= self.g.len()) {
            return Err(Rejection::schema(
                Some(k),
                "bounds entry for a node that does not exist",
            ));
        }
        let rd = self.region(region)?;
        let mut done: Vec<Option<NodePayload>> = vec![None; self.g.len()];
        for (&id, provided) in bounds {
            self.check_lengths(id, provided, rd.lo.len())?;
            let rec = self.step(
                &rd,
                &done,
                id,
                provided.forms.is_some(),
                provided.alpha.as_deref(),
                provided.beta.as_deref(),
            )?;
            compare(id, provided, &rec)?;
            done[id] = Some(rec);
        }
        Ok((rd, done))
    }

    fn output<'b>(&self, done: &'b [Option<NodePayload>]) -> Result<&'b NodePayload, Rejection> {
        let out = self.g.output();
        done[out]
            .as_ref()
            .ok_or_else(|| Rejection::schema(Some(out), "the output node has no certified payload"))
    }

    fn objective_lower(
        &self,
        c: &[f64],
        p: &NodePayload,
        rd: &RegionData,
    ) -> Result<f64, Rejection> {
        if c.len() != p.lo.len() {
            return Err(Rejection::schema(
                Some(self.g.output()),
                format!(
                    "objective has {} entries, output has {}",
                    c.len(),
                    p.lo.len()
                ),
            ));
        }
        Ok(payload_objective_lower(c, p, &rd.lo, &rd.hi))
    }

    fn goal(
        &self,
        goal: &Goal,
        objective: Option<&[f64]>,
        rd: &RegionData,
        done: &[Option<NodePayload>],
    ) -> Result<(), Rejection> {
        let out = self.output(done)?;
        let node = Some(self.g.output());
        let goal_err = |e: GoalError| Rejection::schema(node, e.to_string());
        let holds = match goal {
            Goal::Margin { label } => check_margin(&out.lo, &out.hi, *label).map_err(goal_err)?,
            Goal::Unsat { property } => {
                check_unsat(property, out.lo.len(), |c| {
                    payload_objective_lower(c, out, &rd.lo, &rd.hi)
                })
                .map_err(goal_err)?
                    == super::UnsatVerdict::Safe
            }
            Goal::LowerBound { threshold } => {
                let c = objective.ok_or_else(|| {
                    Rejection::schema(node, "lower_bound goal needs an objective")
                })?;
                self.objective_lower(c, out, rd)? > *threshold
            }
        };
        if holds {
            Ok(())
        } else {
            Err(Rejection::new(
                RejectRule::Goal,
                node,
                format!("{} goal does not hold", goal_name(goal)),
            ))
        }
    }

    fn leaf(&self, cert: &Certificate, leaf: &Leaf) -> Result<Result<(), Rejection>, Rejection> {
        let (rd, done) = self.replay(&leaf.input_region, &leaf.bounds)?;
        let node = Some(self.g.output());
        if let Some(claimed) = leaf.claimed_lower_bound {
            let c = cert
                .objective
                .as_deref()
                .ok_or_else(|| Rejection::schema(node, "claimed_lower_bound needs an objective"))?;
            let lb = self.objective_lower(c, self.output(&done)?, &rd)?;
            if claimed > lb {
                let mut r = Rejection::new(
                    RejectRule::Goal,
                    node,
                    "claimed lower bound exceeds the certified bound",
                );
                r.expected = Some(format!("{lb:e}"));
                r.provided = Some(to_hex(claimed));
                return Ok(Err(r));
            }
            if let Some(t) = leaf.threshold {
                if claimed <= t {
                    return Ok(Err(Rejection::new(
                        RejectRule::Goal,
                        node,
                        "claimed lower bound does not exceed the threshold",
                    )));
                }
            }
        }
        if let Some(goal) = &cert.goal {
            if let Err(e) = self.goal(goal, cert.objective.as_deref(), &rd, &done) {
                return match e.rule {
                    RejectRule::Goal => Ok(Err(e)),
                    _ => Err(e),
                };
            }
        }
        Ok(Ok(()))
    }
}

fn goal_name(g: &Goal) -> &'static str {
    match g {
        Goal::Margin { .. } => "margin",
        Goal::Unsat { .. } => "unsat",
        Goal::LowerBound { .. } => "lower_bound",
    }
}

fn mismatch(
    id: NodeId,
    field: &str,
    index: usize,
    expected: String,
    provided: String,
) -> Rejection {
    Rejection {
        rule: RejectRule::BoundMismatch,
        node: Some(id),
        leaf: None,
        field: Some(field.to_string()),
        index: Some(index),
        expected: Some(expected),
        provided: Some(provided),
        detail: format!("{field}[{index}] differs from the recomputed value"),
    }
}

fn compare_floats(id: NodeId, field: &str, provided: &[f64], rec: &[f64]) -> Result<(), Rejection> {
    if provided.len() != rec.len() {
        return Err(Rejection::schema(
            Some(id),
            format!(
                "{field} has {} entries, expected {}",
                provided.len(),
                rec.len()
            ),
        ));
    }
    match provided
        .iter()
        .zip(rec)
        .position(|(p, r)| p.to_bits() != r.to_bits())
    {
        Some(i) => Err(mismatch(id, field, i, to_hex(rec[i]), to_hex(provided[i]))),
        None => Ok(()),
    }
}

fn compare(id: NodeId, p: &NodePayload, rec: &NodePayload) -> Result<(), Rejection> {
    compare_floats(id, "lo", &p.lo, &rec.lo)?;
    compare_floats(id, "hi", &p.hi, &rec.hi)?;
    if let (Some(pf), Some(rf)) = (&p.forms, &rec.forms) {
        compare_floats(id, "aL", &pf.lower.a, &rf.lower.a)?;
        compare_floats(id, "bL", &pf.lower.b, &rf.lower.b)?;
        compare_floats(id, "aU", &pf.upper.a, &rf.upper.a)?;
        compare_floats(id, "bU", &pf.upper.b, &rf.upper.b)?;
    }
    if let (Some(pa), Some(ra)) = (&p.alpha, &rec.alpha) {
        compare_floats(id, "alpha", pa, ra)?;
    }
    if let (Some(pb), Some(rb)) = (&p.beta, &rec.beta) {
        if let Some(i) = pb.iter().zip(rb).position(|(a, b)| a != b) {
            return Err(mismatch(
                id,
                "beta",
                i,
                rb[i].to_string(),
                pb[i].to_string(),
            ));
        }
    }
    Ok(())
}

fn flatten_region(g: &WellTypedGraph, r: &BTreeMap<NodeId, Region>) -> Vec<(f64, f64)> {
    g.inputs()
        .iter()
        .filter_map(|id| r.get(id))
        .flat_map(|b| b.lo.iter().copied().zip(b.hi.iter().copied()))
        .collect()
}

fn check_inner(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
    graph_id: &str,
    cert: &Certificate,
) -> Result<(), Rejection> {
    if cert.graph_id != graph_id {
        let mut r = Rejection::schema(None, "graph_id does not match the graph");
        r.field = Some("graph_id".into());
        r.expected = Some(graph_id.to_string());
        r.provided = Some(cert.graph_id.clone());
        return Err(r);
    }
    let rp = Replay::new(g, params);
    let (rd, done) = rp.replay(&cert.input_region, &cert.bounds)?;
    if cert.leaves.is_empty() {
        return match &cert.goal {
            Some(goal) => rp.goal(goal, cert.objective.as_deref(), &rd, &done),
            None => Ok(()),
        };
    }
    let mut verdicts = Vec::with_capacity(cert.leaves.len());
    let mut failures = Vec::with_capacity(cert.leaves.len());
    for (i, leaf) in cert.leaves.iter().enumerate() {
        let r = rp.leaf(cert, leaf).map_err(|e| e.in_leaf(i))?;
        verdicts.push(r.is_ok());
        failures.push(r.err());
    }
    let root = flatten_region(g, &cert.input_region);
    let boxes: Vec<Vec<(f64, f64)>> = cert
        .leaves
        .iter()
        .map(|l| flatten_region(g, &l.input_region))
        .collect();
    match check_leaves(&root, &boxes, &verdicts) {
        Ok(LeavesVerdict::Valid) => Ok(()),
        Ok(LeavesVerdict::CoverageGap) => Err(Rejection::new(
            RejectRule::Goal,
            None,
            "leaf boxes do not cover the input region",
        )),
        Ok(LeavesVerdict::LeafFailed(i)) => {
            Err(failures[i].take().expect("failed leaf").in_leaf(i))
        }
        Err(e @ GoalError::CoverageUnsupported { .. }) => {
            Err(Rejection::new(RejectRule::Goal, None, e.to_string()))
        }
        Err(e) => Err(Rejection::schema(None, e.to_string())),
    }
}

/// Replays a parsed certificate. Never fails: every problem is a rejection.
pub fn check_certificate(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
    graph_id: &str,
    cert: &Certificate,
) -> CheckReport {
    CheckReport::from_result(check_inner(g, params, graph_id, cert))
}

/// Parses and replays a certificate document.
pub fn check_certificate_json(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
    graph_id: &str,
    doc: &Value,
) -> CheckReport {
    match Certificate::from_json(doc) {
        Ok(cert) => check_certificate(g, params, graph_id, &cert),
        Err(e) => {
            let mut r = Rejection::schema(None, e.detail);
            r.field = Some(e.path);
            CheckReport::from_result(Err(r))
        }
    }
}

/// Produces canonical payloads for every node over `region` (one box per
/// graph input, in input order). Region sides are snapped outward onto the
/// binary32 grid.
pub fn emit_payloads(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
    region: &[Region],
    relax: &RelaxParams,
    mode: EmitMode,
) -> Result<(BTreeMap<NodeId, Region>, BTreeMap<NodeId, NodePayload>), Rejection> {
    if region.len() != g.inputs().len() {
        return Err(Rejection::schema(
            None,
            format!(
                "{} input boxes for {} inputs",
                region.len(),
                g.inputs().len()
            ),
        ));
    }
    let snapped: BTreeMap<NodeId, Region> = g
        .inputs()
        .iter()
        .zip(region)
        .map(|(&id, r)| {
            (
                id,
                Region {
                    lo: r.lo.iter().map(|&x| canonical_directed(x, true)).collect(),
                    hi: r.hi.iter().map(|&x| canonical_directed(x, false)).collect(),
                },
            )
        })
        .collect();
    let rp = Replay::new(g, params);
    let rd = rp.region(&snapped)?;
    let mut done: Vec<Option<NodePayload>> = vec![None; g.len()];
    for node in g.nodes() {
        let crown = mode == EmitMode::Crown;
        let relu = matches!(node.kind, OpKind::Relu);
        let alpha: Option<Vec<f64>> = relax
            .alpha
            .get(&node.id)
            .filter(|_| crown && relu)
            .map(|a| a.iter().map(|&x| canonical(x)).collect());
        let beta = relax
            .beta
            .get(&node.id)
            .filter(|_| relu)
            .map(|b| b.as_slice());
        let p = rp.step(&rd, &done, node.id, crown, alpha.as_deref(), beta)?;
        done[node.id] = Some(p);
    }
    let bounds = done
        .into_iter()
        .enumerate()
        .map(|(i, p)| (i, p.expect("every node emitted")))
        .collect();
    Ok((snapped, bounds))
}

/// Certificate covering every node of `g` over `region`.
pub fn emit_certificate(
    g: &WellTypedGraph,
    params: &ParamStore<f64>,
    graph_id: &str,
    region: &[Region],
    relax: &RelaxParams,
    mode: EmitMode,
) -> Result<Certificate, Rejection> {
    let (input_region, bounds) = emit_payloads(g, params, region, relax, mode)?;
    Ok(Certificate {
        graph_id: graph_id.to_string(),
        input_region,
        bounds,
        objective: None,
        goal: None,
        leaves: Vec::new(),
    })
}
