//! Bound certificates: JSON format, producer, replay checker and goal checks.
//!
//! A certificate lists, per node, a box and optionally affine forms over the
//! flattened input plus ReLU slopes `alpha` and phases `beta`. The checker
//! recomputes every supplied node in ascending id order from the certified
//! parent payloads and requires bit equality with the supplied values.

mod check;
pub mod goals;

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::bounds::{AffBounds, AffineForm};
use crate::codec::{self, ferr, FormatError};
use crate::ir::NodeId;

pub use check::{
    check_certificate, check_certificate_json, emit_certificate, emit_payloads, CheckReport,
    EmitMode, RejectRule, Rejection,
};
pub use goals::{
    check_leaves, check_lyapunov, check_margin, check_residual, check_unsat, check_unsat_box,
    objective_lower, Clause, GoalError, LeavesVerdict, PropertySpec, Residual, UnsatVerdict,
};

pub const SCHEMA_VERSION: u64 = 1;

/// Box for one input node, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Certified data for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePayload {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub forms: Option<AffBounds>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<i8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    /// Logit margin for the given label.
    Margin { label: usize },
    /// Sufficient UNSAT condition for the property.
    Unsat { property: PropertySpec },
    /// `objective . y > threshold`.
    LowerBound { threshold: f64 },
}

/// One branch-and-bound leaf: a sub-region with its own node payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub input_region: BTreeMap<NodeId, Region>,
    pub bounds: BTreeMap<NodeId, NodePayload>,
    pub claimed_lower_bound: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub graph_id: String,
    pub input_region: BTreeMap<NodeId, Region>,
    pub bounds: BTreeMap<NodeId, NodePayload>,
    pub objective: Option<Vec<f64>>,
    pub goal: Option<Goal>,
    pub leaves: Vec<Leaf>,
}

fn region_to_json(r: &BTreeMap<NodeId, Region>) -> Value {
    let m: Map<String, Value> = r
        .iter()
        .map(|(id, b)| {
            (
                id.to_string(),
                json!({ "lo": codec::hex_array(&b.lo), "hi": codec::hex_array(&b.hi) }),
            )
        })
        .collect();
    Value::Object(m)
}

fn payload_to_json(p: &NodePayload) -> Value {
    let mut m = Map::new();
    m.insert("lo".into(), codec::hex_array(&p.lo));
    m.insert("hi".into(), codec::hex_array(&p.hi));
    if let Some(f) = &p.forms {
        m.insert("aL".into(), codec::hex_array(&f.lower.a));
        m.insert("bL".into(), codec::hex_array(&f.lower.b));
        m.insert("aU".into(), codec::hex_array(&f.upper.a));
        m.insert("bU".into(), codec::hex_array(&f.upper.b));
    }
    if let Some(a) = &p.alpha {
        m.insert("alpha".into(), codec::hex_array(a));
    }
    if let Some(b) = &p.beta {
        m.insert("beta".into(), json!(b));
    }
    Value::Object(m)
}

fn bounds_to_json(b: &BTreeMap<NodeId, NodePayload>) -> Value {
    Value::Object(
        b.iter()
            .map(|(id, p)| (id.to_string(), payload_to_json(p)))
            .collect(),
    )
}

fn goal_to_json(g: &Goal) -> Value {
    match g {
        Goal::Margin { label } => json!({ "kind": "margin", "label": label }),
        Goal::Unsat { property } => json!({ "kind": "unsat", "property": property.to_json() }),
        Goal::LowerBound { threshold } => {
            json!({ "kind": "lower_bound", "threshold": codec::to_hex(*threshold) })
        }
    }
}

fn reject_unknown(
    obj: &Map<String, Value>,
    allowed: &[&str],
    path: &str,
) -> Result<(), FormatError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ferr(path, format!("unknown field `{k}`"))),
        None => Ok(()),
    }
}

fn region_from_json(v: &Value, path: &str) -> Result<BTreeMap<NodeId, Region>, FormatError> {
    let mut out = BTreeMap::new();
    for (k, rv) in codec::object(v, path)? {
        let p = format!("{path}.{k}");
        let id = codec::node_key(k, &p)?;
        let obj = codec::object(rv, &p)?;
        reject_unknown(obj, &["lo", "hi"], &p)?;
        let lo = codec::parse_array(codec::field(obj, "lo", &p)?, &format!("{p}.lo"))?;
        let hi = codec::parse_array(codec::field(obj, "hi", &p)?, &format!("{p}.hi"))?;
        if lo.len() != hi.len() {
            return Err(ferr(&p, "lo and hi lengths differ"));
        }
        out.insert(id, Region { lo, hi });
    }
    Ok(out)
}

fn payload_from_json(v: &Value, path: &str) -> Result<NodePayload, FormatError> {
    let obj = codec::object(v, path)?;
    reject_unknown(
        obj,
        &["lo", "hi", "aL", "bL", "aU", "bU", "alpha", "beta"],
        path,
    )?;
    let arr = |key: &str| -> Result<Option<Vec<f64>>, FormatError> {
        obj.get(key)
            .map(|x| codec::parse_array(x, &format!("{path}.{key}")))
            .transpose()
    };
    let lo = arr("lo")?.ok_or_else(|| ferr(path, "missing field `lo`"))?;
    let hi = arr("hi")?.ok_or_else(|| ferr(path, "missing field `hi`"))?;
    if lo.len() != hi.len() {
        return Err(ferr(path, "lo and hi lengths differ"));
    }
    let rows = lo.len();
    let forms = match (arr("aL")?, arr("bL")?, arr("aU")?, arr("bU")?) {
        (None, None, None, None) => None,
        (Some(al), Some(bl), Some(au), Some(bu)) => {
            if bl.len() != rows || bu.len() != rows {
                return Err(ferr(path, "bL and bU must have one entry per unit"));
            }
            if al.len() != au.len()
                || (rows > 0 && al.len() % rows != 0)
                || (rows == 0 && !al.is_empty())
            {
                return Err(ferr(path, "aL and aU must be rows x columns"));
            }
            let cols = if rows == 0 { 0 } else { al.len() / rows };
            Some(AffBounds {
                lower: AffineForm { cols, a: al, b: bl },
                upper: AffineForm { cols, a: au, b: bu },
            })
        }
        _ => return Err(ferr(path, "aL, bL, aU and bU must appear together")),
    };
    let alpha = arr("alpha")?;
    let beta = obj
        .get("beta")
        .map(|b| {
            let p = format!("{path}.beta");
            let xs = b.as_array().ok_or_else(|| ferr(&p, "expected an array"))?;
            xs.iter()
                .map(|x| match x.as_i64() {
                    Some(v @ -1..=1) => Ok(v as i8),
                    _ => Err(ferr(&p, "phases must be -1, 0 or 1")),
                })
                .collect::<Result<Vec<i8>, _>>()
        })
        .transpose()?;
    Ok(NodePayload {
        lo,
        hi,
        forms,
        alpha,
        beta,
    })
}

fn bounds_from_json(v: &Value, path: &str) -> Result<BTreeMap<NodeId, NodePayload>, FormatError> {
    let mut out = BTreeMap::new();
    for (k, pv) in codec::object(v, path)? {
        let p = format!("{path}.{k}");
        out.insert(codec::node_key(k, &p)?, payload_from_json(pv, &p)?);
    }
    Ok(out)
}

fn goal_from_json(v: &Value, path: &str) -> Result<Goal, FormatError> {
    let obj = codec::object(v, path)?;
    let kind = codec::string(codec::field(obj, "kind", path)?, &format!("{path}.kind"))?;
    match kind.as_str() {
        "margin" => Ok(Goal::Margin {
            label: codec::index(codec::field(obj, "label", path)?, &format!("{path}.label"))?,
        }),
        "unsat" => Ok(Goal::Unsat {
            property: PropertySpec::from_json(
                codec::field(obj, "property", path)?,
                &format!("{path}.property"),
            )?,
        }),
        "lower_bound" => Ok(Goal::LowerBound {
            threshold: codec::parse_value(
                codec::field(obj, "threshold", path)?,
                &format!("{path}.threshold"),
            )?,
        }),
        other => Err(ferr(path, format!("unknown goal kind `{other}`"))),
    }
}

impl Certificate {
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("graph_id".into(), json!(self.graph_id));
        m.insert("input_region".into(), region_to_json(&self.input_region));
        m.insert("bounds".into(), bounds_to_json(&self.bounds));
        if let Some(c) = &self.objective {
            m.insert("objective".into(), codec::hex_array(c));
        }
        if let Some(g) = &self.goal {
            m.insert("goal".into(), goal_to_json(g));
        }
        if !self.leaves.is_empty() {
            let leaves = self
                .leaves
                .iter()
                .map(|l| {
                    let mut lm = Map::new();
                    lm.insert("input_region".into(), region_to_json(&l.input_region));
                    lm.insert("bounds".into(), bounds_to_json(&l.bounds));
                    if let Some(c) = l.claimed_lower_bound {
                        lm.insert("claimed_lower_bound".into(), json!(codec::to_hex(c)));
                    }
                    if let Some(t) = l.threshold {
                        lm.insert("threshold".into(), json!(codec::to_hex(t)));
                    }
                    Value::Object(lm)
                })
                .collect();
            m.insert("leaves".into(), Value::Array(leaves));
        }
        Value::Object(m)
    }

    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("certificate serializes")
    }

    pub fn from_json(v: &Value) -> Result<Self, FormatError> {
        let path = "$";
        let obj = codec::object(v, path)?;
        reject_unknown(
            obj,
            &[
                "schema_version",
                "graph_id",
                "input_region",
                "bounds",
                "objective",
                "goal",
                "leaves",
            ],
            path,
        )?;
        match codec::field(obj, "schema_version", path)?.as_u64() {
            Some(SCHEMA_VERSION) => {}
            _ => {
                return Err(ferr(
                    "$.schema_version",
                    format!("expected {SCHEMA_VERSION}"),
                ))
            }
        }
        let graph_id = codec::string(codec::field(obj, "graph_id", path)?, "$.graph_id")?;
        let input_region =
            region_from_json(codec::field(obj, "input_region", path)?, "$.input_region")?;
        let bounds = bounds_from_json(codec::field(obj, "bounds", path)?, "$.bounds")?;
        let objective = obj
            .get("objective")
            .map(|c| codec::parse_array(c, "$.objective"))
            .transpose()?;
        let goal = obj
            .get("goal")
            .map(|g| goal_from_json(g, "$.goal"))
            .transpose()?;
        let mut leaves = Vec::new();
        if let Some(lv) = obj.get("leaves") {
            let arr = lv
                .as_array()
                .ok_or_else(|| ferr("$.leaves", "expected an array"))?;
            for (i, l) in arr.iter().enumerate() {
                let p = format!("$.leaves[{i}]");
                let lo = codec::object(l, &p)?;
                reject_unknown(
                    lo,
                    &["input_region", "bounds", "claimed_lower_bound", "threshold"],
                    &p,
                )?;
                let scalar = |key: &str| {
                    lo.get(key)
                        .map(|x| codec::parse_value(x, &format!("{p}.{key}")))
                        .transpose()
                };
                leaves.push(Leaf {
                    input_region: region_from_json(
                        codec::field(lo, "input_region", &p)?,
                        &format!("{p}.input_region"),
                    )?,
                    bounds: bounds_from_json(
                        codec::field(lo, "bounds", &p)?,
                        &format!("{p}.bounds"),
                    )?,
                    claimed_lower_bound: scalar("claimed_lower_bound")?,
                    threshold: scalar("threshold")?,
                });
            }
        }
        Ok(Certificate {
            graph_id,
            input_region,
            bounds,
            objective,
            goal,
            leaves,
        })
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ferr("$", e.to_string()))?;
        Self::from_json(&v)
    }
}
