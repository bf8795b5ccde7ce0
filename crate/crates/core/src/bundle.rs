//! Model bundles: graph, parameters, and optional verification data in one
//! canonical JSON document.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "graph_id": "relu-toy",
//!   "nodes": [
//!     {"id": 0, "op": "input", "parents": [], "out_shape": [1]},
//!     {"id": 1, "op": "relu", "parents": [0], "out_shape": [1]}
//!   ],
//!   "output": 1,
//!   "params": {},
//!   "input_region": {"0": {"lo": ["0xBF800000"], "hi": ["0x3F800000"]}}
//! }
//! ```
//!
//! Tensors are `{"shape": [..], "data": [hex..], "data_dec": [..]}`; the
//! decimal mirror is written for reading and ignored on load. Optional keys:
//! `input_region`, `property`, `label`, `train_inputs`, `metadata`.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::cert::{PropertySpec, Region};
use crate::codec::{self, ferr, FormatError};
use crate::error::ValidationError;
use crate::ir::{validate_graph, Graph, Node, NodeId, OpKind, WellTypedGraph};
use crate::params::ParamStore;
use crate::shape::Shape;
use crate::tensor::TensorValue;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("bundle format: {0}")]
    Format(#[from] FormatError),
    #[error("bundle graph: {0}")]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub graph_id: String,
    pub graph: WellTypedGraph,
    pub params: ParamStore<f64>,
    pub input_region: Option<BTreeMap<NodeId, Region>>,
    pub property: Option<PropertySpec>,
    /// Expected class for margin checks.
    pub label: Option<usize>,
    /// Context inputs for the training demo, keyed by input node id.
    pub train_inputs: Option<BTreeMap<NodeId, TensorValue<f64>>>,
    pub metadata: Option<Value>,
}

pub fn tensor_to_json(t: &TensorValue<f64>) -> Value {
    json!({
        "shape": t.shape().dims(),
        "data": codec::hex_array(t.data()),
        "data_dec": codec::decimal_array(t.data()),
    })
}

pub fn tensor_from_json(v: &Value, path: &str) -> Result<TensorValue<f64>, FormatError> {
    let obj = codec::object(v, path)?;
    let dims = codec::index_array(codec::field(obj, "shape", path)?, &format!("{path}.shape"))?;
    let shape =
        Shape::from_dims(&dims).map_err(|e| ferr(&format!("{path}.shape"), e.to_string()))?;
    let data = codec::parse_array(codec::field(obj, "data", path)?, &format!("{path}.data"))?;
    TensorValue::new(shape, data).map_err(|e| ferr(&format!("{path}.data"), e.to_string()))
}

fn node_to_json(n: &Node) -> Value {
    let mut v = serde_json::to_value(&n.kind).expect("op kinds serialize");
    let m = v.as_object_mut().expect("tagged op object");
    m.insert("id".into(), json!(n.id));
    m.insert("parents".into(), json!(n.parents));
    m.insert("out_shape".into(), json!(n.out_shape.dims()));
    v
}

fn node_from_json(v: &Value, path: &str) -> Result<Node, FormatError> {
    let mut obj = codec::object(v, path)?.clone();
    let id = codec::index(
        &obj.remove("id")
            .ok_or_else(|| ferr(path, "missing field `id`"))?,
        &format!("{path}.id"),
    )?;
    let parents = codec::index_array(
        &obj.remove("parents")
            .ok_or_else(|| ferr(path, "missing field `parents`"))?,
        &format!("{path}.parents"),
    )?;
    let dims = codec::index_array(
        &obj.remove("out_shape")
            .ok_or_else(|| ferr(path, "missing field `out_shape`"))?,
        &format!("{path}.out_shape"),
    )?;
    let out_shape =
        Shape::from_dims(&dims).map_err(|e| ferr(&format!("{path}.out_shape"), e.to_string()))?;
    let kind: OpKind =
        serde_json::from_value(Value::Object(obj)).map_err(|e| ferr(path, e.to_string()))?;
    Ok(Node {
        id,
        parents,
        kind,
        out_shape,
    })
}

fn body_json(graph: &Graph, params: &ParamStore<f64>) -> Value {
    let mut m = Map::new();
    m.insert(
        "nodes".into(),
        Value::Array(graph.nodes.iter().map(node_to_json).collect()),
    );
    m.insert("output".into(), json!(graph.output));
    let pm: Map<String, Value> = params
        .iter()
        .map(|(k, t)| (k.to_string(), tensor_to_json(t)))
        .collect();
    m.insert("params".into(), Value::Object(pm));
    Value::Object(m)
}

/// Content hash of the graph and parameters, used when a bundle names no id.
pub fn content_id(graph: &Graph, params: &ParamStore<f64>) -> String {
    let text = serde_json::to_string(&body_json(graph, params)).expect("bundle body serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl ModelBundle {
    /// Bundle for a validated graph with a content-derived id.
    pub fn new(graph: WellTypedGraph, params: ParamStore<f64>) -> Self {
        let graph_id = content_id(graph.graph(), &params);
        ModelBundle {
            graph_id,
            graph,
            params,
            input_region: None,
            property: None,
            label: None,
            train_inputs: None,
            metadata: None,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = body_json(self.graph.graph(), &self.params);
        let m = v.as_object_mut().expect("object");
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("graph_id".into(), json!(self.graph_id));
        if let Some(r) = &self.input_region {
            let rm: Map<String, Value> = r
                .iter()
                .map(|(id, b)| {
                    (
                        id.to_string(),
                        json!({"lo": codec::hex_array(&b.lo), "hi": codec::hex_array(&b.hi)}),
                    )
                })
                .collect();
            m.insert("input_region".into(), Value::Object(rm));
        }
        if let Some(p) = &self.property {
            m.insert("property".into(), p.to_json());
        }
        if let Some(l) = self.label {
            m.insert("label".into(), json!(l));
        }
        if let Some(t) = &self.train_inputs {
            let tm: Map<String, Value> = t
                .iter()
                .map(|(id, x)| (id.to_string(), tensor_to_json(x)))
                .collect();
            m.insert("train_inputs".into(), Value::Object(tm));
        }
        if let Some(md) = &self.metadata {
            m.insert("metadata".into(), md.clone());
        }
        v
    }

    /// Input region as one box per graph input, in input order.
    pub fn region_list(&self) -> Option<Vec<Region>> {
        let r = self.input_region.as_ref()?;
        self.graph
            .inputs()
            .iter()
            .map(|id| r.get(id).cloned())
            .collect()
    }

    /// Training context inputs in input order.
    pub fn train_context(&self) -> Option<Vec<TensorValue<f64>>> {
        let t = self.train_inputs.as_ref()?;
        self.graph
            .inputs()
            .iter()
            .map(|id| t.get(id).cloned())
            .collect()
    }
}

/// Canonical bytes: sorted keys, hex binary32 floats, trailing newline.
pub fn save_bundle(b: &ModelBundle) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(&b.to_json()).expect("bundle serializes");
    s.push('\n');
    s.into_bytes()
}

fn region_map(v: &Value, path: &str) -> Result<BTreeMap<NodeId, Region>, FormatError> {
    let mut out = BTreeMap::new();
    for (k, rv) in codec::object(v, path)? {
        let p = format!("{path}.{k}");
        let obj = codec::object(rv, &p)?;
        let lo = codec::parse_array(codec::field(obj, "lo", &p)?, &format!("{p}.lo"))?;
        let hi = codec::parse_array(codec::field(obj, "hi", &p)?, &format!("{p}.hi"))?;
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(ferr(&p, "region needs equal lengths and lo <= hi"));
        }
        out.insert(codec::node_key(k, &p)?, Region { lo, hi });
    }
    Ok(out)
}

/// Parses and validates a bundle.
pub fn load_bundle(bytes: &[u8]) -> Result<ModelBundle, BundleError> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| ferr("$", e.to_string()))?;
    let obj = codec::object(&v, "$")?;
    if let Some(k) = obj.keys().find(|k| {
        ![
            "schema_version",
            "graph_id",
            "nodes",
            "output",
            "params",
            "input_region",
            "property",
            "label",
            "train_inputs",
            "metadata",
        ]
        .contains(&k.as_str())
    }) {
        return Err(ferr("$", format!("unknown field `{k}`")).into());
    }
    match codec::field(obj, "schema_version", "$")?.as_u64() {
        Some(SCHEMA_VERSION) => {}
        _ => return Err(ferr("$.schema_version", format!("expected {SCHEMA_VERSION}")).into()),
    }
    let nodes = codec::field(obj, "nodes", "$")?
        .as_array()
        .ok_or_else(|| ferr("$.nodes", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, n)| node_from_json(n, &format!("$.nodes[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let output = codec::index(codec::field(obj, "output", "$")?, "$.output")?;
    let mut params = ParamStore::new();
    for (k, t) in codec::object(codec::field(obj, "params", "$")?, "$.params")? {
        params.insert(k.clone(), tensor_from_json(t, &format!("$.params.{k}"))?);
    }
    let graph = Graph { nodes, output };
    let graph_id = match obj.get("graph_id") {
        Some(g) => codec::string(g, "$.graph_id")?,
        None => content_id(&graph, &params),
    };
    let graph = validate_graph(&graph, &params)?;
    let input_region = obj
        .get("input_region")
        .map(|r| region_map(r, "$.input_region"))
        .transpose()?;
    let property = obj
        .get("property")
        .map(|p| PropertySpec::from_json(p, "$.property"))
        .transpose()?;
    let label = obj
        .get("label")
        .map(|l| codec::index(l, "$.label"))
        .transpose()?;
    let train_inputs = obj
        .get("train_inputs")
        .map(|t| -> Result<_, FormatError> {
            let mut m = BTreeMap::new();
            for (k, x) in codec::object(t, "$.train_inputs")? {
                let p = format!("$.train_inputs.{k}");
                m.insert(codec::node_key(k, &p)?, tensor_from_json(x, &p)?);
            }
            Ok(m)
        })
        .transpose()?;
    Ok(ModelBundle {
        graph_id,
        graph,
        params,
        input_region,
        property,
        label,
        train_inputs,
        metadata: obj.get("metadata").cloned(),
    })
}

/// Input tensors file: `{"inputs": [tensor, ...]}` in graph input order.
pub fn load_inputs(bytes: &[u8]) -> Result<Vec<TensorValue<f64>>, FormatError> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| ferr("$", e.to_string()))?;
    let obj = codec::object(&v, "$")?;
    codec::field(obj, "inputs", "$")?
        .as_array()
        .ok_or_else(|| ferr("$.inputs", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, t)| tensor_from_json(t, &format!("$.inputs[{i}]")))
        .collect()
}

pub fn save_inputs(inputs: &[TensorValue<f64>]) -> Vec<u8> {
    let v = json!({ "inputs": inputs.iter().map(tensor_to_json).collect::<Vec<_>>() });
    let mut s = serde_json::to_string_pretty(&v).expect("inputs serialize");
    s.push('\n');
    s.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ValidationRule;
    use crate::ir::GraphBuilder;

    fn mlp() -> ModelBundle {
        let mut b = GraphBuilder::new();
        let x = b.input(Shape::vector(2));
        let h = b.linear(x, 2, 3, "w1", Some("b1"));
        let r = b.relu(h);
        let y = b.linear(r, 3, 2, "w2", None);
        let mut p = ParamStore::new();
        p.insert(
            "w1",
            TensorValue::new(Shape::matrix(3, 2), vec![1.0, -0.5, 0.25, 2.0, -1.0, 0.1]).unwrap(),
        );
        p.insert(
            "b1",
            TensorValue::new(Shape::vector(3), vec![0.0, 0.5, -0.3]).unwrap(),
        );
        p.insert(
            "w2",
            TensorValue::new(Shape::matrix(2, 3), vec![0.3, -0.7, 1.5, 0.0, 1.0, -2.0]).unwrap(),
        );
        let p = p.map(|t| t.map(|&x| codec::canonical(x)));
        let g = validate_graph(&b.finish(y), &p).unwrap();
        ModelBundle::new(g, p)
    }

    #[test]
    fn save_load_is_byte_identical() {
        let bytes = save_bundle(&mlp());
        let back = load_bundle(&bytes).unwrap();
        assert_eq!(save_bundle(&back), bytes);
        let orig = mlp();
        assert_eq!(back.graph, orig.graph);
        for (k, t) in orig.params.iter() {
            assert_eq!(back.params.get(k), Some(t));
        }
    }

    #[test]
    fn hex_weight_is_one() {
        let text = r#"{"schema_version":1,"nodes":[{"id":0,"op":"param","key":"w","parents":[],"out_shape":[1]}],
            "output":0,"params":{"w":{"shape":[1],"data":["0x3F800000"]}}}"#;
        let b = load_bundle(text.as_bytes()).unwrap();
        assert_eq!(b.params.get("w").unwrap().data(), &[1.0]);
    }

    #[test]
    fn missing_parent_names_the_node() {
        let text = r#"{"schema_version":1,"nodes":[{"id":0,"op":"input","parents":[],"out_shape":[1]},
            {"id":1,"op":"relu","parents":[7],"out_shape":[1]}],"output":1,"params":{}}"#;
        match load_bundle(text.as_bytes()) {
            Err(BundleError::Validation(e)) => {
                assert_eq!(e.node, 1);
                assert_eq!(e.rule, ValidationRule::SsaOrder);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_float_reports_path() {
        let text = r#"{"schema_version":1,"nodes":[{"id":0,"op":"param","key":"w","parents":[],"out_shape":[1]}],
            "output":0,"params":{"w":{"shape":[1],"data":["nope"]}}}"#;
        match load_bundle(text.as_bytes()) {
            Err(BundleError::Format(e)) => assert_eq!(e.path, "$.params.w.data[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
