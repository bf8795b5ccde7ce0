use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Rejected,
    Unknown,
    Failed,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Rejected | Status::Unknown | Status::Failed => 1,
            Status::Error => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    pub name: String,
    pub verdict: String,
    pub detail: Value,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct NodeReport {
    pub id: usize,
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hex: Option<Vec<String>>,
}

/// Output of every command. All keys are always present.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub status: Status,
    pub graph_id: Option<String>,
    pub instances: Vec<Instance>,
    pub nodes: Vec<NodeReport>,
    pub summary: Map<String, Value>,
    pub timing_ms: f64,
    pub error: Option<String>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            status: Status::Ok,
            graph_id: None,
            instances: Vec::new(),
            nodes: Vec::new(),
            summary: Map::new(),
            timing_ms: 0.0,
            error: None,
        }
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }
}

/// JSON number for finite values, `"inf"`, `"-inf"` or `"nan"` otherwise.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

pub fn nums(xs: &[f64]) -> Vec<Value> {
    xs.iter().map(|&x| num(x)).collect()
}
