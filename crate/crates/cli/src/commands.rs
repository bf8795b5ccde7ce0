use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use graphcert::bounds::{crown_backward, crown_forward, lower, run_ibp, upper, RelaxParams};
use graphcert::bundle::{load_bundle, load_inputs, ModelBundle};
use graphcert::cert::{
    check_certificate_json, check_unsat, check_unsat_box, emit_certificate, EmitMode, Region, UnsatVerdict,
};
use graphcert::codec::{self, FormatError};
use graphcert::optim::{train, Optimizer};
use graphcert::scalar::IntervalDomain;
use graphcert::{autodiff, bounds, eval_graph, B32Interval, Context, Fp32, RealInterval, ScalarDomain, TensorValue, B32};

use crate::report::{num, nums, Instance, NodeReport, RunReport, Status};
use crate::{Backing, Domain, Method, Opt};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Schema(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o: {m}"),
            CliError::Schema(m) => write!(f, "schema: {m}"),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Schema(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn bundle(path: &Path) -> Result<ModelBundle> {
    load_bundle(&read(path)?).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn json_file(path: &Path) -> Result<Value> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn inputs(b: &ModelBundle, path: &Path) -> Result<Vec<TensorValue<f64>>> {
    let xs = load_inputs(&read(path)?)?;
    let shapes = b.graph.input_shapes();
    if xs.len() != shapes.len() || xs.iter().zip(&shapes).any(|(x, s)| x.shape() != s) {
        return Err(CliError::Schema(format!(
            "{}: inputs do not match the graph's input shapes",
            path.display()
        )));
    }
    Ok(xs)
}

fn region(b: &ModelBundle) -> Result<Vec<Region>> {
    b.region_list()
        .ok_or_else(|| CliError::Schema("bundle has no input_region for every input".into()))
}

fn region_box<I: IntervalDomain>(b: &ModelBundle, r: &[Region]) -> Result<Vec<TensorValue<I>>> {
    let shapes = b.graph.input_shapes();
    r.iter()
        .zip(shapes)
        .map(|(r, s)| {
            if r.lo.len() != s.size() {
                return Err(CliError::Schema("input_region size does not match the input shape".into()));
            }
            Ok(bounds::box_from_bounds(s, &r.lo, &r.hi))
        })
        .collect()
}

fn node_boxes<I: IntervalDomain>(b: &ModelBundle, boxes: &[TensorValue<I>]) -> Vec<NodeReport> {
    b.graph
        .nodes()
        .iter()
        .zip(boxes)
        .map(|(n, x)| NodeReport {
            id: n.id,
            op: n.kind.name().to_string(),
            lo: Some(nums(&lower(x))),
            hi: Some(nums(&upper(x))),
            ..Default::default()
        })
        .collect()
}

fn start(name: &str, b: &ModelBundle) -> RunReport {
    let mut r = RunReport::new(name);
    r.graph_id = Some(b.graph_id.clone());
    r
}

pub fn validate(path: &Path) -> Result<RunReport> {
    let b = bundle(path)?;
    let mut r = start("validate", &b);
    r.set("nodes", b.graph.len());
    r.set("inputs", b.graph.inputs().len());
    r.set("params", b.params.len());
    r.set("output_shape", json!(b.graph.output_shape().dims()));
    Ok(r)
}

fn eval_in<S: ScalarDomain>(
    b: &ModelBundle,
    xs: &[TensorValue<f64>],
    real: impl Fn(&S) -> f64,
    hex: Option<fn(&S) -> String>,
) -> std::result::Result<Vec<NodeReport>, String> {
    let conv = |t: &TensorValue<f64>| t.convert::<S>().map_err(|e| e.to_string());
    let ctx = Context::new(
        xs.iter().map(conv).collect::<std::result::Result<_, _>>()?,
        b.params.convert::<S>().map_err(|e| e.to_string())?,
    );
    let values = eval_graph(&b.graph, &ctx).map_err(|e| e.to_string())?;
    Ok(b.graph
        .nodes()
        .iter()
        .zip(values.all())
        .map(|(n, v)| NodeReport {
            id: n.id,
            op: n.kind.name().to_string(),
            value: Some(v.data().iter().map(|x| num(real(x))).collect()),
            hex: hex.map(|h| v.data().iter().map(h).collect()),
            ..Default::default()
        })
        .collect())
}

pub fn eval(path: &Path, input: &Path, domain: Domain) -> Result<RunReport> {
    let b = bundle(path)?;
    let xs = inputs(&b, input)?;
    let mut r = start("eval", &b);
    let res = match domain {
        Domain::Real => eval_in::<f64>(&b, &xs, |x| *x, None),
        Domain::Fp32 => eval_in::<Fp32>(&b, &xs, |x| x.value(), Some(|x: &Fp32| x.to_b32().to_hex())),
        Domain::Ieee32 => eval_in::<B32>(&b, &xs, |x| x.to_f64(), Some(|x: &B32| x.to_hex())),
    };
    r.set(
        "domain",
        match domain {
            Domain::Real => "real",
            Domain::Fp32 => "fp32",
            Domain::Ieee32 => "ieee32",
        },
    );
    match res {
        Ok(nodes) => {
            r.set("output", json!(nodes[b.graph.output()].value));
            r.nodes = nodes;
        }
        Err(e) => {
            r.status = Status::Failed;
            r.error = Some(e);
        }
    }
    Ok(r)
}

pub fn grad(path: &Path, input: &Path, seed: Option<&Path>) -> Result<RunReport> {
    let b = bundle(path)?;
    let xs = inputs(&b, input)?;
    let out_shape = b.graph.output_shape().clone();
    let seed = match seed {
        Some(p) => {
            let s = load_inputs(&read(p)?)?;
            match s.into_iter().next() {
                Some(t) if t.shape() == &out_shape => t,
                _ => return Err(CliError::Schema(format!("{}: seed must match the output shape", p.display()))),
            }
        }
        None => TensorValue::filled(out_shape, 1.0),
    };
    let ctx = Context::new(xs, b.params.clone());
    let mut r = start("grad", &b);
    match autodiff::vjp(&b.graph, &ctx, &seed) {
        Ok(cot) => {
            r.set("input_grads", json!(cot.inputs.iter().map(|t| nums(t.data())).collect::<Vec<_>>()));
            let pg: serde_json::Map<String, Value> =
                cot.params.iter().map(|(k, t)| (k.to_string(), json!(nums(t.data())))).collect();
            r.set("param_grads", Value::Object(pg));
        }
        Err(e) => {
            r.status = Status::Failed;
            r.error = Some(e.to_string());
        }
    }
    Ok(r)
}

fn train_in<S: ScalarDomain>(
    b: &ModelBundle,
    xs: Vec<TensorValue<f64>>,
    opt: &Optimizer,
    steps: usize,
    real: impl Fn(&S) -> f64,
) -> std::result::Result<(Vec<f64>, BTreeMap<String, Vec<f64>>), String> {
    let conv = |t: &TensorValue<f64>| t.convert::<S>().map_err(|e| e.to_string());
    let inputs = xs.iter().map(conv).collect::<std::result::Result<Vec<_>, _>>()?;
    let params = b.params.convert::<S>().map_err(|e| e.to_string())?;
    let (p, losses) = train(&b.graph, inputs, params, opt, steps).map_err(|e| e.to_string())?;
    let finals = p.iter().map(|(k, t)| (k.to_string(), t.data().iter().map(&real).collect())).collect();
    Ok((losses.iter().map(real).collect(), finals))
}

pub fn train_demo(path: &Path, steps: usize, lr: f64, opt: Opt, domain: Domain) -> Result<RunReport> {
    let b = bundle(path)?;
    let xs = b
        .train_context()
        .ok_or_else(|| CliError::Schema("bundle has no train_inputs for every input".into()))?;
    if b.graph.output_shape().size() != 1 {
        return Err(CliError::Schema("training needs a scalar loss output".into()));
    }
    let opt = match opt {
        Opt::Sgd => Optimizer::Sgd { lr },
        Opt::Adam => Optimizer::adam(lr),
    };
    let res = match domain {
        Domain::Real => train_in::<f64>(&b, xs, &opt, steps, |x| *x),
        Domain::Fp32 => train_in::<Fp32>(&b, xs, &opt, steps, |x| x.value()),
        Domain::Ieee32 => train_in::<B32>(&b, xs, &opt, steps, |x| x.to_f64()),
    };
    let mut r = start("train-demo", &b);
    match res {
        Ok((losses, params)) => {
            let monotone = losses.windows(2).all(|w| w[1] <= w[0]);
            r.set("losses", json!(nums(&losses)));
            r.set("initial_loss", num(losses[0]));
            r.set("final_loss", num(*losses.last().expect("at least one loss")));
            r.set("monotone", monotone);
            r.set("params", json!(params.into_iter().map(|(k, v)| (k, nums(&v))).collect::<BTreeMap<_, _>>()));
        }
        Err(e) => {
            r.status = Status::Failed;
            r.error = Some(e);
        }
    }
    Ok(r)
}

fn ibp_in<I: IntervalDomain>(b: &ModelBundle, r: &mut RunReport) -> Result<()> {
    let boxes = region_box::<I>(b, &region(b)?)?;
    match run_ibp(&b.graph, &b.params, &boxes) {
        Ok(bx) => {
            r.nodes = node_boxes(b, &bx);
            let out = &bx[b.graph.output()];
            r.set("output_lo", json!(nums(&lower(out))));
            r.set("output_hi", json!(nums(&upper(out))));
        }
        Err(e) => {
            r.status = Status::Failed;
            r.error = Some(e.to_string());
        }
    }
    Ok(())
}

fn emit(b: &ModelBundle, relax: &RelaxParams, mode: EmitMode, objective: Option<Vec<f64>>, path: &Path) -> Result<()> {
    let mut cert = emit_certificate(&b.graph, &b.params, &b.graph_id, &region(b)?, relax, mode)
        .map_err(|e| CliError::Schema(format!("certificate emission failed: {}", e.detail)))?;
    cert.objective = objective;
    write(path, &(cert.to_string_pretty() + "\n"))
}

pub fn ibp(path: &Path, backing: Backing, emit_cert: Option<&Path>) -> Result<RunReport> {
    let b = bundle(path)?;
    let mut r = start("ibp", &b);
    match backing {
        Backing::Real => ibp_in::<RealInterval>(&b, &mut r)?,
        Backing::B32 => ibp_in::<B32Interval>(&b, &mut r)?,
    }
    if let Some(p) = emit_cert {
        emit(&b, &RelaxParams::default(), EmitMode::Ibp, None, p)?;
        r.set("certificate", p.display().to_string());
    }
    Ok(r)
}

fn relax_file(path: &Path) -> Result<RelaxParams> {
    let v = json_file(path)?;
    let obj = codec::object(&v, "$")?;
    let mut relax = RelaxParams::default();
    if let Some(a) = obj.get("alpha") {
        for (k, xs) in codec::object(a, "$.alpha")? {
            let p = format!("$.alpha.{k}");
            relax.alpha.insert(codec::node_key(k, &p)?, codec::parse_array(xs, &p)?);
        }
    }
    if let Some(bv) = obj.get("beta") {
        for (k, xs) in codec::object(bv, "$.beta")? {
            let p = format!("$.beta.{k}");
            let arr = xs.as_array().ok_or_else(|| CliError::Schema(format!("{p}: expected an array")))?;
            let phases = arr
                .iter()
                .map(|x| match x.as_i64() {
                    Some(v @ -1..=1) => Ok(v as i8),
                    _ => Err(CliError::Schema(format!("{p}: phases must be -1, 0 or 1"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            relax.beta.insert(codec::node_key(k, &p)?, phases);
        }
    }
    Ok(relax)
}

fn crown_in<I: IntervalDomain>(
    b: &ModelBundle,
    objective: Option<&[f64]>,
    relax: &RelaxParams,
    r: &mut RunReport,
) -> Result<()> {
    let boxes = region_box::<I>(b, &region(b)?)?;
    let fwd = match crown_forward(&b.graph, &b.params, &boxes, relax) {
        Ok(f) => f,
        Err(e) => {
            r.status = Status::Failed;
            r.error = Some(e.to_string());
            return Ok(());
        }
    };
    r.nodes = node_boxes(b, &fwd.boxes);
    let out = &fwd.boxes[b.graph.output()];
    r.set("output_lo", json!(nums(&lower(out))));
    r.set("output_hi", json!(nums(&upper(out))));
    if let Some(c) = objective {
        match crown_backward(&b.graph, &b.params, &boxes, c, relax) {
            Ok(bb) => {
                r.set("objective_lower", num(bb.lower));
                r.set("objective_backsub", num(bb.backsub));
                r.set("objective_forward", num(bb.forward));
            }
            Err(e) => {
                r.status = Status::Failed;
                r.error = Some(e.to_string());
            }
        }
    }
    Ok(())
}

pub fn crown(
    path: &Path,
    objective: Option<&Path>,
    alpha: Option<&Path>,
    backing: Backing,
    emit_cert: Option<&Path>,
) -> Result<RunReport> {
    let b = bundle(path)?;
    let objective = match objective {
        Some(p) => {
            let v = json_file(p)?;
            let c = codec::parse_array(codec::field(codec::object(&v, "$")?, "objective", "$")?, "$.objective")?;
            Some(c)
        }
        None => None,
    };
    let relax = match alpha {
        Some(p) => relax_file(p)?,
        None => RelaxParams::default(),
    };
    let mut r = start("crown", &b);
    match backing {
        Backing::Real => crown_in::<RealInterval>(&b, objective.as_deref(), &relax, &mut r)?,
        Backing::B32 => crown_in::<B32Interval>(&b, objective.as_deref(), &relax, &mut r)?,
    }
    if let Some(p) = emit_cert {
        emit(&b, &relax, EmitMode::Crown, objective, p)?;
        r.set("certificate", p.display().to_string());
    }
    Ok(r)
}

pub fn check_cert(bundle_path: &Path, cert_path: &Path) -> Result<RunReport> {
    let b = bundle(bundle_path)?;
    let doc = json_file(cert_path)?;
    let rep = check_certificate_json(&b.graph, &b.params, &b.graph_id, &doc);
    let mut r = start("check-cert", &b);
    r.status = if rep.accepted() { Status::Ok } else { Status::Rejected };
    r.instances.push(Instance {
        name: cert_path.display().to_string(),
        verdict: if rep.accepted() { "accepted" } else { "rejected" }.to_string(),
        detail: serde_json::to_value(&rep).expect("check report serializes"),
    });
    Ok(r)
}

fn unsat_in<I: IntervalDomain>(b: &ModelBundle, method: Method) -> std::result::Result<UnsatVerdict, String> {
    let prop = b.property.as_ref().ok_or("bundle has no property")?;
    let reg = b.region_list().ok_or("bundle has no input_region for every input")?;
    let boxes = region_box::<I>(b, &reg).map_err(|e| e.to_string())?;
    let (g, p) = (&b.graph, &b.params);
    let verdict = match method {
        Method::Ibp => {
            let bx = run_ibp(g, p, &boxes).map_err(|e| e.to_string())?;
            let out = &bx[g.output()];
            check_unsat_box(&lower(out), &upper(out), prop)
        }
        Method::Crown => {
            let f = crown_forward(g, p, &boxes, &RelaxParams::default()).map_err(|e| e.to_string())?;
            let out = &f.boxes[g.output()];
            check_unsat_box(&lower(out), &upper(out), prop)
        }
        Method::CrownObj => check_unsat(prop, g.output_shape().size(), |c| {
            crown_backward(g, p, &boxes, c, &RelaxParams::default()).map_or(f64::NEG_INFINITY, |bb| bb.lower)
        }),
    };
    verdict.map_err(|e| e.to_string())
}

pub fn vnn_check(dir: &Path, method: Method, backing: Backing) -> Result<RunReport> {
    let t0 = Instant::now();
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let results: Vec<(String, std::result::Result<UnsatVerdict, String>)> = files
        .par_iter()
        .map(|f| {
            let name = f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            let res = bundle(f).map_err(|e| e.to_string()).and_then(|b| match backing {
                Backing::Real => unsat_in::<RealInterval>(&b, method),
                Backing::B32 => unsat_in::<B32Interval>(&b, method),
            });
            (name, res)
        })
        .collect();
    let mut r = RunReport::new("vnn-check");
    let (mut safe, mut unknown, mut errors) = (0usize, 0usize, 0usize);
    for (name, res) in results {
        let (verdict, detail) = match res {
            Ok(UnsatVerdict::Safe) => {
                safe += 1;
                ("safe", Value::Null)
            }
            Ok(UnsatVerdict::Unknown) => {
                unknown += 1;
                ("unknown", Value::Null)
            }
            Err(e) => {
                errors += 1;
                ("error", Value::String(e))
            }
        };
        r.instances.push(Instance {
            name,
            verdict: verdict.to_string(),
            detail,
        });
    }
    r.set("safe", safe);
    r.set("unknown", unknown);
    r.set("errors", errors);
    r.set("line", format!("safe: {safe}, unknown: {unknown}"));
    r.set("wall_ms", t0.elapsed().as_secs_f64() * 1e3);
    r.status = if errors > 0 {
        Status::Error
    } else if unknown > 0 {
        Status::Unknown
    } else {
        Status::Ok
    };
    Ok(r)
}
