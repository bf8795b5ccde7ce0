//! Goal reductions over certified bounds.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::codec::{self, FormatError};
use crate::RealInterval;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GoalError {
    #[error("label {label} out of range for {size} outputs")]
    Label { label: usize, size: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("residual term `{0}` has no bound")]
    MissingTerm(String),
    #[error("malformed leaf geometry: {0}")]
    Geometry(String),
    #[error("coverage-check-unsupported: {dims} dimensions")]
    CoverageUnsupported { dims: usize },
}

/// Largest input dimension the leaf coverage sweep accepts.
pub const MAX_COVERAGE_DIMS: usize = 16;

/// `lower(z_y) > upper(z_k)` for every `k != y`.
pub fn check_margin(lo: &[f64], hi: &[f64], label: usize) -> Result<bool, GoalError> {
    if lo.len() != hi.len() {
        return Err(GoalError::Dimension {
            expected: lo.len(),
            actual: hi.len(),
        });
    }
    if label >= lo.len() {
        return Err(GoalError::Label {
            label,
            size: lo.len(),
        });
    }
    let rival = hi
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != label)
        .map(|(_, &h)| h)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(lo[label] > rival)
}

/// Certified lower bound of `c . y` for `y` in the box, with outward rounding.
pub fn objective_lower(c: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    c.iter()
        .zip(lo.iter().zip(hi))
        .filter(|(&w, _)| w != 0.0)
        .fold(RealInterval::point(0.0), |acc, (&w, (&l, &h))| {
            acc.add(&RealInterval::point(w).mul(&RealInterval::new(l, h)))
        })
        .lower()
}

/// Conjunction of rows `C y <= d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub c: Vec<Vec<f64>>,
    pub d: Vec<f64>,
}

/// A counterexample satisfies at least one clause.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertySpec {
    pub clauses: Vec<Clause>,
}

impl PropertySpec {
    pub fn check_width(&self, out_size: usize) -> Result<(), GoalError> {
        for cl in &self.clauses {
            if cl.c.len() != cl.d.len() {
                return Err(GoalError::Dimension {
                    expected: cl.c.len(),
                    actual: cl.d.len(),
                });
            }
            if let Some(row) = cl.c.iter().find(|r| r.len() != out_size) {
                return Err(GoalError::Dimension {
                    expected: out_size,
                    actual: row.len(),
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let clauses: Vec<Value> = self
            .clauses
            .iter()
            .map(|cl| {
                json!({
                    "c": cl.c.iter().map(|r| codec::hex_array(r)).collect::<Vec<_>>(),
                    "d": codec::hex_array(&cl.d),
                })
            })
            .collect();
        json!({ "clauses": clauses })
    }

    pub fn from_json(v: &Value, path: &str) -> Result<Self, FormatError> {
        let obj = codec::object(v, path)?;
        let arr = codec::field(obj, "clauses", path)?
            .as_array()
            .ok_or_else(|| codec::ferr(path, "`clauses` must be an array"))?;
        let mut clauses = Vec::with_capacity(arr.len());
        for (i, cv) in arr.iter().enumerate() {
            let p = format!("{path}.clauses[{i}]");
            let co = codec::object(cv, &p)?;
            let rows = codec::field(co, "c", &p)?
                .as_array()
                .ok_or_else(|| codec::ferr(&p, "`c` must be an array of rows"))?;
            let c = rows
                .iter()
                .enumerate()
                .map(|(r, row)| codec::parse_array(row, &format!("{p}.c[{r}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let d = codec::parse_array(codec::field(co, "d", &p)?, &format!("{p}.d"))?;
            clauses.push(Clause { c, d });
        }
        Ok(PropertySpec { clauses })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnsatVerdict {
    Safe,
    Unknown,
}

/// Safe when every clause has a row whose certified lower bound of
/// `(C y - d)_i` is strictly positive. `lower_bound(c)` must return a
/// certified lower bound of `c . y` over the region.
pub fn check_unsat<F>(
    prop: &PropertySpec,
    out_size: usize,
    mut lower_bound: F,
) -> Result<UnsatVerdict, GoalError>
where
    F: FnMut(&[f64]) -> f64,
{
    prop.check_width(out_size)?;
    let refuted = |cl: &Clause, lb: &mut F| {
        cl.c.iter().zip(&cl.d).any(|(row, &d)| {
            let slack = RealInterval::point(lb(row)).sub(&RealInterval::point(d));
            slack.lower() > 0.0
        })
    };
    let safe = prop.clauses.iter().all(|cl| refuted(cl, &mut lower_bound));
    Ok(if safe {
        UnsatVerdict::Safe
    } else {
        UnsatVerdict::Unknown
    })
}

/// [`check_unsat`] with bounds taken from an output box.
pub fn check_unsat_box(
    lo: &[f64],
    hi: &[f64],
    prop: &PropertySpec,
) -> Result<UnsatVerdict, GoalError> {
    check_unsat(prop, lo.len(), |c| objective_lower(c, lo, hi))
}

/// `lower(V) >= 0` and `upper(Vdot) <= -rho`.
pub fn check_lyapunov(v: (f64, f64), vdot: (f64, f64), rho: f64) -> bool {
    v.0 >= 0.0 && vdot.1 <= -rho
}

/// Residual expression over named term bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum Residual {
    Term(String),
    Const(f64),
    Neg(Box<Residual>),
    Add(Box<Residual>, Box<Residual>),
    Sub(Box<Residual>, Box<Residual>),
    Mul(Box<Residual>, Box<Residual>),
}

impl Residual {
    pub fn term(name: &str) -> Self {
        Residual::Term(name.to_string())
    }

    pub fn add(self, rhs: Residual) -> Self {
        Residual::Add(Box::new(self), Box::new(rhs))
    }

    pub fn sub(self, rhs: Residual) -> Self {
        Residual::Sub(Box::new(self), Box::new(rhs))
    }

    pub fn mul(self, rhs: Residual) -> Self {
        Residual::Mul(Box::new(self), Box::new(rhs))
    }

    /// Viscous Burgers residual `u_t + u * u_x - nu * u_xx`.
    pub fn burgers(nu: f64) -> Self {
        Residual::term("u_t")
            .add(Residual::term("u").mul(Residual::term("u_x")))
            .sub(Residual::Const(nu).mul(Residual::term("u_xx")))
    }

    pub fn enclose(&self, terms: &BTreeMap<String, (f64, f64)>) -> Result<RealInterval, GoalError> {
        Ok(match self {
            Residual::Term(name) => {
                let &(l, h) = terms
                    .get(name)
                    .ok_or_else(|| GoalError::MissingTerm(name.clone()))?;
                RealInterval::try_new(l, h).ok_or_else(|| {
                    GoalError::Geometry(format!("term `{name}` has bounds [{l}, {h}]"))
                })?
            }
            Residual::Const(c) => RealInterval::point(*c),
            Residual::Neg(a) => a.enclose(terms)?.neg(),
            Residual::Add(a, b) => a.enclose(terms)?.add(&b.enclose(terms)?),
            Residual::Sub(a, b) => a.enclose(terms)?.sub(&b.enclose(terms)?),
            Residual::Mul(a, b) => a.enclose(terms)?.mul(&b.enclose(terms)?),
        })
    }
}

/// Is the residual enclosure inside `[-eps, eps]`?
pub fn check_residual(
    expr: &Residual,
    terms: &BTreeMap<String, (f64, f64)>,
    eps: f64,
) -> Result<bool, GoalError> {
    let r = expr.enclose(terms)?;
    Ok(-eps <= r.lower() && r.upper() <= eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case", tag = "outcome", content = "leaf")]
pub enum LeavesVerdict {
    Valid,
    CoverageGap,
    LeafFailed(usize),
}

impl LeavesVerdict {
    pub fn is_valid(self) -> bool {
        self == LeavesVerdict::Valid
    }
}

fn check_box(b: &[(f64, f64)], dims: usize, what: &str) -> Result<(), GoalError> {
    if b.len() != dims {
        return Err(GoalError::Geometry(format!(
            "{what} has {} dimensions, expected {dims}",
            b.len()
        )));
    }
    if let Some((l, h)) = b.iter().find(|(l, h)| !(l <= h)) {
        return Err(GoalError::Geometry(format!(
            "{what} has an invalid side [{l}, {h}]"
        )));
    }
    Ok(())
}

/// Does the union of closed `leaves` cover `root` in dimensions `dim..`?
/// Sweeps the sorted split coordinates of one dimension at a time.
fn covered(root: &[(f64, f64)], leaves: &[&[(f64, f64)]], dim: usize) -> bool {
    if leaves.is_empty() {
        return false;
    }
    if dim == root.len() {
        return true;
    }
    let (a, b) = root[dim];
    if a == b {
        let sub: Vec<_> = leaves
            .iter()
            .copied()
            .filter(|l| l[dim].0 <= a && a <= l[dim].1)
            .collect();
        return covered(root, &sub, dim + 1);
    }
    let mut cuts = vec![a, b];
    for l in leaves {
        for c in [l[dim].0, l[dim].1] {
            if a < c && c < b {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).all(|w| {
        let sub: Vec<_> = leaves
            .iter()
            .copied()
            .filter(|l| l[dim].0 <= w[0] && w[1] <= l[dim].1)
            .collect();
        covered(root, &sub, dim + 1)
    })
}

/// Branch-and-bound leaves: the leaf boxes must cover the root box and every
/// leaf verdict must hold.
pub fn check_leaves(
    root: &[(f64, f64)],
    leaves: &[Vec<(f64, f64)>],
    verdicts: &[bool],
) -> Result<LeavesVerdict, GoalError> {
    let dims = root.len();
    if dims > MAX_COVERAGE_DIMS {
        return Err(GoalError::CoverageUnsupported { dims });
    }
    if leaves.len() != verdicts.len() {
        return Err(GoalError::Geometry(format!(
            "{} leaves but {} verdicts",
            leaves.len(),
            verdicts.len()
        )));
    }
    check_box(root, dims, "root box")?;
    for (i, l) in leaves.iter().enumerate() {
        check_box(l, dims, &format!("leaf {i}"))?;
    }
    let refs: Vec<&[(f64, f64)]> = leaves.iter().map(|l| l.as_slice()).collect();
    if !covered(root, &refs, 0) {
        return Ok(LeavesVerdict::CoverageGap);
    }
    Ok(match verdicts.iter().position(|v| !v) {
        Some(i) => LeavesVerdict::LeafFailed(i),
        None => LeavesVerdict::Valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_is_strict() {
        assert!(check_margin(&[2.0, 0.0], &[3.0, 1.5], 0).unwrap());
        assert!(!check_margin(&[1.5, 0.0], &[3.0, 1.5], 0).unwrap());
        assert_eq!(
            check_margin(&[0.0], &[1.0], 3),
            Err(GoalError::Label { label: 3, size: 1 })
        );
    }

    #[test]
    fn unsat_examples() {
        let prop = PropertySpec {
            clauses: vec![Clause {
                c: vec![vec![1.0]],
                d: vec![0.0],
            }],
        };
        assert_eq!(
            check_unsat_box(&[1.0], &[2.0], &prop).unwrap(),
            UnsatVerdict::Safe
        );
        assert_eq!(
            check_unsat_box(&[-1.0], &[2.0], &prop).unwrap(),
            UnsatVerdict::Unknown
        );
        assert!(check_unsat_box(&[0.0, 0.0], &[1.0, 1.0], &prop).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        assert!(check_lyapunov((0.1, 2.0), (-3.0, -0.5), 0.0));
        assert!(!check_lyapunov((0.1, 2.0), (-3.0, 0.1), 0.0));
        assert!(!check_lyapunov((0.1, 2.0), (-3.0, -0.5), 1.0));
    }

    #[test]
    fn zero_field_residual() {
        let terms: BTreeMap<String, (f64, f64)> = ["u_t", "u", "u_x", "u_xx"]
            .iter()
            .map(|k| (k.to_string(), (0.0, 0.0)))
            .collect();
        let r = Residual::burgers(0.1).enclose(&terms).unwrap();
        assert_eq!((r.lower(), r.upper()), (0.0, 0.0));
        assert!(check_residual(&Residual::burgers(0.1), &terms, 0.0).unwrap());
        let missing = BTreeMap::new();
        assert_eq!(
            check_residual(&Residual::burgers(0.1), &missing, 1.0),
            Err(GoalError::MissingTerm("u_t".into()))
        );
    }

    #[test]
    fn leaf_examples() {
        let root = [(0.0, 1.0)];
        let halves = vec![vec![(0.0, 0.5)], vec![(0.5, 1.0)]];
        assert_eq!(
            check_leaves(&root, &halves, &[true, true]).unwrap(),
            LeavesVerdict::Valid
        );
        let gap = vec![vec![(0.0, 0.4)], vec![(0.6, 1.0)]];
        assert_eq!(
            check_leaves(&root, &gap, &[true, true]).unwrap(),
            LeavesVerdict::CoverageGap
        );
        assert_eq!(
            check_leaves(&root, &halves, &[true, false]).unwrap(),
            LeavesVerdict::LeafFailed(1)
        );
        assert!(matches!(
            check_leaves(&root, &[vec![(0.6, 0.4)]], &[true]),
            Err(GoalError::Geometry(_))
        ));
        let wide = vec![(0.0, 1.0); 17];
        assert_eq!(
            check_leaves(&wide, &[wide.clone()], &[true]),
            Err(GoalError::CoverageUnsupported { dims: 17 })
        );
    }

    #[test]
    fn two_dimensional_cover() {
        let root = [(0.0, 1.0), (0.0, 1.0)];
        let quads = vec![
            vec![(0.0, 0.5), (0.0, 1.0)],
            vec![(0.5, 1.0), (0.0, 0.5)],
            vec![(0.5, 1.0), (0.5, 1.0)],
        ];
        assert!(check_leaves(&root, &quads, &[true; 3]).unwrap().is_valid());
        let missing_corner = quads[..2].to_vec();
        assert_eq!(
            check_leaves(&root, &missing_corner, &[true; 2]).unwrap(),
            LeavesVerdict::CoverageGap
        );
    }
}
