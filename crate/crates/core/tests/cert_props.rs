mod common;

use std::collections::BTreeMap;

use common::{flat, random_case, rng, Menu};
use graphcert::bounds::{concretize_outward, RelaxParams};
use graphcert::cert::goals::{check_residual, check_unsat_box, Clause, PropertySpec, Residual, UnsatVerdict};
use graphcert::cert::{check_certificate, check_certificate_json, emit_certificate, EmitMode, RejectRule};
use graphcert::eval_graph;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn accepted_certificates_are_empirically_sound() {
    let mut r = rng(41);
    let relax = RelaxParams::default();
    for i in 0..100 {
        let case = random_case(&mut r, if i % 3 == 0 { Menu::ReluChain } else { Menu::Full });
        for mode in [EmitMode::Ibp, EmitMode::Crown] {
            let cert = emit_certificate(&case.graph, &case.params, "g", &case.region, &relax, mode).unwrap();
            assert!(check_certificate(&case.graph, &case.params, "g", &cert).accepted());
            for _ in 0..1000 {
                let x = case.sample(&mut r);
                let xf = flat(&x);
                let v = eval_graph(&case.graph, &case.context(x)).unwrap();
                for (&id, p) in &cert.bounds {
                    let y = v.get(id).data();
                    for k in 0..y.len() {
                        assert!(p.lo[k] <= y[k] && y[k] <= p.hi[k], "node {id}[{k}] = {} outside [{}, {}]", y[k], p.lo[k], p.hi[k]);
                    }
                    if let Some(f) = &p.forms {
                        let lo = concretize_outward(&f.lower, &xf, &xf, true);
                        let hi = concretize_outward(&f.upper, &xf, &xf, false);
                        for k in 0..y.len() {
                            assert!(lo[k] <= y[k] && y[k] <= hi[k], "node {id}[{k}] = {} outside forms [{}, {}]", y[k], lo[k], hi[k]);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn relabelled_payloads_are_rejected() {
    let mut r = rng(42);
    let relax = RelaxParams::default();
    let mut tried = 0;
    while tried < 200 {
        let case = random_case(&mut r, Menu::Full);
        let cert = emit_certificate(&case.graph, &case.params, "g", &case.region, &relax, EmitMode::Crown).unwrap();
        let ids: Vec<usize> = cert.bounds.keys().copied().collect();
        let (a, b) = (*ids.choose(&mut r).unwrap(), *ids.choose(&mut r).unwrap());
        if cert.bounds[&a] == cert.bounds[&b] {
            continue;
        }
        let mut bad = cert.clone();
        let pa = bad.bounds.remove(&a).unwrap();
        let pb = bad.bounds.insert(b, pa).unwrap();
        bad.bounds.insert(a, pb);
        let rep = check_certificate(&case.graph, &case.params, "g", &bad);
        assert!(!rep.accepted(), "swapping payloads {a} and {b} was accepted");

        let mut ghost = cert.clone();
        let p = ghost.bounds[&a].clone();
        ghost.bounds.insert(case.graph.len() + r.gen_range(0..3), p);
        assert_eq!(check_certificate(&case.graph, &case.params, "g", &ghost).rule(), Some(RejectRule::Schema));
        tried += 1;
    }
}

#[test]
fn identical_bytes_give_identical_reports() {
    let mut r = rng(43);
    let relax = RelaxParams::default();
    for _ in 0..100 {
        let case = random_case(&mut r, Menu::Full);
        let mut cert = emit_certificate(&case.graph, &case.params, "g", &case.region, &relax, EmitMode::Crown).unwrap();
        if r.gen_bool(0.5) {
            let id = *cert.bounds.keys().copied().collect::<Vec<_>>().choose(&mut r).unwrap();
            let p = cert.bounds.get_mut(&id).unwrap();
            p.hi[0] = if p.hi[0].is_finite() { p.hi[0] + 1.0 } else { 0.0 };
        }
        let bytes = cert.to_string_pretty();
        let reports: Vec<String> = (0..3)
            .map(|_| {
                let doc: serde_json::Value = serde_json::from_str(&bytes).unwrap();
                serde_json::to_string(&check_certificate_json(&case.graph, &case.params, "g", &doc)).unwrap()
            })
            .collect();
        assert!(reports.windows(2).all(|w| w[0] == w[1]));
    }
}

fn random_property(r: &mut rand_chacha::ChaCha8Rng, n: usize, center: &[f64]) -> PropertySpec {
    let clauses = (0..r.gen_range(1..=3))
        .map(|_| {
            let rows = r.gen_range(1..=3);
            let c: Vec<Vec<f64>> = (0..rows).map(|_| (0..n).map(|_| r.gen_range(-1.0..=1.0)).collect()).collect();
            let d = c
                .iter()
                .map(|row| row.iter().zip(center).map(|(a, x)| a * x).sum::<f64>() + r.gen_range(-1.5..=1.5))
                .collect();
            Clause { c, d }
        })
        .collect();
    PropertySpec { clauses }
}

#[test]
fn unsat_check_never_contradicts_a_sampled_counterexample() {
    let mut r = rng(44);
    let (mut safe, mut refuted) = (0, 0);
    for _ in 0..300 {
        let n = r.gen_range(1..=4);
        let center: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..=2.0)).collect();
        let radius: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..=1.0)).collect();
        let lo: Vec<f64> = center.iter().zip(&radius).map(|(c, w)| c - w).collect();
        let hi: Vec<f64> = center.iter().zip(&radius).map(|(c, w)| c + w).collect();
        let prop = random_property(&mut r, n, &center);
        let verdict = check_unsat_box(&lo, &hi, &prop).unwrap();
        if verdict == UnsatVerdict::Safe {
            safe += 1;
        }
        let found = (0..10_000).any(|_| {
            let y: Vec<f64> = lo.iter().zip(&hi).map(|(&l, &h)| r.gen_range(l..=h)).collect();
            prop.clauses.iter().any(|cl| {
                cl.c.iter().zip(&cl.d).all(|(row, &d)| row.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() <= d)
            })
        });
        if found {
            refuted += 1;
            assert_eq!(verdict, UnsatVerdict::Unknown, "counterexample exists for {prop:?} on {lo:?}..{hi:?}");
        }
    }
    assert!(safe > 10 && refuted > 10, "safe {safe}, with counterexample {refuted}");
}

#[test]
fn burgers_residual_matches_the_interval_oracle() {
    let terms: BTreeMap<String, (f64, f64)> = [
        ("u_t", (-0.1, 0.1)),
        ("u", (0.0, 1.0)),
        ("u_x", (-0.2, 0.2)),
        ("u_xx", (-1.0, 1.0)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    // u * u_x over the four corners, then endpoint sums
    let corners = [0.0 * -0.2, 0.0 * 0.2, 1.0 * -0.2, 1.0 * 0.2];
    let prod = (corners.iter().copied().fold(f64::INFINITY, f64::min), corners.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let visc = (-0.1, 0.1);
    let oracle = (-0.1 + prod.0 - visc.1, 0.1 + prod.1 - visc.0);
    let enc = Residual::burgers(0.1).enclose(&terms).unwrap();
    assert!(enc.lower() <= oracle.0 && oracle.1 <= enc.upper());
    assert!((enc.lower() - -0.4).abs() < 1e-15 && (enc.upper() - 0.4).abs() < 1e-15);
    assert!(check_residual(&Residual::burgers(0.1), &terms, 0.41).unwrap());
    assert!(!check_residual(&Residual::burgers(0.1), &terms, 0.3).unwrap());
}

fn hex_to_decimal(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::String(s) if s.starts_with("0x") => {
            let x = f32::from_bits(u32::from_str_radix(&s[2..], 16).unwrap()) as f64;
            *s = graphcert::codec::to_decimal(x);
        }
        serde_json::Value::Array(xs) => xs.iter_mut().for_each(hex_to_decimal),
        serde_json::Value::Object(m) => m.values_mut().for_each(hex_to_decimal),
        _ => {}
    }
}

#[test]
fn decimal_payloads_replay_like_hex() {
    let mut r = rng(45);
    let relax = RelaxParams::default();
    for _ in 0..100 {
        let case = random_case(&mut r, Menu::Full);
        let cert = emit_certificate(&case.graph, &case.params, "g", &case.region, &relax, EmitMode::Crown).unwrap();
        let mut doc = cert.to_json();
        hex_to_decimal(&mut doc);
        let rep = check_certificate_json(&case.graph, &case.params, "g", &doc);
        assert!(rep.accepted(), "{:?}", rep.reason);
    }
}
