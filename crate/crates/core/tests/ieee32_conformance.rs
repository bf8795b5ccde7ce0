//! Bit-level kernel against host binary32 hardware and the round-on-reals model.

mod common;

use common::ieee::{edge_suite, host, random_finite, real_op, same_class};
use graphcert::ieee32::{B32Op, B32};
use graphcert::scalar::fp32_round;
use graphcert::RoundingMode::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_bit_patterns_match_host() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
    for op in [B32Op::Add, B32Op::Sub, B32Op::Mul, B32Op::Div] {
        for _ in 0..200_000 {
            let (a, b) = (rng.gen::<u32>(), rng.gen::<u32>());
            let ours = B32::op(op, B32::from_bits(a), B32::from_bits(b), NearestEven);
            let theirs = host(op, f32::from_bits(a), f32::from_bits(b));
            assert!(
                same_class(ours, theirs),
                "{op:?} {a:#010x} {b:#010x}: ours {ours:?} host {:#010x}",
                theirs.to_bits()
            );
        }
    }
    for _ in 0..100_000 {
        let a = rng.gen::<u32>();
        let ours = B32::op(B32Op::Sqrt, B32::from_bits(a), B32::ZERO, NearestEven);
        assert!(same_class(ours, f32::from_bits(a).sqrt()), "sqrt {a:#010x}");
    }
}

/// Random operands concentrated near each other in exponent, where
/// cancellation and rounding carries actually happen.
#[test]
fn close_exponent_operands_match_host() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0002);
    for op in [B32Op::Add, B32Op::Sub, B32Op::Mul, B32Op::Div] {
        for _ in 0..100_000 {
            let a: u32 = rng.gen();
            let delta: i32 = rng.gen_range(-(30 << 23)..(30 << 23));
            let b = (a as i64 + delta as i64).clamp(0, u32::MAX as i64) as u32
                ^ (rng.gen::<u32>() & 0x8000_0000);
            let ours = B32::op(op, B32::from_bits(a), B32::from_bits(b), NearestEven);
            let theirs = host(op, f32::from_bits(a), f32::from_bits(b));
            assert!(same_class(ours, theirs), "{op:?} {a:#010x} {b:#010x}");
        }
    }
}

#[test]
fn curated_edge_suite() {
    let (fails, n) = edge_suite();
    assert!(
        fails.is_empty(),
        "{} of {n} edge checks failed:\n{}",
        fails.len(),
        fails.join("\n")
    );
}

#[test]
fn finite_path_refinement() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0003);
    for op in [B32Op::Add, B32Op::Sub, B32Op::Mul, B32Op::Div, B32Op::Sqrt] {
        let mut checked = 0;
        while checked < 100_000 {
            let (a, b) = (random_finite(&mut rng), random_finite(&mut rng));
            let r = B32::op(op, a, b, NearestEven);
            if !r.is_finite() {
                continue;
            }
            let exact = real_op(op, a.to_real().unwrap(), b.to_real().unwrap());
            assert_eq!(
                r.to_real().unwrap(),
                fp32_round(exact, NearestEven),
                "{op:?} {a:?} {b:?}"
            );
            checked += 1;
        }
    }
}

/// Where the binary64 result is exact, directed modes must equal directed
/// rounding of that exact value.
#[test]
fn directed_modes_against_exact_binary64() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0004);
    let modes = [TowardNegInf, NearestEven, TowardPosInf];
    for _ in 0..200_000 {
        let (a, b) = (random_finite(&mut rng), random_finite(&mut rng));
        let (x, y) = (a.to_f64(), b.to_f64());
        // products of two binary32 values are exact in binary64
        let p = x * y;
        let sum = x + y;
        let bv = sum - x;
        let sum_exact = sum.is_finite() && (x - (sum - bv)) + (y - bv) == 0.0;
        for mode in modes {
            let r = B32::op(B32Op::Mul, a, b, mode);
            assert_eq!(r.to_f64(), fp32_round(p, mode), "mul {a:?} {b:?} {mode:?}");
            if sum_exact {
                let r = B32::op(B32Op::Add, a, b, mode);
                assert_eq!(
                    r.to_f64(),
                    fp32_round(sum, mode),
                    "add {a:?} {b:?} {mode:?}"
                );
            }
        }
        let q = x / y;
        if y != 0.0 && q.is_finite() && q != 0.0 && q.mul_add(-y, x) == 0.0 {
            for mode in modes {
                let r = B32::op(B32Op::Div, a, b, mode);
                assert_eq!(r.to_f64(), fp32_round(q, mode), "div {a:?} {b:?} {mode:?}");
            }
        }
    }
}

fn bracket_check(op: B32Op, a: B32, b: B32) {
    let lo = B32::op(op, a, b, TowardNegInf);
    let mid = B32::op(op, a, b, NearestEven);
    let hi = B32::op(op, a, b, TowardPosInf);
    if mid.is_nan() {
        assert!(lo.is_nan() && hi.is_nan());
        return;
    }
    assert!(
        lo.to_f64() <= mid.to_f64() && mid.to_f64() <= hi.to_f64(),
        "{op:?} {a:?} {b:?}"
    );
}

#[test]
fn directed_bracketing() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0005);
    for _ in 0..100_000 {
        let (a, b) = (random_finite(&mut rng), random_finite(&mut rng));
        for op in [B32Op::Add, B32Op::Sub, B32Op::Mul, B32Op::Div, B32Op::Sqrt] {
            bracket_check(op, a, b);
        }
    }
}

#[test]
fn fp32_round_matches_host_cast_and_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0006);
    let mut xs: Vec<f64> = Vec::new();
    for _ in 0..100_000 {
        let x = f64::from_bits(rng.gen::<u64>());
        if x.is_finite() && x.abs() < 1e39 {
            xs.push(x);
        }
        let y: f64 = rng.gen_range(-4.0..4.0);
        xs.push(y);
    }
    for &x in &xs {
        assert_eq!(
            fp32_round(x, NearestEven).to_bits(),
            (x as f32 as f64).to_bits(),
            "{x:e}"
        );
        let d = fp32_round(x, TowardNegInf);
        let u = fp32_round(x, TowardPosInf);
        assert!(d <= x && x <= u, "{x:e}");
        assert!(d <= fp32_round(x, NearestEven) && fp32_round(x, NearestEven) <= u);
        if (x as f32) as f64 == x {
            assert_eq!(d, x);
            assert_eq!(u, x);
        } else if u.is_finite() && d.is_finite() {
            assert_eq!((d as f32).next_up() as f64, u, "{x:e}");
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for mode in [NearestEven, TowardNegInf, TowardPosInf] {
        let rounded: Vec<f64> = xs.iter().map(|&x| fp32_round(x, mode)).collect();
        assert!(
            rounded.windows(2).all(|w| w[0] <= w[1]),
            "{mode:?} not monotone"
        );
    }
}

#[test]
fn fp32_domain_closure_matches_host() {
    use graphcert::{Fp32, ScalarDomain};
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0007);
    let mut n = 0;
    while n < 100_000 {
        let a = f32::from_bits(rng.gen());
        let b = f32::from_bits(rng.gen());
        if !a.is_finite() || !b.is_finite() {
            continue;
        }
        let (fa, fb) = (Fp32::new(a as f64).unwrap(), Fp32::new(b as f64).unwrap());
        let cases: [(Result<Fp32, _>, f32); 4] = [
            (fa.add(&fb), a + b),
            (fa.sub(&fb), a - b),
            (fa.mul(&fb), a * b),
            (fa.div(&fb), a / b),
        ];
        for (ours, theirs) in cases {
            if theirs.is_finite() && !(b == 0.0) {
                assert_eq!(ours.unwrap().value().to_bits(), (theirs as f64).to_bits());
            }
        }
        n += 1;
    }
}
