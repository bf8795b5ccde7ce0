//! Host binary32 comparison helpers and the curated IEEE edge suite.

use graphcert::ieee32::{B32Class, B32Op, B32};
use graphcert::RoundingMode::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn host(op: B32Op, a: f32, b: f32) -> f32 {
    match op {
        B32Op::Add => a + b,
        B32Op::Sub => a - b,
        B32Op::Mul => a * b,
        B32Op::Div => a / b,
        B32Op::Sqrt => a.sqrt(),
        _ => unreachable!(),
    }
}

/// Bit equality, except that any NaN matches any NaN.
pub fn same_class(ours: B32, theirs: f32) -> bool {
    if theirs.is_nan() {
        ours.is_nan()
    } else {
        ours.bits() == theirs.to_bits()
    }
}

pub fn fb(x: f32) -> B32 {
    B32::from_bits(x.to_bits())
}

/// The operation on the binary64 images of the operands. Binary64 carries
/// enough bits that rounding this to binary32 is the correctly rounded result.
pub fn real_op(op: B32Op, a: f64, b: f64) -> f64 {
    match op {
        B32Op::Add => a + b,
        B32Op::Sub => a - b,
        B32Op::Mul => a * b,
        B32Op::Div => a / b,
        B32Op::Sqrt => a.sqrt(),
        _ => unreachable!(),
    }
}

/// Is `r = op(x, y)` computed without rounding in binary64?
pub fn binary64_exact(op: B32Op, x: f64, y: f64, r: f64) -> bool {
    match op {
        B32Op::Add | B32Op::Sub => {
            let y = if op == B32Op::Sub { -y } else { y };
            let bv = r - x;
            (x - (r - bv)) + (y - bv) == 0.0
        }
        B32Op::Mul => true,
        B32Op::Div => r.mul_add(-y, x) == 0.0,
        _ => false,
    }
}

pub fn random_finite(rng: &mut ChaCha8Rng) -> B32 {
    loop {
        let x = B32::from_bits(rng.gen());
        if x.is_finite() {
            return x;
        }
    }
}

pub const SPECIALS: [u32; 34] = [
    0x0000_0000,
    0x8000_0000, // signed zeros
    0x0000_0001,
    0x8000_0001, // min subnormal
    0x007F_FFFF,
    0x807F_FFFF, // max subnormal
    0x0080_0000,
    0x8080_0000, // min normal
    0x0080_0001,
    0x3F80_0000,
    0xBF80_0000,
    0x3F80_0001,
    0x3F7F_FFFF,
    0x3380_0000,
    0x3400_0000,
    0x3300_0000, // 2^-24, 2^-23, 2^-25
    0x4B80_0000,
    0x4B7F_FFFF, // 2^24 and below
    0x7F7F_FFFF,
    0xFF7F_FFFF,
    0x7F00_0000, // max finite
    0x7F80_0000,
    0xFF80_0000, // infinities
    0x7FC0_0000,
    0xFFC0_0000,
    0x7F80_0001,
    0x7FBF_FFFF, // NaNs (quiet and signalling)
    0x4040_0000,
    0x3EAA_AAAB,
    0x4049_0FDB,
    0x0040_0000,
    0x3F00_0000,
    0xC040_0000,
    0x0000_0003,
];

macro_rules! check {
    ($fails:ident, $cond:expr, $($msg:tt)+) => {
        if !$cond {
            $fails.push(format!($($msg)+));
        }
    };
}

fn check_eq(fails: &mut Vec<String>, what: &str, ours: B32, want: u32) {
    check!(
        fails,
        ours.bits() == want,
        "{what}: got {:#010x}, want {want:#010x}",
        ours.bits()
    );
}

/// Exhaustive special-value tables plus fixed cases; returns every failure
/// and the number of checks run.
pub fn edge_suite() -> (Vec<String>, usize) {
    let mut fails = Vec::new();
    let mut n = 0;
    for op in [B32Op::Add, B32Op::Sub, B32Op::Mul, B32Op::Div] {
        for &a in &SPECIALS {
            for &b in &SPECIALS {
                for mode in [NearestEven, TowardNegInf, TowardPosInf] {
                    let ours = B32::op(op, B32::from_bits(a), B32::from_bits(b), mode);
                    if mode == NearestEven {
                        let theirs = host(op, f32::from_bits(a), f32::from_bits(b));
                        check!(
                            fails,
                            same_class(ours, theirs),
                            "{op:?} {a:#010x} {b:#010x}"
                        );
                        if theirs.is_nan() {
                            check!(
                                fails,
                                ours.bits() == 0x7FC0_0000,
                                "{op:?} {a:#010x} {b:#010x}: NaN not canonical"
                            );
                        }
                    } else if let (Ok(x), Ok(y)) =
                        (B32::from_bits(a).to_real(), B32::from_bits(b).to_real())
                    {
                        let exact = real_op(op, x, y);
                        if exact.is_finite() && exact != 0.0 && binary64_exact(op, x, y, exact) {
                            let want = B32::from_real(exact, mode);
                            check!(fails, ours == want, "{op:?} {a:#010x} {b:#010x} {mode:?}");
                        }
                    }
                    n += 1;
                }
            }
        }
    }
    for &a in &SPECIALS {
        let ours = B32::op(B32Op::Sqrt, B32::from_bits(a), B32::ZERO, NearestEven);
        check!(
            fails,
            same_class(ours, f32::from_bits(a).sqrt()),
            "sqrt {a:#010x}"
        );
        n += 1;
    }

    let one = fb(1.0);
    let half_ulp = B32::from_bits(0x3380_0000);
    let odd = B32::from_bits(0x3F80_0001);
    let max_sub = B32::from_bits(0x007F_FFFF);
    let min_sub = B32::from_bits(1);
    let max = B32::MAX;
    let fixed: Vec<(&str, B32, u32)> = vec![
        // ties in both directions
        (
            "tie to even below",
            B32::op(B32Op::Add, one, half_ulp, NearestEven),
            0x3F80_0000,
        ),
        (
            "tie to even above",
            B32::op(B32Op::Add, odd, half_ulp, NearestEven),
            0x3F80_0002,
        ),
        (
            "tie up",
            B32::op(B32Op::Add, one, half_ulp, TowardPosInf),
            0x3F80_0001,
        ),
        (
            "tie down",
            B32::op(B32Op::Add, odd, half_ulp, TowardNegInf),
            0x3F80_0001,
        ),
        // subnormal boundary
        (
            "max subnormal + min subnormal",
            B32::op(B32Op::Add, max_sub, min_sub, NearestEven),
            0x0080_0000,
        ),
        (
            "min normal - min subnormal",
            B32::op(
                B32Op::Sub,
                B32::from_bits(0x0080_0000),
                min_sub,
                NearestEven,
            ),
            0x007F_FFFF,
        ),
        (
            "min subnormal / 2 nearest",
            B32::op(B32Op::Mul, min_sub, fb(0.5), NearestEven),
            0,
        ),
        (
            "min subnormal / 2 up",
            B32::op(B32Op::Mul, min_sub, fb(0.5), TowardPosInf),
            1,
        ),
        (
            "3 min subnormal / 2",
            B32::op(B32Op::Mul, B32::from_bits(3), fb(0.5), NearestEven),
            2,
        ),
        // overflow per mode
        (
            "max * 2 nearest",
            B32::op(B32Op::Mul, max, fb(2.0), NearestEven),
            0x7F80_0000,
        ),
        (
            "max * 2 down",
            B32::op(B32Op::Mul, max, fb(2.0), TowardNegInf),
            0x7F7F_FFFF,
        ),
        (
            "max * -2 up",
            B32::op(B32Op::Mul, max, fb(-2.0), TowardPosInf),
            0xFF7F_FFFF,
        ),
        (
            "max * -2 down",
            B32::op(B32Op::Mul, max, fb(-2.0), TowardNegInf),
            0xFF80_0000,
        ),
        // signed zeros
        (
            "-0 * 3",
            B32::op(B32Op::Mul, fb(-0.0), fb(3.0), NearestEven),
            0x8000_0000,
        ),
        (
            "-0 * -3",
            B32::op(B32Op::Mul, fb(-0.0), fb(-3.0), NearestEven),
            0,
        ),
        (
            "+0 + -0",
            B32::op(B32Op::Add, fb(0.0), fb(-0.0), NearestEven),
            0,
        ),
        (
            "-0 + -0 up",
            B32::op(B32Op::Add, fb(-0.0), fb(-0.0), TowardPosInf),
            0x8000_0000,
        ),
        (
            "0 - 0 down",
            B32::op(B32Op::Sub, fb(0.0), fb(0.0), TowardNegInf),
            0x8000_0000,
        ),
        (
            "1 - 1 down",
            B32::op(B32Op::Sub, one, one, TowardNegInf),
            0x8000_0000,
        ),
        // Inf/NaN tables
        (
            "inf - inf",
            B32::op(B32Op::Add, B32::INFINITY, B32::NEG_INFINITY, NearestEven),
            0x7FC0_0000,
        ),
        (
            "inf * 0",
            B32::op(B32Op::Mul, B32::INFINITY, fb(0.0), NearestEven),
            0x7FC0_0000,
        ),
        (
            "inf / inf",
            B32::op(B32Op::Div, B32::INFINITY, B32::INFINITY, NearestEven),
            0x7FC0_0000,
        ),
        (
            "0 / 0",
            B32::op(B32Op::Div, fb(0.0), fb(-0.0), NearestEven),
            0x7FC0_0000,
        ),
        (
            "-1 / +0",
            B32::op(B32Op::Div, fb(-1.0), fb(0.0), NearestEven),
            0xFF80_0000,
        ),
        (
            "1 / -0",
            B32::op(B32Op::Div, one, fb(-0.0), NearestEven),
            0xFF80_0000,
        ),
        (
            "sqrt(-4)",
            B32::op(B32Op::Sqrt, fb(-4.0), B32::ZERO, NearestEven),
            0x7FC0_0000,
        ),
        (
            "sqrt(-0)",
            B32::op(B32Op::Sqrt, fb(-0.0), B32::ZERO, NearestEven),
            0x8000_0000,
        ),
        (
            "sqrt(inf)",
            B32::op(B32Op::Sqrt, B32::INFINITY, B32::ZERO, NearestEven),
            0x7F80_0000,
        ),
        (
            "signalling NaN + 1",
            B32::op(B32Op::Add, B32::from_bits(0x7F80_0001), one, NearestEven),
            0x7FC0_0000,
        ),
    ];
    for (what, ours, want) in fixed {
        check_eq(&mut fails, what, ours, want);
        n += 1;
    }
    for a in [B32::NAN, B32::from_bits(0xFFC0_0001)] {
        for op in [B32Op::Min, B32Op::Max, B32Op::Neg, B32Op::Abs] {
            check_eq(
                &mut fails,
                &format!("{op:?} of NaN"),
                B32::op(op, a, one, NearestEven),
                0x7FC0_0000,
            );
            n += 1;
        }
    }
    check!(
        fails,
        B32::from_bits(1).class() == B32Class::Subnormal,
        "class of 0x00000001"
    );
    check!(
        fails,
        B32::from_bits(0x0080_0000).class() == B32Class::Normal,
        "class of 0x00800000"
    );
    check!(
        fails,
        B32::from_bits(0x8000_0000).class() == B32Class::Zero,
        "class of -0"
    );
    n += 3;
    (fails, n)
}
