//! Integer-significand binary32 arithmetic.
//!
//! Every finite operand is decoded to `m * 2^q` with an integer `m`. Results are
//! formed exactly (or exactly up to a sticky bit strictly below the last bit of
//! `m`) and then rounded once by [`round_pack`].

use super::B32;
use crate::scalar::RoundingMode;

const SIG_BITS: u32 = 23;
const MIN_QUANTUM_EXP: i32 = -149;
const EXP_BIAS: i32 = 127;

/// Finite nonzero value `(-1)^neg * m * 2^q`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Unpacked {
    pub neg: bool,
    pub m: u64,
    pub q: i32,
}

pub(crate) fn unpack(x: B32) -> Unpacked {
    let bits = x.bits();
    let neg = bits >> 31 != 0;
    let field = ((bits >> 23) & 0xFF) as i32;
    let frac = (bits & 0x7F_FFFF) as u64;
    if field == 0 {
        Unpacked {
            neg,
            m: frac,
            q: MIN_QUANTUM_EXP,
        }
    } else {
        Unpacked {
            neg,
            m: frac | (1 << SIG_BITS),
            q: field - EXP_BIAS - SIG_BITS as i32,
        }
    }
}

/// Same value with `m` shifted so bit 23 is its leading bit.
fn normalize(u: Unpacked) -> Unpacked {
    let lz = u.m.leading_zeros() as i32 - (63 - SIG_BITS as i32);
    if lz > 0 {
        Unpacked {
            neg: u.neg,
            m: u.m << lz,
            q: u.q - lz,
        }
    } else {
        u
    }
}

fn overflow(neg: bool, mode: RoundingMode) -> B32 {
    let to_inf = match mode {
        RoundingMode::NearestEven => true,
        RoundingMode::TowardPosInf => !neg,
        RoundingMode::TowardNegInf => neg,
    };
    let mag = if to_inf { 0x7F80_0000 } else { 0x7F7F_FFFF };
    B32::from_bits(mag | ((neg as u32) << 31))
}

/// Rounds `(-1)^neg * (m + s) * 2^q` to binary32, where `s` is zero when
/// `sticky` is false and otherwise some value in `(0, 1)`.
///
/// Callers setting `sticky` must supply at least one bit beyond the final
/// precision, so the sticky information always lands below the rounding point.
/// Returns the result and whether it is inexact.
pub(crate) fn round_pack(
    neg: bool,
    m: u128,
    q: i32,
    sticky: bool,
    mode: RoundingMode,
) -> (B32, bool) {
    let sign = (neg as u32) << 31;
    if m == 0 {
        debug_assert!(!sticky, "sticky with zero significand");
        return (B32::from_bits(sign), false);
    }
    let nbits = 128 - m.leading_zeros() as i32;
    let lead_exp = q + nbits - 1;
    let quantum_exp = (lead_exp - SIG_BITS as i32).max(MIN_QUANTUM_EXP);
    let shift = quantum_exp - q;

    let (mut kept, round_half, above_half, inexact) = if shift <= 0 {
        debug_assert!(!sticky, "sticky below an exact result");
        ((m << (-shift) as u32) as u64, false, false, false)
    } else if shift >= 128 {
        // everything is shifted out and lies below half a quantum
        (0u64, false, false, true)
    } else {
        let shift = shift as u32;
        let kept = (m >> shift) as u64;
        let rem = m & ((1u128 << shift) - 1);
        let half = 1u128 << (shift - 1);
        let inexact = rem != 0 || sticky;
        let exactly_half = rem == half && !sticky;
        let above = rem > half || (rem == half && sticky);
        (kept, exactly_half, above, inexact)
    };

    let round_up = match mode {
        RoundingMode::NearestEven => above_half || (round_half && kept & 1 == 1),
        RoundingMode::TowardPosInf => inexact && !neg,
        RoundingMode::TowardNegInf => inexact && neg,
    };
    let mut quantum_exp = quantum_exp;
    if round_up {
        kept += 1;
        if kept == 1 << (SIG_BITS + 1) {
            kept >>= 1;
            quantum_exp += 1;
        }
    }

    let bits = if kept >= 1 << SIG_BITS {
        let field = quantum_exp + SIG_BITS as i32 + EXP_BIAS;
        if field >= 0xFF {
            return (overflow(neg, mode), true);
        }
        ((field as u32) << 23) | (kept as u32 & 0x7F_FFFF)
    } else {
        // subnormal (or zero after rounding down); field stays 0
        kept as u32
    };
    (B32::from_bits(sign | bits), inexact)
}

/// Rounds a binary64 value to binary32. `x` must not be NaN.
pub(crate) fn from_f64(x: f64, mode: RoundingMode) -> (B32, bool) {
    debug_assert!(!x.is_nan());
    let bits = x.to_bits();
    let neg = bits >> 63 != 0;
    let field = ((bits >> 52) & 0x7FF) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if field == 0x7FF {
        return (
            if neg {
                B32::NEG_INFINITY
            } else {
                B32::INFINITY
            },
            false,
        );
    }
    let (m, q) = if field == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), field - 1075)
    };
    round_pack(neg, m as u128, q, false, mode)
}

pub(crate) fn to_f64(x: B32) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x.is_sign_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
    }
    let u = unpack(x);
    // m < 2^24 and q in [-149, 104]: exact in binary64
    let mag = u.m as f64 * 2f64.powi(u.q);
    if u.neg {
        -mag
    } else {
        mag
    }
}

fn zero(neg: bool) -> B32 {
    B32::from_bits((neg as u32) << 31)
}

fn inf(neg: bool) -> B32 {
    B32::from_bits(((neg as u32) << 31) | 0x7F80_0000)
}

/// Exact sign for a zero result of `x + y` with `x = -y`, per IEEE 754 6.3.
fn cancel_zero(mode: RoundingMode) -> B32 {
    zero(mode == RoundingMode::TowardNegInf)
}

pub(crate) fn add(a: B32, b: B32, mode: RoundingMode) -> B32 {
    if a.is_nan() || b.is_nan() {
        return B32::NAN;
    }
    match (a.is_infinite(), b.is_infinite()) {
        (true, true) => {
            return if a.is_sign_negative() == b.is_sign_negative() {
                a
            } else {
                B32::NAN
            }
        }
        (true, false) => return a,
        (false, true) => return b,
        _ => {}
    }
    match (a.is_zero(), b.is_zero()) {
        (true, true) => {
            return if a.is_sign_negative() == b.is_sign_negative() {
                a
            } else {
                cancel_zero(mode)
            }
        }
        (true, false) => return b,
        (false, true) => return a,
        _ => {}
    }

    let (ua, ub) = (unpack(a), unpack(b));
    // order so that `hi` has the larger exponent
    let (hi, lo) = if ua.q >= ub.q { (ua, ub) } else { (ub, ua) };
    let diff = (hi.q - lo.q) as u32;
    let same_sign = hi.neg == lo.neg;

    if diff <= 100 {
        let big = (hi.m as u128) << diff;
        let small = lo.m as u128;
        if same_sign {
            return round_pack(hi.neg, big + small, lo.q, false, mode).0;
        }
        return match big.cmp(&small) {
            std::cmp::Ordering::Equal => cancel_zero(mode),
            std::cmp::Ordering::Greater => round_pack(hi.neg, big - small, lo.q, false, mode).0,
            std::cmp::Ordering::Less => round_pack(lo.neg, small - big, lo.q, false, mode).0,
        };
    }

    // The smaller operand is below 2^(hi.q - 100); `hi` is normal here, so three
    // guard bits put it strictly under the last kept bit.
    let m = (hi.m as u128) << 3;
    let q = hi.q - 3;
    if same_sign {
        round_pack(hi.neg, m, q, true, mode).0
    } else {
        round_pack(hi.neg, m - 1, q, true, mode).0
    }
}

pub(crate) fn sub(a: B32, b: B32, mode: RoundingMode) -> B32 {
    if b.is_nan() {
        return B32::NAN;
    }
    add(a, b.negate_raw(), mode)
}

pub(crate) fn mul(a: B32, b: B32, mode: RoundingMode) -> B32 {
    if a.is_nan() || b.is_nan() {
        return B32::NAN;
    }
    let neg = a.is_sign_negative() != b.is_sign_negative();
    if a.is_infinite() || b.is_infinite() {
        if a.is_zero() || b.is_zero() {
            return B32::NAN;
        }
        return inf(neg);
    }
    if a.is_zero() || b.is_zero() {
        return zero(neg);
    }
    let (ua, ub) = (unpack(a), unpack(b));
    round_pack(neg, ua.m as u128 * ub.m as u128, ua.q + ub.q, false, mode).0
}

pub(crate) fn div(a: B32, b: B32, mode: RoundingMode) -> B32 {
    if a.is_nan() || b.is_nan() {
        return B32::NAN;
    }
    let neg = a.is_sign_negative() != b.is_sign_negative();
    match (a.is_infinite(), b.is_infinite()) {
        (true, true) => return B32::NAN,
        (true, false) => return inf(neg),
        (false, true) => return zero(neg),
        _ => {}
    }
    match (a.is_zero(), b.is_zero()) {
        (true, true) => return B32::NAN,
        (false, true) => return inf(neg),
        (true, false) => return zero(neg),
        _ => {}
    }
    let (ua, ub) = (normalize(unpack(a)), normalize(unpack(b)));
    const EXTRA: u32 = 40;
    let num = (ua.m as u128) << EXTRA;
    let den = ub.m as u128;
    let quot = num / den;
    let rem = num % den;
    round_pack(neg, quot, ua.q - ub.q - EXTRA as i32, rem != 0, mode).0
}

pub(crate) fn sqrt(a: B32, mode: RoundingMode) -> B32 {
    if a.is_nan() {
        return B32::NAN;
    }
    if a.is_zero() {
        return a;
    }
    if a.is_sign_negative() {
        return B32::NAN;
    }
    if a.is_infinite() {
        return a;
    }
    let mut u = normalize(unpack(a));
    if u.q % 2 != 0 {
        u.m <<= 1;
        u.q -= 1;
    }
    const EXTRA: u32 = 40;
    let radicand = (u.m as u128) << EXTRA;
    let root = radicand.isqrt();
    let sticky = root * root != radicand;
    round_pack(false, root, (u.q - EXTRA as i32) / 2, sticky, mode).0
}

/// IEEE ordering on non-NaN values, with -0 below +0 (for min/max).
fn total_lt(a: B32, b: B32) -> bool {
    let key = |x: B32| -> i64 {
        let bits = x.bits() as i64;
        if bits >> 31 != 0 {
            -(bits & 0x7FFF_FFFF) - 1
        } else {
            bits
        }
    };
    key(a) < key(b)
}

pub(crate) fn min(a: B32, b: B32) -> B32 {
    if a.is_nan() || b.is_nan() {
        return B32::NAN;
    }
    if total_lt(b, a) {
        b
    } else {
        a
    }
}

pub(crate) fn max(a: B32, b: B32) -> B32 {
    if a.is_nan() || b.is_nan() {
        return B32::NAN;
    }
    if total_lt(a, b) {
        b
    } else {
        a
    }
}
