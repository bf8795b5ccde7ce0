//! Scalar linear relaxations: lines bracketing an activation on `[l, u]`.

use crate::error::RelaxError;
use crate::scalar::sigmoid_f64;

/// The line `z -> slope * z + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub const ZERO: Line = Line {
        slope: 0.0,
        intercept: 0.0,
    };
    pub const IDENTITY: Line = Line {
        slope: 1.0,
        intercept: 0.0,
    };

    pub fn new(slope: f64, intercept: f64) -> Self {
        Line { slope, intercept }
    }

    pub fn constant(c: f64) -> Self {
        Line::new(0.0, c)
    }

    pub fn at(&self, z: f64) -> f64 {
        self.slope.mul_add(z, self.intercept)
    }

    fn through(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let slope = (y1 - y0) / (x1 - x0);
        Line::new(slope, y0 - slope * x0)
    }

    fn shifted(self, d: f64) -> Self {
        Line::new(self.slope, self.intercept + d)
    }
}

/// Lower and upper bracketing lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinePair {
    pub lower: Line,
    pub upper: Line,
}

impl LinePair {
    pub fn exact(line: Line) -> Self {
        LinePair {
            lower: line,
            upper: line,
        }
    }
}

fn check_box(l: f64, u: f64) -> Result<(), RelaxError> {
    if l.is_nan() || u.is_nan() || l > u {
        Err(RelaxError::Box(l, u))
    } else {
        Ok(())
    }
}

/// Does phase `beta` agree with the pre-activation box?
pub fn phase_consistent(l: f64, u: f64, beta: i8) -> bool {
    match beta {
        -1 => u <= 0.0,
        1 => 0.0 <= l,
        _ => true,
    }
}

/// Phase-aware ReLU relaxation.
///
/// `beta = -1` and `beta = 1` assert the inactive and active phase and must be
/// consistent with `[l, u]`. With `beta = 0` stable boxes get the exact line and
/// unstable ones the secant above and `alpha * z` below.
pub fn relu_relax(l: f64, u: f64, alpha: f64, beta: i8) -> Result<LinePair, RelaxError> {
    check_box(l, u)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(RelaxError::Alpha(alpha));
    }
    match beta {
        -1 | 0 | 1 => {}
        b => return Err(RelaxError::Beta(b)),
    }
    if !phase_consistent(l, u, beta) {
        return Err(RelaxError::Phase { lo: l, hi: u, beta });
    }
    if beta == -1 || u <= 0.0 {
        return Ok(LinePair::exact(Line::ZERO));
    }
    if beta == 1 || 0.0 <= l {
        return Ok(LinePair::exact(Line::IDENTITY));
    }
    Ok(LinePair {
        lower: Line::new(alpha, 0.0),
        upper: relu_secant(l, u),
    })
}

/// Secant of relu over `l < 0 < u`, with the intercept rounded up just enough
/// that the exact line stays above both endpoints.
fn relu_secant(l: f64, u: f64) -> Line {
    let s = u / (u - l);
    // above (l, 0): c >= -s*l
    let p = -(s * l);
    let c_left = if s.mul_add(l, p) < 0.0 {
        p.next_up()
    } else {
        p
    };
    // above (u, u): c >= u - s*u
    let h = s * u;
    let e_mul = s.mul_add(u, -h);
    let v = u - h;
    let e_sub = (u - v) - h;
    let c_right = if e_mul == 0.0 && e_sub == 0.0 {
        v
    } else {
        ((v + e_sub.abs()).next_up() + e_mul.abs()).next_up()
    };
    Line::new(s, c_left.max(c_right))
}

/// Lower slope used for a unit when no alpha is supplied. A fixed slope keeps
/// concretized bounds monotone in the input box.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Box-dependent lower slope: the identity when the box leans positive, zero
/// otherwise. Usually tighter than [`DEFAULT_ALPHA`], but shrinking the box
/// can flip the choice and loosen downstream bounds.
pub fn adaptive_alpha(l: f64, u: f64) -> f64 {
    if u > -l {
        1.0
    } else {
        0.0
    }
}

/// Outward slack for lines built from libm values.
fn slack(line: &Line, l: f64, u: f64, scale: f64) -> f64 {
    let m = l.abs().max(u.abs());
    8.0 * f64::EPSILON * (line.intercept.abs() + line.slope.abs() * m + scale)
}

fn pad(pair: LinePair, l: f64, u: f64, scale: f64) -> LinePair {
    let lower = pair.lower.shifted(-slack(&pair.lower, l, u, scale));
    let upper = pair.upper.shifted(slack(&pair.upper, l, u, scale));
    LinePair { lower, upper }
}

/// Secant on one side, tangent at the midpoint on the other, for a function
/// that is concave (`concave = true`) or convex on `[l, u]`.
fn secant_tangent(
    f: fn(f64) -> f64,
    df: fn(f64) -> f64,
    l: f64,
    u: f64,
    concave: bool,
) -> LinePair {
    let secant = Line::through(l, f(l), u, f(u));
    let m = 0.5 * (l + u);
    let s = df(m);
    let tangent = Line::new(s, f(m) - s * m);
    if concave {
        LinePair {
            lower: secant,
            upper: tangent,
        }
    } else {
        LinePair {
            lower: tangent,
            upper: secant,
        }
    }
}

fn dtanh(z: f64) -> f64 {
    let t = z.tanh();
    1.0 - t * t
}

/// Sound lines for `tanh` on `[l, u]`.
///
/// Concave for `l >= 0`, convex for `u <= 0`; a box straddling zero gets the
/// constant endpoint lines. Non-degenerate lines carry a few ulps of slack.
pub fn tanh_relax(l: f64, u: f64) -> Result<LinePair, RelaxError> {
    check_box(l, u)?;
    if l == u {
        let mut p = LinePair::exact(Line::constant(l.tanh()));
        if !is_exact_tanh_point(l) {
            p = pad(p, l, u, 1.0);
        }
        return Ok(p);
    }
    let pair = if 0.0 <= l {
        secant_tangent(f64::tanh, dtanh, l, u, true)
    } else if u <= 0.0 {
        secant_tangent(f64::tanh, dtanh, l, u, false)
    } else {
        LinePair {
            lower: Line::constant(l.tanh()),
            upper: Line::constant(u.tanh()),
        }
    };
    Ok(pad(pair, l, u, 1.0))
}

fn is_exact_tanh_point(z: f64) -> bool {
    z == 0.0 || z.is_infinite()
}

/// Sound lines for the logistic function, via `sigmoid(z) = (1 + tanh(z/2)) / 2`.
pub fn sigmoid_relax(l: f64, u: f64) -> Result<LinePair, RelaxError> {
    check_box(l, u)?;
    if l == u {
        let p = LinePair::exact(Line::constant(sigmoid_f64(l)));
        return Ok(if l == 0.0 { p } else { pad(p, l, u, 1.0) });
    }
    let t = tanh_relax(0.5 * l, 0.5 * u)?;
    let map = |line: Line| Line::new(0.25 * line.slope, 0.5 * line.intercept + 0.5);
    let pair = LinePair {
        lower: map(t.lower),
        upper: map(t.upper),
    };
    Ok(pad(pair, l, u, 1.0))
}

/// Sound lines for `exp` on `[l, u]`: tangent at the midpoint below, secant above.
pub fn exp_relax(l: f64, u: f64) -> Result<LinePair, RelaxError> {
    check_box(l, u)?;
    let eu = u.exp();
    if l == u {
        let p = LinePair::exact(Line::constant(eu));
        return Ok(if l == 0.0 { p } else { pad(p, l, u, eu) });
    }
    if !eu.is_finite() || l == f64::NEG_INFINITY {
        return Ok(LinePair {
            lower: Line::ZERO,
            upper: Line::constant(f64::INFINITY),
        });
    }
    let pair = secant_tangent(f64::exp, f64::exp, l, u, false);
    Ok(pad(pair, l, u, eu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        let p = relu_relax(-1.0, 1.0, 0.3, 0).unwrap();
        assert_eq!(p.upper, Line::new(0.5, 0.5));
        assert_eq!(p.lower, Line::new(0.3, 0.0));
        let p = relu_relax(-2.0, -1.0, 0.7, 0).unwrap();
        assert_eq!(p, LinePair::exact(Line::ZERO));
        assert!(matches!(
            relu_relax(-0.5, 1.0, 0.0, 1),
            Err(RelaxError::Phase { .. })
        ));
        assert!(matches!(
            relu_relax(-0.5, 1.0, 0.0, -1),
            Err(RelaxError::Phase { .. })
        ));
        assert_eq!(
            relu_relax(-0.5, 0.0, 0.0, -1).unwrap(),
            LinePair::exact(Line::ZERO)
        );
        assert_eq!(
            relu_relax(0.0, 2.0, 0.0, 1).unwrap(),
            LinePair::exact(Line::IDENTITY)
        );
        assert!(matches!(
            relu_relax(-1.0, 1.0, 1.5, 0),
            Err(RelaxError::Alpha(_))
        ));
        assert!(matches!(
            relu_relax(-1.0, 1.0, 0.5, 2),
            Err(RelaxError::Beta(2))
        ));
    }

    #[test]
    fn relu_alpha_zero_is_zero_line() {
        let p = relu_relax(-3.0, 1.0, 0.0, 0).unwrap();
        assert_eq!(p.lower, Line::ZERO);
    }

    #[test]
    fn tanh_point_at_zero() {
        let p = tanh_relax(0.0, 0.0).unwrap();
        assert_eq!(p.lower.at(0.0), 0.0);
        assert_eq!(p.upper.at(0.0), 0.0);
    }

    #[test]
    fn tanh_straddle_uses_endpoint_constants() {
        let p = tanh_relax(-1.0, 1.0).unwrap();
        assert_eq!(p.lower.slope, 0.0);
        assert!(p.lower.intercept <= (-1.0f64).tanh());
        assert!(p.upper.intercept >= 1.0f64.tanh());
        assert!((p.upper.intercept - 1.0f64.tanh()).abs() < 1e-14);
    }

    #[test]
    fn tanh_concave_lower_is_secant() {
        let p = tanh_relax(1.0, 2.0).unwrap();
        let s = (2.0f64.tanh() - 1.0f64.tanh()) / 1.0;
        assert!((p.lower.slope - s).abs() < 1e-15);
        for k in 0..=1000 {
            let z = 1.0 + k as f64 / 1000.0;
            assert!(p.lower.at(z) <= z.tanh() && z.tanh() <= p.upper.at(z));
        }
    }

    #[test]
    fn exp_and_sigmoid_bracket() {
        for (l, u) in [(-3.0, 2.0), (0.5, 0.6), (-10.0, -9.0)] {
            let e = exp_relax(l, u).unwrap();
            let s = sigmoid_relax(l, u).unwrap();
            for k in 0..=200 {
                let z = l + (u - l) * k as f64 / 200.0;
                assert!(e.lower.at(z) <= z.exp() && z.exp() <= e.upper.at(z));
                let sz = sigmoid_f64(z);
                assert!(s.lower.at(z) <= sz && sz <= s.upper.at(z));
            }
        }
    }
}
