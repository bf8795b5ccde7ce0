//! Bound propagation: interval (IBP), affine (CROWN forward and backward),
//! and a first-derivative interval pass for scalar-input graphs.
//!
//! Boxes are tensors over an [`IntervalDomain`] backing, either
//! [`crate::RealInterval`] or [`crate::B32Interval`]. Affine forms are kept in
//! binary64 and are not themselves rounding-rigorous; every concretized box
//! is intersected with the interval enclosure of the same node.

mod crown;
mod deriv;
mod ibp;
pub mod relax;

pub(crate) use crown::constant_values;
pub use crown::{
    concretize, concretize_outward, crown_backward, crown_forward, crown_step, row_error,
    AffBounds, AffineForm, BackwardBound, CrownResult, RelaxParams, StepInput,
};
pub use deriv::deriv_ibp1;
pub use ibp::{enclose_params, ibp_step, run_ibp};
pub use relax::{
    adaptive_alpha, exp_relax, relu_relax, sigmoid_relax, tanh_relax, Line, LinePair, DEFAULT_ALPHA,
};

use crate::scalar::IntervalDomain;
use crate::shape::Shape;
use crate::tensor::TensorValue;

/// Box over `shape` from endpoint vectors.
pub fn box_from_bounds<I: IntervalDomain>(shape: Shape, lo: &[f64], hi: &[f64]) -> TensorValue<I> {
    TensorValue::from_fn(shape, |i| I::enclose(lo[i], hi[i]))
}

pub fn lower<I: IntervalDomain>(b: &TensorValue<I>) -> Vec<f64> {
    b.data().iter().map(|x| x.lo()).collect()
}

pub fn upper<I: IntervalDomain>(b: &TensorValue<I>) -> Vec<f64> {
    b.data().iter().map(|x| x.hi()).collect()
}

/// Does every point of `values` lie in the box?
pub fn box_contains<I: IntervalDomain>(b: &TensorValue<I>, values: &[f64]) -> bool {
    b.data().iter().zip(values).all(|(i, &v)| i.contains(v))
}
