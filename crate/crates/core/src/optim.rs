//! Shape-preserving optimizer steps over parameter stores.

use crate::autodiff::param_grad;
use crate::error::{DomainError, EvalError, ShapeError};
use crate::eval::Context;
use crate::ir::WellTypedGraph;
use crate::params::ParamStore;
use crate::scalar::ScalarDomain;
use crate::tensor::TensorValue;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates carried between steps (unused by SGD).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState<S> {
    pub step: u32,
    pub m: Option<ParamStore<S>>,
    pub v: Option<ParamStore<S>>,
}

impl<S> Default for OptimState<S> {
    fn default() -> Self {
        OptimState {
            step: 0,
            m: None,
            v: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

fn zip_store<S: ScalarDomain>(
    a: &ParamStore<S>,
    b: &ParamStore<S>,
    mut f: impl FnMut(&S, &S) -> Result<S, DomainError>,
) -> Result<ParamStore<S>, DomainError> {
    let mut out = ParamStore::new();
    for ((k, x), y) in a.iter().zip(b.values()) {
        out.insert(k, x.zip_with(y, &mut f)?);
    }
    Ok(out)
}

fn pow<S: ScalarDomain>(base: &S, n: u32) -> Result<S, DomainError> {
    let mut acc = S::one();
    for _ in 0..n {
        acc = acc.mul(base)?;
    }
    Ok(acc)
}

/// One optimizer step. Constants are embedded into `S` with `from_f64`.
pub fn optim_step<S: ScalarDomain>(
    opt: &Optimizer,
    params: &ParamStore<S>,
    grads: &ParamStore<S>,
    state: &OptimState<S>,
) -> Result<(ParamStore<S>, OptimState<S>), OptimError> {
    params.check_layout(grads)?;
    match *opt {
        Optimizer::Sgd { lr } => {
            let lr = S::from_f64(lr)?;
            let p = zip_store(params, grads, |t, g| t.sub(&lr.mul(g)?))?;
            Ok((
                p,
                OptimState {
                    step: state.step + 1,
                    m: None,
                    v: None,
                },
            ))
        }
        Optimizer::Adam {
            lr,
            beta1,
            beta2,
            eps,
        } => {
            let (b1, b2) = (S::from_f64(beta1)?, S::from_f64(beta2)?);
            let (c1, c2) = (S::from_f64(1.0 - beta1)?, S::from_f64(1.0 - beta2)?);
            let (lr, eps) = (S::from_f64(lr)?, S::from_f64(eps)?);
            let zeros = || ParamStore::<S>::zeros_like(params);
            let m0 = state.m.clone().unwrap_or_else(zeros);
            let v0 = state.v.clone().unwrap_or_else(zeros);
            let m = zip_store(&m0, grads, |m, g| b1.mul(m)?.add(&c1.mul(g)?))?;
            let v = zip_store(&v0, grads, |v, g| b2.mul(v)?.add(&c2.mul(&g.sqr()?)?))?;
            let t = state.step + 1;
            let bc1 = S::one().sub(&pow(&b1, t)?)?;
            let bc2 = S::one().sub(&pow(&b2, t)?)?;
            let mut out = ParamStore::new();
            for (((k, theta), mk), vk) in params.iter().zip(m.values()).zip(v.values()) {
                let mut data = Vec::with_capacity(theta.len());
                for ((th, mi), vi) in theta.data().iter().zip(mk.data()).zip(vk.data()) {
                    let mhat = mi.div(&bc1)?;
                    let vhat = vi.div(&bc2)?;
                    let upd = lr.mul(&mhat)?.div(&vhat.sqrt()?.add(&eps)?)?;
                    data.push(th.sub(&upd)?);
                }
                out.insert(k, TensorValue::new(theta.shape().clone(), data)?);
            }
            Ok((
                out,
                OptimState {
                    step: t,
                    m: Some(m),
                    v: Some(v),
                },
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// Full-batch training of a scalar-loss graph on fixed inputs. Returns the
/// trained parameters and `steps + 1` losses: before the first step and
/// after each one.
pub fn train<S: ScalarDomain>(
    g: &WellTypedGraph,
    inputs: Vec<TensorValue<S>>,
    params: ParamStore<S>,
    opt: &Optimizer,
    steps: usize,
) -> Result<(ParamStore<S>, Vec<S>), TrainError> {
    let mut ctx = Context::new(inputs, params);
    let mut state = OptimState::default();
    let mut losses = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let (loss, grads) = param_grad(g, &ctx)?;
        losses.push(loss);
        let (p, st) = optim_step(opt, &ctx.params, &grads, &state)?;
        ctx.params = p;
        state = st;
    }
    let (loss, _) = param_grad(g, &ctx)?;
    losses.push(loss);
    Ok((ctx.params, losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::Shape;

    fn store(x: f64) -> ParamStore<f64> {
        let mut p = ParamStore::new();
        p.insert("t", TensorValue::scalar(x));
        p
    }

    #[test]
    fn sgd_formula() {
        let (p, _) = optim_step(
            &Optimizer::Sgd { lr: 0.2 },
            &store(1.0),
            &store(2.0),
            &OptimState::default(),
        )
        .unwrap();
        assert!((p.get("t").unwrap().data()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut p = store(1.5);
        p.insert(
            "w",
            TensorValue::new(Shape::vector(2), vec![-3.0, 0.25]).unwrap(),
        );
        let g = ParamStore::zeros_like(&p);
        let mut st = OptimState::default();
        let mut cur = p.clone();
        for _ in 0..3 {
            let (n, s) = optim_step(&Optimizer::adam(0.01), &cur, &g, &st).unwrap();
            cur = n;
            st = s;
        }
        assert_eq!(cur, p);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let (p, _) = optim_step(
            &Optimizer::adam(0.1),
            &store(1.0),
            &store(4.0),
            &OptimState::default(),
        )
        .unwrap();
        // bias-corrected first step is lr * g / (|g| + eps)
        assert!((p.get("t").unwrap().data()[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let mut g = store(1.0);
        g.insert("extra", TensorValue::scalar(0.0));
        assert!(optim_step(
            &Optimizer::Sgd { lr: 0.1 },
            &store(1.0),
            &g,
            &OptimState::default()
        )
        .is_err());
    }
}
