//! Seeded random well-typed graphs, parameters, boxes and samples shared by
//! the integration suites.

#![allow(dead_code)]

pub mod ieee;

use graphcert::bounds::box_from_bounds;
use graphcert::cert::Region;
use graphcert::codec::{canonical, canonical_directed};
use graphcert::scalar::IntervalDomain;
use graphcert::{
    validate_graph, Context, GraphBuilder, NodeId, ParamStore, Shape, TensorValue, WellTypedGraph,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which operators a generated graph may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Menu {
    /// Every supported operator.
    Full,
    /// Linear, matmul, add, sub, reshapes and reductions only.
    Affine,
    /// `input -> (linear -> relu)^k -> linear`, each node used once.
    ReluChain,
}

pub struct Case {
    pub graph: WellTypedGraph,
    pub params: ParamStore<f64>,
    /// One box per graph input, sides on the binary32 grid.
    pub region: Vec<Region>,
}

#[derive(Clone, Copy)]
struct Slot {
    id: NodeId,
    width: usize,
    /// Values stay in `[-1, 1]` regardless of the inputs.
    bounded: bool,
}

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    b: GraphBuilder,
    params: ParamStore<f64>,
    pool: Vec<Slot>,
    keys: usize,
}

impl Gen<'_> {
    fn key(&mut self, stem: &str) -> String {
        self.keys += 1;
        format!("{stem}{}", self.keys)
    }

    fn weights(&mut self, rows: usize, cols: usize) -> TensorValue<f64> {
        let scale = 1.5 / (cols as f64).sqrt();
        let rng = &mut *self.rng;
        TensorValue::from_fn(Shape::matrix(rows, cols), |_| {
            canonical(rng.gen_range(-scale..=scale))
        })
    }

    fn linear(&mut self, x: Slot, out: usize) -> Slot {
        let w = self.key("w");
        let wt = self.weights(out, x.width);
        self.params.insert(w.clone(), wt);
        let bias = if self.rng.gen_bool(0.7) {
            let k = self.key("b");
            let rng = &mut *self.rng;
            self.params.insert(
                k.clone(),
                TensorValue::from_fn(Shape::vector(out), |_| canonical(rng.gen_range(-0.5..=0.5))),
            );
            Some(k)
        } else {
            None
        };
        let id = self.b.linear(x.id, x.width, out, &w, bias.as_deref());
        Slot {
            id,
            width: out,
            bounded: false,
        }
    }

    fn matmul(&mut self, x: Slot, out: usize) -> Slot {
        let k = self.key("m");
        let wt = self.weights(out, x.width);
        self.params.insert(k.clone(), wt);
        let p = self.b.param(&k, Shape::matrix(out, x.width));
        Slot {
            id: self.b.matmul(p, x.id),
            width: out,
            bounded: false,
        }
    }

    fn pick(&mut self) -> Slot {
        // favour recent nodes so graphs get deep, but allow fan-out
        let n = self.pool.len();
        let i = if self.rng.gen_bool(0.6) {
            n - 1
        } else {
            self.rng.gen_range(0..n)
        };
        self.pool[i]
    }

    fn partner(&mut self, a: Slot) -> Slot {
        let same: Vec<Slot> = self
            .pool
            .iter()
            .copied()
            .filter(|s| s.width == a.width)
            .collect();
        if same.len() > 1 && self.rng.gen_bool(0.7) {
            *same.choose(self.rng).unwrap()
        } else {
            let src = self.pick();
            self.linear(src, a.width)
        }
    }

    fn bounded(&mut self) -> Slot {
        let bounded: Vec<Slot> = self.pool.iter().copied().filter(|s| s.bounded).collect();
        match bounded.choose(self.rng) {
            Some(s) => *s,
            None => {
                let x = self.pick();
                Slot {
                    id: self.b.tanh(x.id),
                    width: x.width,
                    bounded: true,
                }
            }
        }
    }

    fn layer(&mut self, menu: Menu) -> Slot {
        let affine_ops = 5;
        let op = if menu == Menu::Affine {
            self.rng.gen_range(0..affine_ops)
        } else {
            self.rng.gen_range(0..12)
        };
        let x = self.pick();
        let w = x.width;
        match op {
            0 => {
                let out = self.rng.gen_range(1..=8);
                self.linear(x, out)
            }
            1 => {
                let out = self.rng.gen_range(1..=8);
                self.matmul(x, out)
            }
            2 => {
                let y = self.partner(x);
                Slot {
                    id: self.b.add(x.id, y.id),
                    width: w,
                    bounded: false,
                }
            }
            3 => {
                let y = self.partner(x);
                Slot {
                    id: self.b.sub(x.id, y.id),
                    width: w,
                    bounded: false,
                }
            }
            4 => {
                let m = self.b.reshape(x.id, Shape::matrix(w, 1));
                Slot {
                    id: self.b.flatten(m),
                    ..x
                }
            }
            5 | 6 => Slot {
                id: self.b.relu(x.id),
                ..x
            },
            7 => Slot {
                id: self.b.tanh(x.id),
                width: w,
                bounded: true,
            },
            8 => Slot {
                id: self.b.sigmoid(x.id),
                width: w,
                bounded: true,
            },
            9 => {
                let s = self.bounded();
                Slot {
                    id: self.b.exp(s.id),
                    width: s.width,
                    bounded: false,
                }
            }
            10 => {
                let y = self.partner(x);
                Slot {
                    id: self.b.mul_elem(x.id, y.id),
                    width: w,
                    bounded: x.bounded && y.bounded,
                }
            }
            _ => Slot {
                id: self.b.softmax(x.id, 0),
                width: w,
                bounded: true,
            },
        }
    }
}

fn region(rng: &mut ChaCha8Rng, graph: &WellTypedGraph) -> Vec<Region> {
    graph
        .input_shapes()
        .iter()
        .map(|s| {
            let (mut lo, mut hi) = (Vec::new(), Vec::new());
            for _ in 0..s.size() {
                let c: f64 = rng.gen_range(-1.0..=1.0);
                let r: f64 = if rng.gen_bool(0.1) {
                    0.0
                } else {
                    rng.gen_range(0.0..=0.5)
                };
                lo.push(canonical_directed(c - r, true));
                hi.push(canonical_directed(c + r, false));
            }
            Region { lo, hi }
        })
        .collect()
}

/// A random graph of at most six layers with widths at most eight.
pub fn random_case(rng: &mut ChaCha8Rng, menu: Menu) -> Case {
    let mut gen = Gen {
        rng,
        b: GraphBuilder::new(),
        params: ParamStore::new(),
        pool: Vec::new(),
        keys: 0,
    };
    let n_inputs = if menu == Menu::ReluChain || gen.rng.gen_bool(0.7) {
        1
    } else {
        2
    };
    for _ in 0..n_inputs {
        let width = gen.rng.gen_range(1..=4);
        let id = gen.b.input(Shape::vector(width));
        gen.pool.push(Slot {
            id,
            width,
            bounded: false,
        });
    }
    let out = if menu == Menu::ReluChain {
        let mut x = gen.pool[0];
        for _ in 0..gen.rng.gen_range(1..=3) {
            let out = gen.rng.gen_range(1..=8);
            let h = gen.linear(x, out);
            x = Slot {
                id: gen.b.relu(h.id),
                ..h
            };
        }
        let out = gen.rng.gen_range(1..=4);
        gen.linear(x, out).id
    } else {
        let depth = gen.rng.gen_range(1..=6);
        let mut last = gen.pool[0];
        for _ in 0..depth {
            last = gen.layer(menu);
            gen.pool.push(last);
        }
        match gen.rng.gen_range(0..10) {
            0 => gen.b.reduce_sum(last.id),
            1 => gen.b.reduce_mean(last.id),
            2 if menu == Menu::Full => {
                let y = gen.partner(last);
                gen.b.mse_loss(last.id, y.id)
            }
            _ => last.id,
        }
    };
    let Gen { rng, b, params, .. } = gen;
    let graph = validate_graph(&b.finish(out), &params).expect("generated graphs are well typed");
    let region = region(rng, &graph);
    Case {
        graph,
        params,
        region,
    }
}

impl Case {
    pub fn input_box<I: IntervalDomain>(&self) -> Vec<TensorValue<I>> {
        boxes(&self.graph, &self.region)
    }

    /// Uniform point of the region, snapped to the binary32 grid.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<TensorValue<f64>> {
        self.graph
            .input_shapes()
            .into_iter()
            .zip(&self.region)
            .map(|(s, r)| {
                TensorValue::from_fn(s, |i| {
                    let x = if r.lo[i] == r.hi[i] {
                        r.lo[i]
                    } else {
                        rng.gen_range(r.lo[i]..=r.hi[i])
                    };
                    canonical(x).clamp(r.lo[i], r.hi[i])
                })
            })
            .collect()
    }

    /// A corner of the region chosen by the bits of `mask`.
    pub fn corner(&self, mask: u64) -> Vec<TensorValue<f64>> {
        let mut bit = 0;
        self.graph
            .input_shapes()
            .into_iter()
            .zip(&self.region)
            .map(|(s, r)| {
                TensorValue::from_fn(s, |i| {
                    let up = (mask >> bit) & 1 == 1;
                    bit += 1;
                    if up {
                        r.hi[i]
                    } else {
                        r.lo[i]
                    }
                })
            })
            .collect()
    }

    pub fn context(&self, inputs: Vec<TensorValue<f64>>) -> Context<f64> {
        Context::new(inputs, self.params.clone())
    }

    /// Same region, shrunk toward a random interior point by a factor in (0, 1].
    pub fn shrunk(&self, rng: &mut ChaCha8Rng) -> Vec<Region> {
        self.region
            .iter()
            .map(|r| {
                let (mut lo, mut hi) = (Vec::new(), Vec::new());
                for (&l, &h) in r.lo.iter().zip(&r.hi) {
                    let a = if l == h { l } else { rng.gen_range(l..=h) };
                    let b = if l == h { l } else { rng.gen_range(l..=h) };
                    let (a, b) = (
                        canonical(a.min(b)).clamp(l, h),
                        canonical(a.max(b)).clamp(l, h),
                    );
                    lo.push(a);
                    hi.push(b);
                }
                Region { lo, hi }
            })
            .collect()
    }
}

/// Context with the layout of `ctx` and entries uniform in `[-1, 1]`.
pub fn random_like(rng: &mut ChaCha8Rng, ctx: &Context<f64>) -> Context<f64> {
    ctx.map(|t| TensorValue::from_fn(t.shape().clone(), |_| rng.gen_range(-1.0..=1.0)))
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape) -> TensorValue<f64> {
    TensorValue::from_fn(shape, |_| rng.gen_range(-1.0..=1.0))
}

pub fn boxes<I: IntervalDomain>(graph: &WellTypedGraph, region: &[Region]) -> Vec<TensorValue<I>> {
    graph
        .input_shapes()
        .into_iter()
        .zip(region)
        .map(|(s, r)| box_from_bounds(s, &r.lo, &r.hi))
        .collect()
}

/// Graph inputs concatenated in input order, the column layout of affine forms.
pub fn flat(inputs: &[TensorValue<f64>]) -> Vec<f64> {
    inputs
        .iter()
        .flat_map(|t| t.data().iter().copied())
        .collect()
}
