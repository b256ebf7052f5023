//! Reverse-mode automatic differentiation over a linear tape.
//!
//! A tape is built fresh for every forward pass. Parameters enter as borrowed
//! leaves, so recording a pass never copies weights. [`Tape::backward`]
//! walks the nodes in reverse and returns gradients aligned with the
//! [`ParamSet`] the leaves came from.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::layers;
use super::{Grads, ParamId, ParamSet, Tensor};
use crate::{Error, Result, Scalar};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// How the Bellman error is clipped for large `|δ|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorClip {
    /// Quadratic for `|δ| <= 1`, continued linearly (`2|δ| - 1`) beyond.
    #[default]
    Huber,
    /// Loss stays `δ²`; only the gradient is capped at that of `|δ| = 1`.
    GradientTruncation,
}

enum Value<'a, S> {
    Owned(Tensor<S>),
    Borrowed(&'a Tensor<S>),
}

enum Op<S> {
    Leaf(Option<ParamId>),
    Conv { x: Var, k: Var, b: Var, stride: usize },
    Deconv { x: Var, k: Var, b: Var, stride: usize },
    Linear { x: Var, w: Var, b: Option<Var> },
    Relu(Var),
    Mul(Var, Var),
    Reshape(Var),
    Softmax(Var),
    Gather { x: Var, index: Vec<usize> },
    Sum(Var),
    Clipped { pred: Var, target: Vec<S> },
    Nll { logits: Var, targets: Vec<usize>, weights: Vec<S>, cap: S },
    HalfSq { pred: Var, target: Tensor<S>, mask: Vec<S> },
    Weighted(Vec<(Var, S)>),
}

struct Node<'a, S> {
    value: Value<'a, S>,
    op: Op<S>,
}

pub struct Tape<'a, S> {
    nodes: Vec<Node<'a, S>>,
}

impl<'a, S: Scalar> Default for Tape<'a, S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, S: Scalar> Tape<'a, S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }

    /// A constant input (no gradient is reported for it unless asked via
    /// [`TapeGrads::of`]).
    pub fn input(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Leaf(None))
    }

    /// A parameter leaf borrowed from `params`.
    pub fn param(&mut self, params: &'a ParamSet<S>, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Value::Borrowed(params.get(id)),
            op: Op::Leaf(Some(id)),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn conv2d(&mut self, x: Var, k: Var, b: Var, stride: usize) -> Result<Var> {
        let y = layers::conv2d(self.value(x), self.value(k), Some(self.value(b)), stride)?;
        Ok(self.push(y, Op::Conv { x, k, b, stride }))
    }

    pub fn deconv2d(&mut self, x: Var, k: Var, b: Var, stride: usize) -> Result<Var> {
        let y = layers::deconv2d(self.value(x), self.value(k), Some(self.value(b)), stride)?;
        Ok(self.push(y, Op::Deconv { x, k, b, stride }))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = layers::linear(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        Ok(self.push(y, Op::Linear { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = layers::relu(self.value(x));
        self.push(y, Op::Relu(x))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = layers::elementwise_mul(self.value(a), self.value(b))?;
        Ok(self.push(y, Op::Mul(a, b)))
    }

    pub fn reshape(&mut self, x: Var, dims: &[usize]) -> Result<Var> {
        let y = self.value(x).clone().reshape(dims)?;
        Ok(self.push(y, Op::Reshape(x)))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let y = layers::softmax(self.value(x));
        self.push(y, Op::Softmax(x))
    }

    /// Picks `x[i, index[i]]` from a `[N, K]` tensor.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(x);
        let [n, k] = *t.dims() else {
            return Err(Error::shape("gather", format!("expected [N,K], got {:?}", t.dims())));
        };
        if index.len() != n || index.iter().any(|&i| i >= k) {
            return Err(Error::shape("gather", "index length or range mismatch"));
        }
        let data = index.iter().enumerate().map(|(i, &j)| t.data()[i * k + j]).collect();
        let y = Tensor::new(&[n], data)?;
        Ok(self.push(
            y,
            Op::Gather {
                x,
                index: index.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let y = Tensor::scalar(self.value(x).sum());
        self.push(y, Op::Sum(x))
    }

    /// Mean clipped squared error between `pred` (`[N]`) and constant targets.
    pub fn clipped_error(&mut self, pred: Var, target: Vec<S>, clip: ErrorClip) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != target.len() || target.is_empty() {
            return Err(Error::shape("clipped_error", "prediction/target length mismatch"));
        }
        let n = S::from_f64(target.len() as f64);
        let two = S::from_f64(2.0);
        let total = p.data().iter().zip(&target).fold(S::ZERO, |acc, (&q, &t)| {
            let d = t - q;
            let l = match clip {
                ErrorClip::Huber if d.abs() > S::ONE => two * d.abs() - S::ONE,
                _ => d * d,
            };
            acc + l
        });
        Ok(self.push(Tensor::scalar(total / n), Op::Clipped { pred, target }))
    }

    /// Weighted mean of `min(-ln softmax(logits)[target], cap)` over rows.
    pub fn categorical_nll(
        &mut self,
        logits: Var,
        targets: &[usize],
        weights: &[S],
        cap: S,
    ) -> Result<Var> {
        let z = self.value(logits);
        let [n, k] = *z.dims() else {
            return Err(Error::shape("categorical_nll", format!("expected [N,K], got {:?}", z.dims())));
        };
        if targets.len() != n || weights.len() != n || targets.iter().any(|&t| t >= k) {
            return Err(Error::shape("categorical_nll", "targets/weights do not match batch"));
        }
        let mut total = S::ZERO;
        for (i, row) in z.data().chunks(k).enumerate() {
            total += weights[i] * nll_row(row, targets[i]).min(cap);
        }
        let y = Tensor::scalar(total / S::from_f64(n as f64));
        Ok(self.push(
            y,
            Op::Nll {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                cap,
            },
        ))
    }

    /// Mean over rows of `½·mask[i]·‖pred[i] − target[i]‖²`.
    pub fn masked_half_sq(&mut self, pred: Var, target: Tensor<S>, mask: Vec<S>) -> Result<Var> {
        let p = self.value(pred);
        if p.dims() != target.dims() || p.dims()[0] != mask.len() {
            return Err(Error::shape(
                "masked_half_sq",
                format!("prediction {:?} vs target {:?}", p.dims(), target.dims()),
            ));
        }
        let row = p.len() / mask.len();
        let half = S::from_f64(0.5);
        let mut total = S::ZERO;
        for (i, &m) in mask.iter().enumerate() {
            if m == S::ZERO {
                continue;
            }
            let a = &p.data()[i * row..(i + 1) * row];
            let b = &target.data()[i * row..(i + 1) * row];
            let sq = a.iter().zip(b).fold(S::ZERO, |acc, (&x, &y)| acc + (x - y) * (x - y));
            total += half * m * sq;
        }
        let y = Tensor::scalar(total / S::from_f64(mask.len() as f64));
        Ok(self.push(y, Op::HalfSq { pred, target, mask }))
    }

    /// `Σ coef·term` over scalar terms.
    pub fn weighted_sum(&mut self, terms: &[(Var, S)]) -> Result<Var> {
        let mut total = S::ZERO;
        for &(v, c) in terms {
            let t = self.value(v);
            if t.len() != 1 {
                return Err(Error::shape("weighted_sum", "terms must be scalars"));
            }
            total += c * t.data()[0];
        }
        Ok(self.push(Tensor::scalar(total), Op::Weighted(terms.to_vec())))
    }

    /// Which branch every piecewise operation took: ReLU signs, Huber
    /// branches and NLL caps. Two evaluations with equal patterns lie on the
    /// same smooth piece of the loss.
    pub fn branch_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => out.extend(self.value(*x).data().iter().map(|&v| v > S::ZERO)),
                Op::Clipped { pred, target } => out.extend(
                    self.value(*pred)
                        .data()
                        .iter()
                        .zip(target)
                        .map(|(&q, &t)| (t - q).abs() > S::ONE),
                ),
                Op::Nll {
                    logits,
                    targets,
                    cap,
                    ..
                } => {
                    let z = self.value(*logits);
                    let k = z.dims()[1];
                    out.extend(
                        z.data()
                            .chunks(k)
                            .zip(targets)
                            .map(|(row, &t)| nll_row(row, t) > *cap),
                    );
                }
                _ => {}
            }
        }
        out
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<TapeGrads<S>> {
        if self.value(loss).len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got dims {:?}",
                self.value(loss).dims()
            )));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(S::ONE));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf(_) => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::Conv { x, k, b, stride } => {
                    let (dx, dk, db) =
                        layers::conv2d_backward(self.value(*x), self.value(*k), &g, *stride);
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *k, dk);
                    accumulate(&mut grads, *b, db);
                }
                Op::Deconv { x, k, b, stride } => {
                    let (dx, dk, db) =
                        layers::deconv2d_backward(self.value(*x), self.value(*k), &g, *stride);
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *k, dk);
                    accumulate(&mut grads, *b, db);
                }
                Op::Linear { x, w, b } => {
                    let (dx, dw, db) = layers::linear_backward(self.value(*x), self.value(*w), &g);
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *w, dw);
                    if let Some(b) = b {
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let data = g
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(&gv, &v)| if v > S::ZERO { gv } else { S::ZERO })
                        .collect();
                    accumulate(&mut grads, *x, Tensor::new(xv.dims(), data)?);
                }
                Op::Mul(a, b) => {
                    let da = layers::elementwise_mul(&g, self.value(*b))?;
                    let db = layers::elementwise_mul(&g, self.value(*a))?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Reshape(x) => {
                    let dims = self.value(*x).dims().to_vec();
                    accumulate(&mut grads, *x, g.reshape(&dims)?);
                }
                Op::Softmax(x) => {
                    let y = self.value(Var(i));
                    let k = *y.dims().last().expect("rank >= 1");
                    let mut data = Vec::with_capacity(y.len());
                    for (yr, gr) in y.data().chunks(k).zip(g.data().chunks(k)) {
                        let dot = yr.iter().zip(gr).fold(S::ZERO, |a, (&p, &q)| a + p * q);
                        data.extend(yr.iter().zip(gr).map(|(&p, &q)| p * (q - dot)));
                    }
                    accumulate(&mut grads, *x, Tensor::new(y.dims(), data)?);
                }
                Op::Gather { x, index } => {
                    let dims = self.value(*x).dims().to_vec();
                    let k = dims[1];
                    let mut d = Tensor::zeros(&dims);
                    for (r, &j) in index.iter().enumerate() {
                        d.data_mut()[r * k + j] = g.data()[r];
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::Sum(x) => {
                    let dims = self.value(*x).dims().to_vec();
                    accumulate(&mut grads, *x, Tensor::full(&dims, g.data()[0]));
                }
                Op::Clipped { pred, target } => {
                    let p = self.value(*pred);
                    let two = S::from_f64(2.0);
                    let scale = g.data()[0] / S::from_f64(target.len() as f64);
                    let data = p
                        .data()
                        .iter()
                        .zip(target)
                        .map(|(&q, &t)| {
                            let d = (t - q).max(-S::ONE).min(S::ONE);
                            -two * d * scale
                        })
                        .collect();
                    accumulate(&mut grads, *pred, Tensor::new(p.dims(), data)?);
                }
                Op::Nll { logits, targets, weights, cap } => {
                    let z = self.value(*logits);
                    let k = z.dims()[1];
                    let scale = g.data()[0] / S::from_f64(targets.len() as f64);
                    let mut data = Vec::with_capacity(z.len());
                    let mut probs = Vec::with_capacity(k);
                    for (r, row) in z.data().chunks(k).enumerate() {
                        if nll_row(row, targets[r]) >= *cap {
                            data.extend(core::iter::repeat_n(S::ZERO, k));
                            continue;
                        }
                        probs.clear();
                        layers::softmax_row(row, &mut probs);
                        let w = weights[r] * scale;
                        for (c, &p) in probs.iter().enumerate() {
                            let onehot = if c == targets[r] { S::ONE } else { S::ZERO };
                            data.push(w * (p - onehot));
                        }
                    }
                    accumulate(&mut grads, *logits, Tensor::new(z.dims(), data)?);
                }
                Op::HalfSq { pred, target, mask } => {
                    let p = self.value(*pred);
                    let row = p.len() / mask.len();
                    let scale = g.data()[0] / S::from_f64(mask.len() as f64);
                    let mut data = vec![S::ZERO; p.len()];
                    for (r, &m) in mask.iter().enumerate() {
                        if m == S::ZERO {
                            continue;
                        }
                        for j in r * row..(r + 1) * row {
                            data[j] = m * scale * (p.data()[j] - target.data()[j]);
                        }
                    }
                    accumulate(&mut grads, *pred, Tensor::new(p.dims(), data)?);
                }
                Op::Weighted(terms) => {
                    for &(v, c) in terms {
                        accumulate(&mut grads, v, Tensor::scalar(c * g.data()[0]));
                    }
                }
            }
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Leaf(Some(id)) => Some((id, Var(i))),
                _ => None,
            })
            .collect();
        Ok(TapeGrads { grads, params })
    }
}

/// `-ln softmax(row)[target]`, computed through log-sum-exp.
fn nll_row<S: Scalar>(row: &[S], target: usize) -> S {
    let max = row.iter().copied().fold(row[0], S::max);
    let sum = row.iter().fold(S::ZERO, |a, &v| a + (v - max).exp());
    max + sum.ln() - row[target]
}

fn accumulate<S: Scalar>(grads: &mut [Option<Tensor<S>>], v: Var, d: Tensor<S>) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&d),
        slot => *slot = Some(d),
    }
}

/// Result of a reverse pass.
pub struct TapeGrads<S> {
    grads: Vec<Option<Tensor<S>>>,
    params: Vec<(ParamId, Var)>,
}

impl<S: Scalar> TapeGrads<S> {
    /// Gradient of the loss with respect to any leaf, if it was reached.
    pub fn of(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads[v.0].as_ref()
    }

    /// Gradients for every parameter of `params`, zero where a parameter was
    /// not touched or is not trainable. A parameter recorded twice on the tape
    /// receives the sum of both contributions.
    pub fn into_param_grads(mut self, params: &ParamSet<S>) -> Grads<S> {
        let mut out = Grads::zeros_like(params);
        for &(id, var) in &self.params {
            if !params.entry(id).trainable {
                continue;
            }
            if let Some(g) = self.grads[var.0].take() {
                out.get_mut(id).add_assign(&g);
            }
        }
        out
    }
}
