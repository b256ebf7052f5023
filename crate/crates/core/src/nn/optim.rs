//! Adam and global-norm gradient clipping.

use alloc::format;
use alloc::vec::Vec;

use super::{Grads, ParamSet, Tensor};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 6.25e-5,
            beta1: 0.95,
            beta2: 0.999,
            eps: 1.5e-4,
        }
    }
}

/// Moment estimates and step counter, one `m`/`v` pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor<S>>,
    pub v: Vec<Tensor<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(config: AdamConfig, params: &ParamSet<S>) -> Self {
        let zeros = || -> Vec<Tensor<S>> {
            params.iter().map(|(_, p)| Tensor::zeros(p.tensor.dims())).collect()
        };
        AdamState {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One bias-corrected Adam update of every trainable parameter.
    pub fn step(&mut self, params: &mut ParamSet<S>, grads: &Grads<S>) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::contract(format!(
                "adam: {} params, {} gradients, {} moment slots",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (id, p) in params.iter() {
            if p.trainable && grads.get(id).dims() != p.tensor.dims() {
                return Err(Error::contract(format!("adam: missing gradient for `{}`", p.name)));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as f64;
        let bc1 = S::from_f64(1.0 - libm::pow(c.beta1, t));
        let bc2 = S::from_f64(1.0 - libm::pow(c.beta2, t));
        let (b1, b2) = (S::from_f64(c.beta1), S::from_f64(c.beta2));
        let (lr, eps) = (S::from_f64(c.lr), S::from_f64(c.eps));
        let ids: Vec<_> = params.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
        for id in ids {
            let g = grads.get(id).data();
            let m = self.m[id.0].data_mut();
            let v = self.v[id.0].data_mut();
            let theta = params.values_mut(id);
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (S::ONE - b1) * g[i];
                v[i] = b2 * v[i] + (S::ONE - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Global L2 norm over all gradient tensors.
pub fn global_norm<S: Scalar>(grads: &Grads<S>) -> S {
    grads
        .iter()
        .fold(S::ZERO, |acc, t| acc + t.dot(t))
        .sqrt()
}

/// Rescales all gradients by `max_norm / norm` when their global norm exceeds
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<S: Scalar>(grads: &mut Grads<S>, max_norm: S) -> S {
    let norm = global_norm(grads);
    if norm > max_norm {
        let k = max_norm / norm;
        for t in grads.iter_mut() {
            t.scale(k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(v: f64) -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::full(&[3], v), true).unwrap();
        p
    }

    #[test]
    fn first_step_with_unit_gradient() {
        let mut p = one_param(0.0);
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        let g = Grads::from_tensors(alloc::vec![Tensor::full(&[3], 1.0)]);
        adam.step(&mut p, &g).unwrap();
        let want = -6.25e-5 / (1.0 + 1.5e-4);
        for &w in p.by_name("w").unwrap().data() {
            assert!((w - want).abs() < 1e-15);
        }
        assert!((want + 6.249e-5).abs() < 1e-8);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = one_param(0.3);
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        let g = Grads::zeros_like(&p);
        for _ in 0..50 {
            adam.step(&mut p, &g).unwrap();
        }
        assert!(p.by_name("w").unwrap().data().iter().all(|&v| v == 0.3));
        assert_eq!(adam.step, 50);
    }

    #[test]
    fn missing_gradient_is_contract_error() {
        let mut p = one_param(0.0);
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        let g = Grads::from_tensors(alloc::vec![]);
        assert!(matches!(adam.step(&mut p, &g), Err(Error::Contract(_))));
    }

    #[test]
    fn clipping() {
        let mut g = Grads::from_tensors(alloc::vec![Tensor::<f64>::from_vec(alloc::vec![3.0, 4.0])]);
        let n = clip_global_norm(&mut g, 1.0);
        assert_eq!(n, 5.0);
        let d = g.iter().next().unwrap().data();
        assert!((d[0] - 0.6).abs() < 1e-15 && (d[1] - 0.8).abs() < 1e-15);

        let mut g = Grads::from_tensors(alloc::vec![
            Tensor::<f64>::from_vec(alloc::vec![0.3, 0.4]),
        ]);
        clip_global_norm(&mut g, 1.0);
        assert_eq!(g.iter().next().unwrap().data(), &[0.3, 0.4]);

        let mut g = Grads::from_tensors(alloc::vec![
            Tensor::<f64>::from_vec(alloc::vec![2.0, 2.0]),
            Tensor::<f64>::from_vec(alloc::vec![2.0, 2.0]),
        ]);
        clip_global_norm(&mut g, 1.0);
        assert!((global_norm(&g) - 1.0).abs() < 1e-15);
        assert!(g.iter().all(|t| t.data().iter().all(|&v| v == 0.5)));
    }
}
