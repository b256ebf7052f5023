use alloc::vec::Vec;

use super::Tensor;
use crate::{Rng, Scalar};

/// Half-width of the Glorot-uniform interval for a weight tensor:
/// `√(6 / (fan_in + fan_out))`. Conv and deconv kernels count
/// channels × kernel area on both sides. Rank-1 tensors (biases) get 0.
pub fn glorot_bound(dims: &[usize]) -> f64 {
    let fans = match *dims {
        [m, n] => m + n,
        [a, b, kh, kw] => (a + b) * kh * kw,
        _ => return 0.0,
    };
    libm::sqrt(6.0 / fans as f64)
}

/// Glorot-uniform weights; biases (rank 1) are zero.
pub fn glorot_init<S: Scalar>(dims: &[usize], rng: &mut Rng) -> Tensor<S> {
    let bound = glorot_bound(dims);
    if bound == 0.0 {
        return Tensor::zeros(dims);
    }
    let n: usize = dims.iter().product();
    let data: Vec<S> = (0..n)
        .map(|_| S::from_f64(rng.uniform(-bound, bound)))
        .collect();
    Tensor::new(dims, data).expect("dims are positive")
}
