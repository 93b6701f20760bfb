use rand::Rng;

use super::Tensor;
use crate::scalar::Scalar;

/// `sqrt(1 / (C_in * k^2))`, the fan-in bound used for every kernel.
pub fn fan_in_bound(c_in: usize, k: usize) -> f64 {
    (1.0 / (c_in * k * k) as f64).sqrt()
}

/// Uniform samples in `[-bound, bound]`.
pub fn uniform_init<S: Scalar, R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor<S> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| S::lit(rng.gen_range(-bound..=bound))).collect();
    Tensor::from_vec(shape, data).expect("init shape")
}
