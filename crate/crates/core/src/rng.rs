//! Seeded, reproducible random sources for weights and test data.
//!
//! Everything random in this crate flows through a ChaCha8 stream keyed by
//! an explicit `u64` seed, so runs are bit-identical for a fixed seed.

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Axis, Scalar, Tensor};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tensor of independent uniform samples in `[lo, hi)`.
pub fn uniform_tensor<T: Scalar>(
    rng: &mut ChaCha8Rng,
    axes: Vec<Axis>,
    lo: f64,
    hi: f64,
) -> Tensor<T> {
    Tensor::from_fn(axes, |_| {
        T::from_f64(lo + (hi - lo) * rng.random::<f64>())
    })
}

/// Convolution weights drawn uniformly from `[-b, b]` with
/// `b = 1/sqrt(fan_in)`; `fan_in` is the product of every axis but the
/// first (output) one.
pub fn fanin_kernel<T: Scalar>(rng: &mut ChaCha8Rng, axes: Vec<Axis>) -> Tensor<T> {
    let fan_in: usize = axes.iter().skip(1).map(|a| a.len).product();
    let bound = 1.0 / Float::sqrt(fan_in as f64);
    uniform_tensor(rng, axes, -bound, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::axes_hw;

    #[test]
    fn same_seed_same_stream() {
        let mut a = seeded_rng(42);
        let mut b = seeded_rng(42);
        let ta = uniform_tensor::<f64>(&mut a, axes_hw(3, 3), -1.0, 1.0);
        let tb = uniform_tensor::<f64>(&mut b, axes_hw(3, 3), -1.0, 1.0);
        assert_eq!(ta, tb);
        assert!(ta.data().iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn fanin_kernel_is_bounded() {
        let mut rng = seeded_rng(1);
        let k = fanin_kernel::<f64>(&mut rng, crate::tensor::axes_kernel2d(4, 9, 3, 3));
        let bound = 1.0 / (81.0f64).sqrt();
        assert!(k.data().iter().all(|v| v.abs() <= bound));
    }
}
