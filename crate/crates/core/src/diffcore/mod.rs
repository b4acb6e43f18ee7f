//! Dense linear algebra and a small differentiable MLP engine.

mod loss;
mod matrix;
mod mlp;
mod optim;

use std::hash::{Hash, Hasher};

pub use loss::{argmax_rows, cross_entropy, softmax_rows, weighted_ce_logit_grad, PROB_FLOOR};
pub use matrix::RealMatrix;
pub use mlp::{Activation, GradientTape, Gradients, MlpNetwork, Mode};
pub use optim::{OptimizerKind, OptimizerState};

use crate::Real;

/// A collection of parameter (or gradient) buffers in a fixed order.
pub trait ParamSet<T> {
    fn param_slices(&self) -> Vec<&[T]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [T]>;

    /// All values concatenated in slice order.
    fn flatten(&self) -> Vec<T>
    where
        T: Copy,
    {
        self.param_slices().concat()
    }
}

/// Hash of every parameter's bit pattern; equal fingerprints mean bit-identical buffers
/// (up to hash collisions).
pub fn fingerprint<T: Real, P: ParamSet<T> + ?Sized>(params: &P) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for s in params.param_slices() {
        s.len().hash(&mut h);
        for v in s {
            v.bits().hash(&mut h);
        }
    }
    h.finish()
}
