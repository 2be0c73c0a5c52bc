//! Deterministic numeric primitives: tensors, activations, seeded random
//! streams and parameter initialization.

pub mod rng;
pub mod tensor;

pub use rng::Rng;
pub use tensor::{
    affine, matvec, sigmoid, sigmoid_scalar, softplus, softplus_scalar, tanh_ew, Tensor1, Tensor2,
};

/// Glorot-uniform matrix: entries in `±sqrt(6 / (rows + cols))`.
pub fn glorot_init(rng: &mut Rng, rows: usize, cols: usize) -> Tensor2 {
    assert!(rows >= 1 && cols >= 1, "glorot_init needs a non-empty shape");
    let bound = glorot_bound(rows, cols);
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-bound, bound))
        .collect();
    Tensor2 { rows, cols, data }
}

pub fn glorot_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}
