use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DiffError, Tensor};

/// Xavier (Glorot) uniform initialization: values drawn from
/// `±sqrt(6 / (rows + cols))`, deterministically from the seed.
pub fn xavier_init(rows: usize, cols: usize, seed: u64) -> Result<Tensor, DiffError> {
    if rows == 0 || cols == 0 {
        return Err(DiffError::invalid(
            "xavier_init",
            format!("degenerate shape {rows}x{cols}"),
        ));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| dist.sample(&mut rng)).collect();
    Tensor::new(rows, cols, data)
}
