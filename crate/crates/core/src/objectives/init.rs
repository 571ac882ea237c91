use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::objectives::mlp::{param_count, validate_widths};
use crate::params::Params;
use crate::scalar::Scalar;

/// Glorot (Xavier) normal initialization in the packed layout used by
/// [`Mlp`](crate::objectives::Mlp): weights `~ N(0, 2 / (fan_in + fan_out))`,
/// biases exactly zero. Deterministic for a fixed seed.
pub fn glorot_init<T: Scalar>(widths: &[usize], seed: u64) -> Result<Params<T>> {
    validate_widths(widths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(param_count(widths));
    for pair in widths.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive standard deviation");
        flat.extend((0..fan_in * fan_out).map(|_| T::of(normal.sample(&mut rng))));
        flat.extend(std::iter::repeat(T::zero()).take(fan_out));
    }
    Ok(Params::from_vec(flat))
}
