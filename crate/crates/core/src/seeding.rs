//! Seed derivation for reproducible Monte Carlo batches.
//!
//! Every sample in a batch gets its own seed derived from `(master seed, sample index)`.
//! Batches are mapped in parallel but collected in index order, so the output is
//! identical for any number of worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator used for all trajectory sampling.
pub type SimRng = ChaCha8Rng;

/// Generator for a single run seeded with `seed`.
pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `index`-th run of a batch, taken from the `index`-th ChaCha stream
/// keyed by `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Runs `f(index, derived_seed)` for `0..runs` in parallel and returns the results in
/// index order.
pub fn map_runs<T, F>(master: u64, runs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    (0..runs)
        .into_par_iter()
        .map(|i| f(i, derive_seed(master, i as u64)))
        .collect()
}
