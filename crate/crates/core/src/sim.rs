//! Seeded, partition-independent Monte Carlo plumbing.
//!
//! Trials are grouped into fixed-size chunks. Chunk `i` draws from stream `i`
//! of a ChaCha8 generator keyed by the user seed, so the outcome of every
//! trial depends only on `(seed, trial index)` and never on how chunks are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Generator handed to each trial.
pub type TrialRng = ChaCha8Rng;

/// Name recorded alongside every stochastic result.
pub const GENERATOR_NAME: &str = "chacha8";

/// Trials per sub-stream.
pub const CHUNK_TRIALS: u64 = 4096;

/// Generator for sub-stream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `n_trials` trials and merges the per-chunk accumulators.
///
/// `merge` must be associative and exact (integer counts); with the
/// `parallel` feature the reduction tree depends on scheduling.
pub fn run_trials<T, I, F, M>(seed: u64, n_trials: u64, identity: I, trial: F, merge: M) -> Result<T>
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(&mut T, &mut TrialRng) -> Result<()> + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    let n_chunks = n_trials.div_ceil(CHUNK_TRIALS);
    let run_chunk = |chunk: u64| -> Result<T> {
        let mut rng = stream(seed, chunk);
        let mut acc = identity();
        let start = chunk * CHUNK_TRIALS;
        let end = (start + CHUNK_TRIALS).min(n_trials);
        for _ in start..end {
            trial(&mut acc, &mut rng)?;
        }
        Ok(acc)
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_chunks)
            .into_par_iter()
            .map(run_chunk)
            .try_reduce(&identity, |a, b| Ok(merge(a, b)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut acc = identity();
        for chunk in 0..n_chunks {
            acc = merge(acc, run_chunk(chunk)?);
        }
        Ok(acc)
    }
}

/// Counts the trials for which `event` returns true.
pub fn count_events<F>(seed: u64, n_trials: u64, event: F) -> Result<u64>
where
    F: Fn(&mut TrialRng) -> Result<bool> + Sync + Send,
{
    run_trials(
        seed,
        n_trials,
        || 0u64,
        |hits, rng| {
            if event(rng)? {
                *hits += 1;
            }
            Ok(())
        },
        |a, b| a + b,
    )
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn binomial_stderr(rate: f64, n_trials: u64) -> f64 {
    libm::sqrt(rate * (1.0 - rate) / n_trials as f64)
}
