//! Seeded mini-batch schedules shared by all trainers.

use rand::seq::SliceRandom;
use rand::Rng;

/// Steps in one epoch over `frames` rows: the number of full batches, and at
/// least one.
pub fn steps_per_epoch(frames: usize, batch: usize) -> usize {
    (frames / batch.max(1)).max(1)
}

/// Row indices for `steps` batches drawn from a fresh shuffle of `0..frames`.
///
/// Consecutive batches walk the permutation, so no row repeats within an
/// epoch unless `steps · batch > frames`, in which case the walk wraps.
/// Batches never exceed `frames` rows.
pub fn epoch_batches<R: Rng + ?Sized>(frames: usize, batch: usize, steps: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..frames).collect();
    perm.shuffle(rng);
    let width = batch.min(frames);
    (0..steps)
        .map(|k| (0..width).map(|i| perm[(k * width + i) % frames]).collect())
        .collect()
}
