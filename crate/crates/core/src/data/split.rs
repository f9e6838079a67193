use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PatchSample;
use crate::error::{Error, Result};

/// Partitions `items` by source so that no source contributes to both
/// sides. The test side receives `round(test_fraction * sources)` sources,
/// at least one and leaving at least one for training. Item order within
/// each side follows the input.
pub fn split_by_source<T>(
    items: Vec<T>,
    source: impl Fn(&T) -> &str,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} must be in (0, 1)"
        )));
    }
    let sources: BTreeSet<String> = items.iter().map(|i| source(i).to_owned()).collect();
    if sources.len() < 2 {
        return Err(Error::TooFewSources(sources.len()));
    }
    let mut order: Vec<String> = sources.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = order.len();
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let test_sources: BTreeSet<String> = order.into_iter().take(n_test).collect();
    let (test, train): (Vec<T>, Vec<T>) = items.into_iter().partition(|i| test_sources.contains(source(i)));
    Ok((train, test))
}

/// `(train, test)` split of a patch dataset by source image.
pub fn split(dataset: Vec<PatchSample>, test_fraction: f64, seed: u64) -> Result<(Vec<PatchSample>, Vec<PatchSample>)> {
    split_by_source(dataset, |s| s.source_id.as_str(), test_fraction, seed)
}
