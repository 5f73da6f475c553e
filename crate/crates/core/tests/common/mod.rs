#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wl1_core::model::{PartitionModel, Weights};

/// The k=2 experiment model with `s1` of the 10 support indices in the
/// 10-element first block.
pub fn k2_model(s1: usize) -> PartitionModel {
    PartitionModel::from_counts(100, vec![10, 90], vec![s1, 10 - s1]).unwrap()
}

/// The k=4 experiment model, α = (4/5, 3/10, 2/15, 1/70).
pub fn k4_model() -> PartitionModel {
    PartitionModel::from_counts(100, vec![5, 10, 15, 70], vec![4, 3, 2, 1]).unwrap()
}

/// Random valid model with `k ≤ max_k` blocks and `d ≤ max_d`.
pub fn random_model(rng: &mut ChaCha8Rng, max_k: usize, max_d: usize) -> PartitionModel {
    loop {
        let k = rng.random_range(1..=max_k);
        let d = rng.random_range((2 * k).max(4)..=max_d);
        // cut points split 0..d into k nonempty blocks
        let mut cuts: Vec<usize> = Vec::new();
        while cuts.len() < k - 1 {
            let c = rng.random_range(1..d);
            if !cuts.contains(&c) {
                cuts.push(c);
            }
        }
        cuts.sort_unstable();
        cuts.insert(0, 0);
        cuts.push(d);
        let blocks: Vec<usize> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
        let counts: Vec<usize> = blocks.iter().map(|&n| rng.random_range(1..=n)).collect();
        if let Ok(m) = PartitionModel::from_counts(d, blocks, counts) {
            return m;
        }
    }
}

/// Random weights in `[lo, 1]` per block.
pub fn random_weights(rng: &mut ChaCha8Rng, k: usize, lo: f64) -> Weights {
    Weights::new((0..k).map(|_| rng.random_range(lo..=1.0)).collect()).unwrap()
}
