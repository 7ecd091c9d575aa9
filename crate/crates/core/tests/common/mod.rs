#![allow(dead_code)]

use revfm_core::eval::{generate, SyntheticConfig, SyntheticData};
use revfm_core::ingest::{split_dataset, DatasetSplit, DEFAULT_RATIOS};
use revfm_core::train::{Prepared, TrainConfig};

pub fn synthetic(n_devices: usize, n_services: usize, seed: u64) -> (SyntheticData, DatasetSplit) {
    let data = generate(&SyntheticConfig { n_devices, n_services, seed, ..Default::default() }).unwrap();
    let split = split_dataset(&data.records, DEFAULT_RATIOS, seed).unwrap();
    (data, split)
}

pub fn prepared(split: &DatasetSplit, cfg: &TrainConfig) -> Prepared {
    Prepared::new(split, cfg.vocab_cap, cfg.max_tokens).unwrap()
}

/// Small network that trains in well under a second per epoch.
pub fn small_config() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        batch_size: 32,
        learning_rate: 0.01,
        embed_dim: 8,
        filters: 4,
        latent_dim: 4,
        fm_rank: 2,
        max_tokens: 16,
        patience: 2,
        ..Default::default()
    }
}
