use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::parse::ReviewRecord;
use crate::{Error, Result};

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ReviewRecord>,
    pub validation: Vec<ReviewRecord>,
    pub test: Vec<ReviewRecord>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl DatasetSplit {
    /// Wraps pre-partitioned records (e.g. reloaded from disk).
    pub fn from_parts(
        train: Vec<ReviewRecord>,
        validation: Vec<ReviewRecord>,
        test: Vec<ReviewRecord>,
        seed: u64,
    ) -> Self {
        let n = (train.len() + validation.len() + test.len()).max(1) as f64;
        let ratios = [
            train.len() as f64 / n,
            validation.len() as f64 / n,
            test.len() as f64 / n,
        ];
        DatasetSplit {
            train,
            validation,
            test,
            seed,
            ratios,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Seeded uniform shuffle followed by a contiguous train/validation/test cut.
pub fn split_dataset(records: &[ReviewRecord], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if ratios.iter().any(|&r| !(r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    if records.len() < 3 {
        log::warn!("only {} records: everything goes to train", records.len());
        return Ok(DatasetSplit {
            train: records.to_vec(),
            validation: Vec::new(),
            test: Vec::new(),
            seed,
            ratios,
        });
    }
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_train = ((n as f64 * ratios[0]).round() as usize).min(n);
    let n_valid = ((n as f64 * ratios[1]).round() as usize).min(n - n_train);
    let pick = |range: &[usize]| range.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_valid]),
        test: pick(&order[n_train + n_valid..]),
        seed,
        ratios,
    })
}
