use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ranking::Scorer;
use crate::ingest::{EntityIndex, ReviewRecord};
use crate::nn::{uniform_matrix, Matrix};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfConfig {
    pub rank: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for MfConfig {
    fn default() -> Self {
        MfConfig {
            rank: 10,
            epochs: 60,
            learning_rate: 0.01,
            lambda: 0.02,
            seed: 42,
            init_scale: 0.1,
        }
    }
}

/// Biased matrix factorization `μ + b_u + b_i + p_u · q_i`. Row 0 of every
/// table is an untrained zero row used for unknown ids.
#[derive(Clone, Debug, PartialEq)]
pub struct MfModel {
    pub mean: f64,
    pub devices: EntityIndex,
    pub services: EntityIndex,
    pub device_bias: Vec<f64>,
    pub service_bias: Vec<f64>,
    pub device_factors: Matrix,
    pub service_factors: Matrix,
}

/// SGD on squared error with L2 on biases and factors, visiting the
/// ratings in a seeded shuffled order each epoch.
pub fn mf_train(train: &[ReviewRecord], cfg: &MfConfig) -> Result<MfModel> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    if cfg.rank == 0 || !(cfg.learning_rate >= 0.0) || !(cfg.lambda >= 0.0) {
        return Err(Error::InvalidArgument("invalid MF configuration".into()));
    }
    let devices = EntityIndex::from_ids(train.iter().map(|r| r.device_id.as_str()));
    let services = EntityIndex::from_ids(train.iter().map(|r| r.service_id.as_str()));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p = uniform_matrix(&mut rng, devices.len() + 1, cfg.rank, cfg.init_scale);
    let mut q = uniform_matrix(&mut rng, services.len() + 1, cfg.rank, cfg.init_scale);
    p.row_mut(0).fill(0.0);
    q.row_mut(0).fill(0.0);
    let mut bu = vec![0.0; devices.len() + 1];
    let mut bi = vec![0.0; services.len() + 1];
    let mean = train.iter().map(|r| r.rating).sum::<f64>() / train.len() as f64;
    let obs: Vec<(usize, usize, f64)> = train
        .iter()
        .map(|r| (devices.index_of(&r.device_id), services.index_of(&r.service_id), r.rating))
        .collect();
    let mut order: Vec<usize> = (0..obs.len()).collect();
    let (lr, lambda) = (cfg.learning_rate, cfg.lambda);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (u, s, r) = obs[i];
            let pred = mean + bu[u] + bi[s] + crate::nn::dot(p.row(u), q.row(s));
            let err = pred - r;
            bu[u] -= lr * (err + lambda * bu[u]);
            bi[s] -= lr * (err + lambda * bi[s]);
            for l in 0..cfg.rank {
                let (pu, qs) = (p[(u, l)], q[(s, l)]);
                p[(u, l)] -= lr * (err * qs + lambda * pu);
                q[(s, l)] -= lr * (err * pu + lambda * qs);
            }
        }
    }
    Ok(MfModel {
        mean,
        devices,
        services,
        device_bias: bu,
        service_bias: bi,
        device_factors: p,
        service_factors: q,
    })
}

pub fn mf_predict(model: &MfModel, device: &str, service: &str) -> f64 {
    let u = model.devices.index_of(device);
    let s = model.services.index_of(service);
    model.mean
        + model.device_bias[u]
        + model.service_bias[s]
        + crate::nn::dot(model.device_factors.row(u), model.service_factors.row(s))
}

impl Scorer for MfModel {
    fn score(&self, device: &str, service: &str) -> f64 {
        mf_predict(self, device, service)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(d: usize, s: usize, rating: f64) -> ReviewRecord {
        ReviewRecord {
            device_id: format!("d{d}"),
            service_id: format!("s{s}"),
            rating,
            review_text: String::new(),
            timestamp: 0,
        }
    }

    #[test]
    fn constant_ratings_are_recovered() {
        let data: Vec<_> = (0..20).flat_map(|d| (0..10).map(move |s| rec(d, s, 4.0))).collect();
        let m = mf_train(&data, &MfConfig::default()).unwrap();
        for d in 0..20 {
            for s in 0..10 {
                assert!((mf_predict(&m, &format!("d{d}"), &format!("s{s}")) - 4.0).abs() < 0.05);
            }
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let data = vec![rec(0, 0, 5.0), rec(1, 0, 1.0)];
        let cfg = MfConfig { learning_rate: 0.0, ..Default::default() };
        let m = mf_train(&data, &cfg).unwrap();
        let init = mf_train(&data, &MfConfig { epochs: 0, ..cfg }).unwrap();
        assert_eq!(m, init);
        assert_eq!(mf_predict(&m, "d0", "s0"), 3.0 + crate::nn::dot(init.device_factors.row(1), init.service_factors.row(1)));
    }

    #[test]
    fn unknown_ids_use_mean_and_biases() {
        let data = vec![rec(0, 0, 5.0), rec(0, 1, 4.0), rec(1, 0, 3.0)];
        let m = mf_train(&data, &MfConfig::default()).unwrap();
        assert_eq!(mf_predict(&m, "nobody", "nothing"), m.mean);
        assert_eq!(mf_predict(&m, "d0", "nothing"), m.mean + m.device_bias[1]);
    }
}
