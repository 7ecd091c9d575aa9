use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::ReviewRecord;
use crate::nn::Matrix;
use crate::{Error, Result};

const ASPECTS: [&str; 10] = [
    "battery", "latency", "signal", "price", "storage", "security", "design", "support", "accuracy", "range",
];
const SENTIMENT: [&str; 5] = ["terrible", "bad", "okay", "good", "excellent"];
const FILLER: [&str; 12] = [
    "the", "device", "service", "works", "with", "my", "setup", "and", "it", "was", "used", "daily",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_devices: usize,
    pub n_services: usize,
    pub rank: usize,
    /// Standard deviation of the Gaussian rating noise.
    pub noise: f64,
    pub seed: u64,
    /// Probability that a given pair is rated.
    pub density: f64,
    /// Standard deviation of the planted score `u_d · w_s`.
    pub signal_std: f64,
    pub mean: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_devices: 200,
            n_services: 100,
            rank: 4,
            noise: 0.3,
            seed: 7,
            density: 0.5,
            signal_std: 1.5,
            mean: 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub records: Vec<ReviewRecord>,
    /// Planted device factors, row `i` for device `i`.
    pub device_factors: Matrix,
    pub service_factors: Matrix,
    pub mean: f64,
}

impl SyntheticData {
    /// Planted score `μ + u_d · w_s` before noise, rounding and clipping.
    pub fn planted(&self, device: usize, service: usize) -> f64 {
        self.mean + crate::nn::dot(self.device_factors.row(device), self.service_factors.row(service))
    }
}

pub fn device_id(i: usize) -> String {
    format!("dev{i:04}")
}

pub fn service_id(i: usize) -> String {
    format!("srv{i:04}")
}

fn aspect(l: usize) -> String {
    ASPECTS.get(l).map_or_else(|| format!("aspect{l}"), |s| s.to_string())
}

/// Planted low-rank ratings with default density and signal scale; see
/// [`generate`].
pub fn make_synthetic(n_devices: usize, n_services: usize, rank: usize, noise: f64, seed: u64) -> Result<Vec<ReviewRecord>> {
    let cfg = SyntheticConfig {
        n_devices,
        n_services,
        rank,
        noise,
        seed,
        ..Default::default()
    };
    Ok(generate(&cfg)?.records)
}

/// Ratings `clip(round(μ + u_d · w_s + ε), 1, 5)` with Gaussian factors
/// scaled so `u_d · w_s` has standard deviation `signal_std`, over a random
/// subset of pairs in which every device and service appears. Each review
/// names every latent aspect twice: once with the sign of the service's
/// factor and once with the sign of the device's factor, each marked as
/// intense beyond one standard deviation. A sentiment word for the rating
/// and filler words follow.
pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.rank == 0 || cfg.rank > cfg.n_devices.min(cfg.n_services) {
        return Err(Error::InvalidArgument("rank must be in 1..=min(n_devices, n_services)".into()));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) || !(cfg.noise >= 0.0) || !(cfg.signal_std >= 0.0) {
        return Err(Error::InvalidArgument("density, noise or signal_std out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Var(u · w) = rank · σ⁴ for i.i.d. N(0, σ²) entries.
    let sigma = (cfg.signal_std * cfg.signal_std / cfg.rank as f64).powf(0.25);
    let factor = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let draw = |rng: &mut ChaCha8Rng, n: usize| {
        let data = (0..n * cfg.rank).map(|_| factor.sample(rng)).collect();
        Matrix::from_vec(n, cfg.rank, data)
    };
    let u = draw(&mut rng, cfg.n_devices);
    let w = draw(&mut rng, cfg.n_services);

    let mut pairs = Vec::new();
    let mut device_seen = vec![false; cfg.n_devices];
    let mut service_seen = vec![false; cfg.n_services];
    for d in 0..cfg.n_devices {
        for s in 0..cfg.n_services {
            if rng.random::<f64>() < cfg.density {
                pairs.push((d, s));
                device_seen[d] = true;
                service_seen[s] = true;
            }
        }
    }
    for d in 0..cfg.n_devices {
        if !device_seen[d] {
            let s = rng.random_range(0..cfg.n_services);
            pairs.push((d, s));
            service_seen[s] = true;
        }
    }
    for s in 0..cfg.n_services {
        if !service_seen[s] {
            pairs.push((rng.random_range(0..cfg.n_devices), s));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let mut records = Vec::with_capacity(pairs.len());
    for (t, &(d, s)) in pairs.iter().enumerate() {
        let planted = cfg.mean + crate::nn::dot(u.row(d), w.row(s));
        let rating = (planted + noise.sample(&mut rng)).round().clamp(1.0, 5.0);
        let mut words: Vec<String> = Vec::new();
        for l in 0..cfg.rank {
            let x = w[(s, l)];
            if x.abs() > sigma {
                words.push("very".into());
            }
            words.extend([if x >= 0.0 { "strong" } else { "weak" }.to_string(), aspect(l)]);
        }
        for l in 0..cfg.rank {
            let x = u[(d, l)];
            if x.abs() > sigma {
                words.push("really".into());
            }
            words.extend([if x >= 0.0 { "wants" } else { "avoids" }.to_string(), aspect(l)]);
        }
        words.push(SENTIMENT[rating as usize - 1].to_string());
        for _ in 0..3 {
            words.push(FILLER.choose(&mut rng).expect("non-empty filler").to_string());
        }
        records.push(ReviewRecord {
            device_id: device_id(d),
            service_id: service_id(s),
            rating,
            review_text: words.join(" "),
            timestamp: t as i64,
        });
    }
    Ok(SyntheticData {
        records,
        device_factors: u,
        service_factors: w,
        mean: cfg.mean,
    })
}
