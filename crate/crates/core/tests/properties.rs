use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revfm_core::fm::{dynamic_beta, fm_score, fuse_predict};
use revfm_core::ingest::{build_collections, build_vocab, split_dataset, tokenize, ReviewIndex, ReviewRecord};
use revfm_core::model::{Model, ModelMode};
use revfm_core::nn::Matrix;
use revfm_core::train::{read_checkpoint, write_checkpoint, Corpus, TrainConfig};

const WORDS: [&str; 8] = ["fast", "slow", "cheap", "secure", "battery", "signal", "good", "bad"];

fn records(seed: u64, n: usize) -> Vec<ReviewRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(0..12);
            let text: Vec<&str> = (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
            ReviewRecord {
                device_id: format!("d{}", rng.random_range(0..6)),
                service_id: format!("s{}", rng.random_range(0..5)),
                rating: rng.random_range(1..=5) as f64,
                review_text: text.join(" "),
                timestamp: i as i64 % 4,
            }
        })
        .collect()
}

proptest! {
    #[test]
    fn collections_respect_length_and_vocabulary(seed in any::<u64>(), n in 1usize..40, t_max in 1usize..30, cap in 3usize..12) {
        let recs = records(seed, n);
        let vocab = build_vocab(&recs, cap).unwrap();
        let (devices, services) = build_collections(&recs, &vocab, t_max, &HashSet::new()).unwrap();
        for c in devices.values().chain(services.values()) {
            prop_assert!(c.token_ids.len() <= t_max);
            prop_assert!(c.token_ids.iter().all(|&id| (id as usize) < vocab.len()));
        }
        let index = ReviewIndex::build(&recs, &vocab, t_max).unwrap();
        for d in 0..=index.devices().len() {
            prop_assert!(index.device_collection(d, None).len() <= t_max);
        }
    }

    #[test]
    fn excluded_pairs_contribute_nothing(seed in any::<u64>(), n in 1usize..40) {
        let recs = records(seed, n);
        let vocab = build_vocab(&recs, 50).unwrap();
        let target = &recs[0];
        let pair = (target.device_id.clone(), target.service_id.clone());
        let exclude: HashSet<_> = [pair.clone()].into_iter().collect();
        let (devices, services) = build_collections(&recs, &vocab, 10_000, &exclude).unwrap();
        for c in devices.values().chain(services.values()) {
            prop_assert!(!c.source_pairs.contains(&pair));
        }
        let survivors: usize = recs
            .iter()
            .filter(|r| r.device_id == pair.0 && r.service_id != pair.1)
            .map(|r| tokenize(&r.review_text, &vocab).len())
            .sum();
        prop_assert_eq!(devices[&pair.0].token_ids.len(), survivors);
    }

    #[test]
    fn split_partitions_records(seed in any::<u64>(), n in 3usize..80) {
        let recs: Vec<ReviewRecord> = records(seed, n)
            .into_iter()
            .enumerate()
            .map(|(i, r)| ReviewRecord { timestamp: i as i64, ..r })
            .collect();
        let split = split_dataset(&recs, [0.8, 0.1, 0.1], seed).unwrap();
        let mut seen: HashMap<i64, usize> = HashMap::new();
        for r in split.train.iter().chain(&split.validation).chain(&split.test) {
            *seen.entry(r.timestamp).or_default() += 1;
        }
        prop_assert_eq!(seen.len(), n);
        prop_assert!(seen.values().all(|&c| c == 1));
        prop_assert_eq!(split_dataset(&recs, [0.8, 0.1, 0.1], seed).unwrap(), split);
    }

    #[test]
    fn beta_is_a_convex_weight(rc in -10.0f64..10.0, re in -10.0f64..10.0, bd in -1.0f64..1.0, bs in -1.0f64..1.0) {
        let beta = dynamic_beta(rc, re);
        prop_assert!((0.0..=1.0).contains(&beta));
        let fused = fuse_predict(rc, re, bd, bs).unwrap();
        prop_assert_eq!(fused.beta, beta);
        prop_assert_eq!(dynamic_beta(rc, rc), 0.5);
    }

    #[test]
    fn fm_matches_pairwise_double_loop(dim in 1usize..16, rank in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let x = draw(dim);
        let w = draw(dim);
        let v = Matrix::from_vec(dim, rank, draw(dim * rank));
        let b = draw(1)[0];
        let mut oracle = b;
        for j in 0..dim {
            oracle += w[j] * x[j];
            for k in j + 1..dim {
                let vjk: f64 = (0..rank).map(|l| v.row(j)[l] * v.row(k)[l]).sum();
                oracle += vjk * x[j] * x[k];
            }
        }
        prop_assert!((fm_score(&x, b, &w, &v) - oracle).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn checkpoints_round_trip_bitwise(seed in any::<u64>(), mode_ix in 0usize..5) {
        let mode = ModelMode::ALL[mode_ix];
        let recs = records(seed, 12);
        let corpus = Corpus::build(&recs, 50, 12).unwrap();
        let cfg = TrainConfig { mode, seed, embed_dim: 6, filters: 3, latent_dim: 3, fm_rank: 2, init_scale: 0.5, ..Default::default() };
        let model = Model::new(cfg.model_config(&corpus, 3.0), seed).unwrap();
        let batch = corpus.examples(&recs, true);
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &model, &cfg, &corpus).unwrap();
        let loaded = read_checkpoint(bytes.as_slice()).unwrap();
        let before: Vec<u64> = model.params().values_snapshot().iter().flat_map(|m| m.as_slice().to_vec()).map(f64::to_bits).collect();
        let after: Vec<u64> = loaded.model.params().values_snapshot().iter().flat_map(|m| m.as_slice().to_vec()).map(f64::to_bits).collect();
        prop_assert_eq!(before, after);
        for (pair, _) in &batch {
            prop_assert_eq!(model.predict(pair), loaded.model.predict(pair));
        }
        let mut again = Vec::new();
        write_checkpoint(&mut again, &loaded.model, &loaded.train_config, &loaded.corpus).unwrap();
        prop_assert_eq!(bytes, again);
    }
}
