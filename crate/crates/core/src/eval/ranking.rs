use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mae, ndcg_at_k, precision_at_k, recall_at_k, rmse};
use crate::fm::clamp_output;
use crate::ingest::DatasetSplit;
use crate::model::{Model, Prediction};
use crate::review_net::{Side, SideEncoding};
use crate::train::Corpus;

/// Test ratings at or above this count as relevant.
pub const RELEVANCE_THRESHOLD: f64 = 4.0;
pub const DEFAULT_K: usize = 15;

/// Anything that scores device-service pairs by id.
pub trait Scorer: Sync {
    /// Raw predicted rating; unknown ids take the cold-start path.
    fn score(&self, device: &str, service: &str) -> f64;

    /// Scores of `device` against each candidate, in order.
    fn score_candidates(&self, device: &str, candidates: &[String]) -> Vec<f64> {
        candidates.iter().map(|s| self.score(device, s)).collect()
    }
}

/// The neural model with per-service encodings cached for ranking.
pub struct NeuralScorer<'a> {
    model: &'a Model,
    corpus: &'a Corpus,
    services: Vec<Option<SideEncoding>>,
}

impl<'a> NeuralScorer<'a> {
    pub fn new(model: &'a Model, corpus: &'a Corpus) -> Self {
        let services = (0..=corpus.index.services().len())
            .into_par_iter()
            .map(|s| model.encode(&corpus.index.service_collection(s, None), Side::Service))
            .collect();
        NeuralScorer {
            model,
            corpus,
            services,
        }
    }

    pub fn predict(&self, device: &str, service: &str) -> Prediction {
        let d = self.corpus.index.devices().index_of(device);
        let dev = self
            .model
            .encode(&self.corpus.index.device_collection(d, None), Side::Device);
        self.predict_with(d, dev.as_ref(), service)
    }

    fn predict_with(&self, d: usize, dev: Option<&SideEncoding>, service: &str) -> Prediction {
        let s = self.corpus.index.services().index_of(service);
        self.model.predict_encoded(d, s, dev, self.services[s].as_ref())
    }
}

impl Scorer for NeuralScorer<'_> {
    fn score(&self, device: &str, service: &str) -> f64 {
        self.predict(device, service).rating
    }

    fn score_candidates(&self, device: &str, candidates: &[String]) -> Vec<f64> {
        let d = self.corpus.index.devices().index_of(device);
        let dev = self
            .model
            .encode(&self.corpus.index.device_collection(d, None), Side::Device);
        candidates
            .iter()
            .map(|s| self.predict_with(d, dev.as_ref(), s).rating)
            .collect()
    }
}

/// Predicts the training mean for every pair.
pub struct MeanScorer(pub f64);

impl Scorer for MeanScorer {
    fn score(&self, _: &str, _: &str) -> f64 {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub device_id: String,
    /// `(service id, clamped score)`, best first.
    pub items: Vec<(String, f64)>,
    pub k: usize,
}

/// Top-`k` candidates by raw score, ties broken by service id. Reported
/// scores are clamped to the rating range.
pub fn rank_candidates<S: Scorer + ?Sized>(scorer: &S, device: &str, candidates: &[String], k: usize) -> RankedList {
    let unique: Vec<String> = candidates.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let scores = scorer.score_candidates(device, &unique);
    let mut order: Vec<(String, f64)> = unique.into_iter().zip(scores).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    order.truncate(k);
    RankedList {
        device_id: device.to_string(),
        items: order.into_iter().map(|(s, v)| (s, clamp_output(v))).collect(),
        k,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    pub recall_at_k: f64,
    pub precision_at_k: f64,
    pub ndcg_at_k: f64,
    pub k: usize,
    /// Devices contributing to the ranking metrics.
    pub n_evaluated: usize,
    /// Test devices without relevant items, left out of the ranking means.
    pub n_skipped: usize,
    pub n_ratings: usize,
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        format!(
            "mae={:.6}\nrmse={:.6}\nrecall@{k}={:.6}\nprecision@{k}={:.6}\nndcg@{k}={:.6}\nn_evaluated={}\nn_skipped={}\nn_ratings={}\n",
            self.mae,
            self.rmse,
            self.recall_at_k,
            self.precision_at_k,
            self.ndcg_at_k,
            self.n_evaluated,
            self.n_skipped,
            self.n_ratings,
            k = self.k
        )
    }

    pub fn csv_header() -> &'static str {
        "label,mae,rmse,recall_at_k,precision_at_k,ndcg_at_k,k,n_evaluated,n_skipped,n_ratings"
    }

    pub fn csv_row(&self, label: &str) -> String {
        format!(
            "{label},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            self.mae,
            self.rmse,
            self.recall_at_k,
            self.precision_at_k,
            self.ndcg_at_k,
            self.k,
            self.n_evaluated,
            self.n_skipped,
            self.n_ratings
        )
    }
}

/// Rating errors on `split.test` (clamped predictions) and top-`k` ranking
/// metrics. Candidates for a device are all services in the split minus
/// the ones it rated in training.
///
/// # Panics
/// If the test split is empty or `k == 0`.
pub fn evaluate<S: Scorer + ?Sized>(scorer: &S, split: &DatasetSplit, k: usize) -> MetricsReport {
    assert!(!split.test.is_empty(), "evaluation needs a non-empty test split");
    assert!(k >= 1, "k must be at least 1");
    let preds: Vec<f64> = split
        .test
        .par_iter()
        .map(|r| clamp_output(scorer.score(&r.device_id, &r.service_id)))
        .collect();
    let truths: Vec<f64> = split.test.iter().map(|r| r.rating).collect();

    let catalog: BTreeSet<&str> = split
        .train
        .iter()
        .chain(&split.validation)
        .chain(&split.test)
        .map(|r| r.service_id.as_str())
        .collect();
    let mut seen: BTreeMap<&str, HashSet<&str>> = BTreeMap::new();
    for r in &split.train {
        seen.entry(&r.device_id).or_default().insert(&r.service_id);
    }
    let mut held: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in &split.test {
        held.entry(&r.device_id).or_default().insert(&r.service_id, r.rating);
    }

    let per_device: Vec<Option<(f64, f64, f64)>> = held
        .par_iter()
        .map(|(device, ratings)| {
            let relevant: HashSet<String> = ratings
                .iter()
                .filter(|(_, &r)| r >= RELEVANCE_THRESHOLD)
                .map(|(s, _)| s.to_string())
                .collect();
            if relevant.is_empty() {
                return None;
            }
            let empty = HashSet::new();
            let train_seen = seen.get(device).unwrap_or(&empty);
            let candidates: Vec<String> = catalog
                .iter()
                .filter(|s| !train_seen.contains(*s))
                .map(|s| s.to_string())
                .collect();
            let ranked = rank_candidates(scorer, device, &candidates, k);
            let ids: Vec<String> = ranked.items.iter().map(|(s, _)| s.clone()).collect();
            let gains: Vec<f64> = ids
                .iter()
                .map(|s| ratings.get(s.as_str()).copied().unwrap_or(0.0))
                .collect();
            let pool: Vec<f64> = ratings.values().copied().collect();
            Some((
                precision_at_k(&ids, &relevant, k),
                recall_at_k(&ids, &relevant, k).expect("relevant set is non-empty"),
                ndcg_at_k(&gains, &pool, k),
            ))
        })
        .collect();

    let evaluated: Vec<(f64, f64, f64)> = per_device.iter().flatten().copied().collect();
    let n = evaluated.len();
    let mean = |f: fn(&(f64, f64, f64)) -> f64| {
        if n == 0 {
            0.0
        } else {
            evaluated.iter().map(f).sum::<f64>() / n as f64
        }
    };
    MetricsReport {
        mae: mae(&preds, &truths),
        rmse: rmse(&preds, &truths),
        precision_at_k: mean(|t| t.0),
        recall_at_k: mean(|t| t.1),
        ndcg_at_k: mean(|t| t.2),
        k,
        n_evaluated: n,
        n_skipped: per_device.len() - n,
        n_ratings: split.test.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    struct Table(HashMap<(String, String), f64>);

    impl Scorer for Table {
        fn score(&self, d: &str, s: &str) -> f64 {
            *self.0.get(&(d.to_string(), s.to_string())).unwrap_or(&0.0)
        }
    }

    fn ids(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ranking_rules() {
        let mut t = HashMap::new();
        t.insert(("d".to_string(), "b".to_string()), 4.0);
        t.insert(("d".to_string(), "a".to_string()), 4.0);
        t.insert(("d".to_string(), "c".to_string()), 9.0);
        let table = Table(t);
        let r = rank_candidates(&table, "d", &ids(&["b", "c", "a", "z"]), 10);
        let order: Vec<&str> = r.items.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(order, ["c", "a", "b", "z"]);
        assert_eq!(r.items[0].1, 5.0);
        assert_eq!(r.items[3].1, 1.0);
        let r = rank_candidates(&table, "d", &ids(&["b", "c", "a"]), 1);
        assert_eq!(r.items.len(), 1);
        assert!(rank_candidates(&table, "d", &[], 3).items.is_empty());
    }
}
