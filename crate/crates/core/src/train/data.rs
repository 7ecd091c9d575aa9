use crate::ingest::{build_vocab, DatasetSplit, ReviewIndex, ReviewRecord, Vocabulary};
use crate::model::PairInput;
use crate::{Error, Result};

/// Everything derived from the training split that the model needs at
/// training and prediction time.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub index: ReviewIndex,
}

impl Corpus {
    /// Vocabulary and collections from `train` only.
    pub fn build(train: &[ReviewRecord], vocab_cap: usize, max_tokens: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("training split is empty".into()));
        }
        let vocab = build_vocab(train, vocab_cap)?;
        let index = ReviewIndex::build(train, &vocab, max_tokens)?;
        Ok(Corpus { vocab, index })
    }

    /// Model input for an id pair; unknown ids map to the cold-start index.
    /// With `exclude_own`, the pair's own review is left out of both
    /// collections.
    pub fn pair(&self, device_id: &str, service_id: &str, exclude_own: bool) -> PairInput {
        let device = self.index.devices().index_of(device_id);
        let service = self.index.services().index_of(service_id);
        self.pair_by_index(device, service, exclude_own)
    }

    pub fn pair_by_index(&self, device: usize, service: usize, exclude_own: bool) -> PairInput {
        PairInput {
            device,
            service,
            device_tokens: self
                .index
                .device_collection(device, exclude_own.then_some(service)),
            service_tokens: self
                .index
                .service_collection(service, exclude_own.then_some(device)),
        }
    }

    pub fn examples(&self, records: &[ReviewRecord], exclude_own: bool) -> Vec<(PairInput, f64)> {
        records
            .iter()
            .map(|r| (self.pair(&r.device_id, &r.service_id, exclude_own), r.rating))
            .collect()
    }
}

/// Training, validation and test examples. Training pairs exclude their
/// own review; held-out pairs have none in the corpus to exclude.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub corpus: Corpus,
    pub train: Vec<(PairInput, f64)>,
    pub validation: Vec<(PairInput, f64)>,
    pub test: Vec<(PairInput, f64)>,
    pub global_mean: f64,
}

impl Prepared {
    pub fn new(split: &DatasetSplit, vocab_cap: usize, max_tokens: usize) -> Result<Self> {
        let corpus = Corpus::build(&split.train, vocab_cap, max_tokens)?;
        let global_mean = split.train.iter().map(|r| r.rating).sum::<f64>() / split.train.len() as f64;
        Ok(Prepared {
            train: corpus.examples(&split.train, true),
            validation: corpus.examples(&split.validation, false),
            test: corpus.examples(&split.test, false),
            corpus,
            global_mean,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::OOV_ID;

    fn rec(d: &str, s: &str, rating: f64, text: &str, ts: i64) -> ReviewRecord {
        ReviewRecord {
            device_id: d.into(),
            service_id: s.into(),
            rating,
            review_text: text.into(),
            timestamp: ts,
        }
    }

    #[test]
    fn own_review_is_excluded_from_training_pairs() {
        let train = vec![
            rec("d1", "s1", 5.0, "alpha", 1),
            rec("d1", "s2", 3.0, "beta", 2),
            rec("d2", "s1", 4.0, "gamma", 3),
        ];
        let split = DatasetSplit::from_parts(train, vec![rec("d9", "s1", 2.0, "zzz", 4)], vec![], 0);
        let p = Prepared::new(&split, 100, 50).unwrap();
        let v = &p.corpus.vocab;
        let (first, _) = &p.train[0];
        assert_eq!(first.device_tokens, vec![v.id("beta").unwrap()]);
        assert_eq!(first.service_tokens, vec![v.id("gamma").unwrap()]);
        let (held, _) = &p.validation[0];
        assert_eq!(held.device, 0);
        assert!(held.device_tokens.is_empty());
        assert_eq!(held.service_tokens.len(), 2);
        assert!((p.global_mean - 4.0).abs() < 1e-12);
        assert!(!held.service_tokens.contains(&OOV_ID));
    }
}
