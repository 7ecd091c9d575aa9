use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::parse::ReviewRecord;
use super::vocab::{tokenize, Vocabulary};
use crate::{Error, Result};

/// All review tokens of one device or one service, oldest review first.
#[derive(Clone, Debug, PartialEq)]
pub struct ReviewCollection {
    pub owner_id: String,
    pub token_ids: Vec<u32>,
    /// `(device, service)` pairs whose reviews were concatenated.
    pub source_pairs: BTreeSet<(String, String)>,
}

/// Builds every device collection and every service collection.
///
/// Reviews are concatenated in ascending timestamp order (ties broken by the
/// counterpart id) and truncated from the tail to `max_tokens`. Reviews whose
/// pair appears in `exclude` contribute to neither side.
pub fn build_collections(
    records: &[ReviewRecord],
    vocab: &Vocabulary,
    max_tokens: usize,
    exclude: &HashSet<(String, String)>,
) -> Result<(
    BTreeMap<String, ReviewCollection>,
    BTreeMap<String, ReviewCollection>,
)> {
    if max_tokens == 0 {
        return Err(Error::InvalidArgument("max_tokens must be at least 1".into()));
    }
    let mut by_device: BTreeMap<&str, Vec<&ReviewRecord>> = BTreeMap::new();
    let mut by_service: BTreeMap<&str, Vec<&ReviewRecord>> = BTreeMap::new();
    for r in records {
        by_device.entry(&r.device_id).or_default();
        by_service.entry(&r.service_id).or_default();
        if exclude.contains(&(r.device_id.clone(), r.service_id.clone())) {
            continue;
        }
        by_device.get_mut(r.device_id.as_str()).unwrap().push(r);
        by_service.get_mut(r.service_id.as_str()).unwrap().push(r);
    }

    let assemble = |owner: &str, mut reviews: Vec<&ReviewRecord>, device_side: bool| {
        reviews.sort_by(|a, b| {
            let (ka, kb) = if device_side {
                (&a.service_id, &b.service_id)
            } else {
                (&a.device_id, &b.device_id)
            };
            a.timestamp.cmp(&b.timestamp).then_with(|| ka.cmp(kb))
        });
        let mut token_ids = Vec::new();
        let mut source_pairs = BTreeSet::new();
        for r in reviews {
            if token_ids.len() >= max_tokens {
                break;
            }
            let toks = tokenize(&r.review_text, vocab);
            let take = toks.len().min(max_tokens - token_ids.len());
            token_ids.extend_from_slice(&toks[..take]);
            source_pairs.insert((r.device_id.clone(), r.service_id.clone()));
        }
        ReviewCollection {
            owner_id: owner.to_owned(),
            token_ids,
            source_pairs,
        }
    };

    let devices = by_device
        .into_iter()
        .map(|(k, v)| (k.to_owned(), assemble(k, v, true)))
        .collect();
    let services = by_service
        .into_iter()
        .map(|(k, v)| (k.to_owned(), assemble(k, v, false)))
        .collect();
    Ok((devices, services))
}

/// Dense indices for opaque entity ids. Index 0 is the cold-start slot for
/// any id not seen at construction time; known ids take `1..=len` in
/// lexicographic order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntityIndex {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl EntityIndex {
    pub fn from_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Self {
        let sorted: BTreeSet<&str> = ids.into_iter().collect();
        Self::from_sorted(sorted.into_iter().map(str::to_owned).collect())
    }

    /// Takes ids already in index order (index `i + 1` for `ids[i]`).
    pub fn from_sorted(ids: Vec<String>) -> Self {
        let lookup = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i + 1))
            .collect();
        EntityIndex { ids, lookup }
    }

    /// Number of known ids (the table needs `len() + 1` rows).
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Index of `id`, or 0 when unseen.
    pub fn index_of(&self, id: &str) -> usize {
        self.lookup.get(id).copied().unwrap_or(0)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.lookup.contains_key(id)
    }

    pub fn id_at(&self, index: usize) -> Option<&str> {
        index.checked_sub(1).and_then(|i| self.ids.get(i)).map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// A tokenized review held by a [`ReviewIndex`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredReview {
    pub device: usize,
    pub service: usize,
    pub timestamp: i64,
    pub tokens: Vec<u32>,
}

/// Tokenized training reviews indexed by owner, able to produce the
/// collection of any device or service with one pair's review left out.
#[derive(Clone, Debug, PartialEq)]
pub struct ReviewIndex {
    devices: EntityIndex,
    services: EntityIndex,
    reviews: Vec<StoredReview>,
    by_device: Vec<Vec<usize>>,
    by_service: Vec<Vec<usize>>,
    max_tokens: usize,
}

impl ReviewIndex {
    pub fn build(records: &[ReviewRecord], vocab: &Vocabulary, max_tokens: usize) -> Result<Self> {
        let devices = EntityIndex::from_ids(records.iter().map(|r| r.device_id.as_str()));
        let services = EntityIndex::from_ids(records.iter().map(|r| r.service_id.as_str()));
        let reviews = records
            .iter()
            .map(|r| StoredReview {
                device: devices.index_of(&r.device_id),
                service: services.index_of(&r.service_id),
                timestamp: r.timestamp,
                tokens: tokenize(&r.review_text, vocab),
            })
            .collect();
        Self::from_parts(devices, services, reviews, max_tokens)
    }

    pub fn from_parts(
        devices: EntityIndex,
        services: EntityIndex,
        reviews: Vec<StoredReview>,
        max_tokens: usize,
    ) -> Result<Self> {
        if max_tokens == 0 {
            return Err(Error::InvalidArgument("max_tokens must be at least 1".into()));
        }
        let mut by_device = vec![Vec::new(); devices.len() + 1];
        let mut by_service = vec![Vec::new(); services.len() + 1];
        for (i, r) in reviews.iter().enumerate() {
            if r.device == 0
                || r.device > devices.len()
                || r.service == 0
                || r.service > services.len()
            {
                return Err(Error::InvalidArgument(format!(
                    "review {i} references an unknown entity index"
                )));
            }
            by_device[r.device].push(i);
            by_service[r.service].push(i);
        }
        // Entity indices follow id order, so index ties match id ties.
        for list in &mut by_device {
            list.sort_by_key(|&i| (reviews[i].timestamp, reviews[i].service, i));
        }
        for list in &mut by_service {
            list.sort_by_key(|&i| (reviews[i].timestamp, reviews[i].device, i));
        }
        Ok(ReviewIndex {
            devices,
            services,
            reviews,
            by_device,
            by_service,
            max_tokens,
        })
    }

    pub fn devices(&self) -> &EntityIndex {
        &self.devices
    }

    pub fn services(&self) -> &EntityIndex {
        &self.services
    }

    pub fn reviews(&self) -> &[StoredReview] {
        &self.reviews
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    /// Collection of device `device`, omitting its reviews of `exclude_service`.
    pub fn device_collection(&self, device: usize, exclude_service: Option<usize>) -> Vec<u32> {
        let list = self.by_device.get(device).map_or(&[][..], Vec::as_slice);
        self.concat(list.iter().map(|&i| &self.reviews[i]).filter(|r| Some(r.service) != exclude_service))
    }

    /// Collection of service `service`, omitting reviews by `exclude_device`.
    pub fn service_collection(&self, service: usize, exclude_device: Option<usize>) -> Vec<u32> {
        let list = self.by_service.get(service).map_or(&[][..], Vec::as_slice);
        self.concat(list.iter().map(|&i| &self.reviews[i]).filter(|r| Some(r.device) != exclude_device))
    }

    /// Services device `device` has reviewed.
    pub fn services_of(&self, device: usize) -> BTreeSet<usize> {
        self.by_device
            .get(device)
            .map(|l| l.iter().map(|&i| self.reviews[i].service).collect())
            .unwrap_or_default()
    }

    fn concat<'a>(&self, reviews: impl Iterator<Item = &'a StoredReview>) -> Vec<u32> {
        let mut out = Vec::new();
        for r in reviews {
            let take = r.tokens.len().min(self.max_tokens - out.len());
            out.extend_from_slice(&r.tokens[..take]);
            if out.len() >= self.max_tokens {
                break;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(d: &str, s: &str, text: &str, t: i64) -> ReviewRecord {
        ReviewRecord {
            device_id: d.into(),
            service_id: s.into(),
            rating: 4.0,
            review_text: text.into(),
            timestamp: t,
        }
    }

    fn vocab() -> Vocabulary {
        Vocabulary::from_words(["early", "late", "other", "w"])
    }

    #[test]
    fn chronological_order() {
        let v = vocab();
        let recs = vec![rec("d1", "s1", "late", 2), rec("d1", "s2", "early", 1)];
        let (dev, _) = build_collections(&recs, &v, 10, &HashSet::new()).unwrap();
        let c = &dev["d1"];
        assert_eq!(c.token_ids, vec![v.id("early").unwrap(), v.id("late").unwrap()]);
        let idx = ReviewIndex::build(&recs, &v, 10).unwrap();
        assert_eq!(idx.device_collection(1, None), c.token_ids);
    }

    #[test]
    fn excluded_pair_contributes_nothing() {
        let v = vocab();
        let recs = vec![
            rec("d1", "s1", "early", 1),
            rec("d1", "s2", "late", 2),
            rec("d2", "s1", "other", 3),
        ];
        let exclude: HashSet<_> = [("d1".to_string(), "s1".to_string())].into();
        let (dev, srv) = build_collections(&recs, &v, 10, &exclude).unwrap();
        let early = v.id("early").unwrap();
        assert!(!dev["d1"].token_ids.contains(&early));
        assert!(!srv["s1"].token_ids.contains(&early));
        assert!(!dev["d1"].source_pairs.contains(&("d1".into(), "s1".into())));
        assert!(!srv["s1"].source_pairs.contains(&("d1".into(), "s1".into())));

        let idx = ReviewIndex::build(&recs, &v, 10).unwrap();
        let (d1, s1) = (idx.devices().index_of("d1"), idx.services().index_of("s1"));
        assert_eq!(idx.device_collection(d1, Some(s1)), dev["d1"].token_ids);
        assert_eq!(idx.service_collection(s1, Some(d1)), srv["s1"].token_ids);
    }

    #[test]
    fn truncates_from_tail() {
        let v = vocab();
        let long = vec!["w"; 300].join(" ");
        let recs = vec![rec("d", "a", &long, 1), rec("d", "b", &long, 2)];
        let (dev, srv) = build_collections(&recs, &v, 500, &HashSet::new()).unwrap();
        assert_eq!(dev["d"].token_ids.len(), 500);
        assert_eq!(srv["a"].token_ids.len(), 300);
        let idx = ReviewIndex::build(&recs, &v, 500).unwrap();
        assert_eq!(idx.device_collection(1, None).len(), 500);
    }

    #[test]
    fn owner_without_surviving_reviews_is_empty() {
        let v = vocab();
        let recs = vec![rec("d", "s", "early", 1)];
        let exclude: HashSet<_> = [("d".to_string(), "s".to_string())].into();
        let (dev, srv) = build_collections(&recs, &v, 5, &exclude).unwrap();
        assert!(dev["d"].token_ids.is_empty());
        assert!(srv["s"].token_ids.is_empty());
        assert!(build_collections(&recs, &v, 0, &exclude).is_err());
    }

    #[test]
    fn entity_index_cold_start() {
        let e = EntityIndex::from_ids(["b", "a", "b"]);
        assert_eq!(e.len(), 2);
        assert_eq!(e.index_of("a"), 1);
        assert_eq!(e.index_of("b"), 2);
        assert_eq!(e.index_of("zz"), 0);
        assert_eq!(e.id_at(2), Some("b"));
        assert_eq!(e.id_at(0), None);
    }
}
