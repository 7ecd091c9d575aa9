use std::collections::HashMap;

use super::parse::ReviewRecord;
use crate::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;
const PAD_TOKEN: &str = "<pad>";
const OOV_TOKEN: &str = "<oov>";

/// Word ↔ id map with padding and out-of-vocabulary ids reserved.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Vocabulary holding only the reserved tokens.
    pub fn reserved_only() -> Self {
        Self::from_words(Vec::<String>::new())
    }

    /// Builds a vocabulary from non-reserved words, assigned ids from 2.
    pub fn from_words<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut all = vec![PAD_TOKEN.to_owned(), OOV_TOKEN.to_owned()];
        all.extend(words.into_iter().map(Into::into));
        let ids = all
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary { words: all, ids }
    }

    /// Rebuilds a vocabulary from its full id-ordered word list (reserved
    /// tokens included), as stored in a checkpoint.
    pub fn from_id_list(words: Vec<String>) -> Result<Self> {
        if words.len() < 2 || words[0] != PAD_TOKEN || words[1] != OOV_TOKEN {
            return Err(Error::InvalidArgument(
                "vocabulary must start with the reserved tokens".into(),
            ));
        }
        let v = Self::from_words(words.into_iter().skip(2));
        if v.ids.len() != v.words.len() {
            return Err(Error::InvalidArgument("duplicate vocabulary entries".into()));
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    /// All words in id order, reserved tokens first.
    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn normalize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .flat_map(|w| {
            // Lowercasing can emit combining marks; split again afterwards.
            w.to_lowercase()
                .split(|c: char| !c.is_alphanumeric())
                .filter(|p| !p.is_empty())
                .map(str::to_owned)
                .collect::<Vec<_>>()
        })
}

pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<u32> {
    normalize(text)
        .map(|w| vocab.id(&w).unwrap_or(OOV_ID))
        .collect()
}

/// Keeps the `max_size − 2` most frequent normalized words; ties go to the
/// lexicographically smaller word.
pub fn build_vocab(records: &[ReviewRecord], max_size: usize) -> Result<Vocabulary> {
    if max_size < 3 {
        return Err(Error::InvalidArgument(format!(
            "vocabulary cap {max_size} must be at least 3"
        )));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for r in records {
        for w in normalize(&r.review_text) {
            *counts.entry(w).or_default() += 1;
        }
    }
    if counts.is_empty() {
        log::warn!("empty corpus: vocabulary holds only reserved tokens");
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size - 2);
    Ok(Vocabulary::from_words(ranked.into_iter().map(|(w, _)| w)))
}
