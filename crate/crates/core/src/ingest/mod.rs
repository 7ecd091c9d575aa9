//! Raw review ingestion: parsing, vocabulary, per-owner review collections,
//! dataset splits and summary statistics.

mod collection;
mod parse;
mod split;
mod stats;
mod vocab;

pub use collection::{build_collections, EntityIndex, ReviewCollection, ReviewIndex, StoredReview};
pub use parse::{parse_reviews, read_reviews_file, write_reviews, ParseOutcome, ReviewRecord};
pub use split::{split_dataset, DatasetSplit, DEFAULT_RATIOS};
pub use stats::{dataset_stats, StatsReport};
pub use vocab::{build_vocab, normalize, tokenize, Vocabulary, OOV_ID, PAD_ID};

pub const DEFAULT_VOCAB_CAP: usize = 20_000;
pub const DEFAULT_MAX_TOKENS: usize = 500;
