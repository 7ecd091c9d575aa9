use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One rating with its review text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub device_id: String,
    pub service_id: String,
    pub rating: f64,
    pub review_text: String,
    pub timestamp: i64,
}

/// Wire shape of one line, using the Amazon review field names.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireReview {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    overall: f64,
    #[serde(default)]
    review_text: Option<String>,
    #[serde(default)]
    unix_review_time: Option<i64>,
}

impl TryFrom<WireReview> for ReviewRecord {
    type Error = String;

    fn try_from(w: WireReview) -> std::result::Result<Self, String> {
        if w.reviewer_id.is_empty() || w.asin.is_empty() {
            return Err("empty reviewerID or asin".into());
        }
        if !(1.0..=5.0).contains(&w.overall) {
            return Err(format!("rating {} outside [1, 5]", w.overall));
        }
        Ok(ReviewRecord {
            device_id: w.reviewer_id,
            service_id: w.asin,
            rating: w.overall,
            review_text: w.review_text.unwrap_or_default(),
            timestamp: w.unix_review_time.unwrap_or(0),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<ReviewRecord>,
    pub skipped: usize,
}

/// Parses line-delimited JSON reviews. Blank lines are ignored; malformed
/// lines are skipped and counted. More than half of the non-blank lines
/// being malformed is an error.
pub fn parse_reviews<R: BufRead>(reader: R) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    let mut total = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        total += 1;
        let parsed = serde_json::from_str::<WireReview>(trimmed)
            .map_err(|e| e.to_string())
            .and_then(ReviewRecord::try_from);
        match parsed {
            Ok(r) => out.records.push(r),
            Err(reason) => {
                log::debug!("skipping line {}: {reason}", lineno + 1);
                out.skipped += 1;
            }
        }
    }
    if out.skipped * 2 > total {
        return Err(Error::CorruptInput {
            malformed: out.skipped,
            total,
        });
    }
    if out.skipped > 0 {
        log::warn!("skipped {} malformed of {total} lines", out.skipped);
    }
    Ok(out)
}

pub fn read_reviews_file(path: &Path) -> Result<ParseOutcome> {
    let file = File::open(path).map_err(|e| Error::io_at(path, e))?;
    parse_reviews(BufReader::new(file))
}

/// Writes records back in the same line format [`parse_reviews`] reads.
pub fn write_reviews<W: Write>(mut writer: W, records: &[ReviewRecord]) -> Result<()> {
    for r in records {
        let wire = WireReview {
            reviewer_id: r.device_id.clone(),
            asin: r.service_id.clone(),
            overall: r.rating,
            review_text: Some(r.review_text.clone()),
            unix_review_time: Some(r.timestamp),
        };
        serde_json::to_writer(&mut writer, &wire)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
