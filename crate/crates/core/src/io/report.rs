use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Method;

/// One image's score under one method. Rank 1 is the lowest score, i.e. the
/// image most likely to be mislabeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub image_id: String,
    pub method: Method,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Validation(format!("unknown report format {s:?}"))),
        }
    }
}

/// Ranks one method's scores ascending; equal scores are ordered by image id.
pub fn rank_scores(method: Method, scores: Vec<(String, f64)>) -> Vec<ScoreRecord> {
    let mut scores = scores;
    scores.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    scores
        .into_iter()
        .enumerate()
        .map(|(i, (image_id, score))| ScoreRecord {
            image_id,
            method,
            score,
            rank: i + 1,
        })
        .collect()
}

/// Writes records sorted by (method, rank). Output bytes depend only on the
/// set of records, not their order.
pub fn write_report(records: &[ScoreRecord], path: &Path, format: ReportFormat) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Validation("refusing to write an empty report".into()));
    }
    let mut sorted: Vec<&ScoreRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (a.method, a.rank)
            .cmp(&(b.method, b.rank))
            .then_with(|| a.image_id.cmp(&b.image_id))
    });
    let bytes = match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &sorted {
                w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Error::Format(e.to_string()))?
        }
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(&sorted).expect("records serialize");
            v.push(b'\n');
            v
        }
    };
    super::write_atomic(path, |w| w.write_all(&bytes))
}

/// Reads a CSV or JSON report; JSON is recognised by its leading `[`.
pub fn read_report(path: &Path) -> Result<Vec<ScoreRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |e: &dyn std::fmt::Display| Error::Format(format!("{}: {e}", path.display()));
    if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| bad(&e))
    } else {
        csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(&e))
    }
}
