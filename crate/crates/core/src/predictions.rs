//! Prediction files: one JSON object per line,
//! `{"id": "...", "bits": [5 x 0/1], "scores": [5 x real]}`, classes in
//! `[non-hostile, fake, hate, offensive, defamation]` order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelVector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub bits: [u8; 5],
    pub scores: [f64; 5],
}

impl PredictionRow {
    pub fn bools(&self) -> [bool; 5] {
        self.bits.map(|b| b == 1)
    }

    pub fn labels(&self) -> Result<LabelVector> {
        LabelVector::try_from(self.bits)
    }
}

pub fn to_jsonl(rows: &[PredictionRow]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<PredictionRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let row: PredictionRow = serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if row.bits.iter().any(|&b| b > 1) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "bits must be 0 or 1".into(),
                });
            }
            Ok(row)
        })
        .collect()
}

pub fn write_predictions(rows: &[PredictionRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_jsonl(rows)?).map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text)
}
