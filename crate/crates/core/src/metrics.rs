//! Precision, recall and F1 per class, plus support-weighted F1 for the
//! coarse (hostile / non-hostile) and fine (four hostile classes) views.
//!
//! Zero denominators yield 0 for precision, recall and F1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabelVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl ClassScore {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassScore {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }

    /// Binary scores for one class given per-row (predicted, gold) flags.
    pub fn from_flags(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (p, g) in pairs {
            match (p, g) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        ClassScore::from_counts(tp, fp, fn_)
    }
}

/// Support-weighted mean of class F1 scores; 0 when total support is 0.
pub fn weighted_f1<'a>(scores: impl IntoIterator<Item = &'a ClassScore>) -> f64 {
    let (mut num, mut den) = (0.0, 0usize);
    for s in scores {
        num += s.support as f64 * s.f1;
        den += s.support;
    }
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

/// Which posts enter the fine-grained scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FineScope {
    /// Every post; gold non-hostile posts contribute negatives.
    #[default]
    All,
    /// Only posts whose gold label is hostile.
    GoldHostile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseReport {
    pub hostile: ClassScore,
    pub non_hostile: ClassScore,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineReport {
    pub fake: ClassScore,
    pub hate: ClassScore,
    pub offensive: ClassScore,
    pub defamation: ClassScore,
    pub weighted_f1: f64,
}

impl FineReport {
    pub fn classes(&self) -> [&ClassScore; 4] {
        [&self.fake, &self.hate, &self.offensive, &self.defamation]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub coarse: CoarseReport,
    pub fine: FineReport,
}

/// One row of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub coarse_f1: f64,
    pub defamation_f1: f64,
    pub fake_f1: f64,
    pub hate_f1: f64,
    pub offensive_f1: f64,
    pub fine_weighted_f1: f64,
}

impl EvalReport {
    pub fn row(&self) -> ScoreRow {
        ScoreRow {
            coarse_f1: self.coarse.weighted_f1,
            defamation_f1: self.fine.defamation.f1,
            fake_f1: self.fine.fake.f1,
            hate_f1: self.fine.hate.f1,
            offensive_f1: self.fine.offensive.f1,
            fine_weighted_f1: self.fine.weighted_f1,
        }
    }
}

pub fn evaluate(pred: &[LabelVector], gold: &[LabelVector]) -> Result<EvalReport> {
    evaluate_with(pred, gold, FineScope::All)
}

pub fn evaluate_with(
    pred: &[LabelVector],
    gold: &[LabelVector],
    scope: FineScope,
) -> Result<EvalReport> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold rows",
            pred.len(),
            gold.len()
        )));
    }
    let pairs = || pred.iter().zip(gold);

    let hostile = ClassScore::from_flags(pairs().map(|(p, g)| (p.is_hostile(), g.is_hostile())));
    let non_hostile =
        ClassScore::from_flags(pairs().map(|(p, g)| (!p.is_hostile(), !g.is_hostile())));
    let coarse = CoarseReport {
        weighted_f1: weighted_f1([&hostile, &non_hostile]),
        hostile,
        non_hostile,
    };

    let fine_class = |label: Label| {
        ClassScore::from_flags(
            pairs()
                .filter(|(_, g)| scope == FineScope::All || g.is_hostile())
                .map(|(p, g)| (p.has(label), g.has(label))),
        )
    };
    let fake = fine_class(Label::Fake);
    let hate = fine_class(Label::Hate);
    let offensive = fine_class(Label::Offensive);
    let defamation = fine_class(Label::Defamation);
    let fine = FineReport {
        weighted_f1: weighted_f1([&fake, &hate, &offensive, &defamation]),
        fake,
        hate,
        offensive,
        defamation,
    };
    Ok(EvalReport { coarse, fine })
}

/// Fine-grained weighted F1 over raw hostile bit rows (no label invariant
/// required on the predictions).
pub fn fine_weighted_f1(pred: &[[bool; 4]], gold: &[[bool; 4]]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold rows",
            pred.len(),
            gold.len()
        )));
    }
    let scores: Vec<ClassScore> = (0..4)
        .map(|c| ClassScore::from_flags(pred.iter().zip(gold).map(|(p, g)| (p[c], g[c]))))
        .collect();
    Ok(weighted_f1(&scores))
}

pub const TABLE_COLUMNS: [&str; 7] = [
    "Model",
    "Coarse F1",
    "Defamation F1",
    "Fake F1",
    "Hate F1",
    "Offensive F1",
    "Weighted Fine F1",
];

/// Renders rows as an aligned text table, values to 4 decimals.
pub fn report_table(rows: &[(String, ScoreRow)]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Validation("no reports to tabulate".into()));
    }
    let mut cells: Vec<Vec<String>> = vec![TABLE_COLUMNS.iter().map(|s| s.to_string()).collect()];
    for (name, r) in rows {
        if name.trim().is_empty() {
            return Err(Error::Validation("report name must not be empty".into()));
        }
        let mut line = vec![name.clone()];
        line.extend(
            [
                r.coarse_f1,
                r.defamation_f1,
                r.fake_f1,
                r.hate_f1,
                r.offensive_f1,
                r.fine_weighted_f1,
            ]
            .iter()
            .map(|v| format!("{v:.4}")),
        );
        cells.push(line);
    }
    let widths: Vec<usize> = (0..TABLE_COLUMNS.len())
        .map(|c| {
            cells
                .iter()
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, &w))| {
                if c == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    Ok(out)
}
