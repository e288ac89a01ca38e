//! F1-weighted fusion of multi-hot model outputs.
//!
//! For post `j` and class `c`, with per-model weights `w_i`:
//!
//! ```text
//! score[j][c] = sum_i O_i[j][c] * w_i / sum_i w_i
//! bit[j][c]   = score[j][c] >= 0.5
//! ```
//!
//! followed by [`enforce_cascade`] on each row. The threshold decision is
//! made on exactly-summed weights, so ties (e.g. a 2-2 split under equal
//! weights) land on 0.5 regardless of summation order or weight scale.

use serde::{Deserialize, Serialize};

use crate::corpus::LabelVector;
use crate::metrics;
use crate::{Error, Result};

/// Weight substituted for a model whose validation fine F1 is zero.
pub const ZERO_F1_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutputs {
    pub model_id: String,
    pub rows: Vec<[bool; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub ff1: Vec<f64>,
}

impl EnsembleWeights {
    pub fn validate(&self) -> Result<()> {
        if self.ff1.is_empty() {
            return Err(Error::Validation("at least one weight required".into()));
        }
        if let Some(w) = self.ff1.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Validation(format!(
                "weights must be positive and finite, got {w}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub scores: Vec<[f64; 5]>,
    pub bits: Vec<[bool; 5]>,
}

impl EnsembleResult {
    /// Rows as label vectors; `None` where a row breaks the label invariant
    /// (only possible with the cascade disabled).
    pub fn label_vectors(&self) -> Vec<Option<LabelVector>> {
        self.bits
            .iter()
            .map(|b| LabelVector::new(*b).ok())
            .collect()
    }
}

/// Validation fine-grained weighted F1 of one model, floored at
/// [`ZERO_F1_WEIGHT`].
pub fn fine_weight(pred: &[[bool; 4]], gold: &[[bool; 4]]) -> Result<f64> {
    let f1 = metrics::fine_weighted_f1(pred, gold)?;
    Ok(if f1 > 0.0 { f1 } else { ZERO_F1_WEIGHT })
}

/// Error-free sum of two floats: `a + b = s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// A nonoverlapping floating-point expansion, least significant first.
/// Its components sum to the exact value of everything added so far.
#[derive(Debug, Clone, Default)]
struct ExactSum(Vec<f64>);

impl ExactSum {
    fn add(&mut self, b: f64) {
        let mut q = b;
        let mut out = Vec::with_capacity(self.0.len() + 1);
        for &e in &self.0 {
            let (s, err) = two_sum(q, e);
            if err != 0.0 {
                out.push(err);
            }
            q = s;
        }
        if q != 0.0 || out.is_empty() {
            out.push(q);
        }
        self.0 = out;
    }

    /// Sign of the exact value.
    fn signum(&self) -> i8 {
        match self.0.iter().rev().find(|&&c| c != 0.0) {
            Some(&c) if c > 0.0 => 1,
            Some(_) => -1,
            None => 0,
        }
    }

    fn approx(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Weighted vote for one class: returns the score and whether it reaches
/// one half.
fn weighted_vote(votes: impl Iterator<Item = (bool, f64)>) -> (f64, bool) {
    let mut on = ExactSum::default();
    let mut total = ExactSum::default();
    let mut margin = ExactSum::default();
    for (bit, w) in votes {
        total.add(w);
        if bit {
            on.add(w);
            margin.add(w);
        } else {
            margin.add(-w);
        }
    }
    let sign = margin.signum();
    let mut score = on.approx() / total.approx();
    // keep the reported score on the same side of 0.5 as the exact decision
    if sign == 0 || (sign > 0 && score < 0.5) {
        score = 0.5;
    } else if sign < 0 && score >= 0.5 {
        score = f64::from_bits(0.5f64.to_bits() - 1);
    }
    (score, sign >= 0)
}

/// Combines `m` models' multi-hot outputs. With `cascade` set, every row is
/// passed through [`enforce_cascade`].
pub fn combine(
    outputs: &[ModelOutputs],
    weights: &EnsembleWeights,
    cascade: bool,
) -> Result<EnsembleResult> {
    weights.validate()?;
    if outputs.len() != weights.ff1.len() {
        return Err(Error::Shape(format!(
            "{} model outputs for {} weights",
            outputs.len(),
            weights.ff1.len()
        )));
    }
    let n = outputs[0].rows.len();
    if let Some(o) = outputs.iter().find(|o| o.rows.len() != n) {
        return Err(Error::Shape(format!(
            "model {:?} has {} rows, expected {n}",
            o.model_id,
            o.rows.len()
        )));
    }
    let mut scores = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    for j in 0..n {
        let mut s = [0.0; 5];
        let mut b = [false; 5];
        for c in 0..5 {
            let votes = outputs
                .iter()
                .zip(&weights.ff1)
                .map(|(o, &w)| (o.rows[j][c], w));
            (s[c], b[c]) = weighted_vote(votes);
        }
        if cascade {
            b = enforce_cascade(&s, b).bits();
        }
        scores.push(s);
        bits.push(b);
    }
    Ok(EnsembleResult { scores, bits })
}

/// Index of the largest score, lowest index on ties.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Forces a row to satisfy "non-hostile alone, or at least one hostile
/// label":
///
/// * non-hostile set, hostile clear: unchanged;
/// * both sides set: the side with the larger score wins (non-hostile
///   score vs. max hostile score, ties to non-hostile);
/// * nothing set: the single highest-scoring class (lowest index on ties);
/// * hostile side wins but none of its set bits scores >= 0.5: only the
///   argmax hostile class is kept.
pub fn enforce_cascade(scores: &[f64; 5], bits: [bool; 5]) -> LabelVector {
    let hostile_set = bits[1..].iter().any(|&b| b);
    let only = |c: usize| {
        let mut b = [false; 5];
        b[c] = true;
        LabelVector::new(b).expect("single class is valid")
    };
    let hostile_scores = &scores[1..];
    let hostile_argmax = 1 + argmax(hostile_scores);

    let hostile_wins = match (bits[0], hostile_set) {
        (true, false) => return only(0),
        (false, false) => return only(argmax(scores)),
        (true, true) => {
            let max_hostile = hostile_scores
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            max_hostile > scores[0]
        }
        (false, true) => true,
    };
    if !hostile_wins {
        return only(0);
    }
    let mut out = [false; 5];
    let mut any = false;
    for c in 1..5 {
        if bits[c] && scores[c] >= 0.5 {
            out[c] = true;
            any = true;
        }
    }
    if !any {
        return only(hostile_argmax);
    }
    LabelVector::new(out).expect("hostile bits set")
}
