//! Deterministic synthetic corpus with planted class structure, used as a
//! stand-in for real encoder output in tests and demos.
//!
//! Each post embedding is isotropic Gaussian noise plus a shift along a
//! fixed random direction for every label the post carries (including a
//! shared "hostile" direction for hostile posts).

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{preprocess_post, Corpus, LabelVector, LabeledPost, Split};
use crate::embedding_store::{write_store, EmbeddingRecord, EmbeddingStore};
use crate::pipeline::DataPaths;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub dim: usize,
    pub seed: u64,
    /// Per-coordinate shift along each planted direction.
    pub signal: f64,
    pub noise: f64,
    pub hostile_fraction: f64,
    /// Probability that a hostile post carries a second hostile label.
    pub second_label: f64,
}

impl Default for SyntheticSpec {
    /// 600 posts split 400/100/100 over 768 dimensions.
    fn default() -> Self {
        SyntheticSpec {
            train: 400,
            validation: 100,
            test: 100,
            dim: 768,
            seed: 2021,
            signal: 1.0,
            noise: 1.0,
            hostile_fraction: 0.5,
            second_label: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSplit {
    pub corpus: Corpus,
    pub store: EmbeddingStore,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: SyntheticSplit,
    pub validation: SyntheticSplit,
    pub test: SyntheticSplit,
}

const WORDS: &[&str] = &[
    "देश",
    "सरकार",
    "खबर",
    "लोग",
    "आज",
    "सच",
    "झूठ",
    "नेता",
    "वीडियो",
    "देखें",
    "#न्याय",
    "😡",
    "🙏",
    "#भारत",
    "कल",
    "बड़ा",
    "मामला",
    "पुलिस",
];

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn sample_labels(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> LabelVector {
    if rng.gen::<f64>() >= spec.hostile_fraction {
        return LabelVector::NON_HOSTILE;
    }
    // fake is the most frequent hostile class, defamation the rarest
    let weights = [0.4, 0.25, 0.2, 0.15];
    let pick = |rng: &mut ChaCha8Rng| {
        let mut u = rng.gen::<f64>();
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        3
    };
    let mut fine = [false; 4];
    fine[pick(rng)] = true;
    if rng.gen::<f64>() < spec.second_label {
        fine[pick(rng)] = true;
    }
    LabelVector::from_hostile(fine).expect("at least one hostile bit")
}

fn sample_text(rng: &mut ChaCha8Rng, i: usize) -> String {
    let n = rng.gen_range(3..10);
    let mut words: Vec<String> = (0..n)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string())
        .collect();
    if rng.gen::<f64>() < 0.3 {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, format!("https://t.co/s{i:04}"));
    }
    words.join(" ")
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // directions: hostile, fake, hate, offensive, defamation
    let directions: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..spec.dim).map(|_| standard_normal(&mut rng)).collect())
        .collect();

    let mut make = |split: Split, n: usize, prefix: &str| {
        let mut posts = Vec::with_capacity(n);
        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let labels = sample_labels(&mut rng, spec);
            let raw_text = sample_text(&mut rng, i);
            let id = format!("{prefix}-{i:04}");
            let mut v: Vec<f64> = (0..spec.dim)
                .map(|_| spec.noise * standard_normal(&mut rng))
                .collect();
            // signed shifts: an absent label pushes the other way, so no class
            // sits at the noise centre
            let sign = |b: bool| if b { 1.0 } else { -1.0 };
            let mut shifts = vec![sign(labels.is_hostile())];
            if labels.is_hostile() {
                shifts.extend(labels.fine().map(sign));
            }
            for (d, a) in directions.iter().zip(shifts) {
                v.iter_mut()
                    .zip(d)
                    .for_each(|(x, u)| *x += a * spec.signal * u);
            }
            records.push(EmbeddingRecord {
                id: id.clone(),
                vector: v.into_iter().map(|x| x as f32).collect(),
            });
            posts.push(LabeledPost {
                id,
                clean_text: preprocess_post(&raw_text),
                raw_text,
                labels,
            });
        }
        SyntheticSplit {
            corpus: Corpus { split, posts },
            store: EmbeddingStore {
                dim: spec.dim,
                records,
            },
        }
    };
    let train = make(Split::Train, spec.train, "train");
    let validation = make(Split::Validation, spec.validation, "val");
    let test = make(Split::Test, spec.test, "test");
    SyntheticData {
        train,
        validation,
        test,
    }
}

impl SyntheticData {
    /// Writes `{train,val,test}.tsv` and `{train,val,test}.emb1` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<DataPaths> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        let write = |split: &SyntheticSplit, name: &str| -> Result<(PathBuf, PathBuf)> {
            let tsv = dir.join(format!("{name}.tsv"));
            let emb = dir.join(format!("{name}.emb1"));
            split.corpus.write_file(&tsv)?;
            write_store(&split.store, &emb)?;
            Ok((tsv, emb))
        };
        let (train_tsv, train_emb) = write(&self.train, "train")?;
        let (val_tsv, val_emb) = write(&self.validation, "val")?;
        let (test_tsv, test_emb) = write(&self.test, "test")?;
        Ok(DataPaths {
            train_tsv,
            train_emb,
            val_tsv,
            val_emb,
            test_tsv: Some(test_tsv),
            test_emb: Some(test_emb),
        })
    }
}
