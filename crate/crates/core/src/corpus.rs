//! Dataset parsing, text cleanup and label encoding.
//!
//! Corpus files are UTF-8 TSV with a header line and three columns:
//! `id`, `text`, `labels`, where `labels` is a comma-separated list drawn
//! from `non-hostile, fake, hate, offensive, defamation`.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const HEADER: &str = "id\ttext\tlabels";

/// The five classes in multi-hot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    NonHostile,
    Fake,
    Hate,
    Offensive,
    Defamation,
}

impl Label {
    pub const ALL: [Label; 5] = [
        Label::NonHostile,
        Label::Fake,
        Label::Hate,
        Label::Offensive,
        Label::Defamation,
    ];

    /// Hostile labels in fine-grained order.
    pub const HOSTILE: [Label; 4] = [
        Label::Fake,
        Label::Hate,
        Label::Offensive,
        Label::Defamation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::NonHostile => "non-hostile",
            Label::Fake => "fake",
            Label::Hate => "hate",
            Label::Offensive => "offensive",
            Label::Defamation => "defamation",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        Label::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| s.to_string())
    }
}

/// Multi-hot label vector `[non-hostile, fake, hate, offensive, defamation]`.
///
/// Either the non-hostile bit alone is set, or it is clear and at least one
/// hostile bit is set. Construction through [`LabelVector::new`] enforces this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u8; 5]", into = "[u8; 5]")]
pub struct LabelVector([bool; 5]);

impl LabelVector {
    pub const NON_HOSTILE: LabelVector = LabelVector([true, false, false, false, false]);

    pub fn new(bits: [bool; 5]) -> Result<Self> {
        let hostile = bits[1..].iter().any(|&b| b);
        match (bits[0], hostile) {
            (true, false) | (false, true) => Ok(LabelVector(bits)),
            (true, true) => Err(Error::Consistency(
                "non-hostile combined with a hostile label".into(),
            )),
            (false, false) => Err(Error::Consistency("no label set".into())),
        }
    }

    /// Builds a hostile vector from the four fine bits.
    pub fn from_hostile(fine: [bool; 4]) -> Result<Self> {
        Self::new([false, fine[0], fine[1], fine[2], fine[3]])
    }

    pub fn bits(&self) -> [bool; 5] {
        self.0
    }

    pub fn as_u8(&self) -> [u8; 5] {
        self.0.map(u8::from)
    }

    pub fn is_hostile(&self) -> bool {
        !self.0[0]
    }

    pub fn has(&self, label: Label) -> bool {
        self.0[label.index()]
    }

    /// The four hostile bits in fine-grained order.
    pub fn fine(&self) -> [bool; 4] {
        [self.0[1], self.0[2], self.0[3], self.0[4]]
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        Label::ALL.into_iter().filter(|l| self.has(*l))
    }
}

impl TryFrom<[u8; 5]> for LabelVector {
    type Error = Error;

    fn try_from(v: [u8; 5]) -> Result<Self> {
        if v.iter().any(|&b| b > 1) {
            return Err(Error::Validation(format!(
                "label bits must be 0/1, got {v:?}"
            )));
        }
        LabelVector::new(v.map(|b| b == 1))
    }
}

impl From<LabelVector> for [u8; 5] {
    fn from(v: LabelVector) -> Self {
        v.as_u8()
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.labels().map(Label::name).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "val" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPost {
    pub id: String,
    pub raw_text: String,
    pub clean_text: String,
    pub labels: LabelVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub split: Split,
    pub posts: Vec<LabeledPost>,
}

/// Per-class counts for one split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitStats {
    pub fake: usize,
    pub hate: usize,
    pub offense: usize,
    pub defame: usize,
    pub hostile: usize,
    pub non_hostile: usize,
}

fn url_pattern() -> &'static Regex {
    static URL: OnceLock<Regex> = OnceLock::new();
    URL.get_or_init(|| Regex::new(r"(?:https?://|www\.)\S+").expect("static regex"))
}

/// Strips URLs and normalizes whitespace. Emojis, hashtags and everything
/// else are kept verbatim.
pub fn preprocess_post(raw_text: &str) -> String {
    let stripped = url_pattern().replace_all(raw_text, " ");
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Encodes label names into a multi-hot vector. Names match
/// case-insensitively after trimming.
pub fn encode_labels<S: AsRef<str>>(names: &[S]) -> Result<LabelVector> {
    encode_labels_at(names, 0)
}

fn encode_labels_at<S: AsRef<str>>(names: &[S], line: usize) -> Result<LabelVector> {
    if names.is_empty() {
        return Err(Error::Consistency("empty label list".into()));
    }
    let mut bits = [false; 5];
    for name in names {
        let label = name
            .as_ref()
            .parse::<Label>()
            .map_err(|name| Error::Vocabulary { line, name })?;
        if bits[label.index()] {
            return Err(Error::Consistency(format!("duplicate label {label}")));
        }
        bits[label.index()] = true;
    }
    LabelVector::new(bits)
}

impl Corpus {
    /// Parses corpus TSV text. Line numbers in errors are 1-based and count
    /// the header.
    pub fn parse_str(text: &str, split: Split) -> Result<Corpus> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim_end_matches('\r').split('\t').count() == 3 => {}
            Some(_) => {
                return Err(Error::Parse {
                    line: 1,
                    message: "header must have 3 tab-separated fields".into(),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        }

        let mut seen = HashSet::new();
        let mut posts = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let id = fields[0].trim();
            if id.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    message: "empty id".into(),
                });
            }
            if !seen.insert(id.to_string()) {
                return Err(Error::Integrity(format!(
                    "duplicate id {id:?} at line {lineno}"
                )));
            }
            let names: Vec<&str> = fields[2]
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            let labels = encode_labels_at(&names, lineno).map_err(|e| match e {
                Error::Consistency(m) => Error::Consistency(format!("line {lineno}: {m}")),
                other => other,
            })?;
            posts.push(LabeledPost {
                id: id.to_string(),
                raw_text: fields[1].to_string(),
                clean_text: preprocess_post(fields[1]),
                labels,
            });
        }
        Ok(Corpus { split, posts })
    }

    pub fn parse_file(path: impl AsRef<Path>, split: Split) -> Result<Corpus> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Corpus::parse_str(&text, split)
    }

    /// Serializes back to the TSV input format.
    pub fn to_tsv(&self) -> Result<String> {
        let mut out = String::from(HEADER);
        out.push('\n');
        for p in &self.posts {
            if p.raw_text.contains(['\t', '\n', '\r']) || p.id.contains(['\t', '\n', '\r']) {
                return Err(Error::Validation(format!(
                    "post {:?} contains a tab or newline",
                    p.id
                )));
            }
            out.push_str(&p.id);
            out.push('\t');
            out.push_str(&p.raw_text);
            out.push('\t');
            out.push_str(&p.labels.to_string());
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()?).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.posts.iter().map(|p| p.id.as_str())
    }

    pub fn labels(&self) -> Vec<LabelVector> {
        self.posts.iter().map(|p| p.labels).collect()
    }
}

pub fn parse_corpus(path: impl AsRef<Path>, split: Split) -> Result<Corpus> {
    Corpus::parse_file(path, split)
}

pub fn split_stats(corpus: &Corpus) -> SplitStats {
    let mut s = SplitStats::default();
    for p in &corpus.posts {
        let [nh, fake, hate, off, def] = p.labels.bits();
        s.fake += usize::from(fake);
        s.hate += usize::from(hate);
        s.offense += usize::from(off);
        s.defame += usize::from(def);
        if nh {
            s.non_hostile += 1;
        } else {
            s.hostile += 1;
        }
    }
    s
}
