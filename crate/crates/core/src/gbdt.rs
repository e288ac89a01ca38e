//! Newton-boosted decision trees with a logistic objective.
//!
//! Split search is exact and greedy: every midpoint between consecutive
//! distinct values of every feature is a candidate, scored by
//!
//! ```text
//! gain = 1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma
//! ```
//!
//! Leaves take `-G/(H+lambda)`, clamped to `[-10, 10]`. Rows with
//! `x < threshold` go left. Equal gains resolve to the lowest feature index,
//! then the lowest threshold.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mlp::sigmoid;
use crate::{Error, Matrix, Result};

pub const LEAF_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub max_depth: usize,
    pub n_rounds: usize,
    pub eta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            max_depth: 4,
            n_rounds: 100,
            eta: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_hessian: 1.0,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config("eta must lie in (0, 1]".into()));
        }
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) || !(self.min_child_hessian >= 0.0) {
            return Err(Error::Config(
                "lambda, gamma and min_child_hessian must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<f64> {
        match self {
            TreeNode::Leaf { weight } => vec![*weight],
            TreeNode::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature,
                left,
                right,
                ..
            } => [Some(*feature), left.max_feature(), right.max_feature()]
                .into_iter()
                .flatten()
                .max(),
        }
    }
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    (-g / (h + lambda)).clamp(-LEAF_CLAMP, LEAF_CLAMP)
}

pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Midpoint of `lo < hi` that still separates them under `x < t`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t > lo && t <= hi {
        t
    } else {
        hi
    }
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    g: &'a [f64],
    h: &'a [f64],
    cfg: &'a GbdtConfig,
}

impl TreeBuilder<'_> {
    /// `sorted[f]` lists this node's rows ordered by feature `f` (ties by
    /// row index).
    fn build(&self, sorted: Vec<Vec<usize>>, depth: usize) -> TreeNode {
        let rows = &sorted[0];
        let (gs, hs) = rows
            .iter()
            .fold((0.0, 0.0), |(g, h), &r| (g + self.g[r], h + self.h[r]));
        let leaf = TreeNode::Leaf {
            weight: leaf_weight(gs, hs, self.cfg.lambda),
        };
        if depth >= self.cfg.max_depth || rows.len() < 2 {
            return leaf;
        }
        let Some(best) = self.best_split(&sorted, gs, hs) else {
            return leaf;
        };

        let goes_left = |r: usize| self.x.get(r, best.feature) < best.threshold;
        let mut left = Vec::with_capacity(sorted.len());
        let mut right = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&r| goes_left(r));
            left.push(l);
            right.push(r);
        }
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.build(left, depth + 1)),
            right: Box::new(self.build(right, depth + 1)),
        }
    }

    fn best_split(&self, sorted: &[Vec<usize>], gs: f64, hs: f64) -> Option<BestSplit> {
        let mut best: Option<BestSplit> = None;
        for (f, rows) in sorted.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for w in 0..rows.len() - 1 {
                let r = rows[w];
                gl += self.g[r];
                hl += self.h[r];
                let lo = self.x.get(r, f);
                let hi = self.x.get(rows[w + 1], f);
                if lo == hi {
                    continue;
                }
                let (gr, hr) = (gs - gl, hs - hl);
                if hl < self.cfg.min_child_hessian || hr < self.cfg.min_child_hessian {
                    continue;
                }
                let gain = split_gain(gl, hl, gr, hr, self.cfg.lambda, self.cfg.gamma);
                if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        gain,
                    });
                }
            }
        }
        best
    }
}

fn check_features(x: &Matrix) -> Result<()> {
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "features must be finite (missing values are not supported)".into(),
        ));
    }
    Ok(())
}

fn sorted_columns(x: &Matrix, rows: &[usize]) -> Vec<Vec<usize>> {
    (0..x.cols())
        .map(|f| {
            let mut idx = rows.to_vec();
            idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// Fits one regression tree to gradient statistics.
pub fn fit_tree(x: &Matrix, g: &[f64], h: &[f64], cfg: &GbdtConfig) -> Result<TreeNode> {
    if x.rows() == 0 {
        return Err(Error::Validation("cannot fit a tree on zero rows".into()));
    }
    if g.len() != x.rows() || h.len() != x.rows() {
        return Err(Error::Shape(format!(
            "{} rows, {} gradients, {} hessians",
            x.rows(),
            g.len(),
            h.len()
        )));
    }
    if h.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Validation("hessians must be non-negative".into()));
    }
    check_features(x)?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    let builder = TreeBuilder { x, g, h, cfg };
    if x.cols() == 0 {
        let (gs, hs) = (g.iter().sum(), h.iter().sum());
        return Ok(TreeNode::Leaf {
            weight: leaf_weight(gs, hs, cfg.lambda),
        });
    }
    Ok(builder.build(sorted_columns(x, &rows), 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub base_margin: f64,
    pub input_dim: usize,
    pub config: GbdtConfig,
    pub trees: Vec<TreeNode>,
    /// Mean training log-loss before the first round and after each round.
    #[serde(default)]
    pub train_log_loss: Vec<f64>,
}

pub fn log_loss(margins: &[f64], y: &[f64]) -> f64 {
    // ln(1 + e^m) - y*m, stable
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| m.max(0.0) - m * t + (-m.abs()).exp().ln_1p())
        .sum();
    total / margins.len() as f64
}

/// Fits `n_rounds` trees to binary labels starting from margin 0.
pub fn fit_booster(x: &Matrix, y: &[bool], cfg: &GbdtConfig) -> Result<Booster> {
    cfg.validate()?;
    if x.rows() == 0 || y.len() != x.rows() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            x.rows(),
            y.len()
        )));
    }
    check_features(x)?;
    let n = x.rows();
    let targets: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
    let mut margins = vec![0.0; n];
    let rows: Vec<usize> = (0..n).collect();
    let sorted = sorted_columns(x, &rows);
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    let mut history = vec![log_loss(&margins, &targets)];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..cfg.n_rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            g[i] = p - targets[i];
            h[i] = p * (1.0 - p);
        }
        let builder = TreeBuilder {
            x,
            g: &g,
            h: &h,
            cfg,
        };
        let tree = if x.cols() == 0 {
            TreeNode::Leaf {
                weight: leaf_weight(g.iter().sum(), h.iter().sum(), cfg.lambda),
            }
        } else {
            builder.build(sorted.clone(), 0)
        };
        for (i, m) in margins.iter_mut().enumerate() {
            *m += cfg.eta * tree.predict(x.row(i));
        }
        history.push(log_loss(&margins, &targets));
        trees.push(tree);
    }
    Ok(Booster {
        base_margin: 0.0,
        input_dim: x.cols(),
        config: *cfg,
        trees,
        train_log_loss: history,
    })
}

impl Booster {
    fn check_dim(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                found: x.cols(),
            });
        }
        Ok(())
    }

    pub fn margin_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().fold(self.base_margin, |m, t| {
            m + self.config.eta * t.predict(row)
        })
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.trees {
            if t.depth() > self.config.max_depth {
                return Err(Error::Validation("tree deeper than max_depth".into()));
            }
            if t.max_feature().is_some_and(|f| f >= self.input_dim) {
                return Err(Error::Validation("split feature out of range".into()));
            }
            if t.leaves().iter().any(|w| !w.is_finite()) {
                return Err(Error::Validation("non-finite leaf weight".into()));
            }
        }
        Ok(())
    }
}

pub fn predict_margin(b: &Booster, x: &Matrix) -> Result<Vec<f64>> {
    b.check_dim(x)?;
    Ok(x.iter_rows().map(|r| b.margin_row(r)).collect())
}

pub fn predict_proba(b: &Booster, x: &Matrix) -> Result<Vec<f64>> {
    Ok(predict_margin(b, x)?.into_iter().map(sigmoid).collect())
}

/// Independent boosters for `[fake, hate, offensive, defamation]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoosterSet {
    pub boosters: Vec<Booster>,
}

pub fn fit_one_vs_rest(x: &Matrix, y: &[[bool; 4]], cfg: &GbdtConfig) -> Result<BoosterSet> {
    let boosters = (0..4)
        .map(|c| {
            let col: Vec<bool> = y.iter().map(|r| r[c]).collect();
            fit_booster(x, &col, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoosterSet { boosters })
}

impl BoosterSet {
    /// `n x 4` probabilities.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.boosters.len());
        for (c, b) in self.boosters.iter().enumerate() {
            for (i, p) in predict_proba(b, x)?.into_iter().enumerate() {
                out.row_mut(i)[c] = p;
            }
        }
        Ok(out)
    }
}

/// Serialized form of either booster kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoosterCheckpoint {
    Coarse { booster: Booster },
    Fine { boosters: BoosterSet },
}

impl BoosterCheckpoint {
    pub fn validate(&self) -> Result<()> {
        match self {
            BoosterCheckpoint::Coarse { booster } => booster.validate(),
            BoosterCheckpoint::Fine { boosters } => {
                if boosters.boosters.len() != 4 {
                    return Err(Error::Validation("fine checkpoint needs 4 boosters".into()));
                }
                boosters.boosters.iter().try_for_each(Booster::validate)
            }
        }
    }
}

pub fn write_booster(ckpt: &BoosterCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(ckpt)?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_booster(path: impl AsRef<Path>) -> Result<BoosterCheckpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: BoosterCheckpoint = serde_json::from_str(&text)?;
    ckpt.validate()?;
    Ok(ckpt)
}
