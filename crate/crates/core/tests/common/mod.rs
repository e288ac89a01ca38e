//! Independent reference implementations and fixtures shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hostility_core::corpus::LabelVector;
use hostility_core::embedding_store::{EmbeddingRecord, EmbeddingStore};
use hostility_core::gbdt::TreeNode;
use hostility_core::metrics::FineScope;
use hostility_core::mlp::{self, Example, Head, MlpModel};
use hostility_core::Matrix;

// ---------------------------------------------------------------- MLP

/// A random `16 -> 8 -> k` network and a small batch whose hidden
/// pre-activations all stay at least `margin` away from the ReLU kink.
pub struct GradFixture {
    pub model: MlpModel,
    pub xs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub masks: Vec<Option<Vec<f64>>>,
}

impl GradFixture {
    pub fn examples(&self) -> Vec<Example<'_>> {
        (0..self.xs.len())
            .map(|i| Example {
                x: &self.xs[i],
                target: &self.targets[i],
                mask: self.masks[i].as_deref(),
            })
            .collect()
    }
}

fn pre_activations(model: &MlpModel, x: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    let h = model.hidden_dim;
    (0..h)
        .map(|j| {
            let mut s = model.b1[j];
            for i in 0..model.input_dim {
                let m = mask.map_or(1.0, |m| m[i]);
                s += x[i] * m * model.w1[i * h + j];
            }
            s
        })
        .collect()
}

pub fn grad_fixture(rng: &mut ChaCha8Rng, head: Head, margin: f64) -> GradFixture {
    loop {
        let mut model = MlpModel::init(16, 8, head, rng.gen());
        for b in model.b1.iter_mut().chain(model.b2.iter_mut()) {
            *b = rng.gen_range(-0.5..0.5);
        }
        let n = rng.gen_range(1..=4);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..n)
            .map(|_| match head {
                Head::Coarse => {
                    if rng.gen() {
                        vec![1.0, 0.0]
                    } else {
                        vec![0.0, 1.0]
                    }
                }
                Head::Fine => (0..4)
                    .map(|_| f64::from(u8::from(rng.gen::<bool>())))
                    .collect(),
            })
            .collect();
        let masks: Vec<Option<Vec<f64>>> = (0..n)
            .map(|_| rng.gen_bool(0.5).then(|| mlp::sample_mask(rng, 16, 0.2)))
            .collect();
        let clear = xs.iter().zip(&masks).all(|(x, m)| {
            pre_activations(&model, x, m.as_deref())
                .iter()
                .all(|p| p.abs() >= margin)
        });
        if clear {
            return GradFixture {
                model,
                xs,
                targets,
                masks,
            };
        }
    }
}

/// Mean batch loss computed straight from the definition.
pub fn batch_loss(model: &MlpModel, f: &GradFixture) -> f64 {
    let mut total = 0.0;
    for i in 0..f.xs.len() {
        let out = model
            .forward_masked(&f.xs[i], f.masks[i].as_deref())
            .unwrap();
        total += mlp::loss(&out.logits, &f.targets[i], model.head);
    }
    total / f.xs.len() as f64
}

type ParamMut = fn(&mut MlpModel) -> &mut Vec<f64>;

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)` over
/// every parameter, using central differences with step `eps`.
pub fn max_grad_rel_error(f: &GradFixture, eps: f64, floor: f64) -> f64 {
    let (g, _) = mlp::grad(&f.model, &f.examples()).unwrap();
    let mut worst: f64 = 0.0;
    let tensors: [(&[f64], ParamMut); 4] = [
        (&g.w1, |m| &mut m.w1),
        (&g.b1, |m| &mut m.b1),
        (&g.w2, |m| &mut m.w2),
        (&g.b2, |m| &mut m.b2),
    ];
    for (analytic, param) in tensors {
        for (k, &a) in analytic.iter().enumerate() {
            let mut plus = f.model.clone();
            param(&mut plus)[k] += eps;
            let mut minus = f.model.clone();
            param(&mut minus)[k] -= eps;
            let numeric = (batch_loss(&plus, f) - batch_loss(&minus, f)) / (2.0 * eps);
            let denom = a.abs().max(numeric.abs()).max(floor);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}

/// Strictly linearly separable two-class data: Gaussian noise orthogonal
/// to a planted unit direction, plus a signed offset of at least `gap`
/// along it. Returns features and labels (true = class 1).
pub fn separable_data(
    rng: &mut ChaCha8Rng,
    n: usize,
    dim: usize,
    gap: f64,
    direction: &[f64],
) -> (Matrix, Vec<bool>) {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.gen::<bool>();
        let mut x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let along: f64 = x.iter().zip(direction).map(|(a, b)| a * b).sum();
        let offset = (gap + along.abs()) * if y { 1.0 } else { -1.0 };
        for (xi, ui) in x.iter_mut().zip(direction) {
            *xi += (offset - along) * ui;
        }
        rows.push(x);
        labels.push(y);
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

pub fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

/// Perceptron run to convergence; `Some(epochs)` certifies the data is
/// linearly separable.
pub fn perceptron_separates(x: &Matrix, y: &[bool], max_epochs: usize) -> Option<usize> {
    let mut w = vec![0.0; x.cols()];
    let mut b = 0.0;
    for epoch in 1..=max_epochs {
        let mut mistakes = 0;
        for (row, &label) in x.iter_rows().zip(y) {
            let t = if label { 1.0 } else { -1.0 };
            let s: f64 = row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
            if t * s <= 0.0 {
                mistakes += 1;
                for (wi, xi) in w.iter_mut().zip(row) {
                    *wi += t * xi;
                }
                b += t;
            }
        }
        if mistakes == 0 {
            return Some(epoch);
        }
    }
    None
}

// ---------------------------------------------------------------- trees

/// Exhaustive split enumeration. At every node each feature's distinct
/// values are listed, each midpoint between neighbours is tried and the
/// child sums are recomputed from scratch. Returns the best split as
/// `(feature, threshold)` with ties to the lowest feature, then the lowest
/// threshold.
fn oracle_best_split(
    x: &Matrix,
    g: &[f64],
    h: &[f64],
    rows: &[usize],
    lambda: f64,
    gamma: f64,
    min_child_hessian: f64,
) -> Option<(usize, f64)> {
    let score = |gs: f64, hs: f64| gs * gs / (hs + lambda);
    let g_all: f64 = rows.iter().map(|&r| g[r]).sum();
    let h_all: f64 = rows.iter().map(|&r| h[r]).sum();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.cols() {
        let mut values: Vec<f64> = rows.iter().map(|&r| x.get(r, f)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for pair in values.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for &r in rows {
                if x.get(r, f) < t {
                    gl += g[r];
                    hl += h[r];
                } else {
                    gr += g[r];
                    hr += h[r];
                }
            }
            if hl < min_child_hessian || hr < min_child_hessian {
                continue;
            }
            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(g_all, h_all)) - gamma;
            if gain <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, _, bg)) => gain > bg,
            };
            if better {
                best = Some((f, t, gain));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

pub fn oracle_tree(
    x: &Matrix,
    g: &[f64],
    h: &[f64],
    max_depth: usize,
    lambda: f64,
    gamma: f64,
    min_child_hessian: f64,
) -> TreeNode {
    fn build(
        x: &Matrix,
        g: &[f64],
        h: &[f64],
        rows: &[usize],
        depth: usize,
        p: (usize, f64, f64, f64),
    ) -> TreeNode {
        let (max_depth, lambda, gamma, mch) = p;
        let gs: f64 = rows.iter().map(|&r| g[r]).sum();
        let hs: f64 = rows.iter().map(|&r| h[r]).sum();
        let leaf = TreeNode::Leaf {
            weight: (-gs / (hs + lambda)).clamp(-10.0, 10.0),
        };
        if depth == max_depth {
            return leaf;
        }
        match oracle_best_split(x, g, h, rows, lambda, gamma, mch) {
            None => leaf,
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x.get(i, feature) < threshold);
                TreeNode::Split {
                    feature,
                    threshold,
                    left: Box::new(build(x, g, h, &l, depth + 1, p)),
                    right: Box::new(build(x, g, h, &r, depth + 1, p)),
                }
            }
        }
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    build(
        x,
        g,
        h,
        &rows,
        0,
        (max_depth, lambda, gamma, min_child_hessian),
    )
}

/// Same structure and thresholds, leaf weights within `tol`.
pub fn trees_match(a: &TreeNode, b: &TreeNode, tol: f64) -> bool {
    match (a, b) {
        (TreeNode::Leaf { weight: x }, TreeNode::Leaf { weight: y }) => (x - y).abs() <= tol,
        (
            TreeNode::Split {
                feature: f1,
                threshold: t1,
                left: l1,
                right: r1,
            },
            TreeNode::Split {
                feature: f2,
                threshold: t2,
                left: l2,
                right: r2,
            },
        ) => f1 == f2 && t1 == t2 && trees_match(l1, l2, tol) && trees_match(r1, r2, tol),
        _ => false,
    }
}

/// A small tree-fitting instance whose gradient statistics are dyadic, so
/// every partial sum is exact regardless of summation order.
pub struct TreeCase {
    pub x: Matrix,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
}

pub fn tree_case(rng: &mut ChaCha8Rng) -> TreeCase {
    let n = rng.gen_range(1..=32);
    let d = rng.gen_range(1..=3);
    let levels = rng.gen_range(2..=8);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| f64::from(rng.gen_range(0..levels)) * 0.5 - 1.0)
                .collect()
        })
        .collect();
    let g = (0..n)
        .map(|_| f64::from(rng.gen_range(-64..=64)) / 64.0)
        .collect();
    let h = (0..n)
        .map(|_| f64::from(rng.gen_range(1..=16)) / 64.0)
        .collect();
    TreeCase {
        x: Matrix::from_rows(&rows).unwrap(),
        g,
        h,
        max_depth: rng.gen_range(0..=2),
        lambda: *[0.25, 0.5, 1.0, 2.0].choose(rng).unwrap(),
        gamma: *[0.0, 0.0, 0.01, 0.125].choose(rng).unwrap(),
        min_child_hessian: *[0.0, 0.0625, 0.25, 1.0].choose(rng).unwrap(),
    }
}

// ---------------------------------------------------------------- ensemble

fn rational(v: f64) -> BigRational {
    BigRational::from_f64(v).expect("finite weight")
}

/// Exact per-class weighted mean and `>= 1/2` decision, optionally
/// followed by the label-consistency cascade evaluated on exact scores.
pub fn oracle_combine(
    rows: &[Vec<[bool; 5]>],
    weights: &[f64],
    cascade: bool,
) -> (Vec<[BigRational; 5]>, Vec<[bool; 5]>) {
    let n = rows[0].len();
    let total: BigRational = weights.iter().map(|&w| rational(w)).sum();
    let half = BigRational::new(1.into(), 2.into());
    let mut all_scores = Vec::with_capacity(n);
    let mut all_bits = Vec::with_capacity(n);
    #[allow(clippy::needless_range_loop)]
    for j in 0..n {
        let scores: [BigRational; 5] = std::array::from_fn(|c| {
            let mut on = BigRational::zero();
            for (m, &w) in weights.iter().enumerate() {
                if rows[m][j][c] {
                    on += rational(w);
                }
            }
            on / &total
        });
        let mut bits: [bool; 5] = std::array::from_fn(|c| scores[c] >= half);
        if cascade {
            bits = oracle_cascade(&scores, bits, &half);
        }
        all_scores.push(scores);
        all_bits.push(bits);
    }
    (all_scores, all_bits)
}

fn oracle_cascade(s: &[BigRational; 5], bits: [bool; 5], half: &BigRational) -> [bool; 5] {
    let one_hot = |c: usize| {
        let mut b = [false; 5];
        b[c] = true;
        b
    };
    // first index holding the maximum
    let argmax = |range: std::ops::Range<usize>| {
        let mut best = range.start;
        for c in range {
            if s[c].cmp(&s[best]) == Ordering::Greater {
                best = c;
            }
        }
        best
    };
    let any_hostile = bits[1..].iter().any(|&b| b);
    if !any_hostile {
        return if bits[0] {
            one_hot(0)
        } else {
            one_hot(argmax(0..5))
        };
    }
    if bits[0] {
        let top = argmax(1..5);
        if s[top] <= s[0] {
            return one_hot(0);
        }
    }
    let mut out = [false; 5];
    for c in 1..5 {
        out[c] = bits[c] && &s[c] >= half;
    }
    if out.iter().any(|&b| b) {
        out
    } else {
        one_hot(argmax(1..5))
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// `|a - exact| <= tol`, compared without rounding.
pub fn close_to_rational(a: f64, exact: &BigRational, tol: f64) -> bool {
    (rational(a) - exact).abs() <= rational(tol)
}

pub struct EnsembleCase {
    pub rows: Vec<Vec<[bool; 5]>>,
    pub weights: Vec<f64>,
}

pub fn ensemble_case(rng: &mut ChaCha8Rng) -> EnsembleCase {
    let m = rng.gen_range(1..=6);
    let n = rng.gen_range(1..=50);
    let weights: Vec<f64> = match rng.gen_range(0..3) {
        // equal weights force exact ties
        0 => vec![rng.gen_range(1e-6..1.0); m],
        // few distinct values repeat across models
        1 => {
            let pool = [rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0), 1e-6];
            (0..m).map(|_| *pool.choose(rng).unwrap()).collect()
        }
        _ => (0..m).map(|_| rng.gen_range(1e-6..1.0)).collect(),
    };
    let rows = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| std::array::from_fn(|_| rng.gen_bool(0.4)))
                .collect()
        })
        .collect();
    EnsembleCase { rows, weights }
}

// ---------------------------------------------------------------- metrics

/// `(tp, fp, fn)` from an explicit 2x2 confusion matrix.
fn confusion(pairs: &[(bool, bool)]) -> (usize, usize, usize) {
    let mut m = [[0usize; 2]; 2]; // [gold][pred]
    for &(p, g) in pairs {
        m[usize::from(g)][usize::from(p)] += 1;
    }
    (m[1][1], m[0][1], m[1][0])
}

fn oracle_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        0.0
    } else {
        (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
    }
}

fn oracle_weighted(classes: &[(usize, usize, usize)]) -> f64 {
    let support: usize = classes.iter().map(|c| c.0 + c.2).sum();
    if support == 0 {
        return 0.0;
    }
    classes
        .iter()
        .map(|&(tp, fp, fn_)| (tp + fn_) as f64 * oracle_f1(tp, fp, fn_))
        .sum::<f64>()
        / support as f64
}

/// Per-class confusion counts and weighted F1s, computed by explicit
/// iteration. Coarse classes: hostile, non-hostile. Fine classes: fake,
/// hate, offensive, defamation.
pub struct OracleReport {
    pub coarse: [(usize, usize, usize); 2],
    pub coarse_weighted: f64,
    pub fine: [(usize, usize, usize); 4],
    pub fine_weighted: f64,
}

pub fn oracle_evaluate(pred: &[[bool; 5]], gold: &[[bool; 5]], scope: FineScope) -> OracleReport {
    let hostile = |r: &[bool; 5]| r[1] || r[2] || r[3] || r[4];
    let mut h = Vec::new();
    let mut nh = Vec::new();
    for i in 0..pred.len() {
        h.push((hostile(&pred[i]), hostile(&gold[i])));
        nh.push((!hostile(&pred[i]), !hostile(&gold[i])));
    }
    let coarse = [confusion(&h), confusion(&nh)];
    let mut fine = [(0, 0, 0); 4];
    for c in 0..4 {
        let mut pairs = Vec::new();
        for i in 0..pred.len() {
            if scope == FineScope::GoldHostile && !hostile(&gold[i]) {
                continue;
            }
            pairs.push((pred[i][c + 1], gold[i][c + 1]));
        }
        fine[c] = confusion(&pairs);
    }
    OracleReport {
        coarse_weighted: oracle_weighted(&coarse),
        fine_weighted: oracle_weighted(&fine),
        coarse,
        fine,
    }
}

pub fn random_label_vector(rng: &mut ChaCha8Rng) -> LabelVector {
    if rng.gen_bool(0.4) {
        return LabelVector::NON_HOSTILE;
    }
    loop {
        let fine: [bool; 4] = std::array::from_fn(|_| rng.gen_bool(0.35));
        if let Ok(v) = LabelVector::from_hostile(fine) {
            return v;
        }
    }
}

// ---------------------------------------------------------------- EMB1

pub fn random_store(rng: &mut ChaCha8Rng) -> EmbeddingStore {
    let dim = rng.gen_range(1..=24);
    let count = rng.gen_range(0..=20);
    let alphabet: Vec<char> = "abcxyz019-_देशसच😡#".chars().collect();
    let mut records: Vec<EmbeddingRecord> = Vec::new();
    while records.len() < count {
        let len = rng.gen_range(0..=12);
        let id: String = (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect();
        if records.iter().any(|r| r.id == id) {
            continue;
        }
        let vector = (0..dim)
            .map(|_| loop {
                // arbitrary bit patterns, including subnormals and -0.0
                let v = f32::from_bits(rng.gen());
                if v.is_finite() {
                    break v;
                }
            })
            .collect();
        records.push(EmbeddingRecord { id, vector });
    }
    EmbeddingStore { dim, records }
}
