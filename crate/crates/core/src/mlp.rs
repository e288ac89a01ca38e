//! One-hidden-layer perceptron over sentence embeddings.
//!
//! `input -> dropout -> Linear(input, hidden) -> ReLU -> Linear(hidden, k)`
//! with `k = 2` (softmax, coarse) or `k = 4` (independent sigmoids, fine).
//! Trained with AdamW (decoupled weight decay, biases not decayed). The
//! post-ReLU hidden activations are the fine-tuned representation.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabelVector;
use crate::embedding_store::AlignedDataset;
use crate::metrics::{self, ClassScore};
use crate::{Error, Matrix, Result};

pub const DEFAULT_INPUT_DIM: usize = 768;
pub const DEFAULT_HIDDEN_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Two logits, softmax: `[non-hostile, hostile]`.
    Coarse,
    /// Four logits, sigmoid each: `[fake, hate, offensive, defamation]`.
    Fine,
}

impl Head {
    pub fn outputs(self) -> usize {
        match self {
            Head::Coarse => 2,
            Head::Fine => 4,
        }
    }

    /// Training target for a gold label under this head.
    pub fn target(self, y: &LabelVector) -> Vec<f64> {
        match self {
            Head::Coarse => {
                if y.is_hostile() {
                    vec![0.0, 1.0]
                } else {
                    vec![1.0, 0.0]
                }
            }
            Head::Fine => y.fine().iter().map(|&b| f64::from(u8::from(b))).collect(),
        }
    }
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(Head::Coarse),
            "fine" => Ok(Head::Fine),
            other => Err(Error::Config(format!("unknown head {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Network parameters. `w1` is `input_dim x hidden_dim` and `w2` is
/// `hidden_dim x k`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub head: Head,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout_p: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-5,
            weight_decay: 1e-3,
            dropout_p: 0.2,
            epochs: 5,
            batch_size: 32,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p must lie in [0, 1)");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0)
            || !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0)
        {
            return bad("adam betas must lie in (0, 1)");
        }
        if !(self.weight_decay >= 0.0) || !(self.adam_eps > 0.0) {
            return bad("weight_decay must be >= 0 and adam_eps > 0");
        }
        if self.batch_size == 0 || self.hidden_dim == 0 {
            return bad("batch_size and hidden_dim must be positive");
        }
        Ok(())
    }
}

/// Same shapes as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }

    fn scale(&mut self, s: f64) {
        for t in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// AdamW moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl OptState {
    pub fn new(model: &MlpModel) -> Self {
        OptState {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            t: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_weighted_f1: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

/// One training example for [`grad`]. `mask` holds per-input multipliers
/// (0 or `1/(1-p)`); `None` means no dropout.
#[derive(Debug, Clone)]
pub struct Example<'a> {
    pub x: &'a [f64],
    pub target: &'a [f64],
    pub mask: Option<&'a [f64]>,
}

pub fn init_mlp(head: Head, seed: u64) -> MlpModel {
    MlpModel::init(DEFAULT_INPUT_DIM, DEFAULT_HIDDEN_DIM, head, seed)
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect()
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, head: Head, seed: u64) -> Self {
        let k = head.outputs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = glorot(&mut rng, input_dim, hidden_dim);
        let w2 = glorot(&mut rng, hidden_dim, k);
        MlpModel {
            head,
            input_dim,
            hidden_dim,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; k],
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, head: Head) -> Self {
        let k = head.outputs();
        MlpModel {
            head,
            input_dim,
            hidden_dim,
            w1: vec![0.0; input_dim * hidden_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; hidden_dim * k],
            b2: vec![0.0; k],
        }
    }

    pub fn outputs(&self) -> usize {
        self.head.outputs()
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                found: len,
            });
        }
        Ok(())
    }

    /// Pre-activations, hidden activations and logits for one (already
    /// masked) input.
    fn propagate(&self, x: &[f64], mask: Option<&[f64]>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden_dim;
        let mut pre = self.b1.clone();
        for (i, &xi) in x.iter().enumerate() {
            let xi = match mask {
                Some(m) => xi * m[i],
                None => xi,
            };
            if xi == 0.0 {
                continue;
            }
            let row = &self.w1[i * h..(i + 1) * h];
            for (p, &w) in pre.iter_mut().zip(row) {
                *p += xi * w;
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let k = self.outputs();
        let mut logits = self.b2.clone();
        for (j, &hj) in hidden.iter().enumerate() {
            if hj == 0.0 {
                continue;
            }
            let row = &self.w2[j * k..(j + 1) * k];
            for (z, &w) in logits.iter_mut().zip(row) {
                *z += hj * w;
            }
        }
        (pre, hidden, logits)
    }

    pub fn forward_masked(&self, x: &[f64], mask: Option<&[f64]>) -> Result<ForwardOutput> {
        self.check_input(x.len())?;
        if let Some(m) = mask {
            self.check_input(m.len())?;
        }
        let (_, hidden, logits) = self.propagate(x, mask);
        Ok(ForwardOutput { hidden, logits })
    }
}

/// Inverted-dropout multipliers: 0 with probability `p`, else `1/(1-p)`.
pub fn sample_mask(rng: &mut impl Rng, dim: usize, p: f64) -> Vec<f64> {
    if p == 0.0 {
        return vec![1.0; dim];
    }
    let keep = 1.0 / (1.0 - p);
    (0..dim)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

/// Forward pass. In train mode the input is masked by a fresh dropout
/// mask drawn from `rng`; in infer mode `dropout_p` and `rng` are unused.
pub fn forward(
    model: &MlpModel,
    x: &[f64],
    mode: Mode,
    dropout_p: f64,
    rng: &mut impl Rng,
) -> Result<ForwardOutput> {
    model.check_input(x.len())?;
    match mode {
        Mode::Infer => model.forward_masked(x, None),
        Mode::Train if dropout_p == 0.0 => model.forward_masked(x, None),
        Mode::Train => {
            let mask = sample_mask(rng, x.len(), dropout_p);
            model.forward_masked(x, Some(&mask))
        }
    }
}

fn log1p_exp_neg_abs(z: f64) -> f64 {
    (-z.abs()).exp().ln_1p()
}

/// Stable `ln(sum(exp(z)))`.
fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Coarse: softmax cross-entropy. Fine: mean sigmoid BCE over units, in
/// the form `max(z,0) - z*y + ln(1 + e^-|z|)`.
pub fn loss(logits: &[f64], target: &[f64], head: Head) -> f64 {
    match head {
        Head::Coarse => {
            let lse = log_sum_exp(logits);
            logits
                .iter()
                .zip(target)
                .map(|(&z, &y)| y * (lse - z))
                .sum()
        }
        Head::Fine => {
            let n = logits.len() as f64;
            logits
                .iter()
                .zip(target)
                .map(|(&z, &y)| z.max(0.0) - z * y + log1p_exp_neg_abs(z))
                .sum::<f64>()
                / n
        }
    }
}

/// d(loss)/d(logits) for one example.
fn logit_grad(logits: &[f64], target: &[f64], head: Head) -> Vec<f64> {
    match head {
        Head::Coarse => softmax(logits)
            .into_iter()
            .zip(target)
            .map(|(p, &y)| p - y)
            .collect(),
        Head::Fine => {
            let n = logits.len() as f64;
            logits
                .iter()
                .zip(target)
                .map(|(&z, &y)| (sigmoid(z) - y) / n)
                .collect()
        }
    }
}

/// Exact gradient of the mean batch loss. Returns the gradients and the
/// mean loss.
pub fn grad(model: &MlpModel, batch: &[Example<'_>]) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    let h = model.hidden_dim;
    let k = model.outputs();
    let mut g = Gradients::zeros_like(model);
    let mut total_loss = 0.0;
    let mut dpre = vec![0.0; h];
    for ex in batch {
        model.check_input(ex.x.len())?;
        if ex.target.len() != k {
            return Err(Error::Dimension {
                expected: k,
                found: ex.target.len(),
            });
        }
        let (pre, hidden, logits) = model.propagate(ex.x, ex.mask);
        total_loss += loss(&logits, ex.target, model.head);
        let dz = logit_grad(&logits, ex.target, model.head);

        for (c, &d) in dz.iter().enumerate() {
            g.b2[c] += d;
        }
        for j in 0..h {
            let w2_row = &model.w2[j * k..(j + 1) * k];
            if hidden[j] != 0.0 {
                let g_row = &mut g.w2[j * k..(j + 1) * k];
                for (gv, &d) in g_row.iter_mut().zip(&dz) {
                    *gv += hidden[j] * d;
                }
            }
            dpre[j] = if pre[j] > 0.0 {
                w2_row.iter().zip(&dz).map(|(&w, &d)| w * d).sum()
            } else {
                0.0
            };
            g.b1[j] += dpre[j];
        }
        for (i, &xi) in ex.x.iter().enumerate() {
            let xi = match ex.mask {
                Some(m) => xi * m[i],
                None => xi,
            };
            if xi == 0.0 {
                continue;
            }
            let g_row = &mut g.w1[i * h..(i + 1) * h];
            for (gv, &d) in g_row.iter_mut().zip(&dpre) {
                *gv += xi * d;
            }
        }
    }
    let n = batch.len() as f64;
    g.scale(1.0 / n);
    Ok((g, total_loss / n))
}

#[allow(clippy::too_many_arguments)]
fn adamw_tensor(
    theta: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &TrainConfig,
    bias_c1: f64,
    bias_c2: f64,
    decay: f64,
) {
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    for i in 0..theta.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] / bias_c1;
        let v_hat = v[i] / bias_c2;
        theta[i] -= cfg.learning_rate * (m_hat / (v_hat.sqrt() + cfg.adam_eps) + decay * theta[i]);
    }
}

/// One AdamW update in place. Weight decay applies to `w1` and `w2` only.
pub fn adamw_step(
    model: &mut MlpModel,
    grads: &Gradients,
    state: &mut OptState,
    cfg: &TrainConfig,
) {
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.adam_beta1.powi(t);
    let c2 = 1.0 - cfg.adam_beta2.powi(t);
    let wd = cfg.weight_decay;
    adamw_tensor(
        &mut model.w1,
        &grads.w1,
        &mut state.m.w1,
        &mut state.v.w1,
        cfg,
        c1,
        c2,
        wd,
    );
    adamw_tensor(
        &mut model.b1,
        &grads.b1,
        &mut state.m.b1,
        &mut state.v.b1,
        cfg,
        c1,
        c2,
        0.0,
    );
    adamw_tensor(
        &mut model.w2,
        &grads.w2,
        &mut state.m.w2,
        &mut state.v.w2,
        cfg,
        c1,
        c2,
        wd,
    );
    adamw_tensor(
        &mut model.b2,
        &grads.b2,
        &mut state.m.b2,
        &mut state.v.b2,
        cfg,
        c1,
        c2,
        0.0,
    );
}

/// Trains a fresh model. The fine head sees only gold-hostile rows; the
/// coarse head sees everything. Validation data is filtered the same way.
pub fn train_mlp(
    data: &AlignedDataset,
    val: Option<&AlignedDataset>,
    head: Head,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    cfg.validate()?;
    let restrict = |d: &AlignedDataset| match head {
        Head::Coarse => d.clone(),
        Head::Fine => d.hostile_only(),
    };
    let data = restrict(data);
    if data.is_empty() {
        return Err(Error::Validation(format!(
            "no training rows for the {head:?} head"
        )));
    }
    let val = val.map(restrict).filter(|v| !v.is_empty());

    let mut model = MlpModel::init(data.dim(), cfg.hidden_dim, head, cfg.seed);
    let mut state = OptState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let targets: Vec<Vec<f64>> = data.y.iter().map(|y| head.target(y)).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let masks: Vec<Option<Vec<f64>>> = chunk
                .iter()
                .map(|_| {
                    (cfg.dropout_p > 0.0).then(|| sample_mask(&mut rng, data.dim(), cfg.dropout_p))
                })
                .collect();
            let batch: Vec<Example<'_>> = chunk
                .iter()
                .zip(&masks)
                .map(|(&i, mask)| Example {
                    x: data.x.row(i),
                    target: &targets[i],
                    mask: mask.as_deref(),
                })
                .collect();
            let (g, batch_loss) = grad(&model, &batch)?;
            epoch_loss += batch_loss * chunk.len() as f64;
            adamw_step(&mut model, &g, &mut state, cfg);
        }
        history.train_loss.push(epoch_loss / data.len() as f64);
        history
            .val_weighted_f1
            .push(val.as_ref().map(|v| validation_f1(&model, v)).transpose()?);
    }
    if !model.is_finite() {
        return Err(Error::Validation(
            "training diverged to non-finite parameters".into(),
        ));
    }
    Ok((model, history))
}

fn validation_f1(model: &MlpModel, val: &AlignedDataset) -> Result<f64> {
    let probs = predict(model, &val.x)?;
    match model.head {
        Head::Coarse => {
            let pairs: Vec<(bool, bool)> = probs
                .iter_rows()
                .zip(&val.y)
                .map(|(p, y)| (p[1] > p[0], y.is_hostile()))
                .collect();
            let hostile = ClassScore::from_flags(pairs.iter().copied());
            let non_hostile = ClassScore::from_flags(pairs.iter().map(|&(p, g)| (!p, !g)));
            Ok(metrics::weighted_f1([&hostile, &non_hostile]))
        }
        Head::Fine => {
            let pred: Vec<[bool; 4]> = probs
                .iter_rows()
                .map(|p| [p[0] >= 0.5, p[1] >= 0.5, p[2] >= 0.5, p[3] >= 0.5])
                .collect();
            let gold: Vec<[bool; 4]> = val.y.iter().map(LabelVector::fine).collect();
            metrics::fine_weighted_f1(&pred, &gold)
        }
    }
}

/// Class probabilities per row: softmax for coarse, sigmoid for fine.
pub fn predict(model: &MlpModel, x: &Matrix) -> Result<Matrix> {
    model.check_input(x.cols())?;
    let k = model.outputs();
    let mut out = Matrix::zeros(x.rows(), k);
    for (i, row) in x.iter_rows().enumerate() {
        let (_, _, logits) = model.propagate(row, None);
        let probs = match model.head {
            Head::Coarse => softmax(&logits),
            Head::Fine => logits.iter().map(|&z| sigmoid(z)).collect(),
        };
        out.row_mut(i).copy_from_slice(&probs);
    }
    Ok(out)
}

/// Hidden-layer activations (inference mode) for every row.
pub fn extract_finetuned(model: &MlpModel, x: &Matrix) -> Result<Matrix> {
    model.check_input(x.cols())?;
    let mut out = Matrix::zeros(x.rows(), model.hidden_dim);
    for (i, row) in x.iter_rows().enumerate() {
        let (_, hidden, _) = model.propagate(row, None);
        out.row_mut(i).copy_from_slice(&hidden);
    }
    Ok(out)
}

const CKPT_MAGIC: &[u8; 4] = b"MLPK";

/// JSON header of a model checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub head: Head,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub outputs: usize,
    pub dtype: String,
    pub blocks: Vec<String>,
    pub config: TrainConfig,
    pub seed: u64,
}

/// Checkpoint bytes: `MLPK`, header length (u32 LE), JSON header, then the
/// `w1, b1, w2, b2` blocks as little-endian f64.
pub fn checkpoint_bytes(model: &MlpModel, cfg: &TrainConfig) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        head: model.head,
        input_dim: model.input_dim,
        hidden_dim: model.hidden_dim,
        outputs: model.outputs(),
        dtype: "f64le".into(),
        blocks: vec!["w1".into(), "b1".into(), "w2".into(), "b2".into()],
        config: *cfg,
        seed: cfg.seed,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in [&model.w1, &model.b1, &model.w2, &model.b2] {
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(MlpModel, CheckpointHeader)> {
    let fail = |offset: usize, message: &str| Error::Format {
        offset,
        message: message.to_string(),
    };
    if bytes.len() < 8 || &bytes[..4] != CKPT_MAGIC {
        return Err(fail(0, "not an MLP checkpoint"));
    }
    let hlen = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let body = 8 + hlen;
    if bytes.len() < body {
        return Err(fail(8, "truncated header"));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[8..body])?;
    if header.outputs != header.head.outputs() || header.dtype != "f64le" {
        return Err(fail(8, "inconsistent header"));
    }
    let (d, h, k) = (header.input_dim, header.hidden_dim, header.outputs);
    let sizes = [d * h, h, h * k, k];
    let expected = body + 8 * sizes.iter().sum::<usize>();
    if bytes.len() != expected {
        return Err(fail(
            bytes.len().min(expected),
            &format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let mut pos = body;
    let mut blocks = sizes.iter().map(|&n| {
        let block: Vec<f64> = bytes[pos..pos + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        pos += 8 * n;
        block
    });
    let model = MlpModel {
        head: header.head,
        input_dim: d,
        hidden_dim: h,
        w1: blocks.next().expect("w1"),
        b1: blocks.next().expect("b1"),
        w2: blocks.next().expect("w2"),
        b2: blocks.next().expect("b2"),
    };
    if !model.is_finite() {
        return Err(fail(body, "non-finite parameter"));
    }
    Ok((model, header))
}

pub fn write_checkpoint(model: &MlpModel, cfg: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = checkpoint_bytes(model, cfg)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(MlpModel, CheckpointHeader)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
