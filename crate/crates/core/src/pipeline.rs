//! End-to-end experiment runner. The five submissions are presets over one
//! engine:
//!
//! | preset | model |
//! |--------|-------|
//! | sub1   | MLP on raw embeddings, 5 epochs, dropout 0.2 |
//! | sub2   | MLP on raw embeddings, 10 epochs, dropout 0.3 |
//! | sub3   | boosted trees on sub1's hidden activations |
//! | sub4   | boosted trees on sub2's hidden activations |
//! | sub5   | F1-weighted ensemble of sub1..sub4 |
//!
//! Each submission writes into `<out>/<name>/`: prediction files per split,
//! model checkpoints, `report.json`, `report.txt` and `manifest.json`.
//! Nothing time- or host-dependent is written, so identical inputs give
//! byte-identical directories.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{parse_corpus, Corpus, LabelVector, Split};
use crate::embedding_store::{align, read_store, AlignedDataset};
use crate::ensemble::{self, EnsembleWeights, ModelOutputs};
use crate::gbdt::{self, BoosterCheckpoint, BoosterSet, GbdtConfig};
use crate::metrics::{self, evaluate_with, EvalReport, FineScope, ScoreRow};
use crate::mlp::{self, Head, MlpModel, TrainConfig};
use crate::predictions::{self, PredictionRow};
use crate::reference;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Submission {
    Sub1,
    Sub2,
    Sub3,
    Sub4,
    Sub5,
}

impl Submission {
    pub const ALL: [Submission; 5] = [
        Submission::Sub1,
        Submission::Sub2,
        Submission::Sub3,
        Submission::Sub4,
        Submission::Sub5,
    ];

    pub fn number(self) -> usize {
        self as usize + 1
    }

    /// MLP submission whose hidden layer feeds this boosted-tree submission.
    pub fn mlp_source(self) -> Option<Submission> {
        match self {
            Submission::Sub3 => Some(Submission::Sub1),
            Submission::Sub4 => Some(Submission::Sub2),
            _ => None,
        }
    }

    /// Epochs and dropout of the MLP presets.
    pub fn mlp_preset(self) -> Option<(usize, f64)> {
        match self {
            Submission::Sub1 => Some((5, 0.2)),
            Submission::Sub2 => Some((10, 0.3)),
            _ => None,
        }
    }
}

impl fmt::Display for Submission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sub{}", self.number())
    }
}

impl FromStr for Submission {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.trim().trim_start_matches("sub");
        match n {
            "1" => Ok(Submission::Sub1),
            "2" => Ok(Submission::Sub2),
            "3" => Ok(Submission::Sub3),
            "4" => Ok(Submission::Sub4),
            "5" => Ok(Submission::Sub5),
            _ => Err(Error::Config(format!("unknown submission {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPaths {
    pub train_tsv: PathBuf,
    pub train_emb: PathBuf,
    pub val_tsv: PathBuf,
    pub val_emb: PathBuf,
    #[serde(default)]
    pub test_tsv: Option<PathBuf>,
    #[serde(default)]
    pub test_emb: Option<PathBuf>,
}

impl DataPaths {
    fn inputs(&self) -> Vec<&Path> {
        let mut v = vec![
            self.train_tsv.as_path(),
            self.train_emb.as_path(),
            self.val_tsv.as_path(),
            self.val_emb.as_path(),
        ];
        if let (Some(t), Some(e)) = (&self.test_tsv, &self.test_emb) {
            v.push(t);
            v.push(e);
        }
        v
    }
}

/// Which MLP's hidden layer feeds the boosted trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinetunedSource {
    /// Coarse MLP for the coarse booster, fine MLP for the fine boosters.
    #[default]
    PerTask,
    Coarse,
    Fine,
}

/// Input features for the boosted-tree submissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    #[default]
    Finetuned,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpOverrides {
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub dropout_p: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub hidden_dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtOverrides {
    pub max_depth: Option<usize>,
    pub n_rounds: Option<usize>,
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub min_child_hessian: Option<f64>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataPaths,
    pub submission: Submission,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mlp: MlpOverrides,
    #[serde(default)]
    pub gbdt: GbdtOverrides,
    /// Apply the label-consistency cascade to ensemble output.
    #[serde(default = "default_true")]
    pub cascade: bool,
    #[serde(default)]
    pub fine_scope: FineScope,
    #[serde(default)]
    pub finetuned_source: FinetunedSource,
    #[serde(default)]
    pub representation: Representation,
    /// Run missing upstream submissions automatically. Does not affect
    /// results, so it stays out of the manifest.
    #[serde(default = "default_true", skip_serializing)]
    pub build_dependencies: bool,
    /// Output root; not part of the manifest.
    #[serde(default, skip_serializing)]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(data: DataPaths, submission: Submission, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            data,
            submission,
            seed: 0,
            mlp: MlpOverrides::default(),
            gbdt: GbdtOverrides::default(),
            cascade: true,
            fine_scope: FineScope::All,
            finetuned_source: FinetunedSource::PerTask,
            representation: Representation::Finetuned,
            build_dependencies: true,
            out_dir: out_dir.into(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Directory name of this run under `out_dir`.
    pub fn run_name(&self) -> String {
        match (self.submission.mlp_source(), self.representation) {
            (Some(_), Representation::Raw) => format!("{}-raw", self.submission),
            _ => self.submission.to_string(),
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(self.run_name())
    }

    /// Effective MLP settings for `head` under the given MLP preset.
    pub fn train_config(&self, preset: Submission, head: Head) -> TrainConfig {
        let (epochs, dropout) = preset.mlp_preset().unwrap_or((5, 0.2));
        let o = &self.mlp;
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
            weight_decay: o.weight_decay.unwrap_or(d.weight_decay),
            dropout_p: o.dropout_p.unwrap_or(dropout),
            epochs: o.epochs.unwrap_or(epochs),
            batch_size: o.batch_size.unwrap_or(d.batch_size),
            hidden_dim: o.hidden_dim.unwrap_or(d.hidden_dim),
            seed: match head {
                Head::Coarse => self.seed,
                Head::Fine => self.seed.wrapping_add(1),
            },
            ..d
        }
    }

    pub fn gbdt_config(&self) -> GbdtConfig {
        let o = &self.gbdt;
        let d = GbdtConfig::default();
        GbdtConfig {
            max_depth: o.max_depth.unwrap_or(d.max_depth),
            n_rounds: o.n_rounds.unwrap_or(d.n_rounds),
            eta: o.eta.unwrap_or(d.eta),
            lambda: o.lambda.unwrap_or(d.lambda),
            gamma: o.gamma.unwrap_or(d.gamma),
            min_child_hessian: o.min_child_hessian.unwrap_or(d.min_child_hessian),
            seed: self.seed,
        }
    }

    fn with_submission(&self, submission: Submission) -> Self {
        ExperimentConfig {
            submission,
            representation: Representation::Finetuned,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.test_tsv.is_some() != self.data.test_emb.is_some() {
            return Err(Error::Config(
                "test_tsv and test_emb must be given together".into(),
            ));
        }
        for p in self.data.inputs() {
            if !p.is_file() {
                return Err(Error::MissingInput(p.display().to_string()));
            }
        }
        for preset in [Submission::Sub1, Submission::Sub2] {
            self.train_config(preset, Head::Coarse).validate()?;
        }
        self.gbdt_config().validate()
    }
}

/// Aligned data for all splits.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: AlignedDataset,
    pub validation: AlignedDataset,
    pub test: Option<AlignedDataset>,
}

fn load_split(tsv: &Path, emb: &Path, split: Split, dim: Option<usize>) -> Result<AlignedDataset> {
    let corpus: Corpus = parse_corpus(tsv, split)?;
    let store = read_store(emb)?;
    align(&corpus, &store, dim)
}

pub fn load_data(paths: &DataPaths) -> Result<ExperimentData> {
    let train = load_split(&paths.train_tsv, &paths.train_emb, Split::Train, None)?;
    let dim = Some(train.dim());
    let validation = load_split(&paths.val_tsv, &paths.val_emb, Split::Validation, dim)?;
    let test = match (&paths.test_tsv, &paths.test_emb) {
        (Some(t), Some(e)) => Some(load_split(t, e, Split::Test, dim)?),
        _ => None,
    };
    Ok(ExperimentData {
        train,
        validation,
        test,
    })
}

/// Combines coarse and fine probabilities into one prediction row: hostile
/// iff `p_hostile > p_non_hostile`; a hostile row keeps every fine class
/// with probability >= 0.5, or the most probable one if none qualifies.
pub fn two_stage_row(id: &str, p_non_hostile: f64, fine: &[f64]) -> PredictionRow {
    let mut bits = [0u8; 5];
    if 1.0 - p_non_hostile > p_non_hostile {
        for c in 0..4 {
            bits[c + 1] = u8::from(fine[c] >= 0.5);
        }
        if bits[1..].iter().all(|&b| b == 0) {
            let mut best = 0;
            for c in 1..4 {
                if fine[c] > fine[best] {
                    best = c;
                }
            }
            bits[best + 1] = 1;
        }
    } else {
        bits[0] = 1;
    }
    PredictionRow {
        id: id.to_string(),
        bits,
        scores: [p_non_hostile, fine[0], fine[1], fine[2], fine[3]],
    }
}

fn rows_from_probs(
    ids: &[String],
    coarse_non_hostile: &[f64],
    fine: &Matrix,
) -> Vec<PredictionRow> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| two_stage_row(id, coarse_non_hostile[i], fine.row(i)))
        .collect()
}

fn labels_of(rows: &[PredictionRow]) -> Result<Vec<LabelVector>> {
    rows.iter().map(PredictionRow::labels).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub submission: Submission,
    pub name: String,
    pub fine_scope: FineScope,
    pub validation: EvalReport,
    pub test: Option<EvalReport>,
    /// Model settings in effect (training configs, booster configs,
    /// ensemble weights).
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: String,
    pub config: ExperimentConfig,
    /// sha256 of each input file, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    /// `run_id` of every upstream run this one consumed.
    pub dependencies: BTreeMap<String, String>,
    /// sha256 of each artifact in the run directory.
    pub artifacts: BTreeMap<String, String>,
    /// sha256 over config, inputs and dependencies.
    pub run_id: String,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: RunReport,
    pub manifest: Manifest,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct RunWriter {
    dir: PathBuf,
    files: BTreeMap<String, PathBuf>,
}

impl RunWriter {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(RunWriter {
            dir,
            files: BTreeMap::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.insert(name.to_string(), p.clone());
        p
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    }

    fn finish(
        mut self,
        cfg: &ExperimentConfig,
        report: RunReport,
        dependencies: BTreeMap<String, String>,
    ) -> Result<RunArtifacts> {
        let report_json = serde_json::to_string_pretty(&report)? + "\n";
        self.write_bytes("report.json", report_json.as_bytes())?;
        let mut rows = vec![(
            format!("{} validation", report.name),
            report.validation.row(),
        )];
        if let Some(t) = &report.test {
            rows.push((format!("{} test", report.name), t.row()));
        }
        self.write_bytes("report.txt", metrics::report_table(&rows)?.as_bytes())?;

        let mut inputs = BTreeMap::new();
        for p in cfg.data.inputs() {
            inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        let mut artifacts = BTreeMap::new();
        for (name, p) in &self.files {
            artifacts.insert(name.clone(), sha256_file(p)?);
        }
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(cfg)?);
        hasher.update(serde_json::to_vec(&inputs)?);
        hasher.update(serde_json::to_vec(&dependencies)?);
        let manifest = Manifest {
            run: report.name.clone(),
            config: cfg.clone(),
            inputs,
            dependencies,
            artifacts,
            run_id: hex::encode(hasher.finalize()),
        };
        let manifest_path = self.dir.join("manifest.json");
        fs::write(
            &manifest_path,
            serde_json::to_string_pretty(&manifest)? + "\n",
        )
        .map_err(|e| Error::io(&manifest_path, e))?;
        let mut files: Vec<PathBuf> = self.files.into_values().collect();
        files.push(manifest_path);
        Ok(RunArtifacts {
            dir: self.dir,
            files,
            report,
            manifest,
        })
    }
}

fn evaluate_split(
    rows: &[PredictionRow],
    data: &AlignedDataset,
    scope: FineScope,
) -> Result<EvalReport> {
    evaluate_with(&labels_of(rows)?, &data.y, scope)
}

/// Runs one submission, building upstream submissions first when needed.
pub fn run_submission(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let data = load_data(&cfg.data)?;
    run_with_data(cfg, &data)
}

/// Like [`run_submission`] but reuses already loaded data.
pub fn run_with_data(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<RunArtifacts> {
    match cfg.submission {
        Submission::Sub1 | Submission::Sub2 => run_mlp(cfg, data),
        Submission::Sub3 | Submission::Sub4 => run_gbdt(cfg, data),
        Submission::Sub5 => run_ensemble(cfg, data),
    }
}

fn run_mlp(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<RunArtifacts> {
    let mut w = RunWriter::new(cfg.run_dir())?;
    let coarse_cfg = cfg.train_config(cfg.submission, Head::Coarse);
    let fine_cfg = cfg.train_config(cfg.submission, Head::Fine);
    let (coarse, coarse_hist) = mlp::train_mlp(
        &data.train,
        Some(&data.validation),
        Head::Coarse,
        &coarse_cfg,
    )?;
    let (fine, fine_hist) =
        mlp::train_mlp(&data.train, Some(&data.validation), Head::Fine, &fine_cfg)?;
    w.write_bytes(
        "mlp_coarse.ckpt",
        &mlp::checkpoint_bytes(&coarse, &coarse_cfg)?,
    )?;
    w.write_bytes("mlp_fine.ckpt", &mlp::checkpoint_bytes(&fine, &fine_cfg)?)?;

    let predict = |d: &AlignedDataset| -> Result<Vec<PredictionRow>> {
        let pc = mlp::predict(&coarse, &d.x)?;
        let pf = mlp::predict(&fine, &d.x)?;
        Ok(rows_from_probs(&d.ids, &pc.column(0), &pf))
    };
    let (validation, test) = predict_and_score(&mut w, cfg, data, predict)?;
    let metadata = serde_json::json!({
        "mlp_coarse": coarse_cfg,
        "mlp_fine": fine_cfg,
        "history_coarse": coarse_hist,
        "history_fine": fine_hist,
    });
    let report = RunReport {
        submission: cfg.submission,
        name: cfg.run_name(),
        fine_scope: cfg.fine_scope,
        validation,
        test,
        metadata,
    };
    w.finish(cfg, report, BTreeMap::new())
}

fn predict_and_score(
    w: &mut RunWriter,
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    predict: impl Fn(&AlignedDataset) -> Result<Vec<PredictionRow>>,
) -> Result<(EvalReport, Option<EvalReport>)> {
    let val_rows = predict(&data.validation)?;
    predictions::write_predictions(&val_rows, w.path("validation.predictions.jsonl"))?;
    let validation = evaluate_split(&val_rows, &data.validation, cfg.fine_scope)?;
    let test = match &data.test {
        Some(t) => {
            let rows = predict(t)?;
            predictions::write_predictions(&rows, w.path("test.predictions.jsonl"))?;
            Some(evaluate_split(&rows, t, cfg.fine_scope)?)
        }
        None => None,
    };
    Ok((validation, test))
}

/// Loads a finished upstream run, or runs it when absent or stale.
fn ensure_run(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<Manifest> {
    let dir = cfg.run_dir();
    let manifest_path = dir.join("manifest.json");
    if manifest_path.is_file() {
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        if let Ok(m) = serde_json::from_str::<Manifest>(&text) {
            let mut expected = cfg.clone();
            expected.out_dir = PathBuf::new();
            expected.build_dependencies = true;
            let all_present = m.artifacts.keys().all(|a| dir.join(a).is_file());
            if m.config == expected && all_present {
                return Ok(m);
            }
        }
    }
    if !cfg.build_dependencies {
        return Err(Error::MissingInput(format!(
            "{} has no usable artifacts in {} (dependency building disabled)",
            cfg.run_name(),
            dir.display()
        )));
    }
    Ok(run_with_data(cfg, data)?.manifest)
}

fn run_gbdt(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<RunArtifacts> {
    let source = cfg
        .submission
        .mlp_source()
        .expect("boosted-tree submission");
    let gcfg = cfg.gbdt_config();
    let mut deps = BTreeMap::new();

    // features for (coarse booster, fine boosters)
    type Featurize = Box<dyn Fn(&Matrix) -> Result<Matrix>>;
    let (coarse_feat, fine_feat): (Featurize, Featurize) = match cfg.representation {
        Representation::Raw => (Box::new(|x| Ok(x.clone())), Box::new(|x| Ok(x.clone()))),
        Representation::Finetuned => {
            let src_cfg = cfg.with_submission(source);
            let manifest = ensure_run(&src_cfg, data)?;
            deps.insert(manifest.run.clone(), manifest.run_id.clone());
            let src_dir = src_cfg.run_dir();
            let (coarse_mlp, _) = mlp::read_checkpoint(src_dir.join("mlp_coarse.ckpt"))?;
            let (fine_mlp, _) = mlp::read_checkpoint(src_dir.join("mlp_fine.ckpt"))?;
            let (c, f): (MlpModel, MlpModel) = match cfg.finetuned_source {
                FinetunedSource::PerTask => (coarse_mlp, fine_mlp),
                FinetunedSource::Coarse => (coarse_mlp.clone(), coarse_mlp),
                FinetunedSource::Fine => (fine_mlp.clone(), fine_mlp),
            };
            (
                Box::new(move |x| mlp::extract_finetuned(&c, x)),
                Box::new(move |x| mlp::extract_finetuned(&f, x)),
            )
        }
    };

    let mut w = RunWriter::new(cfg.run_dir())?;
    let coarse_y: Vec<bool> = data.train.y.iter().map(LabelVector::is_hostile).collect();
    let coarse = gbdt::fit_booster(&coarse_feat(&data.train.x)?, &coarse_y, &gcfg)?;
    let hostile = data.train.hostile_only();
    let fine_y: Vec<[bool; 4]> = hostile.y.iter().map(LabelVector::fine).collect();
    let fine: BoosterSet = gbdt::fit_one_vs_rest(&fine_feat(&hostile.x)?, &fine_y, &gcfg)?;

    let coarse_ckpt = BoosterCheckpoint::Coarse { booster: coarse };
    let fine_ckpt = BoosterCheckpoint::Fine { boosters: fine };
    gbdt::write_booster(&coarse_ckpt, w.path("gbdt_coarse.json"))?;
    gbdt::write_booster(&fine_ckpt, w.path("gbdt_fine.json"))?;
    let (BoosterCheckpoint::Coarse { booster: coarse }, BoosterCheckpoint::Fine { boosters: fine }) =
        (&coarse_ckpt, &fine_ckpt)
    else {
        unreachable!()
    };

    let predict = |d: &AlignedDataset| -> Result<Vec<PredictionRow>> {
        let p_hostile = gbdt::predict_proba(coarse, &coarse_feat(&d.x)?)?;
        let p_non: Vec<f64> = p_hostile.iter().map(|p| 1.0 - p).collect();
        let pf = fine.predict_proba(&fine_feat(&d.x)?)?;
        Ok(rows_from_probs(&d.ids, &p_non, &pf))
    };
    let (validation, test) = predict_and_score(&mut w, cfg, data, predict)?;
    let metadata = serde_json::json!({
        "gbdt": gcfg,
        "representation": cfg.representation,
        "finetuned_source": cfg.finetuned_source,
        "mlp_source": source,
    });
    let report = RunReport {
        submission: cfg.submission,
        name: cfg.run_name(),
        fine_scope: cfg.fine_scope,
        validation,
        test,
        metadata,
    };
    w.finish(cfg, report, deps)
}

fn outputs_from(rows: &[PredictionRow], ids: &[String], model_id: &str) -> Result<ModelOutputs> {
    if rows.len() != ids.len() || rows.iter().zip(ids).any(|(r, id)| &r.id != id) {
        return Err(Error::Integrity(format!(
            "predictions of {model_id} are not aligned with the corpus"
        )));
    }
    Ok(ModelOutputs {
        model_id: model_id.to_string(),
        rows: rows.iter().map(PredictionRow::bools).collect(),
    })
}

fn run_ensemble(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<RunArtifacts> {
    let members = [
        Submission::Sub1,
        Submission::Sub2,
        Submission::Sub3,
        Submission::Sub4,
    ];
    let mut deps = BTreeMap::new();
    let mut val_outputs = Vec::new();
    let mut test_outputs = Vec::new();
    let mut ff1 = Vec::new();
    let gold_fine: Vec<[bool; 4]> = data.validation.y.iter().map(LabelVector::fine).collect();
    for s in members {
        let member_cfg = cfg.with_submission(s);
        let manifest = ensure_run(&member_cfg, data)?;
        deps.insert(manifest.run.clone(), manifest.run_id.clone());
        let dir = member_cfg.run_dir();
        let val_rows = predictions::read_predictions(dir.join("validation.predictions.jsonl"))?;
        let out = outputs_from(&val_rows, &data.validation.ids, &s.to_string())?;
        let pred_fine: Vec<[bool; 4]> = out.rows.iter().map(|b| [b[1], b[2], b[3], b[4]]).collect();
        ff1.push(ensemble::fine_weight(&pred_fine, &gold_fine)?);
        val_outputs.push(out);
        if let Some(t) = &data.test {
            let rows = predictions::read_predictions(dir.join("test.predictions.jsonl"))?;
            test_outputs.push(outputs_from(&rows, &t.ids, &s.to_string())?);
        }
    }
    let weights = EnsembleWeights { ff1 };

    let mut w = RunWriter::new(cfg.run_dir())?;
    let mut score =
        |outputs: &[ModelOutputs], d: &AlignedDataset, name: &str| -> Result<EvalReport> {
            let r = ensemble::combine(outputs, &weights, cfg.cascade)?;
            let rows: Vec<PredictionRow> = d
                .ids
                .iter()
                .zip(r.scores.iter().zip(&r.bits))
                .map(|(id, (s, b))| PredictionRow {
                    id: id.clone(),
                    bits: b.map(u8::from),
                    scores: *s,
                })
                .collect();
            predictions::write_predictions(&rows, w.path(name))?;
            let labels = r
                .label_vectors()
                .into_iter()
                .map(|v| {
                    v.ok_or_else(|| {
                        Error::Consistency(
                            "ensemble row violates the label invariant (cascade disabled)".into(),
                        )
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            evaluate_with(&labels, &d.y, cfg.fine_scope)
        };
    let validation = score(
        &val_outputs,
        &data.validation,
        "validation.predictions.jsonl",
    )?;
    let test = match &data.test {
        Some(t) => Some(score(&test_outputs, t, "test.predictions.jsonl")?),
        None => None,
    };
    w.write_bytes(
        "weights.json",
        (serde_json::to_string_pretty(&weights)? + "\n").as_bytes(),
    )?;
    let metadata = serde_json::json!({
        "members": members,
        "weights": weights.ff1,
        "cascade": cfg.cascade,
    });
    let report = RunReport {
        submission: Submission::Sub5,
        name: cfg.run_name(),
        fine_scope: cfg.fine_scope,
        validation,
        test,
        metadata,
    };
    w.finish(cfg, report, deps)
}

/// Measured and published rows for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub split: Split,
    pub rows: Vec<(String, ScoreRow)>,
}

impl ComparisonTable {
    pub fn render(&self) -> Result<String> {
        metrics::report_table(&self.rows)
    }
}

#[derive(Debug, Clone)]
pub struct Reproduction {
    pub runs: Vec<RunArtifacts>,
    pub validation: ComparisonTable,
    pub test: Option<ComparisonTable>,
}

/// Runs sub1..sub5 and pairs every result with the published numbers.
pub fn reproduce_all(base: &ExperimentConfig) -> Result<Reproduction> {
    base.validate()?;
    let data = load_data(&base.data)?;
    let mut runs = Vec::new();
    for s in Submission::ALL {
        runs.push(run_with_data(&base.with_submission(s), &data)?);
    }
    let table = |split: Split, published: &[ScoreRow; 5]| -> Option<ComparisonTable> {
        let mut rows = Vec::new();
        for (run, reference) in runs.iter().zip(published) {
            let measured = match split {
                Split::Test => run.report.test.as_ref()?,
                _ => &run.report.validation,
            };
            rows.push((run.report.name.clone(), measured.row()));
            rows.push((format!("{} (published)", run.report.name), *reference));
        }
        Some(ComparisonTable { split, rows })
    };
    let validation = table(Split::Validation, &reference::VALIDATION_SUBMISSIONS)
        .expect("validation reports always exist");
    let test = table(Split::Test, &reference::TEST_SUBMISSIONS);
    Ok(Reproduction {
        runs,
        validation,
        test,
    })
}
