//! `hostility` command-line runner.
//!
//! Exit status: 0 on success, 2 when inputs or configuration are invalid,
//! 1 on any other failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hostility_core::corpus::{parse_corpus, split_stats, Split};
use hostility_core::embedding_store::{align, read_store, write_store, EmbeddingStore};
use hostility_core::ensemble::{self, EnsembleWeights, ModelOutputs};
use hostility_core::gbdt::{self, BoosterCheckpoint, GbdtConfig};
use hostility_core::metrics::{self, evaluate_with, FineScope};
use hostility_core::mlp::{self, Head, MlpModel, TrainConfig};
use hostility_core::pipeline::{
    self, two_stage_row, DataPaths, ExperimentConfig, FinetunedSource, Representation, Submission,
};
use hostility_core::predictions::{read_predictions, write_predictions, PredictionRow};
use hostility_core::synthetic::{generate, SyntheticSpec};
use hostility_core::{Error, Matrix};

#[derive(Parser)]
#[command(
    name = "hostility",
    version,
    about = "Two-stage hostile post detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print label counts of a corpus as JSON.
    Stats {
        corpus: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Train one MLP head and write a checkpoint.
    TrainMlp(TrainMlpArgs),
    /// Write the hidden-layer activations of an MLP as an embedding store.
    ExtractFinetuned {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train boosted trees for one head and write them as JSON.
    TrainGbdt(TrainGbdtArgs),
    /// Predict with a coarse and a fine model (MLP checkpoints or booster JSON).
    Predict {
        #[arg(long)]
        coarse: PathBuf,
        #[arg(long)]
        fine: PathBuf,
        /// Features for every post to predict.
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine prediction files with per-model weights.
    Ensemble {
        /// Prediction files, two or more.
        #[arg(long = "pred", required = true, num_args = 1..)]
        preds: Vec<PathBuf>,
        /// JSON array of weights, or `{"ff1": [...]}`.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_cascade: bool,
    },
    /// Score predictions against a gold corpus.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Score fine labels only on gold-hostile posts.
        #[arg(long)]
        hostile_only: bool,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run one submission end to end.
    Run {
        #[arg(long)]
        submission: String,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Run all five submissions and compare with the published tables.
    ReproduceAll {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Write the bundled synthetic corpus (TSV + EMB1 per split).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dim: Option<usize>,
        /// Shift per coordinate along each planted label direction.
        #[arg(long)]
        signal: Option<f64>,
    },
}

#[derive(Args)]
struct TrainMlpArgs {
    #[arg(long)]
    train_tsv: PathBuf,
    #[arg(long)]
    train_emb: PathBuf,
    #[arg(long, value_enum)]
    head: HeadArg,
    /// JSON TrainConfig; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainGbdtArgs {
    #[arg(long)]
    train_tsv: PathBuf,
    #[arg(long)]
    train_emb: PathBuf,
    #[arg(long, value_enum)]
    head: HeadArg,
    /// JSON GbdtConfig; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadArg {
    Coarse,
    Fine,
}

impl From<HeadArg> for Head {
    fn from(h: HeadArg) -> Head {
        match h {
            HeadArg::Coarse => Head::Coarse,
            HeadArg::Fine => Head::Fine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    PerTask,
    Coarse,
    Fine,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON ExperimentConfig. Command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding train/val[/test] `.tsv` and `.emb1` files.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave ensemble rows that break the label invariant unrepaired.
    #[arg(long)]
    no_cascade: bool,
    /// Fail instead of running missing upstream submissions.
    #[arg(long)]
    no_cascade_build: bool,
    /// Score fine labels only on gold-hostile posts.
    #[arg(long)]
    hostile_only: bool,
    #[arg(long, value_enum)]
    finetuned_source: Option<SourceArg>,
    /// Boosted trees on raw embeddings instead of MLP hidden states.
    #[arg(long)]
    raw: bool,
}

impl ExperimentArgs {
    fn resolve(&self, submission: Submission) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.data) {
            (Some(path), _) => {
                let mut cfg = ExperimentConfig::from_json_file(path)?;
                cfg.submission = submission;
                cfg
            }
            (None, Some(dir)) => ExperimentConfig::new(data_dir(dir), submission, "out"),
            (None, None) => {
                return Err(Error::Config("either --config or --data is required".into()).into())
            }
        };
        if let (Some(_), Some(dir)) = (&self.config, &self.data) {
            cfg.data = data_dir(dir);
        }
        if cfg.out_dir.as_os_str().is_empty() {
            cfg.out_dir = "out".into();
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.no_cascade {
            cfg.cascade = false;
        }
        if self.no_cascade_build {
            cfg.build_dependencies = false;
        }
        if self.hostile_only {
            cfg.fine_scope = FineScope::GoldHostile;
        }
        if let Some(s) = self.finetuned_source {
            cfg.finetuned_source = match s {
                SourceArg::PerTask => FinetunedSource::PerTask,
                SourceArg::Coarse => FinetunedSource::Coarse,
                SourceArg::Fine => FinetunedSource::Fine,
            };
        }
        if self.raw {
            cfg.representation = Representation::Raw;
        }
        Ok(cfg)
    }
}

fn data_dir(dir: &Path) -> DataPaths {
    let test_tsv = dir.join("test.tsv");
    let test_emb = dir.join("test.emb1");
    let has_test = test_tsv.is_file() && test_emb.is_file();
    DataPaths {
        train_tsv: dir.join("train.tsv"),
        train_emb: dir.join("train.emb1"),
        val_tsv: dir.join("val.tsv"),
        val_emb: dir.join("val.emb1"),
        test_tsv: has_test.then_some(test_tsv),
        test_emb: has_test.then_some(test_emb),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

enum Model {
    Mlp(MlpModel),
    Trees(BoosterCheckpoint),
}

fn load_model(path: &Path) -> anyhow::Result<Model> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(b"MLPK") {
        Ok(Model::Mlp(mlp::checkpoint_from_bytes(&bytes)?.0))
    } else {
        Ok(Model::Trees(gbdt::read_booster(path)?))
    }
}

/// Non-hostile probability per row.
fn coarse_probs(model: &Model, x: &Matrix) -> anyhow::Result<Vec<f64>> {
    match model {
        Model::Mlp(m) if m.head == Head::Coarse => Ok(mlp::predict(m, x)?.column(0)),
        Model::Trees(BoosterCheckpoint::Coarse { booster }) => Ok(gbdt::predict_proba(booster, x)?
            .into_iter()
            .map(|p| 1.0 - p)
            .collect()),
        _ => bail!(Error::Config("--coarse expects a coarse model".into())),
    }
}

fn fine_probs(model: &Model, x: &Matrix) -> anyhow::Result<Matrix> {
    match model {
        Model::Mlp(m) if m.head == Head::Fine => Ok(mlp::predict(m, x)?),
        Model::Trees(BoosterCheckpoint::Fine { boosters }) => Ok(boosters.predict_proba(x)?),
        _ => bail!(Error::Config("--fine expects a fine model".into())),
    }
}

fn load_train(
    tsv: &Path,
    emb: &Path,
) -> anyhow::Result<hostility_core::embedding_store::AlignedDataset> {
    let corpus = parse_corpus(tsv, Split::Train)?;
    let store = read_store(emb)?;
    Ok(align(&corpus, &store, None)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Stats { corpus, split } => {
            let split: Split = split.parse()?;
            print_json(&split_stats(&parse_corpus(corpus, split)?))
        }
        Command::TrainMlp(a) => {
            let mut cfg: TrainConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => TrainConfig::default(),
            };
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            let data = load_train(&a.train_tsv, &a.train_emb)?;
            let (model, history) = mlp::train_mlp(&data, None, a.head.into(), &cfg)?;
            mlp::write_checkpoint(&model, &cfg, &a.out)?;
            print_json(&history)
        }
        Command::ExtractFinetuned { model, emb, out } => {
            let (model, _) = mlp::read_checkpoint(model)?;
            let store = read_store(emb)?;
            let hidden = mlp::extract_finetuned(&model, &store.to_matrix())?;
            write_store(&EmbeddingStore::from_matrix(&store.ids(), &hidden)?, out)?;
            Ok(())
        }
        Command::TrainGbdt(a) => {
            let mut cfg: GbdtConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => GbdtConfig::default(),
            };
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            let data = load_train(&a.train_tsv, &a.train_emb)?;
            let ckpt = match Head::from(a.head) {
                Head::Coarse => {
                    let y: Vec<bool> = data.y.iter().map(|l| l.is_hostile()).collect();
                    BoosterCheckpoint::Coarse {
                        booster: gbdt::fit_booster(&data.x, &y, &cfg)?,
                    }
                }
                Head::Fine => {
                    let hostile = data.hostile_only();
                    let y: Vec<[bool; 4]> = hostile.y.iter().map(|l| l.fine()).collect();
                    BoosterCheckpoint::Fine {
                        boosters: gbdt::fit_one_vs_rest(&hostile.x, &y, &cfg)?,
                    }
                }
            };
            gbdt::write_booster(&ckpt, &a.out)?;
            Ok(())
        }
        Command::Predict {
            coarse,
            fine,
            emb,
            out,
        } => {
            let store = read_store(emb)?;
            let x = store.to_matrix();
            let pc = coarse_probs(&load_model(&coarse)?, &x)?;
            let pf = fine_probs(&load_model(&fine)?, &x)?;
            let rows: Vec<PredictionRow> = store
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| two_stage_row(&r.id, pc[i], pf.row(i)))
                .collect();
            write_predictions(&rows, out)?;
            Ok(())
        }
        Command::Ensemble {
            preds,
            weights,
            out,
            no_cascade,
        } => {
            if preds.len() < 2 {
                bail!(Error::Validation(
                    "at least two prediction files are required".into()
                ));
            }
            let value: serde_json::Value = read_json(&weights)?;
            let weights: EnsembleWeights = match value {
                serde_json::Value::Array(_) => EnsembleWeights {
                    ff1: serde_json::from_value(value).map_err(Error::from)?,
                },
                other => serde_json::from_value(other).map_err(Error::from)?,
            };
            let files: Vec<Vec<PredictionRow>> = preds
                .iter()
                .map(read_predictions)
                .collect::<Result<_, _>>()?;
            let ids: Vec<String> = files[0].iter().map(|r| r.id.clone()).collect();
            let mut outputs = Vec::new();
            for (path, rows) in preds.iter().zip(&files) {
                if rows.len() != ids.len() || rows.iter().zip(&ids).any(|(r, id)| &r.id != id) {
                    bail!(Error::Integrity(format!(
                        "{} does not list the same ids in the same order",
                        path.display()
                    )));
                }
                outputs.push(ModelOutputs {
                    model_id: path.display().to_string(),
                    rows: rows.iter().map(PredictionRow::bools).collect(),
                });
            }
            let r = ensemble::combine(&outputs, &weights, !no_cascade)?;
            let rows: Vec<PredictionRow> = ids
                .into_iter()
                .zip(r.scores.iter().zip(&r.bits))
                .map(|(id, (s, b))| PredictionRow {
                    id,
                    bits: b.map(u8::from),
                    scores: *s,
                })
                .collect();
            write_predictions(&rows, out)?;
            Ok(())
        }
        Command::Evaluate {
            pred,
            gold,
            hostile_only,
            json,
        } => {
            let rows = read_predictions(pred)?;
            let gold = parse_corpus(gold, Split::Test)?;
            let by_id: std::collections::HashMap<&str, &PredictionRow> =
                rows.iter().map(|r| (r.id.as_str(), r)).collect();
            let mut pred_labels = Vec::with_capacity(gold.len());
            for post in &gold.posts {
                let row = by_id.get(post.id.as_str()).ok_or_else(|| {
                    Error::Integrity(format!("no prediction for id {:?}", post.id))
                })?;
                pred_labels.push(row.labels()?);
            }
            let scope = if hostile_only {
                FineScope::GoldHostile
            } else {
                FineScope::All
            };
            let report = evaluate_with(&pred_labels, &gold.labels(), scope)?;
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(path) = json {
                fs::write(&path, format!("{text}\n"))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{text}");
            print!(
                "{}",
                metrics::report_table(&[("predictions".into(), report.row())])?
            );
            Ok(())
        }
        Command::Run { submission, exp } => {
            let cfg = exp.resolve(submission.parse()?)?;
            let artifacts = pipeline::run_submission(&cfg)?;
            print!("{}", fs::read_to_string(artifacts.dir.join("report.txt"))?);
            println!("artifacts: {}", artifacts.dir.display());
            Ok(())
        }
        Command::ReproduceAll { exp } => {
            let cfg = exp.resolve(Submission::Sub1)?;
            let r = pipeline::reproduce_all(&cfg)?;
            println!("validation");
            print!("{}", r.validation.render()?);
            match &r.test {
                Some(t) => {
                    println!("\ntest");
                    print!("{}", t.render()?);
                }
                None => println!("\nno test split given; validation only"),
            }
            Ok(())
        }
        Command::Synth {
            out,
            seed,
            dim,
            signal,
        } => {
            let mut spec = SyntheticSpec::default();
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if let Some(dim) = dim {
                spec.dim = dim;
            }
            if let Some(signal) = signal {
                spec.signal = signal;
            }
            let paths = generate(&spec).write_to(&out)?;
            print_json(&paths)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .chain()
                .find_map(|c| c.downcast_ref::<Error>())
                .is_some_and(Error::is_validation);
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
