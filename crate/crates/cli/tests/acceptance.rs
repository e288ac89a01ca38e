//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The real-data criterion runs only when `HOSTILITY_DATA_DIR` points at a
//! directory holding `{train,val,test}.tsv` and `{train,val,test}.emb1`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hostility_core::corpus::{parse_corpus, split_stats, LabelVector, Split, SplitStats};
use hostility_core::embedding_store::{read_store, write_store, AlignedDataset, EmbeddingStore};
use hostility_core::ensemble::{combine, EnsembleWeights, ModelOutputs};
use hostility_core::gbdt::{self, fit_tree, GbdtConfig};
use hostility_core::metrics::{evaluate, evaluate_with, FineScope};
use hostility_core::mlp::{self, Head, TrainConfig};
use hostility_core::pipeline::{
    run_submission, DataPaths, ExperimentConfig, Representation, Submission,
};
use hostility_core::{reference, Error};

// Tolerances and budgets.
const GRAD_EPS: f64 = 1e-3;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_REL_FLOOR: f64 = 1e-6;
const GRAD_KINK_MARGIN: f64 = 0.01;
const GRAD_BUDGET_S: f64 = 5.0;
const LEARN_MIN_ACC: f64 = 0.98;
const LEARN_EPOCHS: usize = 50;
const LEARN_BUDGET_S: f64 = 60.0;
const TREE_WEIGHT_TOL: f64 = 1e-9;
const ENSEMBLE_SCORE_TOL: f64 = 1e-15;
const METRIC_TOL: f64 = 1e-12;
const E2E_MIN_COARSE: f64 = 0.95;
const E2E_MIN_FINE: f64 = 0.80;
const REAL_MIN_COARSE: f64 = 0.94;
const REAL_MIN_FINE: f64 = 0.50;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let head = if i % 2 == 0 { Head::Coarse } else { Head::Fine };
        let f = common::grad_fixture(&mut rng, head, GRAD_KINK_MARGIN);
        worst = worst.max(common::max_grad_rel_error(&f, GRAD_EPS, GRAD_REL_FLOOR));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst < GRAD_REL_TOL && secs < GRAD_BUDGET_S,
        format!("20 models, max rel err {worst:.2e} (< {GRAD_REL_TOL:e}), {secs:.2}s"),
    )
}

fn coarse_dataset(x: hostility_core::Matrix, y: &[bool]) -> AlignedDataset {
    let hostile = LabelVector::from_hostile([true, false, false, false]).unwrap();
    AlignedDataset {
        ids: (0..y.len()).map(|i| format!("p{i}")).collect(),
        y: y.iter()
            .map(|&h| if h { hostile } else { LabelVector::NON_HOSTILE })
            .collect(),
        x,
    }
}

fn accuracy(model: &mlp::MlpModel, d: &AlignedDataset) -> f64 {
    let p = mlp::predict(model, &d.x).unwrap();
    let hits = p
        .iter_rows()
        .zip(&d.y)
        .filter(|(p, y)| (p[1] > p[0]) == y.is_hostile())
        .count();
    hits as f64 / d.len() as f64
}

fn mlp_learning_sanity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(768);
    let u = common::unit_direction(&mut rng, 768);
    let (xt, yt) = common::separable_data(&mut rng, 600, 768, 1.0, &u);
    let (xv, yv) = common::separable_data(&mut rng, 200, 768, 1.0, &u);
    if common::perceptron_separates(&xt, &yt, 1000).is_none() {
        return Outcome::Fail("fixture is not linearly separable".into());
    }
    let train = coarse_dataset(xt, &yt);
    let test = coarse_dataset(xv, &yv);
    let cfg = TrainConfig {
        epochs: LEARN_EPOCHS,
        ..TrainConfig::default()
    };
    let (model, _) = match mlp::train_mlp(&train, None, Head::Coarse, &cfg) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let train_acc = accuracy(&model, &train);
    let test_acc = accuracy(&model, &test);
    let secs = start.elapsed().as_secs_f64();
    ensure(
        train_acc >= LEARN_MIN_ACC && secs < LEARN_BUDGET_S,
        format!(
            "768-d, 600/200, {LEARN_EPOCHS} epochs at default lr: train acc {train_acc:.4}, test acc {test_acc:.4}, {secs:.1}s"
        ),
    )
}

fn gbdt_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut splits = 0;
    for i in 0..200 {
        let c = common::tree_case(&mut rng);
        let cfg = GbdtConfig {
            max_depth: c.max_depth,
            lambda: c.lambda,
            gamma: c.gamma,
            min_child_hessian: c.min_child_hessian,
            ..GbdtConfig::default()
        };
        let ours = fit_tree(&c.x, &c.g, &c.h, &cfg).unwrap();
        let oracle = common::oracle_tree(
            &c.x,
            &c.g,
            &c.h,
            c.max_depth,
            c.lambda,
            c.gamma,
            c.min_child_hessian,
        );
        if !common::trees_match(&ours, &oracle, TREE_WEIGHT_TOL) {
            return Outcome::Fail(format!("instance {i} differs from the oracle"));
        }
        splits += usize::from(ours.depth() > 0);
    }
    Outcome::Pass(format!("200 instances identical ({splits} with splits)"))
}

fn gbdt_monotone() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for k in 0..5 {
        let n = 200;
        let d = 2 + k;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<bool> = rows
            .iter()
            .map(|r| (r[0] * r[1] - 0.2 * r[d - 1] > 0.0) ^ rng.gen_bool(0.15))
            .collect();
        let x = hostility_core::Matrix::from_rows(&rows).unwrap();
        let b = gbdt::fit_booster(&x, &y, &GbdtConfig::default()).unwrap();
        if b.trees.len() != 100 {
            return Outcome::Fail(format!("dataset {k}: {} rounds", b.trees.len()));
        }
        if let Some(r) = b.train_log_loss.windows(2).position(|w| w[1] > w[0]) {
            return Outcome::Fail(format!("dataset {k}: log-loss rose at round {}", r + 1));
        }
    }
    Outcome::Pass("5 datasets x 100 rounds, log-loss non-increasing".into())
}

fn ensemble_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for i in 0..1000 {
        let case = common::ensemble_case(&mut rng);
        let outputs: Vec<ModelOutputs> = case
            .rows
            .iter()
            .enumerate()
            .map(|(m, rows)| ModelOutputs {
                model_id: m.to_string(),
                rows: rows.clone(),
            })
            .collect();
        let run = |w: &[f64], cascade: bool| {
            combine(&outputs, &EnsembleWeights { ff1: w.to_vec() }, cascade).unwrap()
        };
        for cascade in [false, true] {
            let ours = run(&case.weights, cascade);
            let (scores, bits) = common::oracle_combine(&case.rows, &case.weights, cascade);
            if ours.bits != bits {
                return Outcome::Fail(format!("instance {i}: bits differ (cascade {cascade})"));
            }
            let close = ours.scores.iter().zip(&scores).all(|(a, e)| {
                (0..5).all(|c| common::close_to_rational(a[c], &e[c], ENSEMBLE_SCORE_TOL))
            });
            if !close {
                return Outcome::Fail(format!("instance {i}: scores differ"));
            }
        }
        let base = run(&case.weights, true);
        let pow2 = 2f64.powi(rng.gen_range(-20..20));
        let k = rng.gen_range(0.1..10.0);
        for factor in [pow2, k] {
            let scaled: Vec<f64> = case.weights.iter().map(|w| w * factor).collect();
            if run(&scaled, true).bits != base.bits {
                return Outcome::Fail(format!("instance {i}: scaling by {factor} changed output"));
            }
        }
    }
    Outcome::Pass("1000 instances identical to exact oracle; scale invariant".into())
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for i in 0..500 {
        let n = rng.gen_range(1..=60);
        let pred: Vec<LabelVector> = (0..n)
            .map(|_| common::random_label_vector(&mut rng))
            .collect();
        let gold: Vec<LabelVector> = (0..n)
            .map(|_| common::random_label_vector(&mut rng))
            .collect();
        let scope = if i % 2 == 0 {
            FineScope::All
        } else {
            FineScope::GoldHostile
        };
        let r = evaluate_with(&pred, &gold, scope).unwrap();
        let bits = |v: &[LabelVector]| v.iter().map(LabelVector::bits).collect::<Vec<_>>();
        let o = common::oracle_evaluate(&bits(&pred), &bits(&gold), scope);
        let ok = (r.coarse.weighted_f1 - o.coarse_weighted).abs() <= METRIC_TOL
            && (r.fine.weighted_f1 - o.fine_weighted).abs() <= METRIC_TOL
            && r.fine
                .classes()
                .iter()
                .zip(o.fine)
                .all(|(c, (tp, fp, fn_))| (c.tp, c.fp, c.fn_) == (tp, fp, fn_));
        if !ok {
            return Outcome::Fail(format!("instance {i} differs from the oracle"));
        }
    }
    let fake = LabelVector::from_hostile([true, false, false, false]).unwrap();
    let hate = LabelVector::from_hostile([false, true, false, false]).unwrap();
    let hand = evaluate(&[fake, fake, LabelVector::NON_HOSTILE], &[fake, fake, hate]).unwrap();
    ensure(
        hand.fine.weighted_f1 == 2.0 / 3.0,
        format!(
            "500 instances within {METRIC_TOL:e}; hand case = {}",
            hand.fine.weighted_f1
        ),
    )
}

fn emb1_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for i in 0..100 {
        let store = common::random_store(&mut rng);
        let path = dir.path().join("s.emb1");
        write_store(&store, &path).unwrap();
        let back = read_store(&path).unwrap();
        let same = back.dim == store.dim
            && back.records.len() == store.records.len()
            && back.records.iter().zip(&store.records).all(|(a, b)| {
                a.id == b.id
                    && a.vector
                        .iter()
                        .map(|v| v.to_bits())
                        .eq(b.vector.iter().map(|v| v.to_bits()))
            });
        if !same {
            return Outcome::Fail(format!("store {i} did not round-trip"));
        }
    }
    let store = EmbeddingStore {
        dim: 2,
        records: vec![hostility_core::embedding_store::EmbeddingRecord {
            id: "a".into(),
            vector: vec![1.0, 2.0],
        }],
    };
    let good = store.to_bytes().unwrap();
    let offset = |b: &[u8]| match EmbeddingStore::from_bytes(b) {
        Err(Error::Format { offset, .. }) => Some(offset),
        _ => None,
    };
    let mut magic = good.clone();
    magic[3] = b'2';
    let mut version = good.clone();
    version[4] = 9;
    let mut trailing = good.clone();
    trailing.push(0);
    let cases = [
        ("bad magic", offset(&magic), Some(0)),
        ("bad version", offset(&version), Some(4)),
        (
            "truncated mid-record",
            offset(&good[..good.len() - 3]),
            Some(17),
        ),
        ("trailing byte", offset(&trailing), Some(good.len())),
    ];
    for (name, got, want) in cases {
        if got != want {
            return Outcome::Fail(format!("{name}: offset {got:?}, expected {want:?}"));
        }
    }
    let dup: Vec<u8> = {
        let mut b = good[..10].to_vec();
        b.extend_from_slice(&2u32.to_le_bytes());
        b.extend_from_slice(&good[14..]);
        b.extend_from_slice(&good[14..]);
        b
    };
    ensure(
        matches!(EmbeddingStore::from_bytes(&dup), Err(Error::Integrity(_))),
        "100 stores bit-exact; magic/version/truncation/trailing/duplicate errors as specified"
            .into(),
    )
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hostility"))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn report_f1(path: &Path, split: &str) -> (f64, f64) {
    let r: serde_json::Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
    (
        r[split]["coarse"]["weighted_f1"].as_f64().unwrap(),
        r[split]["fine"]["weighted_f1"].as_f64().unwrap(),
    )
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let status = cli().args(["synth", "--out"]).arg(&data).output().unwrap();
    if !status.status.success() {
        return Outcome::Fail("synth failed".into());
    }
    for out in ["a", "b"] {
        let o = cli()
            .args(["run", "--submission", "1", "--data"])
            .arg(&data)
            .arg("--out")
            .arg(tmp.path().join(out))
            .output()
            .unwrap();
        if !o.status.success() {
            return Outcome::Fail(format!(
                "run failed: {}",
                String::from_utf8_lossy(&o.stderr)
            ));
        }
    }
    let a = dir_bytes(&tmp.path().join("a/sub1"));
    let b = dir_bytes(&tmp.path().join("b/sub1"));
    if a != b {
        return Outcome::Fail("artifacts differ between runs".into());
    }
    let report = tmp.path().join("a/sub1/report.json");
    let (vc, vf) = report_f1(&report, "validation");
    let (tc, tf) = report_f1(&report, "test");
    let min_c = vc.min(tc);
    let min_f = vf.min(tf);
    ensure(
        min_c >= E2E_MIN_COARSE && min_f >= E2E_MIN_FINE,
        format!(
            "{} files byte-identical; coarse F1 val {vc:.4} / test {tc:.4} (>= {E2E_MIN_COARSE}), fine F1 val {vf:.4} / test {tf:.4} (>= {E2E_MIN_FINE})",
            a.len()
        ),
    )
}

fn stats_array(s: &SplitStats) -> [usize; 6] {
    [
        s.fake,
        s.hate,
        s.offense,
        s.defame,
        s.hostile,
        s.non_hostile,
    ]
}

fn real_data() -> Outcome {
    let Some(dir) = std::env::var_os("HOSTILITY_DATA_DIR").map(PathBuf::from) else {
        return Outcome::Skip("HOSTILITY_DATA_DIR not set".into());
    };
    let file = |n: &str| dir.join(n);
    let needed = [
        "train.tsv",
        "val.tsv",
        "test.tsv",
        "train.emb1",
        "val.emb1",
        "test.emb1",
    ];
    if let Some(missing) = needed.iter().find(|n| !file(n).is_file()) {
        return Outcome::Skip(format!("{} missing", file(missing).display()));
    }
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, split, want) in [
        ("train.tsv", Split::Train, reference::SPLIT_STATS_TRAIN),
        (
            "val.tsv",
            Split::Validation,
            reference::SPLIT_STATS_VALIDATION,
        ),
        ("test.tsv", Split::Test, reference::SPLIT_STATS_TEST),
    ] {
        let got = match parse_corpus(file(name), split) {
            Ok(c) => stats_array(&split_stats(&c)),
            Err(e) => return Outcome::Fail(format!("{name}: {e}")),
        };
        ok &= got == want;
        notes.push(format!(
            "{name} stats {}",
            if got == want { "match" } else { "DIFFER" }
        ));
    }
    let paths = DataPaths {
        train_tsv: file("train.tsv"),
        train_emb: file("train.emb1"),
        val_tsv: file("val.tsv"),
        val_emb: file("val.emb1"),
        test_tsv: Some(file("test.tsv")),
        test_emb: Some(file("test.emb1")),
    };
    let out = tempfile::tempdir().unwrap();
    let run = |s: Submission, raw: bool| {
        let mut cfg = ExperimentConfig::new(paths.clone(), s, out.path());
        if raw {
            cfg.representation = Representation::Raw;
        }
        run_submission(&cfg).map(|r| r.report.validation)
    };
    let (sub1, sub4, raw4) = match (
        run(Submission::Sub1, false),
        run(Submission::Sub4, false),
        run(Submission::Sub4, true),
    ) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return Outcome::Fail(e.to_string()),
    };
    let band = sub1.coarse.weighted_f1 >= REAL_MIN_COARSE && sub1.fine.weighted_f1 >= REAL_MIN_FINE;
    notes.push(format!(
        "sub1 val coarse {:.4} fine {:.4} ({})",
        sub1.coarse.weighted_f1,
        sub1.fine.weighted_f1,
        if band {
            "in band"
        } else {
            "outside band, informational"
        }
    ));
    let beats = sub4.fine.weighted_f1 > raw4.fine.weighted_f1;
    ok &= beats;
    notes.push(format!(
        "fine-tuned GBDT fine {:.4} vs raw {:.4}",
        sub4.fine.weighted_f1, raw4.fine.weighted_f1
    ));
    ensure(ok, notes.join("; "))
}

fn main() {
    // cargo passes harness flags such as --nocapture; they do not apply here
    let checks: [(&str, Check); 9] = [
        ("gradient-correctness", gradient_correctness),
        ("mlp-learning-sanity", mlp_learning_sanity),
        ("gbdt-oracle-equivalence", gbdt_oracle),
        ("gbdt-logloss-monotone", gbdt_monotone),
        ("ensemble-oracle-equivalence", ensemble_oracle),
        ("metrics-oracle-equivalence", metrics_oracle),
        ("emb1-round-trip", emb1_round_trip),
        ("end-to-end-determinism", end_to_end_determinism),
        ("real-data (conditional)", real_data),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Outcome::Fail("panicked".into()));
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {name:<28} {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
