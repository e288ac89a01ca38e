//! Published leaderboard numbers, for side-by-side display only. Trained
//! results are never asserted against these.

use crate::metrics::ScoreRow;

const fn row(c: f64, d: f64, f: f64, h: f64, o: f64, w: f64) -> ScoreRow {
    ScoreRow {
        coarse_f1: c,
        defamation_f1: d,
        fake_f1: f,
        hate_f1: h,
        offensive_f1: o,
        fine_weighted_f1: w,
    }
}

/// Published validation scores, submissions 1 to 5.
pub const VALIDATION_SUBMISSIONS: [ScoreRow; 5] = [
    row(0.9692, 0.2656, 0.8254, 0.4876, 0.5326, 0.58),
    row(0.9654, 0.3459, 0.8274, 0.5388, 0.5405, 0.6088),
    row(0.9692, 0.2483, 0.8217, 0.4896, 0.5631, 0.5832),
    row(0.9692, 0.3810, 0.8365, 0.5172, 0.55, 0.6149),
    row(0.9692, 0.3247, 0.8387, 0.5214, 0.5426, 0.6054),
];

/// Published test scores, submissions 1 to 5.
#[allow(clippy::approx_constant)]
pub const TEST_SUBMISSIONS: [ScoreRow; 5] = [
    row(0.9612, 0.3564, 0.7823, 0.5556, 0.578, 0.6047),
    row(0.9691, 0.3061, 0.7915, 0.4282, 0.5699, 0.566),
    row(0.9655, 0.3544, 0.8, 0.4129, 0.5816, 0.5764),
    row(0.9655, 0.4343, 0.7838, 0.525, 0.5661, 0.6088),
    row(0.9655, 0.3765, 0.7844, 0.5339, 0.5854, 0.6054),
];

/// Validation baselines (LR, SVM, RF, MLP) from the earlier benchmark.
pub const VALIDATION_BASELINES: [(&str, ScoreRow); 4] = [
    ("LR", row(0.8398, 0.4427, 0.6815, 0.3876, 0.3627, 0.4954)),
    ("SVM", row(0.8411, 0.4749, 0.6644, 0.4198, 0.4357, 0.5201)),
    ("RF", row(0.7979, 0.0683, 0.5343, 0.0701, 0.0256, 0.2240)),
    ("MLP", row(0.8345, 0.3482, 0.6603, 0.4069, 0.2941, 0.4594)),
];

/// Boosted trees on raw vs. fine-tuned representations (validation):
/// `(coarse F1, weighted fine F1)`.
pub const GBDT_RAW_VALIDATION: (f64, f64) = (0.9298, 0.3762);
pub const GBDT_FINETUNED_VALIDATION: (f64, f64) = (0.9692, 0.6149);

/// Official split sizes: `(fake, hate, offense, defame, hostile, non_hostile)`.
pub const SPLIT_STATS_TRAIN: [usize; 6] = [1144, 792, 742, 564, 2678, 3050];
pub const SPLIT_STATS_VALIDATION: [usize; 6] = [160, 103, 110, 77, 376, 435];
pub const SPLIT_STATS_TEST: [usize; 6] = [334, 237, 219, 169, 780, 873];
