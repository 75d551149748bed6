//! The five learners and their evaluation harness: MLP, random forest and
//! extremely randomized trees on the supervised side, k-means and affinity
//! propagation on the unsupervised side, plus stratified cross-validation,
//! confusion-matrix metrics and learning curves.
//!
//! Everything is a deterministic function of (data, config, seed); parallel
//! sections derive independent sub-seeds so results match sequential runs.

mod cluster;
mod forest;
mod mlp;
mod persist;

pub use cluster::{affinity_propagation, kmeans, ApConfig, Centers, Clustering};
pub use forest::{train_extra_trees, train_random_forest, Forest, ForestConfig, Tree, TreeNode};
pub use mlp::{train_mlp, Mlp, MlpConfig, MlpWeights};
pub use persist::{load_model, save_model, MODEL_FORMAT_VERSION};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, NUM_CATEGORIES, NUM_FEATURES};
use crate::num::Real;

/// One graded stone: identifier, category label and its feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance<F: Real = f64> {
    pub id: String,
    pub label: usize,
    pub features: FeatureVector<F>,
}

/// Feature rows of uniform width with labels; the working representation
/// for training, evaluation and feature-subset projections.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F: Real = f64> {
    ids: Vec<String>,
    labels: Vec<usize>,
    rows: Vec<Vec<F>>,
    width: usize,
}

impl<F: Real> Dataset<F> {
    pub fn new(ids: Vec<String>, labels: Vec<usize>, rows: Vec<Vec<F>>) -> Result<Self> {
        if ids.len() != labels.len() || ids.len() != rows.len() {
            return Err(Error::Validation(format!(
                "mismatched dataset lengths: {} ids, {} labels, {} rows",
                ids.len(),
                labels.len(),
                rows.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Validation("dataset is empty".into()));
        }
        let width = rows[0].len();
        if width == 0 {
            return Err(Error::Validation("dataset has zero-width rows".into()));
        }
        for row in &rows {
            if row.len() != width {
                return Err(Error::Validation(format!(
                    "ragged dataset: expected width {width}, found {}",
                    row.len()
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_CATEGORIES) {
            return Err(Error::Validation(format!(
                "label {bad} out of range 0..{NUM_CATEGORIES}"
            )));
        }
        Ok(Self {
            ids,
            labels,
            rows,
            width,
        })
    }

    pub fn from_instances(instances: &[LabeledInstance<F>]) -> Result<Self> {
        Self::new(
            instances.iter().map(|i| i.id.clone()).collect(),
            instances.iter().map(|i| i.label).collect(),
            instances
                .iter()
                .map(|i| i.features.values().to_vec())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<F>] {
        &self.rows
    }

    pub fn class_counts(&self) -> [usize; NUM_CATEGORIES] {
        let mut counts = [0usize; NUM_CATEGORIES];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn distinct_classes(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    /// Keeps only the given feature columns, in the given order.
    pub fn project(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Validation("projection onto zero columns".into()));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.width) {
            return Err(Error::Validation(format!(
                "projection column {bad} out of range 0..{}",
                self.width
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| columns.iter().map(|&c| r[c]).collect())
            .collect();
        Ok(Self {
            ids: self.ids.clone(),
            labels: self.labels.clone(),
            rows,
            width: columns.len(),
        })
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            width: self.width,
        }
    }
}

/// Splitmix64 finalizer; derives independent sub-seeds for parallel or
/// repeated work so parallel execution matches sequential execution.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// First index of the maximum value; ties go to the lowest index.
pub(crate) fn argmax_first<F: PartialOrd + Copy>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A trained predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<F: Real = f64> {
    Mlp(Mlp<F>),
    Forest(Forest<F>),
    ExtraTrees(Forest<F>),
}

impl<F: Real> Model<F> {
    pub fn input_width(&self) -> usize {
        match self {
            Model::Mlp(m) => m.input_width(),
            Model::Forest(f) | Model::ExtraTrees(f) => f.input_width(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::Forest(_) => "random_forest",
            Model::ExtraTrees(_) => "extra_trees",
        }
    }

    /// Class scores and argmax label for one feature row. Scores are
    /// non-negative and sum to one; ties pick the lowest label.
    ///
    /// Panics if the row width does not match the trained width.
    pub fn predict_row(&self, row: &[F]) -> (usize, [F; NUM_CATEGORIES]) {
        assert_eq!(
            row.len(),
            self.input_width(),
            "feature row width does not match the model"
        );
        let scores = match self {
            Model::Mlp(m) => m.scores(row),
            Model::Forest(f) | Model::ExtraTrees(f) => f.scores(row),
        };
        (argmax_first(&scores), scores)
    }
}

/// Prediction on a full 24-value feature vector.
pub fn predict<F: Real>(
    model: &Model<F>,
    features: &FeatureVector<F>,
) -> (usize, [F; NUM_CATEGORIES]) {
    assert_eq!(model.input_width(), NUM_FEATURES);
    model.predict_row(features.values())
}

/// Training configuration for one of the three supervised algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisedTrainer {
    Mlp(MlpConfig),
    RandomForest(ForestConfig),
    ExtraTrees(ForestConfig),
}

impl SupervisedTrainer {
    pub fn name(&self) -> &'static str {
        match self {
            SupervisedTrainer::Mlp(_) => "mlp",
            SupervisedTrainer::RandomForest(_) => "random_forest",
            SupervisedTrainer::ExtraTrees(_) => "extra_trees",
        }
    }

    pub fn train<F: Real>(&self, data: &Dataset<F>, seed: u64) -> Result<Model<F>> {
        match self {
            SupervisedTrainer::Mlp(cfg) => train_mlp(data, cfg, seed),
            SupervisedTrainer::RandomForest(cfg) => train_random_forest(data, cfg, seed),
            SupervisedTrainer::ExtraTrees(cfg) => train_extra_trees(data, cfg, seed),
        }
    }
}

pub type ConfusionMatrix = Vec<Vec<usize>>;

pub fn empty_confusion() -> ConfusionMatrix {
    vec![vec![0; NUM_CATEGORIES]; NUM_CATEGORIES]
}

/// Fraction of instances on the diagonal.
pub fn confusion_accuracy(confusion: &ConfusionMatrix) -> f64 {
    let total: usize = confusion.iter().map(|r| r.iter().sum::<usize>()).sum();
    if total == 0 {
        return 0.0;
    }
    let trace: usize = confusion.iter().enumerate().map(|(i, r)| r[i]).sum();
    trace as f64 / total as f64
}

/// Unweighted mean over classes of `2PR/(P+R)`, with a class contributing
/// zero when it is never predicted and never present.
pub fn macro_f1(confusion: &ConfusionMatrix) -> f64 {
    let k = confusion.len();
    let mut sum = 0.0;
    for c in 0..k {
        let tp = confusion[c][c];
        let row: usize = confusion[c].iter().sum();
        let col: usize = confusion.iter().map(|r| r[c]).sum();
        let precision = if col > 0 { tp as f64 / col as f64 } else { 0.0 };
        let recall = if row > 0 { tp as f64 / row as f64 } else { 0.0 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    sum / k as f64
}

/// Accuracy and macro-F1 of one evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Aggregate cross-validation (or hold-out) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    pub per_fold: Vec<FoldMetrics>,
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix, per_fold: Vec<FoldMetrics>) -> Self {
        Self {
            accuracy: confusion_accuracy(&confusion),
            macro_f1: macro_f1(&confusion),
            confusion,
            per_fold,
        }
    }

    /// Plain-text confusion table with per-class totals.
    pub fn to_text_table(&self) -> String {
        let k = self.confusion.len();
        let mut out = String::new();
        out.push_str("true\\pred");
        for c in 0..k {
            out.push_str(&format!("{c:>6}"));
        }
        out.push('\n');
        for (r, row) in self.confusion.iter().enumerate() {
            out.push_str(&format!("{r:>9}"));
            for &v in row {
                out.push_str(&format!("{v:>6}"));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "accuracy {:.4}  macro-F1 {:.4}\n",
            self.accuracy, self.macro_f1
        ));
        out
    }
}

/// Per-class shuffled round-robin fold assignment.
fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from(seed);
    let mut assignment = vec![0usize; labels.len()];
    for class in 0..NUM_CATEGORIES {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            assignment[i] = j % folds;
        }
    }
    assignment
}

/// Stratified k-fold cross-validation. Standardization (inside the MLP
/// trainer) and training see the train split only; the confusion matrix
/// aggregates all test folds.
pub fn evaluate_cv<F: Real>(
    data: &Dataset<F>,
    trainer: &SupervisedTrainer,
    folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    if folds < 2 {
        return Err(Error::InsufficientData(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    for (class, &count) in data.class_counts().iter().enumerate() {
        if count > 0 && count < folds {
            return Err(Error::InsufficientData(format!(
                "class {class} has {count} instances, fewer than {folds} folds"
            )));
        }
    }
    let assignment = stratified_folds(data.labels(), folds, seed);
    let mut confusion = empty_confusion();
    let mut per_fold = Vec::with_capacity(folds);
    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] != fold).collect();
        let test_idx: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] == fold).collect();
        let model = trainer.train(&data.subset(&train_idx), derive_seed(seed, fold as u64))?;
        let mut fold_confusion = empty_confusion();
        for &i in &test_idx {
            let (pred, _) = model.predict_row(data.row(i));
            fold_confusion[data.label(i)][pred] += 1;
        }
        per_fold.push(FoldMetrics {
            accuracy: confusion_accuracy(&fold_confusion),
            macro_f1: macro_f1(&fold_confusion),
        });
        for (acc_row, fold_row) in confusion.iter_mut().zip(&fold_confusion) {
            for (a, &b) in acc_row.iter_mut().zip(fold_row) {
                *a += b;
            }
        }
    }
    Ok(EvalReport::from_confusion(confusion, per_fold))
}

/// Stratified hold-out evaluation: trains on `1 - test_fraction` of each
/// class and reports metrics on the remainder.
pub fn evaluate_holdout<F: Real>(
    data: &Dataset<F>,
    trainer: &SupervisedTrainer,
    test_fraction: f64,
    seed: u64,
) -> Result<EvalReport> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "hold-out fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = rng_from(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..NUM_CATEGORIES {
        let mut members: Vec<usize> = (0..data.len())
            .filter(|&i| data.label(i) == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * test_fraction).round() as usize)
            .clamp(1, members.len().saturating_sub(1).max(1));
        test_idx.extend_from_slice(&members[..n_test]);
        train_idx.extend_from_slice(&members[n_test..]);
    }
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::InsufficientData(
            "hold-out split left an empty train or test side".into(),
        ));
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let model = trainer.train(&data.subset(&train_idx), derive_seed(seed, 0))?;
    let mut confusion = empty_confusion();
    for &i in &test_idx {
        let (pred, _) = model.predict_row(data.row(i));
        confusion[data.label(i)][pred] += 1;
    }
    let metrics = FoldMetrics {
        accuracy: confusion_accuracy(&confusion),
        macro_f1: macro_f1(&confusion),
    };
    Ok(EvalReport::from_confusion(confusion, vec![metrics]))
}

/// Majority mapping of clusters onto true labels and the resulting
/// classification metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEval {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Majority true label of each cluster, indexed by cluster.
    pub mapping: Vec<usize>,
    pub confusion: ConfusionMatrix,
}

/// Maps each cluster to its most frequent true label (many-to-one; ties go
/// to the lowest label) and scores the mapped predictions.
pub fn map_clusters_to_labels<F: Real>(
    clustering: &Clustering<F>,
    labels: &[usize],
) -> Result<ClusterEval> {
    if clustering.assignments.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} assignments vs {} labels",
            clustering.assignments.len(),
            labels.len()
        )));
    }
    let k = clustering.k;
    let mut votes = vec![[0usize; NUM_CATEGORIES]; k];
    for (&cluster, &label) in clustering.assignments.iter().zip(labels) {
        votes[cluster][label] += 1;
    }
    let mapping: Vec<usize> = votes.iter().map(|v| argmax_first(v)).collect();
    let mut confusion = empty_confusion();
    for (&cluster, &label) in clustering.assignments.iter().zip(labels) {
        confusion[label][mapping[cluster]] += 1;
    }
    Ok(ClusterEval {
        accuracy: confusion_accuracy(&confusion),
        macro_f1: macro_f1(&confusion),
        mapping,
        confusion,
    })
}

/// One learning-curve sample: a training fraction with the mean train and
/// validation accuracy over the repeats. Validation accuracy is NaN when
/// the held-out remainder is empty (fraction 1.0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub train_per_repeat: Vec<f64>,
    pub validation_per_repeat: Vec<f64>,
}

/// Trains on stratified subsamples of increasing size and scores both the
/// subsample and the held-out remainder, averaged over `repeats`.
pub fn learning_curve<F: Real>(
    data: &Dataset<F>,
    trainer: &SupervisedTrainer,
    fractions: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if fractions.is_empty() || repeats == 0 {
        return Err(Error::Validation(
            "learning curve needs at least one fraction and one repeat".into(),
        ));
    }
    if let Some(&bad) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::Validation(format!(
            "fractions must lie in (0, 1], got {bad}"
        )));
    }
    let counts = data.class_counts();
    let mut points = Vec::with_capacity(fractions.len());
    for (fi, &fraction) in fractions.iter().enumerate() {
        for (class, &count) in counts.iter().enumerate() {
            if count > 0 && (fraction * count as f64).round() < 1.0 {
                return Err(Error::InsufficientData(format!(
                    "fraction {fraction} rounds class {class} down to zero training instances"
                )));
            }
        }
        let mut train_accs = Vec::with_capacity(repeats);
        let mut val_accs = Vec::with_capacity(repeats);
        for rep in 0..repeats {
            let rep_seed = derive_seed(seed, (fi * 1009 + rep) as u64 + 1);
            let mut rng = rng_from(rep_seed);
            let mut train_idx = Vec::new();
            let mut val_idx = Vec::new();
            for class in 0..NUM_CATEGORIES {
                let mut members: Vec<usize> = (0..data.len())
                    .filter(|&i| data.label(i) == class)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                members.shuffle(&mut rng);
                let take =
                    ((members.len() as f64 * fraction).round() as usize).clamp(1, members.len());
                train_idx.extend_from_slice(&members[..take]);
                val_idx.extend_from_slice(&members[take..]);
            }
            train_idx.sort_unstable();
            val_idx.sort_unstable();
            let train = data.subset(&train_idx);
            let model = trainer.train(&train, derive_seed(rep_seed, 7))?;
            let score = |idx: &[usize]| -> f64 {
                let correct = idx
                    .iter()
                    .filter(|&&i| model.predict_row(data.row(i)).0 == data.label(i))
                    .count();
                correct as f64 / idx.len() as f64
            };
            train_accs.push(score(&train_idx));
            val_accs.push(if val_idx.is_empty() {
                f64::NAN
            } else {
                score(&val_idx)
            });
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        points.push(CurvePoint {
            fraction,
            train_accuracy: mean(&train_accs),
            validation_accuracy: mean(&val_accs),
            train_per_repeat: train_accs,
            validation_per_repeat: val_accs,
        });
    }
    Ok(points)
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn macro_f1_hand_computed_two_class() {
        let confusion = vec![vec![8, 2], vec![3, 7]];
        let expected = (16.0 / 21.0 + 14.0 / 19.0) / 2.0;
        assert_relative_eq!(macro_f1(&confusion), expected, epsilon = 1e-12);
        assert!((macro_f1(&confusion) - 0.7494).abs() < 5e-5);
    }

    #[test]
    fn macro_f1_diagonal_and_absent_class() {
        let mut diag = empty_confusion();
        for (c, row) in diag.iter_mut().enumerate() {
            row[c] = 5;
        }
        assert_relative_eq!(macro_f1(&diag), 1.0);

        // class 7 never present and never predicted contributes zero
        let mut partial = empty_confusion();
        for (c, row) in partial.iter_mut().enumerate().take(7) {
            row[c] = 5;
        }
        assert_relative_eq!(macro_f1(&partial), 7.0 / 8.0);
    }

    #[test]
    fn accuracy_from_constructed_confusion() {
        let mut confusion = empty_confusion();
        let diag = [23, 24, 24, 24, 24, 24, 24, 21];
        for (c, &d) in diag.iter().enumerate() {
            confusion[c][c] = d;
        }
        confusion[0][1] = 1;
        confusion[7][0] = 3;
        let report = EvalReport::from_confusion(confusion, vec![]);
        assert_relative_eq!(report.accuracy, 188.0 / 192.0, epsilon = 1e-12);
    }

    #[test]
    fn stratified_folds_partition_every_class() {
        let data = fixtures::separable_dataset(10, 3);
        let assignment = stratified_folds(data.labels(), 5, 42);
        assert_eq!(assignment.len(), data.len());
        // every instance is in exactly one fold, and folds are balanced per class
        for class in 0..NUM_CATEGORIES {
            let mut fold_counts = [0usize; 5];
            for i in 0..data.len() {
                if data.label(i) == class {
                    fold_counts[assignment[i]] += 1;
                }
            }
            assert!(fold_counts.iter().all(|&c| c == 2));
        }
    }

    #[test]
    fn cv_rejects_thin_classes() {
        let data = fixtures::separable_dataset(3, 1);
        let trainer = SupervisedTrainer::RandomForest(ForestConfig::default());
        assert!(matches!(
            evaluate_cv(&data, &trainer, 10, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn constant_predictor_baseline_on_balanced_classes() {
        // single pure leaf: a forest that always answers class 0
        let data = fixtures::separable_dataset(4, 9);
        let model: Model<f64> = Model::Forest(Forest::constant_for_tests(0, data.width()));
        let mut confusion = empty_confusion();
        for i in 0..data.len() {
            let (pred, scores) = model.predict_row(data.row(i));
            assert_eq!(pred, 0);
            assert_relative_eq!(scores.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            confusion[data.label(i)][pred] += 1;
        }
        assert_relative_eq!(confusion_accuracy(&confusion), 0.125);
    }

    #[test]
    fn cluster_mapping_majority_and_degenerate() {
        // one cluster containing labels {A=3 of class 1, B=1 of class 2}
        let clustering = Clustering {
            assignments: vec![0, 0, 0, 0],
            k: 1,
            centers: Centers::Exemplars(vec![0]),
            converged: true,
        };
        let eval = map_clusters_to_labels::<f64>(&clustering, &[1, 1, 1, 2]).unwrap();
        assert_eq!(eval.mapping, vec![1]);
        assert_relative_eq!(eval.accuracy, 0.75);

        // all instances in one cluster over 8 balanced classes
        let labels: Vec<usize> = (0..NUM_CATEGORIES).flat_map(|c| [c, c]).collect();
        let clustering = Clustering {
            assignments: vec![0; labels.len()],
            k: 1,
            centers: Centers::Exemplars(vec![0]),
            converged: true,
        };
        let eval = map_clusters_to_labels::<f64>(&clustering, &labels).unwrap();
        assert_relative_eq!(eval.accuracy, 0.125);

        // clusters exactly equal to classes
        let clustering = Clustering {
            assignments: labels.clone(),
            k: NUM_CATEGORIES,
            centers: Centers::Exemplars((0..NUM_CATEGORIES).collect()),
            converged: true,
        };
        let eval = map_clusters_to_labels::<f64>(&clustering, &labels).unwrap();
        assert_relative_eq!(eval.accuracy, 1.0);
        assert_relative_eq!(eval.macro_f1, 1.0);
    }

    #[test]
    fn curve_reports_means_of_repeats() {
        let data = fixtures::separable_dataset(6, 5);
        let trainer = SupervisedTrainer::RandomForest(ForestConfig {
            trees: 10,
            ..ForestConfig::default()
        });
        let points = learning_curve(&data, &trainer, &[0.5, 1.0], 2, 11).unwrap();
        assert_eq!(points.len(), 2);
        for p in &points {
            let mean_train: f64 =
                p.train_per_repeat.iter().sum::<f64>() / p.train_per_repeat.len() as f64;
            assert_relative_eq!(p.train_accuracy, mean_train, epsilon = 1e-12);
        }
        // fraction 1.0 leaves nothing to validate on
        assert!(points[1].validation_accuracy.is_nan());
        assert!(!points[0].validation_accuracy.is_nan());
    }

    #[test]
    fn curve_is_flat_on_separable_data() {
        let data = fixtures::separable_dataset(8, 2);
        let trainer = SupervisedTrainer::RandomForest(ForestConfig {
            trees: 15,
            ..ForestConfig::default()
        });
        let points = learning_curve(&data, &trainer, &[0.5, 0.75], 2, 3).unwrap();
        for p in &points {
            assert!(p.train_accuracy >= 0.99);
            assert!(p.validation_accuracy >= 0.95);
        }
    }

    #[test]
    fn cv_perfect_on_separable_data() {
        let data = fixtures::separable_dataset(6, 8);
        let trainer = SupervisedTrainer::RandomForest(ForestConfig {
            trees: 20,
            ..ForestConfig::default()
        });
        let report = evaluate_cv(&data, &trainer, 3, 21).unwrap();
        assert_relative_eq!(report.accuracy, 1.0);
        assert_relative_eq!(report.macro_f1, 1.0);
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, data.len());
        assert_eq!(report.per_fold.len(), 3);
    }

    #[test]
    fn holdout_uses_disjoint_split() {
        let data = fixtures::separable_dataset(8, 4);
        let trainer = SupervisedTrainer::RandomForest(ForestConfig {
            trees: 10,
            ..ForestConfig::default()
        });
        let report = evaluate_holdout(&data, &trainer, 0.25, 3).unwrap();
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, 16, "25% of 64 instances");
        assert!(report.accuracy >= 0.9);
    }
}
