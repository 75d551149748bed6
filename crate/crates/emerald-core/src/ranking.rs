//! Feature rankings: leave-one-feature-out classifier evaluation,
//! information gain, gain ratio and class correlation, plus reduced
//! feature-set evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{evaluate_cv, Dataset, EvalReport, SupervisedTrainer};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    ClassifierEval,
    InfoGain,
    GainRatio,
    Correlation,
}

impl RankingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RankingMethod::ClassifierEval => "classifier_eval",
            RankingMethod::InfoGain => "info_gain",
            RankingMethod::GainRatio => "gain_ratio",
            RankingMethod::Correlation => "correlation",
        }
    }
}

/// One ranked feature; `feature` is 1-based, matching the f1..f24 naming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub feature: usize,
    pub score: f64,
}

/// All features ordered by descending score; score ties keep the lower
/// feature index first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub method: RankingMethod,
    pub entries: Vec<RankingEntry>,
}

impl FeatureRanking {
    fn from_scores(method: RankingMethod, scores: Vec<f64>) -> Self {
        let mut entries: Vec<RankingEntry> = scores
            .into_iter()
            .enumerate()
            .map(|(i, score)| RankingEntry {
                feature: i + 1,
                score,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then(a.feature.cmp(&b.feature))
        });
        Self { method, entries }
    }

    /// 0-based column indices of the top `k` features, ascending.
    pub fn top_columns(&self, k: usize) -> Vec<usize> {
        let mut cols: Vec<usize> = self.entries[..k].iter().map(|e| e.feature - 1).collect();
        cols.sort_unstable();
        cols
    }

    /// `rank,feature,score,method` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,score,method\n");
        for (rank, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{},f{},{:.16e},{}\n",
                rank + 1,
                e.feature,
                e.score,
                self.method.name()
            ));
        }
        out
    }

    pub fn to_text_table(&self) -> String {
        let mut out = format!("{:<6}{:<10}{}\n", "rank", "feature", "score");
        for (rank, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{:<6}f{:<9}{:+.6}\n",
                rank + 1,
                e.feature,
                e.score
            ));
        }
        out
    }
}

/// Scores each feature by the cross-validated accuracy drop caused by
/// removing it: `score(f) = baseline - accuracy_without_f`, same folds and
/// seed throughout. Per-feature evaluations run in parallel on derived
/// deterministic sub-problems.
pub fn classifier_attribute_eval<F: Real>(
    data: &Dataset<F>,
    trainer: &SupervisedTrainer,
    folds: usize,
    seed: u64,
) -> Result<FeatureRanking> {
    if data.width() < 2 {
        return Err(Error::InsufficientData(
            "attribute evaluation needs at least 2 features".into(),
        ));
    }
    let baseline = evaluate_cv(data, trainer, folds, seed)?.accuracy;
    let scores: Result<Vec<f64>> = (0..data.width())
        .into_par_iter()
        .map(|feature| {
            let keep: Vec<usize> = (0..data.width()).filter(|&c| c != feature).collect();
            let reduced = data.project(&keep)?;
            let report = evaluate_cv(&reduced, trainer, folds, seed)?;
            Ok(baseline - report.accuracy)
        })
        .collect();
    Ok(FeatureRanking::from_scores(
        RankingMethod::ClassifierEval,
        scores?,
    ))
}

/// Equal-frequency discretization: bin of `x` is the number of edges
/// `<= x`, with edges at the `i*n/bins` order statistics.
fn discretize<F: Real>(values: &[F], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut sorted: Vec<F> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("feature values are finite"));
    let edges: Vec<F> = (1..bins).map(|i| sorted[i * n / bins]).collect();
    values
        .iter()
        .map(|&v| edges.iter().filter(|&&e| v >= e).count())
        .collect()
}

fn entropy_of_counts(counts: &[usize], total: usize) -> f64 {
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / total as f64;
            h -= p * p.ln();
        }
    }
    h
}

struct BinStats {
    info_gain: f64,
    feature_entropy: f64,
}

fn binned_stats<F: Real>(values: &[F], labels: &[usize], bins: usize) -> BinStats {
    let n = values.len();
    let assignment = discretize(values, bins);
    let n_classes = crate::features::NUM_CATEGORIES;
    let mut class_counts = vec![0usize; n_classes];
    for &l in labels {
        class_counts[l] += 1;
    }
    let class_entropy = entropy_of_counts(&class_counts, n);

    let mut bin_sizes = vec![0usize; bins];
    let mut per_bin = vec![vec![0usize; n_classes]; bins];
    for (&b, &l) in assignment.iter().zip(labels) {
        bin_sizes[b] += 1;
        per_bin[b][l] += 1;
    }
    let mut conditional = 0.0;
    for (size, counts) in bin_sizes.iter().zip(&per_bin) {
        if *size > 0 {
            conditional += (*size as f64 / n as f64) * entropy_of_counts(counts, *size);
        }
    }
    BinStats {
        info_gain: class_entropy - conditional,
        feature_entropy: entropy_of_counts(&bin_sizes, n),
    }
}

fn check_two_classes<F: Real>(data: &Dataset<F>) -> Result<()> {
    if data.distinct_classes() < 2 {
        return Err(Error::InsufficientData(
            "ranking needs at least 2 classes".into(),
        ));
    }
    Ok(())
}

/// `IG(f) = H(class) - H(class | binned f)` with natural-log entropies.
pub fn info_gain_rank<F: Real>(data: &Dataset<F>, bins: usize) -> Result<FeatureRanking> {
    check_two_classes(data)?;
    let scores = (0..data.width())
        .map(|f| {
            let values: Vec<F> = data.rows().iter().map(|r| r[f]).collect();
            binned_stats(&values, data.labels(), bins).info_gain
        })
        .collect();
    Ok(FeatureRanking::from_scores(RankingMethod::InfoGain, scores))
}

/// Information gain normalized by the entropy of the binned feature;
/// features with zero entropy score zero.
pub fn gain_ratio_rank<F: Real>(data: &Dataset<F>, bins: usize) -> Result<FeatureRanking> {
    check_two_classes(data)?;
    let scores = (0..data.width())
        .map(|f| {
            let values: Vec<F> = data.rows().iter().map(|r| r[f]).collect();
            let stats = binned_stats(&values, data.labels(), bins);
            if stats.feature_entropy > 0.0 {
                stats.info_gain / stats.feature_entropy
            } else {
                0.0
            }
        })
        .collect();
    Ok(FeatureRanking::from_scores(
        RankingMethod::GainRatio,
        scores,
    ))
}

/// Absolute Pearson correlation between the feature and the numeric class
/// index; zero-variance features score zero.
pub fn correlation_rank<F: Real>(data: &Dataset<F>) -> Result<FeatureRanking> {
    if data.len() < 2 {
        return Err(Error::InsufficientData(
            "correlation needs at least 2 instances".into(),
        ));
    }
    let n = data.len() as f64;
    let label_mean = data.labels().iter().sum::<usize>() as f64 / n;
    let label_var: f64 = data
        .labels()
        .iter()
        .map(|&l| (l as f64 - label_mean).powi(2))
        .sum();
    let scores = (0..data.width())
        .map(|f| {
            let values: Vec<f64> = data.rows().iter().map(|r| r[f].into_f64()).collect();
            let mean = values.iter().sum::<f64>() / n;
            let var: f64 = values.iter().map(|&v| (v - mean).powi(2)).sum();
            if var <= 0.0 || label_var <= 0.0 {
                return 0.0;
            }
            let cov: f64 = values
                .iter()
                .zip(data.labels())
                .map(|(&v, &l)| (v - mean) * (l as f64 - label_mean))
                .sum();
            (cov / (var.sqrt() * label_var.sqrt())).abs()
        })
        .collect();
    Ok(FeatureRanking::from_scores(
        RankingMethod::Correlation,
        scores,
    ))
}

/// Projects onto the top `k` ranked features (ascending column order, so
/// `k = width` reproduces the full evaluation exactly) and cross-validates.
pub fn top_k_evaluation<F: Real>(
    data: &Dataset<F>,
    ranking: &FeatureRanking,
    k: usize,
    trainer: &SupervisedTrainer,
    folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    if k == 0 || k > ranking.entries.len() || k > data.width() {
        return Err(Error::Validation(format!(
            "k must lie in 1..={}, got {k}",
            data.width().min(ranking.entries.len())
        )));
    }
    let reduced = data.project(&ranking.top_columns(k))?;
    evaluate_cv(&reduced, trainer, folds, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{NUM_CATEGORIES, NUM_FEATURES};
    use crate::learning::ForestConfig;
    use approx::assert_relative_eq;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand::SeedableRng;

    /// 24 noise features except: feature 1 encodes the label, feature 2
    /// duplicates feature 3 (pure redundancy).
    pub(super) fn leak_dataset(per_class: usize, seed: u64) -> Dataset<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for class in 0..NUM_CATEGORIES {
            for i in 0..per_class {
                let mut row: Vec<f64> = (0..NUM_FEATURES).map(|_| rng.random::<f64>()).collect();
                row[0] = class as f64;
                row[2] = row[1];
                ids.push(format!("c{class}_{i}"));
                labels.push(class);
                rows.push(row);
            }
        }
        Dataset::new(ids, labels, rows).unwrap()
    }

    fn small_forest() -> SupervisedTrainer {
        SupervisedTrainer::RandomForest(ForestConfig {
            trees: 15,
            ..ForestConfig::default()
        })
    }

    #[test]
    fn label_leak_ranks_first_in_classifier_eval() {
        let data = leak_dataset(9, 1);
        let ranking = classifier_attribute_eval(&data, &small_forest(), 3, 5).unwrap();
        assert_eq!(ranking.entries[0].feature, 1);
        assert!(ranking.entries[0].score > 0.0);
    }

    /// Strong class signal on most features plus a duplicated pure-noise
    /// pair at features 22/23; accuracy is saturated either way, so the
    /// duplicates contribute nothing.
    fn redundant_dataset(per_class: usize, seed: u64) -> Dataset<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for class in 0..NUM_CATEGORIES {
            for i in 0..per_class {
                let mut row: Vec<f64> = (0..NUM_FEATURES)
                    .map(|j| ((class * 5 + j) % 11) as f64 + 0.05 * rng.random::<f64>())
                    .collect();
                let noise = rng.random::<f64>();
                row[21] = noise;
                row[22] = noise;
                row[23] = rng.random::<f64>();
                ids.push(format!("c{class}_{i}"));
                labels.push(class);
                rows.push(row);
            }
        }
        Dataset::new(ids, labels, rows).unwrap()
    }

    #[test]
    fn redundant_feature_scores_near_zero() {
        let data = redundant_dataset(8, 2);
        let ranking = classifier_attribute_eval(&data, &small_forest(), 3, 5).unwrap();
        // features 22 and 23 are exact duplicates; removing either leaves
        // the other, so the accuracy drop is negligible
        for target in [22, 23] {
            let entry = ranking
                .entries
                .iter()
                .find(|e| e.feature == target)
                .unwrap();
            assert!(entry.score.abs() < 0.05, "f{target} scored {}", entry.score);
        }
    }

    #[test]
    fn classifier_eval_is_deterministic() {
        let data = leak_dataset(6, 3);
        let a = classifier_attribute_eval(&data, &small_forest(), 3, 11).unwrap();
        let b = classifier_attribute_eval(&data, &small_forest(), 3, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn info_gain_label_feature_is_maximal() {
        let data = leak_dataset(8, 4);
        let ranking = info_gain_rank(&data, 10).unwrap();
        assert_eq!(ranking.entries[0].feature, 1);
        assert_relative_eq!(
            ranking.entries[0].score,
            (NUM_CATEGORIES as f64).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn constant_feature_scores_zero_everywhere() {
        let mut data = leak_dataset(6, 5);
        let rows: Vec<Vec<f64>> = data
            .rows()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r[5] = 0.42;
                r
            })
            .collect();
        data = Dataset::new(
            (0..rows.len()).map(|i| data.id(i).to_string()).collect(),
            data.labels().to_vec(),
            rows,
        )
        .unwrap();
        let ig = info_gain_rank(&data, 10).unwrap();
        let gr = gain_ratio_rank(&data, 10).unwrap();
        let co = correlation_rank(&data).unwrap();
        for ranking in [&ig, &gr, &co] {
            let entry = ranking.entries.iter().find(|e| e.feature == 6).unwrap();
            assert_relative_eq!(entry.score, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gain_ratio_prefers_coarse_encoding() {
        // two balanced classes; feature A separates them with 2 distinct
        // values, feature B with 10 distinct values
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for i in 0..20 {
            let class = i / 10;
            let a = class as f64;
            let b = (i / 2) as f64 / 10.0;
            ids.push(format!("i{i}"));
            labels.push(class);
            rows.push(vec![a, b]);
        }
        let data = Dataset::new(ids, labels, rows).unwrap();
        let ig = info_gain_rank(&data, 10).unwrap();
        let ig_a = ig.entries.iter().find(|e| e.feature == 1).unwrap().score;
        let ig_b = ig.entries.iter().find(|e| e.feature == 2).unwrap().score;
        assert_relative_eq!(ig_a, ig_b, epsilon = 1e-12);
        assert_relative_eq!(ig_a, 2.0f64.ln(), epsilon = 1e-12);

        let gr = gain_ratio_rank(&data, 10).unwrap();
        let gr_a = gr.entries.iter().find(|e| e.feature == 1).unwrap().score;
        let gr_b = gr.entries.iter().find(|e| e.feature == 2).unwrap().score;
        assert_relative_eq!(gr_a, 1.0, epsilon = 1e-12);
        assert!(
            gr_a > gr_b,
            "normalization should penalize the 10-bin encoding"
        );
    }

    #[test]
    fn correlation_exact_and_permuted() {
        let data = leak_dataset(24, 6);
        let ranking = correlation_rank(&data).unwrap();
        let exact = ranking.entries.iter().find(|e| e.feature == 1).unwrap();
        assert_relative_eq!(exact.score, 1.0, epsilon = 1e-12);

        // permuting the label-encoding feature destroys the correlation
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut permuted_col: Vec<f64> = data.rows().iter().map(|r| r[0]).collect();
        permuted_col.shuffle(&mut rng);
        let rows: Vec<Vec<f64>> = data
            .rows()
            .iter()
            .zip(&permuted_col)
            .map(|(r, &v)| {
                let mut r = r.clone();
                r[0] = v;
                r
            })
            .collect();
        let shuffled = Dataset::new(
            (0..rows.len()).map(|i| data.id(i).to_string()).collect(),
            data.labels().to_vec(),
            rows,
        )
        .unwrap();
        let ranking = correlation_rank(&shuffled).unwrap();
        let entry = ranking.entries.iter().find(|e| e.feature == 1).unwrap();
        assert!(
            entry.score < 0.2,
            "permuted correlation {} at n=192",
            entry.score
        );
    }

    #[test]
    fn all_methods_emit_permutations() {
        let data = leak_dataset(6, 8);
        let trainer = small_forest();
        let rankings = vec![
            classifier_attribute_eval(&data, &trainer, 3, 1).unwrap(),
            info_gain_rank(&data, 10).unwrap(),
            gain_ratio_rank(&data, 10).unwrap(),
            correlation_rank(&data).unwrap(),
        ];
        for ranking in rankings {
            assert_eq!(ranking.entries.len(), NUM_FEATURES);
            let mut seen: Vec<usize> = ranking.entries.iter().map(|e| e.feature).collect();
            seen.sort_unstable();
            assert_eq!(seen, (1..=NUM_FEATURES).collect::<Vec<_>>());
            for e in &ranking.entries {
                match ranking.method {
                    RankingMethod::InfoGain => {
                        assert!((0.0..=(NUM_CATEGORIES as f64).ln() + 1e-12).contains(&e.score))
                    }
                    RankingMethod::GainRatio | RankingMethod::Correlation => {
                        assert!((0.0..=1.0 + 1e-12).contains(&e.score))
                    }
                    RankingMethod::ClassifierEval => assert!(e.score.is_finite()),
                }
            }
        }
    }

    #[test]
    fn appended_leak_feature_tops_entropy_rankings() {
        let base = leak_dataset(6, 9);
        // drop the built-in leak, then append a fresh one at the end
        let rows: Vec<Vec<f64>> = base
            .rows()
            .iter()
            .zip(base.labels())
            .map(|(r, &l)| {
                let mut r = r.clone();
                r[0] = 0.5;
                r.push(l as f64);
                r
            })
            .collect();
        let data = Dataset::new(
            (0..rows.len()).map(|i| base.id(i).to_string()).collect(),
            base.labels().to_vec(),
            rows,
        )
        .unwrap();
        let last = data.width();
        assert_eq!(info_gain_rank(&data, 10).unwrap().entries[0].feature, last);
        assert_eq!(gain_ratio_rank(&data, 10).unwrap().entries[0].feature, last);
    }

    #[test]
    fn top_k_full_width_reproduces_plain_cv() {
        let data = leak_dataset(6, 10);
        let trainer = small_forest();
        let ranking = info_gain_rank(&data, 10).unwrap();
        let full = evaluate_cv(&data, &trainer, 3, 2).unwrap();
        let topk = top_k_evaluation(&data, &ranking, NUM_FEATURES, &trainer, 3, 2).unwrap();
        assert_eq!(full, topk);
    }

    #[test]
    fn ranking_moves_accuracy_when_leak_is_kept_or_dropped() {
        let data = leak_dataset(6, 12);
        let trainer = small_forest();
        let ranking = info_gain_rank(&data, 10).unwrap();
        let with_leak = top_k_evaluation(&data, &ranking, 1, &trainer, 3, 3).unwrap();
        assert!(with_leak.accuracy > 0.9, "top-1 is the label encoder");
    }
}
