//! Dataset manifest, batch feature extraction, feature-table CSV and
//! experiment dispatch.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{
    build_reference_set, extract_features, CategoryInfo, FeatureVector, NUM_CATEGORIES,
    NUM_FEATURES,
};
use crate::imaging::{extract_roi, BinaryMask, RgbImage, RoiParams};
use crate::learning::{
    affinity_propagation, evaluate_cv, evaluate_holdout, kmeans, map_clusters_to_labels, ApConfig,
    ConfusionMatrix, Dataset, EvalReport, ForestConfig, LabeledInstance, MlpConfig,
    SupervisedTrainer,
};

/// Histogram bins, GLCM levels and segmentation parameters used for a
/// whole extraction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub bins: usize,
    pub glcm_levels: usize,
    pub roi: RoiParams,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            bins: 64,
            glcm_levels: 64,
            roi: RoiParams::default(),
        }
    }
}

/// Raw manifest document as stored on disk. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFile {
    pub categories: Vec<ManifestCategory>,
    pub images: Vec<ManifestImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<ExtractionParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCategory {
    pub category: usize,
    pub brightness_level: u8,
    pub color_level: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestImage {
    pub path: String,
    pub category: usize,
}

/// Validated dataset description.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    root: PathBuf,
    categories: Vec<CategoryInfo>,
    images: Vec<ManifestImage>,
    /// One `(category, relative path)` per category, ascending.
    references: Vec<(usize, String)>,
    extraction: ExtractionParams,
    manifest_hash: String,
    references_from_fallback: bool,
}

impl DatasetManifest {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn categories(&self) -> &[CategoryInfo] {
        &self.categories
    }

    pub fn images(&self) -> &[ManifestImage] {
        &self.images
    }

    pub fn references(&self) -> &[(usize, String)] {
        &self.references
    }

    pub fn extraction(&self) -> &ExtractionParams {
        &self.extraction
    }

    pub fn manifest_hash(&self) -> &str {
        &self.manifest_hash
    }

    pub fn references_from_fallback(&self) -> bool {
        self.references_from_fallback
    }

    /// Overrides extraction parameters (CLI flags beat manifest values).
    pub fn set_extraction(&mut self, params: ExtractionParams) {
        self.extraction = params;
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads and validates a manifest; all invariants are checked eagerly.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    if !path.exists() {
        return Err(Error::Validation(format!(
            "manifest {} does not exist",
            path.display()
        )));
    }
    let bytes = fs::read(path)?;
    let manifest_hash = sha256_hex(&bytes);
    let file: ManifestFile = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    if file.categories.len() != NUM_CATEGORIES {
        return Err(Error::Validation(format!(
            "manifest must declare exactly {NUM_CATEGORIES} categories, found {}",
            file.categories.len()
        )));
    }
    let mut categories = vec![None; NUM_CATEGORIES];
    for c in &file.categories {
        let info = CategoryInfo {
            category: c.category,
            brightness_level: c.brightness_level,
            color_level: c.color_level,
        };
        info.validate()?;
        if categories[c.category].is_some() {
            return Err(Error::Validation(format!(
                "category {} declared twice",
                c.category
            )));
        }
        categories[c.category] = Some(info);
    }
    let categories: Vec<CategoryInfo> = categories
        .into_iter()
        .enumerate()
        .map(|(c, slot)| slot.ok_or(Error::Validation(format!("missing category {c}"))))
        .collect::<Result<_>>()?;

    if file.images.is_empty() {
        return Err(Error::Validation("manifest lists no images".into()));
    }
    let mut per_category = [0usize; NUM_CATEGORIES];
    for image in &file.images {
        if image.category >= NUM_CATEGORIES {
            return Err(Error::Validation(format!(
                "image {} has category {} out of range 0..{NUM_CATEGORIES}",
                image.path, image.category
            )));
        }
        per_category[image.category] += 1;
        let abs = root.join(&image.path);
        if !abs.is_file() {
            return Err(Error::Validation(format!(
                "image file {} is missing",
                abs.display()
            )));
        }
    }
    for (category, &count) in per_category.iter().enumerate() {
        if count == 0 {
            return Err(Error::Validation(format!(
                "category {category} has no images"
            )));
        }
    }

    // resolve references; omitted entries fall back to the
    // lexicographically first image of the category
    let declared = file.references.unwrap_or_default();
    let mut references = Vec::with_capacity(NUM_CATEGORIES);
    let mut references_from_fallback = false;
    for category in 0..NUM_CATEGORIES {
        if let Some(rel) = declared.get(&category.to_string()) {
            let abs = root.join(rel);
            if !abs.is_file() {
                return Err(Error::Validation(format!(
                    "reference image {} for category {category} is missing",
                    abs.display()
                )));
            }
            references.push((category, rel.clone()));
        } else {
            let first = file
                .images
                .iter()
                .filter(|i| i.category == category)
                .map(|i| i.path.clone())
                .min()
                .expect("category image counts checked above");
            references.push((category, first));
            references_from_fallback = true;
        }
    }

    Ok(DatasetManifest {
        root,
        categories,
        images: file.images,
        references,
        extraction: file.extraction.unwrap_or_default(),
        manifest_hash,
        references_from_fallback,
    })
}

/// Generates a manifest for a directory laid out as one sub-directory per
/// category (`cat0` .. `cat7`), without writing it to disk.
pub fn infer_manifest_file(root: &Path) -> Result<ManifestFile> {
    let mut images = Vec::new();
    for category in 0..NUM_CATEGORIES {
        let sub = root.join(format!("cat{category}"));
        if !sub.is_dir() {
            return Err(Error::Validation(format!(
                "expected directory {} for category {category}",
                sub.display()
            )));
        }
        let mut paths: Vec<String> = fs::read_dir(&sub)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| format!("cat{category}/{}", e.file_name().to_string_lossy()))
            .filter(|p| p.ends_with(".png") || p.ends_with(".jpg") || p.ends_with(".jpeg"))
            .collect();
        paths.sort();
        for path in paths {
            images.push(ManifestImage { path, category });
        }
    }
    Ok(ManifestFile {
        categories: (0..NUM_CATEGORIES)
            .map(|c| ManifestCategory {
                category: c,
                brightness_level: crate::features::CATEGORY_GRID[c].0,
                color_level: crate::features::CATEGORY_GRID[c].1,
            })
            .collect(),
        images,
        references: None,
        extraction: Some(ExtractionParams::default()),
    })
}

/// Extraction run echo carried with a feature table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest_hash: String,
    pub extraction: ExtractionParams,
    pub references: Vec<(usize, String)>,
    pub references_from_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct ExtractionFailure {
    pub id: String,
    pub message: String,
}

impl fmt::Display for ExtractionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, self.message)
    }
}

/// Extracted features for a whole dataset, in manifest order.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub instances: Vec<LabeledInstance<f64>>,
    pub provenance: Provenance,
    pub failures: Vec<ExtractionFailure>,
}

fn load_and_segment(root: &Path, rel: &str, roi: &RoiParams) -> Result<(RgbImage, BinaryMask)> {
    let img = RgbImage::from_path(&root.join(rel))?;
    extract_roi(&img, roi)
}

/// Segments every image and extracts the 24 features against the
/// manifest's reference histograms. Per-image failures are collected and
/// the batch continues; the call fails only when reference images fail or
/// every image fails.
pub fn extract_batch(manifest: &DatasetManifest) -> Result<FeatureTable> {
    let params = &manifest.extraction;
    let segmented_refs: Vec<(usize, RgbImage, BinaryMask)> = manifest
        .references
        .iter()
        .map(|(category, rel)| {
            let (masked, mask) =
                load_and_segment(&manifest.root, rel, &params.roi).map_err(|e| {
                    Error::Validation(format!("reference image {rel} failed extraction: {e}"))
                })?;
            Ok((*category, masked, mask))
        })
        .collect::<Result<_>>()?;
    let ref_views: Vec<(usize, &RgbImage, &BinaryMask)> =
        segmented_refs.iter().map(|(c, i, m)| (*c, i, m)).collect();
    let refs = build_reference_set::<f64>(&ref_views, params.bins)?;

    let results: Vec<std::result::Result<LabeledInstance<f64>, ExtractionFailure>> = manifest
        .images
        .par_iter()
        .map(|entry| {
            let run = || -> Result<LabeledInstance<f64>> {
                let (masked, mask) = load_and_segment(&manifest.root, &entry.path, &params.roi)?;
                let features =
                    extract_features(&masked, &mask, &refs, params.glcm_levels, params.bins)?;
                Ok(LabeledInstance {
                    id: entry.path.clone(),
                    label: entry.category,
                    features,
                })
            };
            run().map_err(|e| ExtractionFailure {
                id: entry.path.clone(),
                message: e.to_string(),
            })
        })
        .collect();

    let mut instances = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(i) => instances.push(i),
            Err(f) => failures.push(f),
        }
    }
    if instances.is_empty() {
        return Err(Error::Validation(format!(
            "all {} images failed extraction; first failure: {}",
            manifest.images.len(),
            failures
                .first()
                .map(ToString::to_string)
                .unwrap_or_default()
        )));
    }
    Ok(FeatureTable {
        instances,
        provenance: Provenance {
            manifest_hash: manifest.manifest_hash.clone(),
            extraction: params.clone(),
            references: manifest.references.clone(),
            references_from_fallback: manifest.references_from_fallback,
        },
        failures,
    })
}

pub fn feature_csv_header() -> String {
    let mut header = String::from("id,label");
    for i in 1..=NUM_FEATURES {
        header.push_str(&format!(",f{i}"));
    }
    header
}

/// Serializes instances as CSV with 17 significant digits per value.
pub fn feature_csv_string(instances: &[LabeledInstance<f64>]) -> String {
    let mut out = feature_csv_header();
    out.push('\n');
    for inst in instances {
        out.push_str(&inst.id);
        out.push_str(&format!(",{}", inst.label));
        for v in inst.features.values() {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_feature_csv(instances: &[LabeledInstance<f64>], path: &Path) -> Result<()> {
    fs::write(path, feature_csv_string(instances))?;
    Ok(())
}

/// Parses a feature CSV produced by [`write_feature_csv`].
pub fn read_feature_csv(path: &Path) -> Result<Vec<LabeledInstance<f64>>> {
    let text = fs::read_to_string(path)?;
    parse_feature_csv(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_feature_csv(text: &str) -> std::result::Result<Vec<LabeledInstance<f64>>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    if header != feature_csv_header() {
        return Err(format!(
            "unexpected header {header:?}; expected {:?}",
            feature_csv_header()
        ));
    }
    let mut instances = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + NUM_FEATURES {
            return Err(format!(
                "line {}: expected {} fields, got {}",
                lineno + 2,
                2 + NUM_FEATURES,
                fields.len()
            ));
        }
        let label: usize = fields[1]
            .parse()
            .map_err(|e| format!("line {}: bad label: {e}", lineno + 2))?;
        if label >= NUM_CATEGORIES {
            return Err(format!("line {}: label {label} out of range", lineno + 2));
        }
        let mut values = [0.0f64; NUM_FEATURES];
        for (i, field) in fields[2..].iter().enumerate() {
            values[i] = field
                .parse()
                .map_err(|e| format!("line {}: bad f{}: {e}", lineno + 2, i + 1))?;
        }
        instances.push(LabeledInstance {
            id: fields[0].to_string(),
            label,
            features: FeatureVector::new(values),
        });
    }
    if instances.is_empty() {
        return Err("no data rows".into());
    }
    Ok(instances)
}

/// The five algorithms of the experimental grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Mlp,
    RandomForest,
    ExtraTrees,
    KMeans,
    AffinityPropagation,
}

impl Algorithm {
    pub const SUPERVISED_NAMES: &'static str = "mlp, rf, ert";
    pub const CLUSTERING_NAMES: &'static str = "kmeans, ap";

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Mlp => "mlp",
            Algorithm::RandomForest => "random_forest",
            Algorithm::ExtraTrees => "extra_trees",
            Algorithm::KMeans => "kmeans",
            Algorithm::AffinityPropagation => "affinity_propagation",
        }
    }

    pub fn is_supervised(&self) -> bool {
        matches!(
            self,
            Algorithm::Mlp | Algorithm::RandomForest | Algorithm::ExtraTrees
        )
    }

    pub fn trainer(&self) -> Option<SupervisedTrainer> {
        match self {
            Algorithm::Mlp => Some(SupervisedTrainer::Mlp(MlpConfig::default())),
            Algorithm::RandomForest => {
                Some(SupervisedTrainer::RandomForest(ForestConfig::default()))
            }
            Algorithm::ExtraTrees => Some(SupervisedTrainer::ExtraTrees(ForestConfig::default())),
            _ => None,
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Algorithm::Mlp),
            "rf" | "random_forest" => Ok(Algorithm::RandomForest),
            "ert" | "extra_trees" => Ok(Algorithm::ExtraTrees),
            "kmeans" => Ok(Algorithm::KMeans),
            "ap" | "affinity_propagation" => Ok(Algorithm::AffinityPropagation),
            other => Err(Error::Validation(format!(
                "unknown algorithm {other:?}; valid: {}, {}",
                Algorithm::SUPERVISED_NAMES,
                Algorithm::CLUSTERING_NAMES
            ))),
        }
    }
}

/// Evaluation protocol for supervised runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Protocol {
    CrossValidation { folds: usize },
    Holdout { test_fraction: f64 },
}

/// Clustering run summarized through the majority label mapping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub algorithm: String,
    pub k: usize,
    pub converged: bool,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mapping: Vec<usize>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone)]
pub enum ExperimentOutcome {
    Supervised(EvalReport),
    Clustering(ClusteringReport),
}

/// Dispatches one algorithm over a feature table under the given protocol
/// (clustering runs ignore the protocol and use the full table).
pub fn run_experiment(
    instances: &[LabeledInstance<f64>],
    algorithm: Algorithm,
    protocol: Protocol,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let data = Dataset::from_instances(instances)?;
    if let Some(trainer) = algorithm.trainer() {
        let report = match protocol {
            Protocol::CrossValidation { folds } => evaluate_cv(&data, &trainer, folds, seed)?,
            Protocol::Holdout { test_fraction } => {
                evaluate_holdout(&data, &trainer, test_fraction, seed)?
            }
        };
        return Ok(ExperimentOutcome::Supervised(report));
    }
    let clustering = match algorithm {
        Algorithm::KMeans => kmeans(&data, NUM_CATEGORIES, seed)?,
        Algorithm::AffinityPropagation => affinity_propagation(&data, &ApConfig::default(), seed)?,
        _ => unreachable!("supervised handled above"),
    };
    let eval = map_clusters_to_labels(&clustering, data.labels())?;
    Ok(ExperimentOutcome::Clustering(ClusteringReport {
        algorithm: algorithm.name().into(),
        k: clustering.k,
        converged: clustering.converged,
        accuracy: eval.accuracy,
        macro_f1: eval.macro_f1,
        mapping: eval.mapping,
        confusion: eval.confusion,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, SynthConfig};

    fn synth_dir(per_class: usize, seed: u64) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let config = SynthConfig {
            per_class,
            seed,
            ..SynthConfig::default()
        };
        let manifest = generate_dataset(dir.path(), &config).unwrap();
        (dir, manifest)
    }

    #[test]
    fn manifest_loads_and_validates() {
        let (_dir, path) = synth_dir(2, 1);
        let manifest = load_manifest(&path).unwrap();
        assert_eq!(manifest.categories().len(), NUM_CATEGORIES);
        assert_eq!(manifest.images().len(), 2 * NUM_CATEGORIES);
        assert_eq!(manifest.references().len(), NUM_CATEGORIES);
        assert!(!manifest.references_from_fallback());
        assert_eq!(manifest.manifest_hash().len(), 64);
    }

    #[test]
    fn manifest_missing_category_is_named() {
        let (dir, path) = synth_dir(1, 2);
        let text = fs::read_to_string(&path).unwrap();
        let mut file: ManifestFile = serde_json::from_str(&text).unwrap();
        file.images.retain(|i| i.category != 5);
        file.references.as_mut().unwrap().remove("5");
        let edited = dir.path().join("edited.json");
        fs::write(&edited, serde_json::to_string(&file).unwrap()).unwrap();
        let err = load_manifest(&edited).unwrap_err();
        assert!(err.to_string().contains("category 5"), "{err}");
    }

    #[test]
    fn manifest_dangling_path_is_named() {
        let (dir, path) = synth_dir(1, 3);
        let text = fs::read_to_string(&path).unwrap();
        let mut file: ManifestFile = serde_json::from_str(&text).unwrap();
        file.images.push(ManifestImage {
            path: "cat0/ghost.png".into(),
            category: 0,
        });
        let edited = dir.path().join("edited.json");
        fs::write(&edited, serde_json::to_string(&file).unwrap()).unwrap();
        let err = load_manifest(&edited).unwrap_err();
        assert!(err.to_string().contains("ghost.png"), "{err}");
    }

    #[test]
    fn manifest_reference_fallback_is_lexicographic() {
        let (dir, path) = synth_dir(2, 4);
        let text = fs::read_to_string(&path).unwrap();
        let mut file: ManifestFile = serde_json::from_str(&text).unwrap();
        file.references = None;
        let edited = dir.path().join("edited.json");
        fs::write(&edited, serde_json::to_string(&file).unwrap()).unwrap();
        let manifest = load_manifest(&edited).unwrap();
        assert!(manifest.references_from_fallback());
        assert_eq!(manifest.references()[0].1, "cat0/stone_000.png");
    }

    #[test]
    fn batch_extracts_every_image() {
        let (_dir, path) = synth_dir(2, 5);
        let manifest = load_manifest(&path).unwrap();
        let table = extract_batch(&manifest).unwrap();
        assert_eq!(table.instances.len(), 2 * NUM_CATEGORIES);
        assert!(table.failures.is_empty());
        for inst in &table.instances {
            assert!(inst.features.is_finite());
        }
        // reference stones have zero distance to their own histograms
        let first = &table.instances[0];
        assert!(first.features.feature(5).abs() < 1e-12);
        assert!(first.features.feature(13).abs() < 1e-12);
    }

    #[test]
    fn batch_collects_partial_failures() {
        let (dir, path) = synth_dir(2, 6);
        fs::write(dir.path().join("cat3/stone_001.png"), b"not a png").unwrap();
        let manifest = load_manifest(&path).unwrap();
        let table = extract_batch(&manifest).unwrap();
        assert_eq!(table.instances.len(), 2 * NUM_CATEGORIES - 1);
        assert_eq!(table.failures.len(), 1);
        assert!(table.failures[0].id.contains("cat3/stone_001.png"));
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let (_dir, path) = synth_dir(1, 7);
        let manifest = load_manifest(&path).unwrap();
        let table = extract_batch(&manifest).unwrap();
        let a = feature_csv_string(&table.instances);
        let b = feature_csv_string(&extract_batch(&manifest).unwrap().instances);
        assert_eq!(a, b, "repeated extraction must serialize identically");

        let tmp = tempfile::tempdir().unwrap();
        let csv_path = tmp.path().join("features.csv");
        write_feature_csv(&table.instances, &csv_path).unwrap();
        let loaded = read_feature_csv(&csv_path).unwrap();
        assert_eq!(loaded.len(), table.instances.len());
        for (a, b) in loaded.iter().zip(&table.instances) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.values().iter().zip(b.features.values()) {
                assert!((x - y).abs() <= x.abs() * 1e-15);
            }
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("bad.csv");
        fs::write(&path, "id,label\nfoo,0\n").unwrap();
        assert!(matches!(read_feature_csv(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_algorithm_lists_valid_names() {
        let err = Algorithm::from_str("svm").unwrap_err();
        assert!(err.to_string().contains("kmeans"));
        assert!(err.to_string().contains("mlp"));
    }

    #[test]
    fn inferred_manifest_matches_layout() {
        let (dir, _path) = synth_dir(2, 8);
        let file = infer_manifest_file(dir.path()).unwrap();
        assert_eq!(file.images.len(), 2 * NUM_CATEGORIES);
        let json = serde_json::to_string(&file).unwrap();
        let inferred = dir.path().join("inferred.json");
        fs::write(&inferred, json).unwrap();
        let manifest = load_manifest(&inferred).unwrap();
        assert!(manifest.references_from_fallback());
    }
}
