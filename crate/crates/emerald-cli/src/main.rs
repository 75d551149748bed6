//! `emerald` — grade emerald stone photographs end to end: extract
//! features, train and evaluate classifiers, cluster, rank features and
//! generate synthetic fixtures.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 partial
//! per-image extraction failure, 3 internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};

use emerald_core::learning::{
    learning_curve, load_model, predict, save_model, Dataset, SupervisedTrainer,
};
use emerald_core::pipeline::{
    extract_batch, feature_csv_string, load_manifest, read_feature_csv, run_experiment, sha256_hex,
    Algorithm, ExperimentOutcome, Protocol,
};
use emerald_core::ranking::{
    classifier_attribute_eval, correlation_rank, gain_ratio_rank, info_gain_rank, FeatureRanking,
};
use emerald_core::synth::{generate_dataset, SynthConfig};
use emerald_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "emerald",
    version,
    about = "Emerald stone grading: segmentation, features, learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the 24-feature table from a dataset manifest
    Extract {
        /// Dataset manifest (JSON)
        #[arg(long)]
        manifest: PathBuf,
        /// Output feature CSV
        #[arg(long)]
        out: PathBuf,
        /// Histogram bin count override
        #[arg(long)]
        bins: Option<usize>,
        /// GLCM gray-level count override
        #[arg(long = "glcm-levels")]
        glcm_levels: Option<usize>,
        /// Morphological closing radius override (pixels)
        #[arg(long = "closing-radius")]
        closing_radius: Option<u32>,
        /// Write each stone's binary mask as PNG into this directory
        #[arg(long = "dump-masks")]
        dump_masks: Option<PathBuf>,
    },
    /// Train a supervised model on a feature CSV
    Train {
        #[arg(long)]
        features: PathBuf,
        /// One of: mlp, rf, ert
        #[arg(long)]
        algo: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict labels for a feature CSV with a trained model
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Output predictions CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate (or hold out) a supervised algorithm
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        /// One of: mlp, rf, ert
        #[arg(long)]
        algo: String,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use a stratified hold-out of this test fraction instead of CV
        #[arg(long)]
        holdout: Option<f64>,
        /// Optional JSON report path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster the feature table and score via majority label mapping
    Cluster {
        #[arg(long)]
        features: PathBuf,
        /// One of: kmeans, ap
        #[arg(long)]
        algo: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional JSON report path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank the 24 features by one of four methods
    Rank {
        #[arg(long)]
        features: PathBuf,
        /// One of: classifier, infogain, gainratio, correlation
        #[arg(long)]
        method: String,
        /// Classifier for --method classifier: rf or mlp
        #[arg(long, default_value = "rf")]
        algo: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Discretization bins for infogain / gainratio
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Optional ranking CSV path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learning curve over stratified training fractions
    Curve {
        #[arg(long)]
        features: PathBuf,
        /// One of: mlp, rf, ert
        #[arg(long)]
        algo: String,
        /// Comma-separated training fractions in (0, 1]
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        fractions: String,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output curve CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a synthetic 8-class dataset with a manifest
    Synth {
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "per-class", default_value_t = 24)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Image side length in pixels
        #[arg(long, default_value_t = 96)]
        size: u32,
    },
    /// Generate a manifest for a directory laid out as cat0/..cat7/
    Manifest {
        /// Dataset root containing cat0..cat7 sub-directories
        #[arg(long)]
        dir: PathBuf,
        /// Output manifest path
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    if let Ok(value) = std::env::var("EMERALD_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .ok();
            }
            _ => eprintln!("warning: ignoring invalid EMERALD_THREADS={value}"),
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version are not failures
            std::process::exit(if e.exit_code() == 0 { 0 } else { 1 });
        }
    };
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => 3,
                _ => 1,
            }
        }
    });
}

fn supervised_trainer(algo: &str) -> Result<SupervisedTrainer> {
    let algorithm = Algorithm::from_str(algo)?;
    algorithm.trainer().ok_or_else(|| {
        Error::Validation(format!(
            "{algo:?} is not a supervised algorithm; valid: {}",
            Algorithm::SUPERVISED_NAMES
        ))
    })
}

/// Debug export: re-segments each image and writes its 0/255 mask PNG.
fn dump_roi_masks(
    manifest: &emerald_core::pipeline::DatasetManifest,
    mask_dir: &PathBuf,
) -> Result<()> {
    use emerald_core::imaging::{extract_roi, RgbImage};
    fs::create_dir_all(mask_dir)?;
    for entry in manifest.images() {
        let Ok(img) = RgbImage::from_path(&manifest.root().join(&entry.path)) else {
            continue;
        };
        let Ok((_, mask)) = extract_roi(&img, &manifest.extraction().roi) else {
            continue;
        };
        let name = entry.path.replace(['/', '\\'], "_");
        mask.save_png(&mask_dir.join(format!("{name}.mask.png")))?;
    }
    Ok(())
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

fn load_features_with_hash(
    path: &PathBuf,
) -> Result<(Vec<emerald_core::learning::LabeledInstance>, String)> {
    require_file(path, "feature table")?;
    let bytes = fs::read(path)?;
    let hash = sha256_hex(&bytes);
    let instances = read_feature_csv(path)?;
    Ok((instances, hash))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Extract {
            manifest,
            out,
            bins,
            glcm_levels,
            closing_radius,
            dump_masks,
        } => {
            let mut manifest = load_manifest(&manifest)?;
            let mut params = manifest.extraction().clone();
            if let Some(b) = bins {
                params.bins = b;
            }
            if let Some(g) = glcm_levels {
                params.glcm_levels = g;
            }
            if let Some(r) = closing_radius {
                params.roi.closing_radius = r;
            }
            manifest.set_extraction(params);
            let table = extract_batch(&manifest)?;
            fs::write(&out, feature_csv_string(&table.instances))?;
            if let Some(mask_dir) = dump_masks {
                dump_roi_masks(&manifest, &mask_dir)?;
            }
            if table.provenance.references_from_fallback {
                eprintln!(
                    "note: manifest names no reference images; using the lexicographically first image per category"
                );
            }
            println!(
                "extracted {} of {} stones into {}",
                table.instances.len(),
                table.instances.len() + table.failures.len(),
                out.display()
            );
            if table.failures.is_empty() {
                Ok(0)
            } else {
                for failure in &table.failures {
                    eprintln!("failed: {failure}");
                }
                Ok(2)
            }
        }

        Command::Train {
            features,
            algo,
            seed,
            out,
        } => {
            let trainer = supervised_trainer(&algo)?;
            let (instances, hash) = load_features_with_hash(&features)?;
            let data = Dataset::from_instances(&instances)?;
            let model = trainer.train(&data, seed)?;
            save_model(&model, Some(hash), &out)?;
            println!(
                "trained {} on {} instances; model written to {}",
                trainer.name(),
                data.len(),
                out.display()
            );
            Ok(0)
        }

        Command::Predict {
            model,
            features,
            out,
        } => {
            require_file(&model, "model file")?;
            let (model, trained_hash) = load_model::<f64>(&model)?;
            let (instances, hash) = load_features_with_hash(&features)?;
            if let Some(trained) = trained_hash {
                if trained != hash {
                    eprintln!(
                        "warning: feature table provenance {} does not match the table the model was trained on ({})",
                        &hash[..12.min(hash.len())],
                        &trained[..12.min(trained.len())]
                    );
                }
            }
            let mut csv = String::from("id,label,predicted");
            for c in 0..emerald_core::NUM_CATEGORIES {
                csv.push_str(&format!(",p{c}"));
            }
            csv.push('\n');
            let mut correct = 0usize;
            for inst in &instances {
                let (label, scores) = predict(&model, &inst.features);
                if label == inst.label {
                    correct += 1;
                }
                csv.push_str(&format!("{},{},{label}", inst.id, inst.label));
                for s in scores {
                    csv.push_str(&format!(",{s:.16e}"));
                }
                csv.push('\n');
            }
            fs::write(&out, csv)?;
            println!(
                "predicted {} instances; accuracy {:.4}; written to {}",
                instances.len(),
                correct as f64 / instances.len() as f64,
                out.display()
            );
            Ok(0)
        }

        Command::Evaluate {
            features,
            algo,
            folds,
            seed,
            holdout,
            out,
        } => {
            let algorithm = Algorithm::from_str(&algo)?;
            if !algorithm.is_supervised() {
                return Err(Error::Validation(format!(
                    "evaluate needs a supervised algorithm; valid: {}",
                    Algorithm::SUPERVISED_NAMES
                )));
            }
            let (instances, _) = load_features_with_hash(&features)?;
            let protocol = match holdout {
                Some(f) => Protocol::Holdout { test_fraction: f },
                None => Protocol::CrossValidation { folds },
            };
            let outcome = run_experiment(&instances, algorithm, protocol, seed)?;
            let ExperimentOutcome::Supervised(report) = outcome else {
                unreachable!("supervised algorithm checked above");
            };
            println!("algorithm: {}", algorithm.name());
            match protocol {
                Protocol::CrossValidation { folds } => {
                    println!("protocol: {folds}-fold stratified cross-validation")
                }
                Protocol::Holdout { test_fraction } => {
                    println!("protocol: stratified hold-out, test fraction {test_fraction}")
                }
            }
            print!("{}", report.to_text_table());
            let json =
                serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
            println!("{json}");
            if let Some(path) = out {
                fs::write(&path, json + "\n")?;
            }
            Ok(0)
        }

        Command::Cluster {
            features,
            algo,
            seed,
            out,
        } => {
            let algorithm = Algorithm::from_str(&algo)?;
            if algorithm.is_supervised() {
                return Err(Error::Validation(format!(
                    "cluster needs a clustering algorithm; valid: {}",
                    Algorithm::CLUSTERING_NAMES
                )));
            }
            let (instances, _) = load_features_with_hash(&features)?;
            let outcome = run_experiment(
                &instances,
                algorithm,
                Protocol::CrossValidation { folds: 0 },
                seed,
            )?;
            let ExperimentOutcome::Clustering(report) = outcome else {
                unreachable!("clustering algorithm checked above");
            };
            if !report.converged {
                eprintln!(
                    "warning: {} did not converge; reporting the last assignment",
                    report.algorithm
                );
            }
            println!("algorithm: {}", report.algorithm);
            println!("clusters: {}", report.k);
            println!(
                "majority-mapped accuracy {:.4}  macro-F1 {:.4}",
                report.accuracy, report.macro_f1
            );
            let json =
                serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
            println!("{json}");
            if let Some(path) = out {
                fs::write(&path, json + "\n")?;
            }
            Ok(0)
        }

        Command::Rank {
            features,
            method,
            algo,
            seed,
            folds,
            bins,
            out,
        } => {
            let (instances, _) = load_features_with_hash(&features)?;
            let data = Dataset::from_instances(&instances)?;
            let ranking: FeatureRanking = match method.as_str() {
                "classifier" => {
                    let trainer = supervised_trainer(&algo)?;
                    classifier_attribute_eval(&data, &trainer, folds, seed)?
                }
                "infogain" => info_gain_rank(&data, bins)?,
                "gainratio" => gain_ratio_rank(&data, bins)?,
                "correlation" => correlation_rank(&data)?,
                other => {
                    return Err(Error::Validation(format!(
                        "unknown ranking method {other:?}; valid: classifier, infogain, gainratio, correlation"
                    )))
                }
            };
            println!("method: {}", ranking.method.name());
            print!("{}", ranking.to_text_table());
            if let Some(path) = out {
                fs::write(&path, ranking.to_csv())?;
            }
            Ok(0)
        }

        Command::Curve {
            features,
            algo,
            fractions,
            repeats,
            seed,
            out,
        } => {
            let trainer = supervised_trainer(&algo)?;
            let fractions: Vec<f64> = fractions
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Validation(format!("bad fraction {s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            let (instances, _) = load_features_with_hash(&features)?;
            let data = Dataset::from_instances(&instances)?;
            let points = learning_curve(&data, &trainer, &fractions, repeats, seed)?;
            let mut csv = String::from("fraction,train_accuracy,validation_accuracy\n");
            for p in &points {
                csv.push_str(&format!(
                    "{},{:.16e},{}\n",
                    p.fraction,
                    p.train_accuracy,
                    if p.validation_accuracy.is_nan() {
                        "NaN".to_string()
                    } else {
                        format!("{:.16e}", p.validation_accuracy)
                    }
                ));
            }
            fs::write(&out, csv)?;
            println!(
                "learning curve over {} fractions x {} repeats written to {}",
                points.len(),
                repeats,
                out.display()
            );
            Ok(0)
        }

        Command::Synth {
            out,
            per_class,
            seed,
            size,
        } => {
            let config = SynthConfig {
                per_class,
                image_size: size,
                seed,
            };
            let manifest = generate_dataset(&out, &config)?;
            println!(
                "rendered {} stones into {}; manifest at {}",
                per_class * emerald_core::NUM_CATEGORIES,
                out.display(),
                manifest.display()
            );
            Ok(0)
        }

        Command::Manifest { dir, out } => {
            let mut file = emerald_core::pipeline::infer_manifest_file(&dir)?;
            // image paths resolve relative to the manifest's directory
            let out_parent = out.parent().filter(|p| !p.as_os_str().is_empty());
            if out_parent.map(PathBuf::from) != Some(dir.clone()) {
                for image in &mut file.images {
                    image.path = format!("{}/{}", dir.display(), image.path);
                }
            }
            let json =
                serde_json::to_string_pretty(&file).expect("manifest serialization cannot fail");
            fs::write(&out, json + "\n")?;
            // validate what was just written
            let manifest = load_manifest(&out)?;
            println!(
                "manifest for {} images written to {}",
                manifest.images().len(),
                out.display()
            );
            Ok(0)
        }
    }
}
