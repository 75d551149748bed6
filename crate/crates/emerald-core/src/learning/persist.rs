//! Versioned JSON model files.
//!
//! Layout: `{format_version, variant, config, standardization, parameters,
//! feature_table_hash}`. Loading a file with a newer `format_version` is an
//! error; the hash ties a model to the feature table it was trained on.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Forest, ForestConfig, Mlp, MlpConfig, MlpWeights, Model, Tree};
use crate::error::{Error, Result};
use crate::features::StandardizationParams;
use crate::num::Real;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: DeserializeOwned"))]
struct ModelDoc<F: Real> {
    format_version: u32,
    variant: String,
    config: serde_json::Value,
    standardization: Option<StandardizationParams<F>>,
    parameters: serde_json::Value,
    #[serde(default)]
    feature_table_hash: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: DeserializeOwned"))]
struct ForestParams<F: Real> {
    input_width: usize,
    trees: Vec<Tree<F>>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn save_model<F>(
    model: &Model<F>,
    feature_table_hash: Option<String>,
    path: &Path,
) -> Result<()>
where
    F: Real + Serialize + DeserializeOwned,
{
    let to_value = |e: serde_json::Error| Error::Validation(format!("model serialization: {e}"));
    let doc = match model {
        Model::Mlp(mlp) => ModelDoc::<F> {
            format_version: MODEL_FORMAT_VERSION,
            variant: "mlp".into(),
            config: serde_json::to_value(mlp.config()).map_err(to_value)?,
            standardization: Some(mlp.standardization().clone()),
            parameters: serde_json::to_value(mlp.weights()).map_err(to_value)?,
            feature_table_hash,
        },
        Model::Forest(f) | Model::ExtraTrees(f) => ModelDoc::<F> {
            format_version: MODEL_FORMAT_VERSION,
            variant: model.variant_name().into(),
            config: serde_json::to_value(f.config()).map_err(to_value)?,
            standardization: None,
            parameters: serde_json::to_value(&ForestParams {
                input_width: f.input_width(),
                trees: f.trees.clone(),
            })
            .map_err(to_value)?,
            feature_table_hash,
        },
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Validation(format!("model serialization: {e}")))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn load_model<F>(path: &Path) -> Result<(Model<F>, Option<String>)>
where
    F: Real + Serialize + DeserializeOwned,
{
    let text = fs::read_to_string(path)?;
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let probe: VersionProbe = serde_json::from_str(&text).map_err(parse_err)?;
    if probe.format_version > MODEL_FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: probe.format_version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let doc: ModelDoc<F> = serde_json::from_str(&text).map_err(parse_err)?;
    let invalid = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let model = match doc.variant.as_str() {
        "mlp" => {
            let config: MlpConfig = serde_json::from_value(doc.config).map_err(parse_err)?;
            let weights: MlpWeights<F> =
                serde_json::from_value(doc.parameters).map_err(parse_err)?;
            let (d, h) = (weights.input_width, weights.hidden);
            let o = crate::features::NUM_CATEGORIES;
            if weights.w1.len() != h * d
                || weights.b1.len() != h
                || weights.w2.len() != o * h
                || weights.b2.len() != o
            {
                return Err(invalid(format!(
                    "mlp weight shapes do not chain {d} -> {h} -> {o}"
                )));
            }
            let standardization = doc
                .standardization
                .ok_or_else(|| invalid("mlp model is missing standardization".into()))?;
            if standardization.width() != d {
                return Err(invalid(format!(
                    "standardization width {} does not match input width {d}",
                    standardization.width()
                )));
            }
            Model::Mlp(Mlp::from_parts(config, standardization, weights))
        }
        "random_forest" | "extra_trees" => {
            let config: ForestConfig = serde_json::from_value(doc.config).map_err(parse_err)?;
            let params: ForestParams<F> =
                serde_json::from_value(doc.parameters).map_err(parse_err)?;
            for tree in &params.trees {
                for node in &tree.nodes {
                    if let super::TreeNode::Split {
                        feature,
                        left,
                        right,
                        ..
                    } = node
                    {
                        if *feature >= params.input_width
                            || *left >= tree.nodes.len()
                            || *right >= tree.nodes.len()
                        {
                            return Err(invalid(format!(
                                "tree node references feature {feature} or children out of range"
                            )));
                        }
                    }
                }
            }
            let forest = Forest::from_parts(config, params.input_width, params.trees);
            if doc.variant == "random_forest" {
                Model::Forest(forest)
            } else {
                Model::ExtraTrees(forest)
            }
        }
        other => return Err(invalid(format!("unknown model variant {other:?}"))),
    };
    Ok((model, doc.feature_table_hash))
}
