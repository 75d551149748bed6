//! Synthetic stone renderer: eight classes of colored ellipses on a white
//! background with class-controlled saturation, brightness and stripe
//! texture, so the whole pipeline can run without the photographed
//! dataset.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::color::hsv_to_rgb8;
use crate::error::Result;
use crate::features::{CATEGORY_GRID, NUM_CATEGORIES};
use crate::imaging::RgbImage;
use crate::learning::{derive_seed, rng_from};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub per_class: usize,
    pub image_size: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            per_class: 24,
            image_size: 96,
            seed: 0,
        }
    }
}

/// Class-level appearance derived from the brightness x color grid.
fn class_style(category: usize) -> (f64, f64, f64) {
    let (brightness, color) = CATEGORY_GRID[category];
    let v_mean = 0.30 + 0.18 * f64::from(brightness - 1);
    let s_mean = 0.30 + 0.12 * f64::from(color - 1);
    let hue = 100.0 + 8.0 * category as f64;
    (hue, s_mean, v_mean)
}

/// Renders one stone. Deterministic in (config.seed, category, index).
pub fn render_stone(config: &SynthConfig, category: usize, index: usize) -> RgbImage {
    let mut rng = rng_from(derive_seed(
        config.seed,
        (category * 1_000_003 + index) as u64,
    ));
    let size = config.image_size;
    let (hue, s_mean, v_mean) = class_style(category);

    let cx = size as f64 / 2.0 + rng.random_range(-3.0..3.0);
    let cy = size as f64 / 2.0 + rng.random_range(-3.0..3.0);
    // semi-axes
    let a = size as f64 * rng.random_range(0.28..0.38) / 2.0;
    let b = size as f64 * rng.random_range(0.24..0.34) / 2.0;
    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (sin_t, cos_t) = theta.sin_cos();

    // per-class stripe texture: wavelength and orientation differ by class
    let wavelength = 3.0 + (category % 4) as f64 * 2.0;
    let stripe_dir = if category.is_multiple_of(2) {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let stripe_amp = 0.04 + 0.012 * (category / 4) as f64;

    let mut img = RgbImage::filled(size, size, [255, 255, 255]);
    for y in 0..size {
        for x in 0..size {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let u = (dx * cos_t + dy * sin_t) / a;
            let w = (-dx * sin_t + dy * cos_t) / b;
            if u * u + w * w > 1.0 {
                continue;
            }
            let phase = (x as f64 * stripe_dir.0 + y as f64 * stripe_dir.1) * std::f64::consts::TAU
                / wavelength;
            let stripe = stripe_amp * phase.sin();
            let h = hue + rng.random_range(-4.0..4.0);
            let s = (s_mean + rng.random_range(-0.03..0.03)).clamp(0.02, 0.98);
            let v = (v_mean + stripe + rng.random_range(-0.03..0.03)).clamp(0.02, 0.90);
            img.set_pixel(x, y, hsv_to_rgb8(h, s, v));
        }
    }
    img
}

/// Renders the full dataset and writes one PNG per stone plus a manifest;
/// returns the manifest path. The first stone of each class is designated
/// its reference image.
pub fn generate_dataset(dir: &Path, config: &SynthConfig) -> Result<PathBuf> {
    use crate::pipeline::{ExtractionParams, ManifestCategory, ManifestFile, ManifestImage};

    fs::create_dir_all(dir)?;
    let mut images = Vec::new();
    let mut references = std::collections::BTreeMap::new();
    for category in 0..NUM_CATEGORIES {
        let sub = dir.join(format!("cat{category}"));
        fs::create_dir_all(&sub)?;
        for index in 0..config.per_class {
            let rel = format!("cat{category}/stone_{index:03}.png");
            let img = render_stone(config, category, index);
            img.save_png(&dir.join(&rel))?;
            if index == 0 {
                references.insert(category.to_string(), rel.clone());
            }
            images.push(ManifestImage {
                path: rel,
                category,
            });
        }
    }
    let manifest = ManifestFile {
        categories: (0..NUM_CATEGORIES)
            .map(|c| ManifestCategory {
                category: c,
                brightness_level: CATEGORY_GRID[c].0,
                color_level: CATEGORY_GRID[c].1,
            })
            .collect(),
        images,
        references: Some(references),
        extraction: Some(ExtractionParams::default()),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail");
    fs::write(&path, json + "\n")?;
    Ok(path)
}

/// In-memory rendering of the whole dataset, for tests that skip the
/// filesystem: `(category, image)` in manifest order.
pub fn render_all(config: &SynthConfig) -> Vec<(usize, RgbImage)> {
    let mut out = Vec::with_capacity(NUM_CATEGORIES * config.per_class);
    for category in 0..NUM_CATEGORIES {
        for index in 0..config.per_class {
            out.push((category, render_stone(config, category, index)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{extract_roi, RoiParams};

    #[test]
    fn stones_are_deterministic_and_segmentable() {
        let config = SynthConfig {
            per_class: 1,
            ..SynthConfig::default()
        };
        for category in 0..NUM_CATEGORIES {
            let a = render_stone(&config, category, 0);
            let b = render_stone(&config, category, 0);
            assert_eq!(a, b);
            let (masked, mask) = extract_roi(&a, &RoiParams::default()).unwrap();
            let area = mask.count_true();
            let total = (config.image_size * config.image_size) as usize;
            assert!(area > total / 20, "stone too small: {area}");
            assert!(area < total / 2, "stone too large: {area}");
            // background is exactly black after masking
            for y in 0..2 {
                for x in 0..2 {
                    assert_eq!(masked.pixel(x, y), [0, 0, 0]);
                }
            }
        }
    }

    #[test]
    fn classes_have_distinct_brightness_or_saturation() {
        let config = SynthConfig::default();
        let styles: Vec<(f64, f64, f64)> = (0..NUM_CATEGORIES).map(class_style).collect();
        for i in 0..NUM_CATEGORIES {
            for j in i + 1..NUM_CATEGORIES {
                let ds = (styles[i].1 - styles[j].1).abs();
                let dv = (styles[i].2 - styles[j].2).abs();
                assert!(
                    ds > 0.1 || dv > 0.1,
                    "classes {i} and {j} are not separable in style"
                );
            }
        }
        let _ = config;
    }

    #[test]
    fn dataset_generation_writes_manifest_and_images() {
        let dir = tempfile::tempdir().unwrap();
        let config = SynthConfig {
            per_class: 2,
            ..SynthConfig::default()
        };
        let manifest_path = generate_dataset(dir.path(), &config).unwrap();
        assert!(manifest_path.exists());
        for c in 0..NUM_CATEGORIES {
            assert!(dir.path().join(format!("cat{c}/stone_000.png")).exists());
            assert!(dir.path().join(format!("cat{c}/stone_001.png")).exists());
        }
    }
}
