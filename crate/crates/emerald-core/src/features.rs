//! Assembly of the 24-value feature vector for a masked stone image.
//!
//! Layout (1-based, frozen):
//! - f1..f4: mean/std of S, mean/std of V over the mask
//! - f5..f12: Bhattacharyya distance of the stone's S histogram to each
//!   category reference S histogram, categories 0..7 in order
//! - f13..f20: the same for the V channel
//! - f21, f22: GLCM homogeneity at offsets (1,0) and (0,1)
//! - f23, f24: GLCM entropy at offsets (1,0) and (0,1)

use serde::{Deserialize, Serialize};

use crate::color::{
    bhattacharyya_distance, channel_stats, masked_histogram, rgb_to_hsv, Channel, Histogram,
};
use crate::error::{Error, Result};
use crate::imaging::{to_grayscale, BinaryMask, RgbImage};
use crate::num::Real;
use crate::texture::{compute_glcm, glcm_entropy, glcm_homogeneity, normalize_glcm, GlcmOffset};

pub const NUM_FEATURES: usize = 24;
pub const NUM_CATEGORIES: usize = 8;

/// `(brightness level, color level)` per category, as graded by the
/// reference-channel workflow.
pub const CATEGORY_GRID: [(u8, u8); NUM_CATEGORIES] = [
    (1, 2), // category 0
    (2, 3), // category 1
    (2, 5), // category 2
    (2, 2), // category 3
    (2, 4), // category 4
    (3, 5), // category 5
    (2, 1), // category 6
    (1, 3), // category 7
];

/// A grading category and its place in the brightness x color grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub category: usize,
    pub brightness_level: u8,
    pub color_level: u8,
}

impl CategoryInfo {
    /// Checks the pair against the known grid.
    pub fn validate(&self) -> Result<()> {
        if self.category >= NUM_CATEGORIES {
            return Err(Error::Validation(format!(
                "category {} out of range 0..{NUM_CATEGORIES}",
                self.category
            )));
        }
        let expected = CATEGORY_GRID[self.category];
        if (self.brightness_level, self.color_level) != expected {
            return Err(Error::Validation(format!(
                "category {} should map to brightness {} / color {}, got {} / {}",
                self.category, expected.0, expected.1, self.brightness_level, self.color_level
            )));
        }
        Ok(())
    }
}

/// The ordered f1..f24 record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<F: Real = f64> {
    values: [F; NUM_FEATURES],
}

impl<F: Real> FeatureVector<F> {
    pub fn new(values: [F; NUM_FEATURES]) -> Self {
        Self { values }
    }

    pub fn from_slice(values: &[F]) -> Result<Self> {
        let values: [F; NUM_FEATURES] = values.try_into().map_err(|_| {
            Error::Validation(format!(
                "feature vector needs exactly {NUM_FEATURES} values, got {}",
                values.len()
            ))
        })?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[F; NUM_FEATURES] {
        &self.values
    }

    /// 1-based accessor matching the f1..f24 naming.
    pub fn feature(&self, index: usize) -> F {
        assert!((1..=NUM_FEATURES).contains(&index));
        self.values[index - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<F: Real> std::ops::Index<usize> for FeatureVector<F> {
    type Output = F;
    fn index(&self, i: usize) -> &F {
        &self.values[i]
    }
}

/// Per-category S and V reference histograms, all sharing one bin count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet<F: Real = f64> {
    bins: usize,
    s_hists: Vec<Histogram<F>>,
    v_hists: Vec<Histogram<F>>,
}

impl<F: Real> ReferenceSet<F> {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn s_hist(&self, category: usize) -> &Histogram<F> {
        &self.s_hists[category]
    }

    pub fn v_hist(&self, category: usize) -> &Histogram<F> {
        &self.v_hists[category]
    }
}

/// Builds the per-category reference histograms from one masked image per
/// category.
pub fn build_reference_set<F: Real>(
    references: &[(usize, &RgbImage, &BinaryMask)],
    bins: usize,
) -> Result<ReferenceSet<F>> {
    let mut slots: Vec<Option<(Histogram<F>, Histogram<F>)>> = vec![None; NUM_CATEGORIES];
    for &(category, image, mask) in references {
        if category >= NUM_CATEGORIES {
            return Err(Error::Validation(format!(
                "reference category {category} out of range 0..{NUM_CATEGORIES}"
            )));
        }
        if slots[category].is_some() {
            return Err(Error::DuplicateCategory(category));
        }
        let hsv = rgb_to_hsv::<F>(image);
        let s = masked_histogram(&hsv, Channel::Saturation, mask, bins)?;
        let v = masked_histogram(&hsv, Channel::Value, mask, bins)?;
        slots[category] = Some((s, v));
    }
    let mut s_hists = Vec::with_capacity(NUM_CATEGORIES);
    let mut v_hists = Vec::with_capacity(NUM_CATEGORIES);
    for (category, slot) in slots.into_iter().enumerate() {
        let (s, v) = slot.ok_or(Error::MissingCategory(category))?;
        s_hists.push(s);
        v_hists.push(v);
    }
    Ok(ReferenceSet {
        bins,
        s_hists,
        v_hists,
    })
}

/// Computes the full f1..f24 vector for one masked stone.
pub fn extract_features<F: Real>(
    masked: &RgbImage,
    mask: &BinaryMask,
    refs: &ReferenceSet<F>,
    glcm_levels: usize,
    bins: usize,
) -> Result<FeatureVector<F>> {
    if refs.bins != bins {
        return Err(Error::BinCountMismatch {
            left: refs.bins,
            right: bins,
        });
    }
    let hsv = rgb_to_hsv::<F>(masked);
    let s_stats = channel_stats(&hsv, Channel::Saturation, mask)?;
    let v_stats = channel_stats(&hsv, Channel::Value, mask)?;
    let s_hist = masked_histogram(&hsv, Channel::Saturation, mask, bins)?;
    let v_hist = masked_histogram(&hsv, Channel::Value, mask, bins)?;

    let mut values = [F::zero(); NUM_FEATURES];
    values[0] = s_stats.mean;
    values[1] = s_stats.std_dev;
    values[2] = v_stats.mean;
    values[3] = v_stats.std_dev;
    for c in 0..NUM_CATEGORIES {
        values[4 + c] = bhattacharyya_distance(&s_hist, refs.s_hist(c))?;
        values[12 + c] = bhattacharyya_distance(&v_hist, refs.v_hist(c))?;
    }

    let gray = to_grayscale(masked);
    let horizontal = normalize_glcm(&compute_glcm::<F>(
        &gray,
        mask,
        GlcmOffset::new(1, 0),
        glcm_levels,
    )?)?;
    let vertical = normalize_glcm(&compute_glcm::<F>(
        &gray,
        mask,
        GlcmOffset::new(0, 1),
        glcm_levels,
    )?)?;
    values[20] = glcm_homogeneity(&horizontal)?;
    values[21] = glcm_homogeneity(&vertical)?;
    values[22] = glcm_entropy(&horizontal)?;
    values[23] = glcm_entropy(&vertical)?;

    Ok(FeatureVector { values })
}

/// Per-feature means and population standard deviations used to scale
/// inputs for the MLP and the clustering algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams<F: Real = f64> {
    means: Vec<F>,
    std_devs: Vec<F>,
}

impl<F: Real> StandardizationParams<F> {
    /// Fits on feature rows of uniform width; zero deviations are replaced
    /// by one so the transform never divides by zero.
    pub fn fit_rows<R: AsRef<[F]>>(rows: &[R]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "standardization needs at least 2 vectors, got {}",
                rows.len()
            )));
        }
        let width = rows[0].as_ref().len();
        let n = F::from_usize(rows.len());
        let mut means = vec![F::zero(); width];
        for row in rows {
            for (m, &v) in means.iter_mut().zip(row.as_ref()) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut std_devs = vec![F::zero(); width];
        for row in rows {
            for ((s, &v), &m) in std_devs.iter_mut().zip(row.as_ref()).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std_devs {
            *s = (*s / n).sqrt();
            if *s == F::zero() {
                *s = F::one();
            }
        }
        Ok(Self { means, std_devs })
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn apply_row(&self, row: &[F]) -> Vec<F> {
        row.iter()
            .zip(&self.means)
            .zip(&self.std_devs)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, v: &FeatureVector<F>) -> Result<FeatureVector<F>> {
        if self.width() != NUM_FEATURES {
            return Err(Error::Validation(format!(
                "standardization width {} does not match {NUM_FEATURES}",
                self.width()
            )));
        }
        FeatureVector::from_slice(&self.apply_row(&v.values))
    }
}

/// Fit over complete 24-value feature vectors.
pub fn standardize_fit<F: Real>(train: &[FeatureVector<F>]) -> Result<StandardizationParams<F>> {
    let rows: Vec<&[F]> = train.iter().map(|v| v.values.as_slice()).collect();
    StandardizationParams::fit_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Distinct flat-color reference images, one per category.
    fn flat_references() -> Vec<(usize, RgbImage, BinaryMask)> {
        (0..NUM_CATEGORIES)
            .map(|c| {
                let tone = 20 + 28 * c as u8;
                let img = RgbImage::filled(4, 4, [tone, 255 - tone, tone / 2]);
                (c, img, BinaryMask::filled(4, 4, true))
            })
            .collect()
    }

    fn as_refs(owned: &[(usize, RgbImage, BinaryMask)]) -> Vec<(usize, &RgbImage, &BinaryMask)> {
        owned.iter().map(|(c, i, m)| (*c, i, m)).collect()
    }

    #[test]
    fn reference_set_structural_errors() {
        let owned = flat_references();
        let full = build_reference_set::<f64>(&as_refs(&owned), 16).unwrap();
        assert_eq!(full.bins(), 16);

        let seven = &as_refs(&owned)[..7];
        assert!(matches!(
            build_reference_set::<f64>(seven, 16),
            Err(Error::MissingCategory(7))
        ));

        let mut dup = as_refs(&owned);
        dup[1].0 = 0;
        assert!(matches!(
            build_reference_set::<f64>(&dup, 16),
            Err(Error::DuplicateCategory(0))
        ));
    }

    #[test]
    fn self_distance_features_are_zero() {
        let owned = flat_references();
        let refs = build_reference_set::<f64>(&as_refs(&owned), 16).unwrap();
        for (c, img, mask) in &owned {
            let f = extract_features(img, mask, &refs, 16, 16).unwrap();
            assert_relative_eq!(f.feature(5 + c), 0.0, epsilon = 1e-12);
            assert_relative_eq!(f.feature(13 + c), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_stone_degenerate_features() {
        let owned = flat_references();
        let refs = build_reference_set::<f64>(&as_refs(&owned), 16).unwrap();
        let img = RgbImage::filled(6, 6, [40, 120, 70]);
        let mask = BinaryMask::filled(6, 6, true);
        let f = extract_features(&img, &mask, &refs, 32, 16).unwrap();
        assert!(f.feature(2).abs() < 1e-12, "std of constant S");
        assert!(f.feature(4).abs() < 1e-12, "std of constant V");
        assert_relative_eq!(f.feature(21), 1.0);
        assert_relative_eq!(f.feature(22), 1.0);
        assert_relative_eq!(f.feature(23), 0.0, epsilon = 1e-12);
        assert_relative_eq!(f.feature(24), 0.0, epsilon = 1e-12);
    }

    /// Recomputes all 24 features for a two-tone stone by direct
    /// enumeration, independent of the library path.
    #[test]
    fn two_tone_stone_matches_hand_computation() {
        let a = [60u8, 180, 90];
        let b = [30u8, 90, 200];
        let mut img = RgbImage::filled(4, 2, a);
        for x in 0..4 {
            img.set_pixel(x, 1, b);
        }
        let mask = BinaryMask::filled(4, 2, true);
        let owned = flat_references();
        let refs = build_reference_set::<f64>(&as_refs(&owned), 8).unwrap();
        let bins = 8;
        let levels = 8;
        let f = extract_features(&img, &mask, &refs, levels, bins).unwrap();

        let hsv_of = |px: [u8; 3]| crate::color::hsv_from_rgb8::<f64>(px);
        let (sa, va) = (hsv_of(a)[1], hsv_of(a)[2]);
        let (sb, vb) = (hsv_of(b)[1], hsv_of(b)[2]);

        // f1..f4: two-point means and population deviations
        assert_relative_eq!(f.feature(1), (sa + sb) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.feature(2), (sa - sb).abs() / 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.feature(3), (va + vb) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.feature(4), (va - vb).abs() / 2.0, epsilon = 1e-12);

        // f5..f20: direct Bhattacharyya against each reference histogram
        let hist_of = |v0: f64, v1: f64| {
            let mut h = vec![0.0f64; bins];
            h[((v0 * bins as f64) as usize).min(bins - 1)] += 0.5;
            h[((v1 * bins as f64) as usize).min(bins - 1)] += 0.5;
            h
        };
        let s_hist = hist_of(sa, sb);
        let v_hist = hist_of(va, vb);
        for c in 0..NUM_CATEGORIES {
            let d = |mine: &[f64], theirs: &Histogram<f64>| {
                let coeff: f64 = mine
                    .iter()
                    .zip(theirs.counts())
                    .map(|(&p, &q)| (p * q).sqrt())
                    .sum();
                -coeff.clamp(1e-10, 1.0).ln()
            };
            assert_relative_eq!(
                f.feature(5 + c),
                d(&s_hist, refs.s_hist(c)),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                f.feature(13 + c),
                d(&v_hist, refs.v_hist(c)),
                epsilon = 1e-12
            );
        }

        // f21..f24: hand-built GLCM of the two-row gray image
        let lum = |px: [u8; 3]| -> usize {
            let y = (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64).round();
            (y as usize) * levels / 256
        };
        let (ga, gb) = (lum(a), lum(b));
        // horizontal: 3 pairs within each row; vertical: 4 pairs a->b
        let mut horiz = std::collections::BTreeMap::new();
        *horiz.entry((ga, ga)).or_insert(0.0) += 3.0;
        *horiz.entry((gb, gb)).or_insert(0.0) += 3.0;
        let mut vert = std::collections::BTreeMap::new();
        *vert.entry((ga, gb)).or_insert(0.0) += 4.0;
        let stats = |cells: &std::collections::BTreeMap<(usize, usize), f64>| {
            let total: f64 = cells.values().sum();
            let mut hom = 0.0;
            let mut ent = 0.0;
            for (&(h, k), &c) in cells {
                let p = c / total;
                hom += p / (1.0 + (h as f64 - k as f64).powi(2));
                if p > 0.0 {
                    ent += p * p.ln();
                }
            }
            (hom, ent)
        };
        let (hom_h, ent_h) = stats(&horiz);
        let (hom_v, ent_v) = stats(&vert);
        assert_relative_eq!(f.feature(21), hom_h, epsilon = 1e-12);
        assert_relative_eq!(f.feature(22), hom_v, epsilon = 1e-12);
        assert_relative_eq!(f.feature(23), ent_h, epsilon = 1e-12);
        assert_relative_eq!(f.feature(24), ent_v, epsilon = 1e-12);
    }

    #[test]
    fn feature_ranges_hold_on_mixed_fixture() {
        let owned = flat_references();
        let refs = build_reference_set::<f64>(&as_refs(&owned), 16).unwrap();
        let mut img = RgbImage::filled(8, 8, [20, 200, 40]);
        for y in 0..8 {
            for x in 0..8 {
                if (x + y) % 3 == 0 {
                    img.set_pixel(x, y, [90, 60, 150]);
                }
            }
        }
        let mask = BinaryMask::filled(8, 8, true);
        let f = extract_features(&img, &mask, &refs, 16, 16).unwrap();
        assert!(f.is_finite());
        assert!((0.0..=1.0).contains(&f.feature(1)));
        assert!((0.0..=1.0).contains(&f.feature(3)));
        assert!((0.0..=0.5).contains(&f.feature(2)));
        assert!((0.0..=0.5).contains(&f.feature(4)));
        for i in 5..=20 {
            assert!((0.0..=23.03).contains(&f.feature(i)), "f{i} out of range");
        }
        assert!(f.feature(21) > 0.0 && f.feature(21) <= 1.0);
        assert!(f.feature(22) > 0.0 && f.feature(22) <= 1.0);
        assert!(f.feature(23) <= 0.0 && f.feature(24) <= 0.0);
    }

    #[test]
    fn extraction_is_deterministic() {
        let owned = flat_references();
        let refs = build_reference_set::<f64>(&as_refs(&owned), 16).unwrap();
        let (_, img, mask) = &owned[3];
        let f1 = extract_features(img, mask, &refs, 16, 16).unwrap();
        let f2 = extract_features(img, mask, &refs, 16, 16).unwrap();
        assert_eq!(f1, f2);
    }

    #[test]
    fn bin_count_mismatch_is_rejected() {
        let owned = flat_references();
        let refs = build_reference_set::<f64>(&as_refs(&owned), 16).unwrap();
        let (_, img, mask) = &owned[0];
        assert!(matches!(
            extract_features(img, mask, &refs, 16, 32),
            Err(Error::BinCountMismatch { .. })
        ));
    }

    #[test]
    fn standardize_two_point_and_degenerate() {
        let lo = FeatureVector::new([0.0; NUM_FEATURES]);
        let hi = FeatureVector::new([2.0; NUM_FEATURES]);
        let params = standardize_fit(&[lo, hi]).unwrap();
        assert!(params.means.iter().all(|&m| m == 1.0));
        assert!(params.std_devs.iter().all(|&s| s == 1.0));

        let same = [FeatureVector::new([3.0; NUM_FEATURES]); 2];
        let params = standardize_fit(&same).unwrap();
        assert!(params.std_devs.iter().all(|&s| s == 1.0));
        let z = params.apply(&same[0]).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));

        assert!(matches!(
            standardize_fit::<f64>(&[lo]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn standardized_training_set_has_zero_mean() {
        let vectors: Vec<FeatureVector<f64>> = (0..10)
            .map(|i| {
                let mut vals = [0.0; NUM_FEATURES];
                for (j, v) in vals.iter_mut().enumerate() {
                    *v = (i * 7 + j * 3) as f64 * 0.13 % 5.0;
                }
                FeatureVector::new(vals)
            })
            .collect();
        let params = standardize_fit(&vectors).unwrap();
        let mut means = [0.0f64; NUM_FEATURES];
        for v in &vectors {
            let z = params.apply(v).unwrap();
            for (m, &x) in means.iter_mut().zip(z.values()) {
                *m += x;
            }
        }
        for m in means {
            assert!((m / vectors.len() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn category_grid_validation() {
        let good = CategoryInfo {
            category: 0,
            brightness_level: 1,
            color_level: 2,
        };
        assert!(good.validate().is_ok());
        let bad = CategoryInfo {
            category: 5,
            brightness_level: 1,
            color_level: 5,
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        /// Relabeling the reference categories permutes f5..f12 and
        /// f13..f20 identically.
        #[test]
        fn reference_permutation_permutes_distances(shift in 1usize..NUM_CATEGORIES) {
            let owned = flat_references();
            let refs = build_reference_set::<f64>(&as_refs(&owned), 16).unwrap();
            let rotated: Vec<(usize, &RgbImage, &BinaryMask)> = owned
                .iter()
                .map(|(c, i, m)| ((c + shift) % NUM_CATEGORIES, i, m))
                .collect();
            let refs_rot = build_reference_set::<f64>(&rotated, 16).unwrap();

            let mut img = RgbImage::filled(5, 5, [33, 99, 66]);
            img.set_pixel(2, 2, [200, 40, 10]);
            let mask = BinaryMask::filled(5, 5, true);
            let f = extract_features(&img, &mask, &refs, 16, 16).unwrap();
            let g = extract_features(&img, &mask, &refs_rot, 16, 16).unwrap();
            for c in 0..NUM_CATEGORIES {
                let c_rot = (c + shift) % NUM_CATEGORIES;
                prop_assert_eq!(f.feature(5 + c), g.feature(5 + c_rot));
                prop_assert_eq!(f.feature(13 + c), g.feature(13 + c_rot));
            }
            // the non-reference features are untouched
            for i in [1, 2, 3, 4, 21, 22, 23, 24] {
                prop_assert_eq!(f.feature(i), g.feature(i));
            }
        }
    }
}
