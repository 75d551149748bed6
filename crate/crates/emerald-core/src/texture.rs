//! Gray-level co-occurrence matrices and the two statistics derived from
//! them: normalized homogeneity and entropy.
//!
//! The matrix is directed: `counts[a][b]` is the number of positions whose
//! quantized gray value is `a` and whose neighbor at the offset is `b`.
//! Pairs touching a masked-out or out-of-bounds pixel are not counted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayImage};
use crate::num::Real;

/// Displacement `(dx, dy)` between the two pixels of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlcmOffset {
    pub dx: i32,
    pub dy: i32,
}

impl GlcmOffset {
    pub const fn new(dx: i32, dy: i32) -> Self {
        Self { dx, dy }
    }
}

/// Co-occurrence matrix over `levels` quantized gray values.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm<F: Real = f64> {
    levels: usize,
    counts: Vec<F>,
    offset: GlcmOffset,
    normalized: bool,
}

impl<F: Real> Glcm<F> {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn offset(&self) -> GlcmOffset {
        self.offset
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> F {
        self.counts[a * self.levels + b]
    }

    pub fn total(&self) -> F {
        self.counts.iter().copied().sum()
    }

    #[cfg(test)]
    pub(crate) fn from_counts(levels: usize, counts: Vec<F>, offset: GlcmOffset) -> Self {
        assert_eq!(counts.len(), levels * levels);
        Self {
            levels,
            counts,
            offset,
            normalized: false,
        }
    }

    #[cfg(test)]
    pub(crate) fn with_normalized_flag(mut self) -> Self {
        self.normalized = true;
        self
    }
}

/// Raw (unnormalized) directed GLCM of the masked image. Gray values are
/// quantized to `levels` by `floor(v * levels / 256)`; a pair counts only
/// when both endpoints are in bounds and masked-in.
pub fn compute_glcm<F: Real>(
    img: &GrayImage,
    mask: &BinaryMask,
    offset: GlcmOffset,
    levels: usize,
) -> Result<Glcm<F>> {
    if offset.dx == 0 && offset.dy == 0 {
        return Err(Error::InvalidOffset);
    }
    if levels < 2 {
        return Err(Error::Validation(format!(
            "GLCM needs at least 2 levels, got {levels}"
        )));
    }
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(Error::dim_mismatch(
            img.width() as usize,
            img.height() as usize,
            mask.width() as usize,
            mask.height() as usize,
        ));
    }
    if mask.count_true() == 0 {
        return Err(Error::EmptyRoi);
    }

    let quantize = |v: u8| (v as usize * levels) / 256;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut counts = vec![F::zero(); levels * levels];
    for y in 0..h {
        for x in 0..w {
            let (nx, ny) = (x + offset.dx as i64, y + offset.dy as i64);
            if nx < 0 || nx >= w || ny < 0 || ny >= h {
                continue;
            }
            if !mask.get(x as u32, y as u32) || !mask.get(nx as u32, ny as u32) {
                continue;
            }
            let a = quantize(img.pixel(x as u32, y as u32));
            let b = quantize(img.pixel(nx as u32, ny as u32));
            counts[a * levels + b] += F::one();
        }
    }
    Ok(Glcm {
        levels,
        counts,
        offset,
        normalized: false,
    })
}

/// Divides every cell by the total count.
pub fn normalize_glcm<F: Real>(g: &Glcm<F>) -> Result<Glcm<F>> {
    let total = g.total();
    if total <= F::zero() {
        return Err(Error::EmptyMatrix);
    }
    Ok(Glcm {
        levels: g.levels,
        counts: g.counts.iter().map(|&c| c / total).collect(),
        offset: g.offset,
        normalized: true,
    })
}

/// `sum_{h,k} C(h,k) / (1 + (h-k)^2)` over the normalized matrix.
pub fn glcm_homogeneity<F: Real>(g: &Glcm<F>) -> Result<F> {
    if !g.normalized {
        return Err(Error::NotNormalized);
    }
    let mut acc = F::zero();
    for a in 0..g.levels {
        for b in 0..g.levels {
            let d = a as f64 - b as f64;
            acc += g.get(a, b) / F::from_f64(1.0 + d * d);
        }
    }
    Ok(acc)
}

/// `sum_{h,k} ln(C(h,k)) C(h,k)` over the normalized matrix, with
/// `0 ln 0 := 0`. Non-positive for normalized matrices; the conventional
/// Shannon entropy is its negation.
pub fn glcm_entropy<F: Real>(g: &Glcm<F>) -> Result<F> {
    if !g.normalized {
        return Err(Error::NotNormalized);
    }
    let mut acc = F::zero();
    for &c in &g.counts {
        if c > F::zero() {
            acc += c.ln() * c;
        }
    }
    Ok(acc)
}
