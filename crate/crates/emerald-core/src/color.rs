//! HSV conversion, masked channel statistics, masked histograms and the
//! Bhattacharyya distance between them.
//!
//! Only the S and V channels feed the feature vector; hue is carried along
//! for completeness and for the synthetic fixture generator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, RgbImage};
use crate::num::Real;

/// Per-pixel HSV raster: H in degrees `[0, 360)`, S and V in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage<F: Real = f64> {
    width: u32,
    height: u32,
    pixels: Vec<[F; 3]>,
}

impl<F: Real> HsvImage<F> {
    pub fn new(width: u32, height: u32, pixels: Vec<[F; 3]>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Validation(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [F; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn pixels(&self) -> &[[F; 3]] {
        &self.pixels
    }
}

/// The two HSV channels used by the feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Saturation,
    Value,
}

impl Channel {
    #[inline]
    fn index(self) -> usize {
        match self {
            Channel::Saturation => 1,
            Channel::Value => 2,
        }
    }
}

/// B-bin channel histogram; operand of the Bhattacharyya distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<F: Real = f64> {
    counts: Vec<F>,
    normalized: bool,
}

impl<F: Real> Histogram<F> {
    pub fn from_counts(counts: Vec<F>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::Validation(format!(
                "histogram needs at least 2 bins, got {}",
                counts.len()
            )));
        }
        Ok(Self {
            counts,
            normalized: false,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[F] {
        &self.counts
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Scales the counts to sum to one.
    pub fn normalize(mut self) -> Result<Self> {
        let total: F = self.counts.iter().copied().sum();
        if total <= F::zero() {
            return Err(Error::EmptyMatrix);
        }
        for c in &mut self.counts {
            *c /= total;
        }
        self.normalized = true;
        Ok(self)
    }

    /// One CSV row of the bin values, for debugging dumps.
    pub fn to_csv_row(&self) -> String {
        self.counts
            .iter()
            .map(|c| format!("{:.16e}", c.into_f64()))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Masked mean and population standard deviation of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats<F: Real = f64> {
    pub mean: F,
    pub std_dev: F,
}

/// Hexcone RGB→HSV. `S = 0` and `H = 0` for achromatic pixels, `H = 0`
/// when `V = 0`.
pub fn rgb_to_hsv<F: Real>(img: &RgbImage) -> HsvImage<F> {
    let mut pixels = Vec::with_capacity(img.width() as usize * img.height() as usize);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let [r, g, b] = img.pixel(x, y);
            pixels.push(hsv_from_rgb8([r, g, b]));
        }
    }
    HsvImage {
        width: img.width(),
        height: img.height(),
        pixels,
    }
}

pub fn hsv_from_rgb8<F: Real>(rgb: [u8; 3]) -> [F; 3] {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;

    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        let mut h = 60.0 * ((g - b) / delta);
        if h < 0.0 {
            h += 360.0;
        }
        h
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let h = if h >= 360.0 { h - 360.0 } else { h };
    [F::from_f64(h), F::from_f64(s), F::from_f64(v)]
}

/// Inverse hexcone conversion, used by the fixture generator and the
/// round-trip tests.
pub fn hsv_to_rgb8(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0);
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to8 = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [to8(r1), to8(g1), to8(b1)]
}

/// Mean and population standard deviation over masked-in pixels.
pub fn channel_stats<F: Real>(
    img: &HsvImage<F>,
    channel: Channel,
    mask: &BinaryMask,
) -> Result<ChannelStats<F>> {
    if img.width != mask.width() || img.height != mask.height() {
        return Err(Error::dim_mismatch(
            img.width as usize,
            img.height as usize,
            mask.width() as usize,
            mask.height() as usize,
        ));
    }
    let ci = channel.index();
    let values: Vec<F> = img
        .pixels
        .iter()
        .zip(mask.bits())
        .filter(|(_, &keep)| keep)
        .map(|(px, _)| px[ci])
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let n = F::from_usize(values.len());
    let mean = values.iter().copied().sum::<F>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
    Ok(ChannelStats {
        mean,
        std_dev: var.sqrt(),
    })
}

/// Uniform histogram of a channel over masked-in pixels, normalized to sum
/// to one. Values bin as `floor(v * B)` with 1.0 folded into the last bin.
pub fn masked_histogram<F: Real>(
    img: &HsvImage<F>,
    channel: Channel,
    mask: &BinaryMask,
    bins: usize,
) -> Result<Histogram<F>> {
    if bins < 2 {
        return Err(Error::Validation(format!(
            "histogram needs at least 2 bins, got {bins}"
        )));
    }
    if img.width != mask.width() || img.height != mask.height() {
        return Err(Error::dim_mismatch(
            img.width as usize,
            img.height as usize,
            mask.width() as usize,
            mask.height() as usize,
        ));
    }
    let ci = channel.index();
    let mut counts = vec![F::zero(); bins];
    let mut any = false;
    for (px, &keep) in img.pixels.iter().zip(mask.bits()) {
        if !keep {
            continue;
        }
        any = true;
        let v = px[ci].into_f64().clamp(0.0, 1.0);
        let bin = ((v * bins as f64) as usize).min(bins - 1);
        counts[bin] += F::one();
    }
    if !any {
        return Err(Error::EmptyRoi);
    }
    Histogram {
        counts,
        normalized: false,
    }
    .normalize()
}

/// Coefficient floor: keeps the distance finite on disjoint supports.
pub const BHATTACHARYYA_EPS: f64 = 1e-10;

/// Bhattacharyya distance `-ln(sum_i sqrt(p_i q_i))` between two normalized
/// histograms of equal bin count. The coefficient is clamped to
/// `[BHATTACHARYYA_EPS, 1]`; the upper clamp keeps the distance
/// non-negative under rounding.
pub fn bhattacharyya_distance<F: Real>(p: &Histogram<F>, q: &Histogram<F>) -> Result<F> {
    if !p.normalized || !q.normalized {
        return Err(Error::NotNormalized);
    }
    if p.counts.len() != q.counts.len() {
        return Err(Error::BinCountMismatch {
            left: p.counts.len(),
            right: q.counts.len(),
        });
    }
    let coeff: F = p
        .counts
        .iter()
        .zip(&q.counts)
        .map(|(&a, &b)| (a * b).sqrt())
        .sum();
    let coeff = coeff.max(F::from_f64(BHATTACHARYYA_EPS)).min(F::one());
    Ok(-coeff.ln())
}
