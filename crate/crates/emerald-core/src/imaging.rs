//! Stone segmentation: threshold, morphological closing, component
//! filtering and mask application.
//!
//! The input photographs show a single stone on a white chamber base, so the
//! default pipeline is Otsu thresholding on luminance with foreground below
//! the threshold, a disc closing to fill holes, and largest-component
//! filtering to drop speckle.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit RGB raster, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::Validation(format!(
                "pixel buffer length {} does not match {width}x{height}x3",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Uniform-color image, mostly useful in tests and fixtures.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    /// Decodes a PNG or JPEG file (anything the `image` crate handles).
    pub fn from_path(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| Error::ImageRead {
                path: path.to_path_buf(),
                source,
            })?
            .to_rgb8();
        Self::new(img.width(), img.height(), img.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: image::RgbImage =
            image::ImageBuffer::from_raw(self.width, self.height, self.data.clone())
                .expect("buffer length verified at construction");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::ImageRead {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// 8-bit luminance raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::Validation(format!(
                "pixel buffer length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }
}

/// Foreground mask; `true` marks stone pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::Validation(format!(
                "mask length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Debug export: foreground as 255, background as 0.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let data: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let buf: image::GrayImage = image::ImageBuffer::from_raw(self.width, self.height, data)
            .expect("buffer length verified at construction");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::ImageRead {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// Threshold selection for [`extract_roi`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Otsu,
    Fixed(u8),
}

/// Which side of the threshold counts as stone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForegroundPolarity {
    BelowThreshold,
    AboveThreshold,
}

/// Segmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiParams {
    pub threshold_mode: ThresholdMode,
    pub foreground_polarity: ForegroundPolarity,
    pub closing_radius: u32,
    pub keep_largest_component: bool,
}

impl Default for RoiParams {
    fn default() -> Self {
        Self {
            threshold_mode: ThresholdMode::Otsu,
            foreground_polarity: ForegroundPolarity::BelowThreshold,
            closing_radius: 5,
            keep_largest_component: true,
        }
    }
}

/// BT.601 luminance: `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let mut data = Vec::with_capacity(img.data.len() / 3);
    for px in img.data.chunks_exact(3) {
        let y = 0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]);
        data.push(y.round().clamp(0.0, 255.0) as u8);
    }
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Otsu's method: the level `t` maximizing between-class variance of the
/// classes `{v < t}` and `{v >= t}`; ties go to the lowest level.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    let mut hist = [0u64; 256];
    for &v in &img.data {
        hist[v as usize] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        let level = img.data[0];
        return Err(Error::DegenerateImage { level });
    }

    let total = img.data.len() as f64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum();

    let mut best_t = 0u8;
    let mut best_var = f64::NEG_INFINITY;
    let mut count_below = 0f64;
    let mut sum_below = 0f64;
    for (t, &count) in hist.iter().enumerate() {
        // classes: {v < t} and {v >= t}
        let w0 = count_below / total;
        let w1 = 1.0 - w0;
        let var = if count_below > 0.0 && count_below < total {
            let mu0 = sum_below / count_below;
            let mu1 = (total_sum - sum_below) / (total - count_below);
            w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
        } else {
            0.0
        };
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
        count_below += count as f64;
        sum_below += t as f64 * count as f64;
    }
    Ok(best_t)
}

/// Thresholds a gray image into a mask according to the polarity.
pub fn binarize(img: &GrayImage, t: u8, polarity: ForegroundPolarity) -> BinaryMask {
    let bits = img
        .data
        .iter()
        .map(|&v| match polarity {
            ForegroundPolarity::BelowThreshold => v < t,
            ForegroundPolarity::AboveThreshold => v >= t,
        })
        .collect();
    BinaryMask {
        width: img.width,
        height: img.height,
        bits,
    }
}

/// Offsets of the Euclidean disc of the given radius, (0,0) included.
fn disc_offsets(radius: u32) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let r2 = r * r;
    let mut offs = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r2 {
                offs.push((dx, dy));
            }
        }
    }
    offs
}

fn dilate(mask: &BinaryMask, offsets: &[(i32, i32)]) -> BinaryMask {
    let (w, h) = (mask.width as i32, mask.height as i32);
    let mut out = BinaryMask::filled(mask.width, mask.height, false);
    for y in 0..h {
        for x in 0..w {
            let mut hit = false;
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && nx < w && ny >= 0 && ny < h && mask.get(nx as u32, ny as u32) {
                    hit = true;
                    break;
                }
            }
            if hit {
                out.set(x as u32, y as u32, true);
            }
        }
    }
    out
}

fn erode(mask: &BinaryMask, offsets: &[(i32, i32)]) -> BinaryMask {
    let (w, h) = (mask.width as i32, mask.height as i32);
    let mut out = BinaryMask::filled(mask.width, mask.height, false);
    for y in 0..h {
        for x in 0..w {
            let mut all = true;
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                // out-of-bounds counts as background
                if nx < 0 || nx >= w || ny < 0 || ny >= h || !mask.get(nx as u32, ny as u32) {
                    all = false;
                    break;
                }
            }
            if all {
                out.set(x as u32, y as u32, true);
            }
        }
    }
    out
}

/// Closing: dilation then erosion with a disc of the given radius.
/// Radius 0 is the identity.
pub fn morphological_close(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let offsets = disc_offsets(radius);
    erode(&dilate(mask, &offsets), &offsets)
}

/// Keeps only the 8-connected component with the most pixels; size ties go
/// to the component whose first pixel in row-major order comes first.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut label = vec![usize::MAX; w * h];
    let mut sizes: Vec<usize> = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for start in 0..w * h {
        if !mask.bits[start] || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0usize;
        stack.push((start % w, start / w));
        label[start] = id;
        while let Some((x, y)) = stack.pop() {
            size += 1;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let ni = ny as usize * w + nx as usize;
                    if mask.bits[ni] && label[ni] == usize::MAX {
                        label[ni] = id;
                        stack.push((nx as usize, ny as usize));
                    }
                }
            }
        }
        sizes.push(size);
    }

    if sizes.is_empty() {
        return mask.clone();
    }
    // components are discovered in row-major order of their first pixel,
    // so the first strict maximum implements the tie rule
    let mut best = 0;
    for (id, &s) in sizes.iter().enumerate() {
        if s > sizes[best] {
            best = id;
        }
    }
    let bits = label.iter().map(|&l| l == best).collect();
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

/// Copies pixels where the mask is true; everything else becomes (0,0,0).
pub fn apply_mask(img: &RgbImage, mask: &BinaryMask) -> Result<RgbImage> {
    if img.width != mask.width || img.height != mask.height {
        return Err(Error::dim_mismatch(
            img.width as usize,
            img.height as usize,
            mask.width as usize,
            mask.height as usize,
        ));
    }
    let mut data = vec![0u8; img.data.len()];
    for (i, &keep) in mask.bits.iter().enumerate() {
        if keep {
            data[i * 3..i * 3 + 3].copy_from_slice(&img.data[i * 3..i * 3 + 3]);
        }
    }
    Ok(RgbImage {
        width: img.width,
        height: img.height,
        data,
    })
}

/// Full segmentation: grayscale, threshold, binarize, close, optional
/// largest-component filter, then mask multiplication.
pub fn extract_roi(img: &RgbImage, params: &RoiParams) -> Result<(RgbImage, BinaryMask)> {
    let limit = img.width.min(img.height) / 2;
    if params.closing_radius > limit {
        return Err(Error::Validation(format!(
            "closing radius {} exceeds half of the smaller image dimension ({limit})",
            params.closing_radius
        )));
    }
    let gray = to_grayscale(img);
    let t = match params.threshold_mode {
        ThresholdMode::Otsu => otsu_threshold(&gray)?,
        ThresholdMode::Fixed(level) => level,
    };
    let mask = binarize(&gray, t, params.foreground_polarity);
    let mask = morphological_close(&mask, params.closing_radius);
    let mask = if params.keep_largest_component {
        largest_component(&mask)
    } else {
        mask
    };
    if mask.count_true() == 0 {
        return Err(Error::EmptyRoi);
    }
    let masked = apply_mask(img, &mask)?;
    Ok((masked, mask))
}
