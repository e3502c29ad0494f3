//! Binary vessel masks, the exact Euclidean distance transform and the
//! pixel-drop degradation.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, Luma};
use rand::seq::index;
use thiserror::Error;

use crate::geom::Vec2;
use crate::rng;

/// Side length of the working raster all downstream stages run at.
pub const WORKING_SIZE: usize = 512;

/// Luminance strictly above this value is vessel foreground.
pub const LUMA_THRESHOLD: u8 = 127;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("cannot read mask {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode mask {path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("unsupported pixel format {0} (expected 8-bit grayscale or RGB)")]
    UnsupportedBitDepth(String),
    #[error("mask has zero area")]
    ZeroArea,
    #[error("bitmap holds {actual} cells, expected {width}x{height}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        actual: usize,
    },
    #[error("cell {index} holds {value}; masks are strictly 0/1")]
    NonBinary { index: usize, value: u8 },
    #[error("resampling target must be positive")]
    InvalidTarget,
    #[error("drop fraction {0} is outside (0, 1)")]
    FractionOutOfRange(f64),
    #[error("mask has no foreground pixels")]
    EmptyForeground,
    #[error("mask has no background pixel; distances are unbounded")]
    NoBackground,
}

/// Row-major binary raster, 1 = vessel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VesselMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl VesselMask {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::ZeroArea);
        }
        if bits.len() != width * height {
            return Err(MaskError::DimensionMismatch {
                width,
                height,
                actual: bits.len(),
            });
        }
        if let Some((index, &value)) = bits.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(MaskError::NonBinary { index, value });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// All-background mask.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    /// Builds a mask from a predicate over `(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Self::empty(width, height);
        for r in 0..height {
            for c in 0..width {
                if f(r, c) {
                    mask.bits[r * width + c] = 1;
                }
            }
        }
        mask
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col] == 1
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.bits[row * self.width + col] = u8::from(on);
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn foreground_fraction(&self) -> f64 {
        self.foreground_count() as f64 / (self.width * self.height) as f64
    }

    /// Foreground is a subset of `other`'s foreground.
    pub fn is_subset_of(&self, other: &VesselMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a <= b)
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(y as usize, x as usize) { 255 } else { 0 }])
        })
    }
}

/// Reads an 8-bit grayscale or RGB raster (PNG or PGM/PPM) and thresholds it.
pub fn load_mask(path: impl AsRef<Path>) -> Result<VesselMask, MaskError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let reader = ImageReader::open(path)
        .map_err(|source| MaskError::Io {
            path: display.clone(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| MaskError::Io {
            path: display.clone(),
            source,
        })?;
    let image = reader.decode().map_err(|source| MaskError::Decode {
        path: display,
        source,
    })?;
    mask_from_image(&image)
}

pub fn mask_from_image(image: &DynamicImage) -> Result<VesselMask, MaskError> {
    let gray = match image {
        DynamicImage::ImageLuma8(g) => g.clone(),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            image.to_luma8()
        }
        other => return Err(MaskError::UnsupportedBitDepth(format!("{:?}", other.color()))),
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    if w == 0 || h == 0 {
        return Err(MaskError::ZeroArea);
    }
    let bits = gray
        .into_raw()
        .into_iter()
        .map(|v| u8::from(v > LUMA_THRESHOLD))
        .collect();
    VesselMask::new(w, h, bits)
}

/// Writes an 8-bit grayscale raster with foreground = 255. The format follows
/// the file extension (`.png`, `.pgm`).
pub fn save_mask(mask: &VesselMask, path: impl AsRef<Path>) -> Result<(), MaskError> {
    let path = path.as_ref();
    mask.to_gray_image()
        .save(path)
        .map_err(|source| MaskError::Decode {
            path: path.display().to_string(),
            source,
        })
}

/// Nearest-neighbour resampling onto a `target x target` grid. Each output
/// pixel reads the source pixel under its center.
pub fn resample_to_working(mask: &VesselMask, target: usize) -> Result<VesselMask, MaskError> {
    if target == 0 {
        return Err(MaskError::InvalidTarget);
    }
    if mask.width == target && mask.height == target {
        return Ok(mask.clone());
    }
    let src_index = |dst: usize, src_len: usize| -> usize {
        let s = ((2 * dst + 1) * src_len) / (2 * target);
        s.min(src_len - 1)
    };
    let cols: Vec<usize> = (0..target).map(|c| src_index(c, mask.width)).collect();
    let mut out = VesselMask::empty(target, target);
    for r in 0..target {
        let sr = src_index(r, mask.height);
        for (c, &sc) in cols.iter().enumerate() {
            if mask.get(sr, sc) {
                out.set(r, c, true);
            }
        }
    }
    Ok(out)
}

/// Per-pixel Euclidean distance to the nearest background pixel center.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RadiusField {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "field size mismatch");
        Self {
            width,
            height,
            values,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::from_values(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Value at the pixel nearest to `p`; zero outside the canvas.
    pub fn sample_nearest(&self, p: Vec2) -> f64 {
        let (c, r) = (p.x.round(), p.y.round());
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 || !p.is_finite() {
            return 0.0;
        }
        self.get(r as usize, c as usize)
    }

    pub fn scaled(&self, factor: f64) -> RadiusField {
        RadiusField {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Exact Euclidean distance transform (Felzenszwalb–Huttenlocher lower
/// envelope of parabolas, columns then rows), square-rooted.
pub fn distance_transform(mask: &VesselMask) -> Result<RadiusField, MaskError> {
    let (w, h) = (mask.width, mask.height);
    if mask.foreground_count() == w * h {
        return Err(MaskError::NoBackground);
    }
    let mut sq = vec![f64::INFINITY; w * h];
    let n = w.max(h);
    let mut scratch = Envelope::with_capacity(n);
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];

    for c in 0..w {
        for (r, v) in line[..h].iter_mut().enumerate() {
            *v = if mask.get(r, c) { f64::INFINITY } else { 0.0 };
        }
        scratch.transform(&line[..h], &mut out[..h]);
        for (r, &v) in out[..h].iter().enumerate() {
            sq[r * w + c] = v;
        }
    }
    for r in 0..h {
        line[..w].copy_from_slice(&sq[r * w..(r + 1) * w]);
        scratch.transform(&line[..w], &mut out[..w]);
        sq[r * w..(r + 1) * w].copy_from_slice(&out[..w]);
    }
    let values = sq.into_iter().map(f64::sqrt).collect();
    Ok(RadiusField::from_values(w, h, values))
}

/// 1D squared distance transform workspace. Only finite samples become
/// parabolas, so all arithmetic stays on exact integers.
struct Envelope {
    vertex: Vec<usize>,
    bound: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            vertex: vec![0; n],
            bound: vec![0.0; n + 1],
        }
    }

    fn transform(&mut self, f: &[f64], d: &mut [f64]) {
        let mut k: isize = -1;
        for q in 0..f.len() {
            if !f[q].is_finite() {
                continue;
            }
            let qf = q as f64;
            let mut s = f64::NEG_INFINITY;
            while k >= 0 {
                let v = self.vertex[k as usize];
                let vf = v as f64;
                s = ((f[q] + qf * qf) - (f[v] + vf * vf)) / (2.0 * (qf - vf));
                if s <= self.bound[k as usize] {
                    k -= 1;
                } else {
                    break;
                }
            }
            if k < 0 {
                s = f64::NEG_INFINITY;
            }
            k += 1;
            self.vertex[k as usize] = q;
            self.bound[k as usize] = s;
            self.bound[k as usize + 1] = f64::INFINITY;
        }
        if k < 0 {
            d.fill(f64::INFINITY);
            return;
        }
        let mut j = 0;
        for (q, out) in d.iter_mut().enumerate() {
            let qf = q as f64;
            while self.bound[j + 1] < qf {
                j += 1;
            }
            let v = self.vertex[j];
            let dv = qf - v as f64;
            *out = dv * dv + f[v];
        }
    }
}

/// Flips exactly `round(fraction * foreground)` foreground pixels to
/// background, chosen uniformly without replacement from the seeded stream.
pub fn pixel_drop(mask: &VesselMask, fraction: f64, seed: u64) -> Result<VesselMask, MaskError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(MaskError::FractionOutOfRange(fraction));
    }
    let fg: Vec<usize> = mask
        .bits
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| (b == 1).then_some(i))
        .collect();
    if fg.is_empty() {
        return Err(MaskError::EmptyForeground);
    }
    let k = (fraction * fg.len() as f64).round() as usize;
    let mut rng = rng::seeded(seed);
    let mut out = mask.clone();
    for i in index::sample(&mut rng, fg.len(), k) {
        out.bits[fg[i]] = 0;
    }
    Ok(out)
}
