//! Three-channel conditioning raster: normalized radius field, variable-radius
//! render of the tree, and a Gaussian-smoothed copy of the render.

use std::io::{Read, Write};
use std::path::Path;

use image::{Rgb, RgbImage};
use thiserror::Error;

use crate::bezier::BezierTree;
use crate::geom::Vec2;
use crate::mask::RadiusField;

pub const KERNEL_SIZE: usize = 7;
pub const KERNEL_SIGMA: f64 = 2.0;
/// Channel-1 samples per segment never drop below this.
pub const MIN_SAMPLES: usize = 20;
pub const BTEF_MAGIC: &[u8; 4] = b"BTEF";
pub const META_MAGIC: &[u8; 4] = b"META";

#[derive(Debug, Error)]
pub enum HintError {
    #[error("grid dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("malformed BTEF data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

/// Row-major real grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "grid size");
        Self { width, height, values }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len().max(1) as f64
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `field / max(field)`; an all-zero field gives all zeros.
pub fn render_channel0(field: &RadiusField) -> Grid {
    let max = field.max();
    let values = if max > 0.0 {
        field.values().iter().map(|v| v / max).collect()
    } else {
        vec![0.0; field.values().len()]
    };
    Grid::from_values(field.width(), field.height(), values)
}

/// Samples used to render a segment of the given chord length.
pub fn sample_count(chord: f64) -> usize {
    ((2.0 * chord).ceil() as usize).max(MIN_SAMPLES)
}

/// Binary coverage: at each of [`sample_count`] uniform parameters, a disk
/// whose radius is the field value at the nearest pixel. The pixel under the
/// sample is always covered, so zero-radius samples still leave a trace.
pub fn render_channel1(tree: &BezierTree, field: &RadiusField) -> Grid {
    let (w, h) = (field.width(), field.height());
    let mut grid = Grid::zeros(w, h);
    for seg in &tree.segments {
        let c = &seg.curve;
        let n = sample_count(c.chord());
        for j in 0..n {
            let p = c.point_at(j as f64 / (n - 1) as f64);
            stamp_disk(&mut grid, p, field.sample_nearest(p));
        }
    }
    grid
}

fn stamp_disk(grid: &mut Grid, p: Vec2, r: f64) {
    let (w, h) = (grid.width as f64, grid.height as f64);
    let (pr, pc) = (p.y.round(), p.x.round());
    if pr >= 0.0 && pc >= 0.0 && pr < h && pc < w {
        grid.values[pr as usize * grid.width + pc as usize] = 1.0;
    }
    let reach = r * r + 1e-9;
    let r0 = (p.y - r).floor().max(0.0);
    let r1 = (p.y + r).ceil().min(h - 1.0);
    let c0 = (p.x - r).floor().max(0.0);
    let c1 = (p.x + r).ceil().min(w - 1.0);
    if r1 < r0 || c1 < c0 {
        return;
    }
    for row in r0 as usize..=r1 as usize {
        for col in c0 as usize..=c1 as usize {
            let d = Vec2::from_pixel(row, col) - p;
            if d.norm_sq() <= reach {
                grid.values[row * grid.width + col] = 1.0;
            }
        }
    }
}

/// Normalized 1-D Gaussian taps; the 2-D kernel is their outer product.
pub fn gaussian_taps() -> [f64; KERNEL_SIZE] {
    let half = (KERNEL_SIZE / 2) as f64;
    let mut taps: [f64; KERNEL_SIZE] = std::array::from_fn(|i| {
        let x = i as f64 - half;
        (-x * x / (2.0 * KERNEL_SIGMA * KERNEL_SIGMA)).exp()
    });
    let s: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= s;
    }
    taps
}

/// Symmetric reflection (`d c b a | a b c d`) of an out-of-range index.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

/// 7×7 Gaussian (σ = 2), applied separably with reflected borders.
pub fn gaussian_smooth(grid: &Grid) -> Grid {
    let taps = gaussian_taps();
    let half = (KERNEL_SIZE / 2) as isize;
    let (w, h) = grid.dims();
    let mut tmp = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            tmp[r * w + c] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * grid.values[r * w + reflect(c as isize + k as isize - half, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            out[r * w + c] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect(r as isize + k as isize - half, h) * w + c])
                .sum();
        }
    }
    Grid::from_values(w, h, out)
}

/// Three channels on the `[-1, 1]` scale, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HintImage {
    pub width: usize,
    pub height: usize,
    pub channels: [Vec<f64>; 3],
}

impl HintImage {
    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    /// A channel mapped back to `[0, 1]`.
    pub fn unit_channel(&self, i: usize) -> Grid {
        Grid::from_values(self.width, self.height, self.channels[i].iter().map(|v| (v + 1.0) / 2.0).collect())
    }
}

/// Maps each `[0, 1]` channel to `[-1, 1]` via `x → 2x − 1`.
pub fn assemble_hint(ch0: &Grid, ch1: &Grid, ch2: &Grid) -> Result<HintImage, HintError> {
    for g in [ch1, ch2] {
        if g.dims() != ch0.dims() {
            return Err(HintError::DimensionMismatch(ch0.dims(), g.dims()));
        }
    }
    let map = |g: &Grid| g.values.iter().map(|x| (2.0 * x - 1.0).clamp(-1.0, 1.0)).collect();
    Ok(HintImage {
        width: ch0.width,
        height: ch0.height,
        channels: [map(ch0), map(ch1), map(ch2)],
    })
}

pub fn render_hint(tree: &BezierTree, field: &RadiusField) -> HintImage {
    let ch0 = render_channel0(field);
    let ch1 = render_channel1(tree, field);
    let ch2 = gaussian_smooth(&ch1);
    assemble_hint(&ch0, &ch1, &ch2).expect("channels share the field's dimensions")
}

/// `|mean(ch0_a) − mean(ch0_b)|` on the `[0, 1]` scale.
pub fn channel0_invariance_report(a: &HintImage, b: &HintImage) -> Result<f64, HintError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(HintError::DimensionMismatch((a.width, a.height), (b.width, b.height)));
    }
    Ok((a.unit_channel(0).mean() - b.unit_channel(0).mean()).abs())
}

/// `BTEF`, little-endian u32 width, height, channel count, then the
/// channels as f32, channel-major and row-major. A non-empty `meta` adds a
/// trailing `META` block: u32 byte length, then UTF-8 `key=value` lines.
pub fn write_btef<W: Write>(mut out: W, hint: &HintImage, meta: &[(String, String)]) -> Result<(), HintError> {
    let mut buf = Vec::with_capacity(16 + 12 * hint.width * hint.height);
    buf.extend_from_slice(BTEF_MAGIC);
    for v in [hint.width, hint.height, 3] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for ch in &hint.channels {
        for &v in ch {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    if !meta.is_empty() {
        let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        buf.extend_from_slice(META_MAGIC);
        buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
        buf.extend_from_slice(text.as_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_btef<R: Read>(mut input: R) -> Result<(HintImage, Vec<(String, String)>), HintError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let bad = |m: &str| HintError::Format(m.to_owned());
    let u32_at = |off: usize| -> Result<usize, HintError> {
        let b = bytes.get(off..off + 4).ok_or_else(|| bad("truncated header"))?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    };
    if bytes.get(..4) != Some(BTEF_MAGIC.as_slice()) {
        return Err(bad("missing BTEF magic"));
    }
    let (w, h, c) = (u32_at(4)?, u32_at(8)?, u32_at(12)?);
    if c != 3 {
        return Err(bad("expected 3 channels"));
    }
    let n = w * h;
    let end = 16 + 4 * 3 * n;
    let data = bytes.get(16..end).ok_or_else(|| bad("truncated data"))?;
    let floats: Vec<f64> = data
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
        .collect();
    let channels = [floats[..n].to_vec(), floats[n..2 * n].to_vec(), floats[2 * n..].to_vec()];
    let mut meta = Vec::new();
    let rest = &bytes[end..];
    if !rest.is_empty() {
        if rest.get(..4) != Some(META_MAGIC.as_slice()) {
            return Err(bad("unexpected trailing bytes"));
        }
        let len = rest
            .get(4..8)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
            .ok_or_else(|| bad("truncated META"))?;
        let text = rest.get(8..8 + len).ok_or_else(|| bad("truncated META"))?;
        if rest.len() != 8 + len {
            return Err(bad("unexpected trailing bytes"));
        }
        let text = std::str::from_utf8(text).map_err(|_| bad("META is not UTF-8"))?;
        for line in text.lines() {
            let (k, v) = line.split_once('=').ok_or_else(|| bad("META line without '='"))?;
            meta.push((k.to_owned(), v.to_owned()));
        }
    }
    Ok((
        HintImage {
            width: w,
            height: h,
            channels,
        },
        meta,
    ))
}

/// 8-bit RGB preview, channel i in colour i, `[-1, 1] → [0, 255]`.
pub fn preview_image(hint: &HintImage) -> RgbImage {
    let to8 = |v: f64| (((v + 1.0) / 2.0).clamp(0.0, 1.0) * 255.0).round() as u8;
    RgbImage::from_fn(hint.width as u32, hint.height as u32, |x, y| {
        let i = y as usize * hint.width + x as usize;
        Rgb([to8(hint.channels[0][i]), to8(hint.channels[1][i]), to8(hint.channels[2][i])])
    })
}

pub fn save_preview(hint: &HintImage, path: impl AsRef<Path>) -> Result<(), HintError> {
    preview_image(hint).save(path)?;
    Ok(())
}
