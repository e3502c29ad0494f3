//! Masks, trees and hints behind opaque handles.

use std::ffi::c_char;
use std::path::Path;

use bte_core::bezier::{parse_bte, read_bte, to_bte_string, BezierTree};
use bte_core::encode::{encode_mask, EncodeParams};
use bte_core::features::{compute_features, FEATURE_COUNT, FEATURE_NAMES};
use bte_core::hint::{render_hint, write_btef, HintImage};
use bte_core::mask::{distance_transform, load_mask, resample_to_working, RadiusField, VesselMask};
use bte_core::perturb::{apply, PerturbationConfig};
use bte_core::pipeline::RunConfig;
use bte_core::provenance::{write_atomic, Provenance};
use bte_core::skeleton::{junction_count, skeletonize};

use crate::{c_str, guard, non_null, out_ptr, BteStatus, Failure};

/// Binary vessel mask.
pub struct BteMask {
    inner: VesselMask,
}

/// Cubic Bezier tree.
pub struct BteTree {
    inner: BezierTree,
}

/// Three-channel hint raster.
pub struct BteHint {
    inner: HintImage,
}

/// One segment of a tree, copied out.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BteSegment {
    pub id: u32,
    /// Parent id, or -1 for a root.
    pub parent: i64,
    /// `x0 y0 x1 y1 x2 y2 x3 y3`.
    pub control: [f64; 8],
    pub radius: f64,
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn field_of(mask: &VesselMask) -> Result<RadiusField, Failure> {
    distance_transform(mask).map_err(|e| Failure::new(BteStatus::InvalidArgument, e.to_string()))
}

/// Loads a PNG or PNM mask; pixels with luma above 127 are vessel.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_mask_load(path: *const c_char, out: *mut *mut BteMask) -> BteStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let out = out_ptr(out, "out")?;
        let inner = load_mask(path).map_err(|e| Failure::new(BteStatus::Io, e.to_string()))?;
        *out = boxed(BteMask { inner });
        Ok(())
    })
}

/// Builds a mask from `width * height` row-major bytes, nonzero = vessel.
///
/// # Safety
/// `bits` must be readable for `width * height` bytes; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_mask_from_bits(bits: *const u8, width: usize, height: usize, out: *mut *mut BteMask) -> BteStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if bits.is_null() {
            return Err(Failure::new(BteStatus::NullArgument, "bits is NULL"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Failure::new(BteStatus::InvalidArgument, "width * height overflows"))?;
        // SAFETY: the caller guarantees `n` readable bytes.
        let slice = std::slice::from_raw_parts(bits, n);
        let inner = VesselMask::new(width, height, slice.iter().map(|&b| u8::from(b != 0)).collect())
            .map_err(|e| Failure::new(BteStatus::InvalidArgument, e.to_string()))?;
        *out = boxed(BteMask { inner });
        Ok(())
    })
}

/// Nearest-neighbour resampling to `target x target`.
///
/// # Safety
/// `mask` must be a live handle or NULL; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_mask_resample(mask: *const BteMask, target: usize, out: *mut *mut BteMask) -> BteStatus {
    guard(|| {
        let mask = non_null(mask, "mask")?;
        let out = out_ptr(out, "out")?;
        let inner = resample_to_working(&mask.inner, target).map_err(|e| Failure::new(BteStatus::InvalidArgument, e.to_string()))?;
        *out = boxed(BteMask { inner });
        Ok(())
    })
}

/// # Safety
/// `mask` must be a live handle; `width`/`height` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_mask_dims(mask: *const BteMask, width: *mut usize, height: *mut usize) -> BteStatus {
    guard(|| {
        let mask = non_null(mask, "mask")?;
        *out_ptr(width, "width")? = mask.inner.width();
        *out_ptr(height, "height")? = mask.inner.height();
        Ok(())
    })
}

/// # Safety
/// `mask` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn bte_mask_free(mask: *mut BteMask) {
    if !mask.is_null() {
        // SAFETY: allocated by `boxed`.
        drop(Box::from_raw(mask));
    }
}

/// Encodes a mask into a tree with default parameters. `source_id` (may be
/// NULL) is stored as the tree's source.
///
/// # Safety
/// `mask` must be a live handle, `source_id` NULL or NUL-terminated, `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_encode(mask: *const BteMask, source_id: *const c_char, out: *mut *mut BteTree) -> BteStatus {
    guard(|| {
        let mask = non_null(mask, "mask")?;
        let id = if source_id.is_null() { "" } else { c_str(source_id, "source_id")? };
        let out = out_ptr(out, "out")?;
        let enc = encode_mask(&mask.inner, &EncodeParams::default(), id).map_err(|e| Failure::new(BteStatus::Encode, e.to_string()))?;
        *out = boxed(BteTree { inner: enc.tree });
        Ok(())
    })
}

/// # Safety
/// `path` NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_tree_load(path: *const c_char, out: *mut *mut BteTree) -> BteStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let out = out_ptr(out, "out")?;
        let inner = read_bte(path).map_err(|e| {
            let status = if e.line().is_some() { BteStatus::Parse } else { BteStatus::Io };
            Failure::new(status, e.to_string())
        })?;
        *out = boxed(BteTree { inner });
        Ok(())
    })
}

/// Parses BTE text held in memory.
///
/// # Safety
/// `text` NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_tree_parse(text: *const c_char, out: *mut *mut BteTree) -> BteStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let out = out_ptr(out, "out")?;
        let inner = parse_bte(text).map_err(|e| Failure::new(BteStatus::Parse, e.to_string()))?;
        *out = boxed(BteTree { inner });
        Ok(())
    })
}

/// Writes the tree atomically with a provenance header for `seed`.
///
/// # Safety
/// `tree` live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bte_tree_save(tree: *const BteTree, path: *const c_char, seed: u64) -> BteStatus {
    guard(|| {
        let tree = non_null(tree, "tree")?;
        let path = c_str(path, "path")?;
        let prov = RunConfig { seed, ..Default::default() }.provenance();
        write_atomic(Path::new(path), to_bte_string(&tree.inner, &prov.comments()).as_bytes())
            .map_err(|e| Failure::new(BteStatus::Io, format!("{path}: {e}")))
    })
}

/// Number of segments; 0 for NULL.
///
/// # Safety
/// `tree` live or NULL.
#[no_mangle]
pub unsafe extern "C" fn bte_tree_segment_count(tree: *const BteTree) -> usize {
    // SAFETY: null or live handle.
    tree.as_ref().map_or(0, |t| t.inner.len())
}

/// Copies segment `index` (file order) into `out`.
///
/// # Safety
/// `tree` live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_tree_segment(tree: *const BteTree, index: usize, out: *mut BteSegment) -> BteStatus {
    guard(|| {
        let tree = non_null(tree, "tree")?;
        let out = out_ptr(out, "out")?;
        let s = tree.inner.segments.get(index).ok_or_else(|| {
            Failure::new(BteStatus::InvalidArgument, format!("index {index} out of range ({} segments)", tree.inner.len()))
        })?;
        let mut control = [0.0; 8];
        for (k, p) in s.curve.control_points().iter().enumerate() {
            control[2 * k] = p.x;
            control[2 * k + 1] = p.y;
        }
        *out = BteSegment {
            id: s.id,
            parent: s.parent.map_or(-1, i64::from),
            control,
            radius: s.radius,
        };
        Ok(())
    })
}

/// # Safety
/// `tree` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn bte_tree_free(tree: *mut BteTree) {
    if !tree.is_null() {
        // SAFETY: allocated by `boxed`.
        drop(Box::from_raw(tree));
    }
}

fn perturbed(tree: &BteTree, mask: &BteMask, config: &str, gamma: f64, seed: u64) -> Result<bte_core::perturb::Perturbed, Failure> {
    let config = PerturbationConfig::from_name(config, gamma, seed).map_err(|e| Failure::new(BteStatus::InvalidArgument, e.to_string()))?;
    let field = field_of(&mask.inner)?;
    apply(&config, &tree.inner, &field, &mask.inner).map_err(|e| Failure::new(BteStatus::Perturb, e.to_string()))
}

/// Applies a named grid entry (`baseline`, `tortuosity_2x`, `arc_drop_10`,
/// `radius_x0.70`, `pixdrop_30`, ...) and returns the perturbed tree.
///
/// # Safety
/// Handles live; `config` NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_perturb(
    tree: *const BteTree,
    mask: *const BteMask,
    config: *const c_char,
    gamma: f64,
    seed: u64,
    out: *mut *mut BteTree,
) -> BteStatus {
    guard(|| {
        let (tree, mask) = (non_null(tree, "tree")?, non_null(mask, "mask")?);
        let config = c_str(config, "config")?;
        let out = out_ptr(out, "out")?;
        let p = perturbed(tree, mask, config, gamma, seed)?;
        *out = boxed(BteTree { inner: p.tree });
        Ok(())
    })
}

/// Name of feature `index` (0-19), or NULL when out of range. Static; do
/// not free.
#[no_mangle]
pub extern "C" fn bte_feature_name(index: usize) -> *const c_char {
    static NAMES: std::sync::OnceLock<Vec<std::ffi::CString>> = std::sync::OnceLock::new();
    let names = NAMES.get_or_init(|| FEATURE_NAMES.iter().map(|n| std::ffi::CString::new(*n).unwrap_or_default()).collect());
    names.get(index).map_or(std::ptr::null(), |c| c.as_ptr())
}

/// Writes the 20 features of `tree` against `mask` into `out[0..20]`.
///
/// # Safety
/// Handles live; `out` writable for 20 doubles.
#[no_mangle]
pub unsafe extern "C" fn bte_features(tree: *const BteTree, mask: *const BteMask, out: *mut f64) -> BteStatus {
    guard(|| {
        let (tree, mask) = (non_null(tree, "tree")?, non_null(mask, "mask")?);
        if out.is_null() {
            return Err(Failure::new(BteStatus::NullArgument, "out is NULL"));
        }
        let field = field_of(&mask.inner)?;
        let branches = junction_count(&skeletonize(&mask.inner));
        let fv = compute_features(&tree.inner, &field, &mask.inner, branches).map_err(|e| Failure::new(BteStatus::Features, e.to_string()))?;
        // SAFETY: the caller guarantees room for FEATURE_COUNT doubles.
        std::slice::from_raw_parts_mut(out, FEATURE_COUNT).copy_from_slice(&fv.to_array());
        Ok(())
    })
}

/// Renders the hint of `tree` over the radius field of `mask`.
///
/// # Safety
/// Handles live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_hint_render(tree: *const BteTree, mask: *const BteMask, out: *mut *mut BteHint) -> BteStatus {
    guard(|| {
        let (tree, mask) = (non_null(tree, "tree")?, non_null(mask, "mask")?);
        let out = out_ptr(out, "out")?;
        let field = field_of(&mask.inner)?;
        *out = boxed(BteHint {
            inner: render_hint(&tree.inner, &field),
        });
        Ok(())
    })
}

/// Applies a named grid entry and renders the result, matching one file of
/// the command-line `hint` grid.
///
/// # Safety
/// Handles live; `config` NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_hint_render_config(
    tree: *const BteTree,
    mask: *const BteMask,
    config: *const c_char,
    gamma: f64,
    seed: u64,
    out: *mut *mut BteHint,
) -> BteStatus {
    guard(|| {
        let (tree, mask) = (non_null(tree, "tree")?, non_null(mask, "mask")?);
        let config = c_str(config, "config")?;
        let out = out_ptr(out, "out")?;
        let p = perturbed(tree, mask, config, gamma, seed)?;
        *out = boxed(BteHint {
            inner: render_hint(&p.tree, &p.field),
        });
        Ok(())
    })
}

/// # Safety
/// `hint` live; `width`/`height` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_hint_dims(hint: *const BteHint, width: *mut usize, height: *mut usize) -> BteStatus {
    guard(|| {
        let hint = non_null(hint, "hint")?;
        *out_ptr(width, "width")? = hint.inner.width;
        *out_ptr(height, "height")? = hint.inner.height;
        Ok(())
    })
}

/// Copies channel `channel` (0-2, values in [-1, 1], row-major) into `buf`,
/// which must hold `width * height` doubles.
///
/// # Safety
/// `hint` live; `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bte_hint_channel(hint: *const BteHint, channel: usize, buf: *mut f64, len: usize) -> BteStatus {
    guard(|| {
        let hint = non_null(hint, "hint")?;
        if buf.is_null() {
            return Err(Failure::new(BteStatus::NullArgument, "buf is NULL"));
        }
        if channel > 2 {
            return Err(Failure::new(BteStatus::InvalidArgument, format!("channel {channel} out of range")));
        }
        let data = hint.inner.channel(channel);
        if len < data.len() {
            return Err(Failure::new(BteStatus::BufferTooSmall, format!("need {} values, got {len}", data.len())));
        }
        // SAFETY: the caller guarantees `len >= data.len()` writable doubles.
        std::slice::from_raw_parts_mut(buf, data.len()).copy_from_slice(data);
        Ok(())
    })
}

/// Writes the hint as BTEF with a provenance block for `seed`.
///
/// # Safety
/// `hint` live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bte_hint_write(hint: *const BteHint, path: *const c_char, seed: u64) -> BteStatus {
    guard(|| {
        let hint = non_null(hint, "hint")?;
        let path = c_str(path, "path")?;
        let prov: Provenance = RunConfig { seed, ..Default::default() }.provenance();
        let mut buf = Vec::new();
        write_btef(&mut buf, &hint.inner, &prov.meta()).map_err(|e| Failure::new(BteStatus::Hint, e.to_string()))?;
        write_atomic(Path::new(path), &buf).map_err(|e| Failure::new(BteStatus::Io, format!("{path}: {e}")))
    })
}

/// # Safety
/// `hint` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn bte_hint_free(hint: *mut BteHint) {
    if !hint.is_null() {
        // SAFETY: allocated by `boxed`.
        drop(Box::from_raw(hint));
    }
}
