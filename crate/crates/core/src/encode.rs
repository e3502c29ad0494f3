//! Mask → Bézier tree pipeline: distance transform, thinning, polyline
//! tracing, chunked fitting and tree assembly.

use thiserror::Error;

use crate::bezier::{chord_params, chunk_polyline, fit_cubic_at, BezierTree, CubicBezier, FitError, Segment, LINK_TOLERANCE, MIN_CHUNK};
use crate::geom::Vec2;
use crate::mask::{distance_transform, MaskError, RadiusField, VesselMask};
use crate::skeleton::{extract_polylines, junction_count, skeletonize};

/// Radius samples taken along each segment.
pub const RADIUS_SAMPLES: usize = 20;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("polyline {index}: {source}")]
    Fit {
        index: usize,
        #[source]
        source: FitError,
    },
    #[error("radius field is {field:?}, mask is {mask:?}")]
    FieldMismatch { field: (usize, usize), mask: (usize, usize) },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeParams {
    /// Polylines with fewer points are discarded before fitting.
    pub min_polyline: usize,
    /// Endpoint distance for inferring parent links between polylines.
    pub link_tolerance: f64,
}

impl Default for EncodeParams {
    fn default() -> Self {
        Self {
            min_polyline: MIN_CHUNK,
            link_tolerance: LINK_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncodeDiagnostics {
    pub polylines: usize,
    pub discarded_polylines: usize,
    pub segments: usize,
    pub fallback_fits: usize,
    pub mean_rms: f64,
    pub max_rms: f64,
    pub skeleton_pixels: usize,
    pub junctions: usize,
}

#[derive(Debug, Clone)]
pub struct Encoding {
    pub tree: BezierTree,
    pub field: RadiusField,
    /// Junction count of the skeleton, the branch count fed to features.
    pub junctions: usize,
    pub diagnostics: EncodeDiagnostics,
}

/// Fitted pieces of one polyline, joined end to end.
#[derive(Debug, Clone)]
pub struct PolylineFit {
    pub curves: Vec<CubicBezier>,
    pub rms: Vec<f64>,
    pub fallbacks: usize,
}

/// Chunks and fits one polyline, then trims every pair of neighbouring
/// chunks at the middle of their shared points so the pieces meet end to
/// end instead of overlapping. The joint is the midpoint of the two fitted
/// curves there; the adjacent interior control point moves with it.
pub fn fit_polyline(points: &[Vec2]) -> Result<PolylineFit, FitError> {
    let chunks = chunk_polyline(points.len())?;
    let mut fits = Vec::with_capacity(chunks.len());
    let mut params = Vec::with_capacity(chunks.len());
    for range in &chunks {
        let pts = &points[range.clone()];
        let t = chord_params(pts)?;
        fits.push(fit_cubic_at(pts, &t)?);
        params.push(t);
    }

    let mut spans = vec![(0.0, 1.0); chunks.len()];
    for k in 1..chunks.len() {
        let (a, b) = (&chunks[k - 1], &chunks[k]);
        let shared = a.end - b.start;
        let in_a = b.start - a.start + shared / 2 - 1;
        let in_b = shared / 2 - 1;
        spans[k - 1].1 = 0.5 * (params[k - 1][in_a] + params[k - 1][in_a + 1]);
        spans[k].0 = 0.5 * (params[k][in_b] + params[k][in_b + 1]);
    }
    let mut curves: Vec<CubicBezier> = fits
        .iter()
        .zip(&spans)
        .map(|(f, &(t0, t1))| {
            if (t0, t1) == (0.0, 1.0) {
                f.curve
            } else {
                f.curve.subsegment(t0, t1)
            }
        })
        .collect();
    for k in 1..curves.len() {
        let joint = (curves[k - 1].p3 + curves[k].p0) * 0.5;
        let da = joint - curves[k - 1].p3;
        curves[k - 1].p2 += da;
        curves[k - 1].p3 = joint;
        let db = joint - curves[k].p0;
        curves[k].p1 += db;
        curves[k].p0 = joint;
    }
    Ok(PolylineFit {
        curves,
        rms: fits.iter().map(|f| f.rms).collect(),
        fallbacks: fits.iter().filter(|f| f.fallback).count(),
    })
}

/// A walk that returns to its starting pixel (a loop through one branch
/// node) has coincident ends, which a clamped cubic cannot fit. Such a
/// walk is split at its middle point into two open halves.
fn open_loop(points: Vec<Vec2>) -> Vec<Vec<Vec2>> {
    if points.len() < 3 || points[0] != points[points.len() - 1] {
        return vec![points];
    }
    let mid = points.len() / 2;
    vec![points[..=mid].to_vec(), points[mid..].to_vec()]
}

/// Mean of the field at `samples` uniform parameters, nearest-pixel lookup.
pub fn mean_radius(curve: &CubicBezier, field: &RadiusField, samples: usize) -> f64 {
    let n = samples.max(2);
    (0..n)
        .map(|i| field.sample_nearest(curve.point_at(i as f64 / (n - 1) as f64)))
        .sum::<f64>()
        / n as f64
}

pub fn encode_mask(mask: &VesselMask, params: &EncodeParams, provenance: &str) -> Result<Encoding, EncodeError> {
    let field = distance_transform(mask)?;
    encode_with_field(mask, field, params, provenance)
}

/// [`encode_mask`] with a precomputed radius field.
pub fn encode_with_field(
    mask: &VesselMask,
    field: RadiusField,
    params: &EncodeParams,
    provenance: &str,
) -> Result<Encoding, EncodeError> {
    if (field.width(), field.height()) != (mask.width(), mask.height()) {
        return Err(EncodeError::FieldMismatch {
            field: (field.width(), field.height()),
            mask: (mask.width(), mask.height()),
        });
    }
    let skeleton = skeletonize(mask);
    let junctions = junction_count(&skeleton);
    let polylines = extract_polylines(&skeleton);

    let mut tree = BezierTree::new(Some((mask.width(), mask.height())), provenance);
    let mut diag = EncodeDiagnostics {
        polylines: polylines.len(),
        skeleton_pixels: skeleton.len(),
        junctions,
        ..Default::default()
    };
    let mut rms_all = Vec::new();
    let min_len = params.min_polyline.max(MIN_CHUNK);
    for (index, line) in polylines.iter().enumerate() {
        for points in open_loop(line.to_points()) {
            if points.len() < min_len {
                diag.discarded_polylines += 1;
                continue;
            }
            let fit = fit_polyline(&points).map_err(|source| EncodeError::Fit { index, source })?;
            diag.fallback_fits += fit.fallbacks;
            rms_all.extend(fit.rms);
            let mut prev: Option<u32> = None;
            for curve in fit.curves {
                let curve = curve.snapped();
                let id = tree.next_id();
                tree.segments.push(Segment {
                    id,
                    parent: prev,
                    curve,
                    radius: mean_radius(&curve, &field, RADIUS_SAMPLES),
                });
                prev = Some(id);
            }
        }
    }
    tree.link_by_endpoints(params.link_tolerance);
    diag.segments = tree.len();
    if !rms_all.is_empty() {
        diag.mean_rms = rms_all.iter().sum::<f64>() / rms_all.len() as f64;
        diag.max_rms = rms_all.iter().copied().fold(0.0, f64::max);
    }
    Ok(Encoding {
        tree,
        field,
        junctions,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_mask_encodes_to_one_segment() {
        let mask = VesselMask::from_fn(64, 16, |r, c| r == 8 && (5..30).contains(&c));
        let enc = encode_mask(&mask, &EncodeParams::default(), "line").unwrap();
        assert_eq!(enc.tree.len(), 1);
        let s = &enc.tree.segments[0];
        assert!((s.curve.chord() - 24.0).abs() < 1e-9);
        assert!((s.radius - 1.0).abs() < 1e-12);
        assert_eq!(enc.junctions, 0);
        assert_eq!(enc.diagnostics.discarded_polylines, 0);
    }

    #[test]
    fn long_polyline_chunks_meet_end_to_end() {
        let pts: Vec<Vec2> = (0..100)
            .map(|i| {
                let x = i as f64;
                Vec2::new(x, (10.0 * (x / 15.0).sin()).round())
            })
            .collect();
        let fit = fit_polyline(&pts).unwrap();
        assert_eq!(fit.curves.len(), 4);
        assert_eq!(fit.curves[0].p0, pts[0]);
        assert_eq!(fit.curves.last().unwrap().p3, pts[99]);
        for w in fit.curves.windows(2) {
            assert_eq!(w[0].p3, w[1].p0);
        }
        let total: f64 = fit.curves.iter().map(CubicBezier::arc_length).sum();
        let poly: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
        assert!(total < poly, "{total} vs staircase {poly}");
    }

    #[test]
    fn short_polylines_are_discarded() {
        let mask = VesselMask::from_fn(16, 16, |r, c| r == 8 && (5..8).contains(&c));
        let enc = encode_mask(&mask, &EncodeParams::default(), "").unwrap();
        assert!(enc.tree.is_empty());
        assert_eq!(enc.diagnostics.discarded_polylines, 1);
    }

    #[test]
    fn loops_through_a_branch_node_are_opened() {
        let pts: Vec<Vec2> = [(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 0.0), (2.0, -1.0), (1.0, -1.0), (0.0, 0.0)]
            .iter()
            .map(|&(x, y)| Vec2::new(x, y))
            .collect();
        let halves = open_loop(pts.clone());
        assert_eq!(halves.len(), 2);
        assert_eq!(halves[0].last(), halves[1].first());
        assert_eq!((halves[0][0], *halves[1].last().unwrap()), (pts[0], pts[6]));

        // A ring on a stem: the ring is traced from the junction back to it.
        let mask = VesselMask::from_fn(48, 48, |r, c| {
            let d = ((r as f64 - 16.0).powi(2) + (c as f64 - 24.0).powi(2)).sqrt();
            (7.5..=9.0).contains(&d) || ((24..44).contains(&r) && (23..=25).contains(&c))
        });
        let enc = encode_mask(&mask, &EncodeParams::default(), "").unwrap();
        assert!(enc.tree.len() >= 3);
    }
}
