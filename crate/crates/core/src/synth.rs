//! Synthetic vessel trees with known geometry, and their rasterization.
//! Test fixtures for the encoding and feature pipeline.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use thiserror::Error;

use crate::bezier::{BezierTree, CubicBezier, Segment};
use crate::encode::{encode_mask, EncodeError, EncodeParams};
use crate::features::{compute_features, FeatureError, FeatureVector};
use crate::geom::Vec2;
use crate::mask::VesselMask;
use crate::rng;

pub const MAX_DEPTH: usize = 8;
/// Child length over parent length.
pub const LENGTH_DECAY: f64 = 0.65;
/// Child deflection from the parent's end tangent, degrees.
pub const BRANCH_ANGLE_DEG: (f64, f64) = (20.0, 50.0);
/// Interior control points sit at most this fraction of the length off the chord.
pub const MAX_BEND: f64 = 0.06;
/// Polyline samples behind every ground-truth arc length.
pub const ORACLE_SAMPLES: usize = 100_000;
/// Rasterization step along a curve, px.
pub const RASTER_STEP: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(&'static str),
    #[error("segment {id} leaves the {canvas}px canvas")]
    ExceedsCanvas { id: u32, canvas: usize },
    #[error("{radii} radii for {segments} segments")]
    RadiusCount { radii: usize, segments: usize },
    #[error("segment {id} has an invalid radius {radius}")]
    InvalidRadius { id: u32, radius: f64 },
    #[error("segment {id} is outside the {width}x{height} raster")]
    OutOfCanvas { id: u32, width: usize, height: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    /// Root trunks. One trunk grows up from the bottom centre; several
    /// radiate from the canvas centre.
    pub n_branches: usize,
    /// Levels of binary branching below each trunk.
    pub depth: usize,
    pub root_radius: f64,
    pub radius_decay: f64,
    pub canvas: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_branches: 1,
            depth: 3,
            root_radius: 3.0,
            radius_decay: 0.8,
            canvas: 512,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_branches == 0 {
            return Err(SynthError::InvalidSpec("n_branches must be positive"));
        }
        if self.depth > MAX_DEPTH {
            return Err(SynthError::InvalidSpec("depth exceeds 8"));
        }
        if !(self.root_radius > 0.0 && self.root_radius.is_finite()) {
            return Err(SynthError::InvalidSpec("root_radius must be positive"));
        }
        if !(self.radius_decay > 0.0 && self.radius_decay.is_finite()) {
            return Err(SynthError::InvalidSpec("radius_decay must be positive"));
        }
        if self.canvas < 16 {
            return Err(SynthError::InvalidSpec("canvas must be at least 16 px"));
        }
        Ok(())
    }

    /// Branch nodes of the generated tree: one per internal segment end,
    /// plus the shared root when three or more trunks meet there.
    pub fn branch_count(&self) -> usize {
        self.n_branches * ((1usize << self.depth) - 1) + usize::from(self.n_branches >= 3)
    }

    pub fn segment_count(&self) -> usize {
        self.n_branches * ((1usize << (self.depth + 1)) - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentTruth {
    pub id: u32,
    pub level: usize,
    pub arc_length: f64,
    pub chord: f64,
    pub tortuosity: f64,
    /// Mean of the exact curvature over 1,000 uniform parameters.
    pub mean_curvature: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub segments: Vec<SegmentTruth>,
    pub branch_count: usize,
    pub total_arc_length: f64,
    pub mean_tortuosity: f64,
    /// Segments placed closer than the separation gap to an unrelated
    /// segment because no redraw cleared it.
    pub crowded_segments: usize,
}

/// Arc length by summing a polyline through `samples` uniform parameters.
pub fn polyline_arc_length(curve: &CubicBezier, samples: usize) -> f64 {
    let n = samples.max(2);
    let mut prev = curve.p0;
    let mut total = 0.0;
    for i in 1..n {
        let p = curve.point_at(i as f64 / (n - 1) as f64);
        total += p.distance(prev);
        prev = p;
    }
    total
}

fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Extra clearance, px, kept between unrelated segments beyond their radii.
pub const SEPARATION_GAP: f64 = 4.0;
/// Redraws of a segment's angle and bends before accepting the best try.
pub const MAX_ATTEMPTS: usize = 64;
const CLEARANCE_SAMPLES: usize = 48;

#[derive(Clone, Copy)]
struct Pending {
    parent: Option<u32>,
    level: usize,
    start: Vec2,
    /// Direction the segment deflects from (the parent's end tangent).
    base_dir: Vec2,
    /// +1 / -1 for the two children of a fork, 0 for a trunk.
    side: f64,
    length: f64,
    radius: f64,
}

struct Placed {
    parent: Option<u32>,
    radius: f64,
    samples: Vec<Vec2>,
    lo: Vec2,
    hi: Vec2,
}

impl Placed {
    fn new(curve: &CubicBezier, parent: Option<u32>, radius: f64) -> Self {
        let samples: Vec<Vec2> = (0..CLEARANCE_SAMPLES)
            .map(|i| curve.point_at(i as f64 / (CLEARANCE_SAMPLES - 1) as f64))
            .collect();
        let lo = samples.iter().fold(Vec2::new(f64::INFINITY, f64::INFINITY), |a, p| Vec2::new(a.x.min(p.x), a.y.min(p.y)));
        let hi = samples.iter().fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| Vec2::new(a.x.max(p.x), a.y.max(p.y)));
        Self { parent, radius, samples, lo, hi }
    }

    /// Smallest surface-to-surface gap to `other`, or +inf if the bounding
    /// boxes are already far enough apart.
    fn gap_to(&self, other: &Placed, needed: f64) -> f64 {
        let margin = self.radius + other.radius + needed;
        if self.lo.x > other.hi.x + margin || other.lo.x > self.hi.x + margin || self.lo.y > other.hi.y + margin || other.lo.y > self.hi.y + margin {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        for p in &self.samples {
            for w in other.samples.windows(2) {
                best = best.min(dist_sq_to_segment(*p, w[0], w[1]));
            }
        }
        best.sqrt() - self.radius - other.radius
    }
}

/// Whole-tree redraws when some segment could not be placed clear of the rest.
pub const MAX_TREE_ATTEMPTS: usize = 16;

/// Recursive binary tree under `spec`. Trees are redrawn (continuing the
/// seeded stream) until every segment keeps [`SEPARATION_GAP`] from unrelated
/// ones; after [`MAX_TREE_ATTEMPTS`] the least crowded draw is returned.
pub fn generate_tree(spec: &SynthSpec) -> Result<(BezierTree, GroundTruth), SynthError> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let mut best: Option<Draw> = None;
    for _ in 0..MAX_TREE_ATTEMPTS {
        let draw = draw_tree(spec, &mut rng)?;
        let done = draw.crowded == 0;
        if best.as_ref().is_none_or(|b| draw.crowded < b.crowded) {
            best = Some(draw);
        }
        if done {
            break;
        }
    }
    let mut draw = best.expect("at least one draw");
    for seg in &mut draw.tree.segments {
        seg.curve = seg.curve.snapped();
    }
    let truth: Vec<SegmentTruth> = draw
        .tree
        .segments
        .iter()
        .zip(&draw.levels)
        .map(|(seg, &level)| {
            let curve = &seg.curve;
            let arc = polyline_arc_length(curve, ORACLE_SAMPLES);
            let chord = curve.chord();
            let mean_curvature = (0..1000)
                .map(|i| curve.curvature(i as f64 / 999.0).unwrap_or(0.0))
                .sum::<f64>()
                / 1000.0;
            SegmentTruth {
                id: seg.id,
                level,
                arc_length: arc,
                chord,
                tortuosity: arc / chord,
                mean_curvature,
                radius: seg.radius,
            }
        })
        .collect();
    let total_arc_length = truth.iter().map(|s| s.arc_length).sum();
    let mean_tortuosity = truth.iter().map(|s| s.tortuosity).sum::<f64>() / truth.len() as f64;
    Ok((
        draw.tree,
        GroundTruth {
            segments: truth,
            branch_count: spec.branch_count(),
            total_arc_length,
            mean_tortuosity,
            crowded_segments: draw.crowded,
        },
    ))
}

struct Draw {
    tree: BezierTree,
    levels: Vec<usize>,
    crowded: usize,
}

fn draw_tree(spec: &SynthSpec, rng: &mut impl Rng) -> Result<Draw, SynthError> {
    let size = spec.canvas as f64;
    let mut queue = VecDeque::new();
    if spec.n_branches == 1 {
        queue.push_back(Pending {
            parent: None,
            level: 0,
            start: Vec2::new(0.5 * size, 0.9 * size),
            base_dir: Vec2::new(0.0, -1.0),
            side: 0.0,
            length: 0.22 * size,
            radius: spec.root_radius,
        });
    } else {
        for k in 0..spec.n_branches {
            let angle = TAU * k as f64 / spec.n_branches as f64 + rng.random_range(-0.2..0.2);
            queue.push_back(Pending {
                parent: None,
                level: 0,
                start: Vec2::new(0.5 * size, 0.5 * size),
                base_dir: Vec2::new(angle.cos(), angle.sin()),
                side: 0.0,
                length: 0.15 * size,
                radius: spec.root_radius,
            });
        }
    }

    let mut tree = BezierTree::new(Some((spec.canvas, spec.canvas)), format!("synth:{}", spec.seed));
    let mut levels = Vec::new();
    let mut placed: Vec<Placed> = Vec::new();
    let mut crowded = 0;
    let (lo_deg, hi_deg) = BRANCH_ANGLE_DEG;
    while let Some(p) = queue.pop_front() {
        let id = tree.next_id();
        let margin = p.radius + 1.0;
        let inside = |c: &CubicBezier| {
            c.control_points()
                .iter()
                .all(|q| q.x >= margin && q.y >= margin && q.x <= size - 1.0 - margin && q.y <= size - 1.0 - margin)
        };
        // Best candidate so far, by (inside canvas, clearance).
        let mut best: Option<(bool, f64, CubicBezier)> = None;
        for _ in 0..MAX_ATTEMPTS {
            let dir = if p.side == 0.0 {
                p.base_dir
            } else {
                rotate(p.base_dir, p.side * rng.random_range(lo_deg..=hi_deg) * PI / 180.0)
            };
            let normal = dir.perp();
            let b1 = rng.random_range(-MAX_BEND..=MAX_BEND) * p.length;
            let b2 = rng.random_range(-MAX_BEND..=MAX_BEND) * p.length;
            let curve = CubicBezier::new(
                p.start,
                p.start + dir * (p.length / 3.0) + normal * b1,
                p.start + dir * (2.0 * p.length / 3.0) + normal * b2,
                p.start + dir * p.length,
            );
            let candidate = Placed::new(&curve, p.parent, p.radius);
            // Parent and siblings share an endpoint with the candidate.
            let clearance = placed
                .iter()
                .enumerate()
                .filter(|(i, q)| Some(*i as u32 + 1) != p.parent && q.parent != p.parent)
                .map(|(_, q)| candidate.gap_to(q, SEPARATION_GAP))
                .fold(f64::INFINITY, f64::min);
            let ok = inside(&curve);
            let better = match &best {
                None => true,
                Some((bok, bgap, _)) => (ok, clearance) > (*bok, *bgap),
            };
            if better {
                best = Some((ok, clearance, curve));
            }
            if ok && clearance >= SEPARATION_GAP {
                break;
            }
        }
        let (ok, clearance, curve) = best.expect("at least one attempt");
        if !ok {
            return Err(SynthError::ExceedsCanvas { id, canvas: spec.canvas });
        }
        if clearance < SEPARATION_GAP {
            crowded += 1;
        }
        placed.push(Placed::new(&curve, p.parent, p.radius));

        levels.push(p.level);
        tree.segments.push(Segment {
            id,
            parent: p.parent,
            curve,
            radius: p.radius,
        });
        if p.level < spec.depth {
            let d = curve.p3 - curve.p2;
            for side in [1.0, -1.0] {
                queue.push_back(Pending {
                    parent: Some(id),
                    level: p.level + 1,
                    start: curve.p3,
                    base_dir: d * (1.0 / d.norm()),
                    side,
                    length: p.length * LENGTH_DECAY,
                    radius: p.radius * spec.radius_decay,
                });
            }
        }
    }
    Ok(Draw {
        tree,
        levels,
        crowded,
    })
}

/// Squared distance from `p` to the segment `a`–`b`.
fn dist_sq_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    let t = if len_sq > 0.0 { ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    (p - a.lerp(b, t)).norm_sq()
}

/// Paints every pixel whose centre lies within `radius` of the curve (a
/// union of capsules between samples at most [`RASTER_STEP`] apart), plus the
/// pixel under each sample so sub-pixel radii still leave a connected trace.
pub fn rasterize_tree(tree: &BezierTree, radii: &[f64], width: usize, height: usize) -> Result<VesselMask, SynthError> {
    if radii.len() != tree.len() {
        return Err(SynthError::RadiusCount {
            radii: radii.len(),
            segments: tree.len(),
        });
    }
    let mut mask = VesselMask::empty(width, height);
    for (seg, &r) in tree.segments.iter().zip(radii) {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(SynthError::InvalidRadius { id: seg.id, radius: r });
        }
        let c = &seg.curve;
        let polygon = c.p0.distance(c.p1) + c.p1.distance(c.p2) + c.p2.distance(c.p3);
        let n = ((polygon / RASTER_STEP).ceil() as usize).max(1) + 1;
        let pts: Vec<Vec2> = (0..n).map(|i| c.point_at(i as f64 / (n - 1) as f64)).collect();
        let outside = |p: &Vec2| p.x < -0.5 || p.y < -0.5 || p.x >= width as f64 - 0.5 || p.y >= height as f64 - 0.5;
        if pts.iter().any(outside) {
            return Err(SynthError::OutOfCanvas { id: seg.id, width, height });
        }
        let reach = r * r + 1e-9;
        for p in &pts {
            mask.set(p.y.round() as usize, p.x.round() as usize, true);
        }
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let r0 = ((a.y.min(b.y) - r).floor().max(0.0)) as usize;
            let r1 = ((a.y.max(b.y) + r).ceil().min(height as f64 - 1.0)) as usize;
            let c0 = ((a.x.min(b.x) - r).floor().max(0.0)) as usize;
            let c1 = ((a.x.max(b.x) + r).ceil().min(width as f64 - 1.0)) as usize;
            for row in r0..=r1 {
                for col in c0..=c1 {
                    if dist_sq_to_segment(Vec2::from_pixel(row, col), a, b) <= reach {
                        mask.set(row, col, true);
                    }
                }
            }
        }
    }
    Ok(mask)
}

/// Rasterizes with each segment's own stored radius.
pub fn rasterize_with_stored_radii(tree: &BezierTree, width: usize, height: usize) -> Result<VesselMask, SynthError> {
    let radii: Vec<f64> = tree.segments.iter().map(|s| s.radius).collect();
    rasterize_tree(tree, &radii, width, height)
}

#[derive(Debug, Error)]
pub enum RoundtripError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureComparison {
    pub name: &'static str,
    pub truth: f64,
    pub recovered: f64,
}

impl FeatureComparison {
    pub fn relative_error(&self) -> f64 {
        if self.truth == 0.0 {
            self.recovered.abs()
        } else {
            ((self.recovered - self.truth) / self.truth).abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripReport {
    pub truth: GroundTruth,
    pub features: FeatureVector,
    pub recovered_branches: usize,
    pub recovered_segments: usize,
    pub comparisons: Vec<FeatureComparison>,
}

impl RoundtripReport {
    pub fn comparison(&self, name: &str) -> Option<&FeatureComparison> {
        self.comparisons.iter().find(|c| c.name == name)
    }
}

/// Generate → rasterize → encode → features, compared against the
/// generator's ground truth.
pub fn roundtrip_report(spec: &SynthSpec) -> Result<RoundtripReport, RoundtripError> {
    let (tree, truth) = generate_tree(spec)?;
    let mask = rasterize_with_stored_radii(&tree, spec.canvas, spec.canvas)?;
    let enc = encode_mask(&mask, &EncodeParams::default(), &tree.provenance)?;
    let features = compute_features(&enc.tree, &enc.field, &mask, enc.junctions)?;
    let n = truth.segments.len() as f64;
    let mean_radius = truth.segments.iter().map(|s| s.radius).sum::<f64>() / n;
    let comparisons = vec![
        FeatureComparison {
            name: "total_arc_length",
            truth: truth.total_arc_length,
            recovered: features.total_arc_length,
        },
        FeatureComparison {
            name: "mean_tortuosity",
            truth: truth.mean_tortuosity,
            recovered: features.mean_tortuosity,
        },
        FeatureComparison {
            name: "branch_count",
            truth: truth.branch_count as f64,
            recovered: enc.junctions as f64,
        },
        FeatureComparison {
            name: "mean_radius",
            truth: mean_radius,
            recovered: features.mean_radius,
        },
    ];
    Ok(RoundtripReport {
        recovered_branches: enc.junctions,
        recovered_segments: enc.tree.len(),
        truth,
        features,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_is_one_segment() {
        let spec = SynthSpec { depth: 0, ..Default::default() };
        let (tree, truth) = generate_tree(&spec).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(truth.branch_count, 0);
    }

    #[test]
    fn depth_two_counts() {
        let spec = SynthSpec { depth: 2, ..Default::default() };
        let (tree, truth) = generate_tree(&spec).unwrap();
        assert_eq!(tree.len(), 7);
        assert_eq!(truth.branch_count, 3);
        tree.validate().unwrap();
    }

    #[test]
    fn same_seed_same_tree() {
        let spec = SynthSpec { seed: 9, ..Default::default() };
        assert_eq!(generate_tree(&spec).unwrap(), generate_tree(&spec).unwrap());
        let other = SynthSpec { seed: 10, ..spec };
        assert_ne!(generate_tree(&spec).unwrap().0, generate_tree(&other).unwrap().0);
    }

    #[test]
    fn children_start_at_parent_end() {
        let (tree, _) = generate_tree(&SynthSpec { n_branches: 3, ..Default::default() }).unwrap();
        for s in &tree.segments {
            if let Some(p) = s.parent {
                assert_eq!(tree.get(p).unwrap().curve.p3, s.curve.p0);
            }
        }
    }

    fn straight(len: f64) -> BezierTree {
        let mut t = BezierTree::new(None, "");
        t.segments.push(Segment {
            id: 1,
            parent: None,
            curve: CubicBezier::line(Vec2::new(10.0, 20.0), Vec2::new(10.0 + len, 20.0)),
            radius: 1.0,
        });
        t
    }

    #[test]
    fn unit_radius_band_is_three_wide() {
        let mask = rasterize_tree(&straight(100.0), &[1.0], 128, 40).unwrap();
        // 3 x 101 band plus one cap pixel beyond each endpoint.
        assert_eq!(mask.foreground_count(), 3 * 101 + 2);
        for r in 19..=21 {
            assert!(mask.get(r, 60));
        }
    }

    #[test]
    fn subpixel_radius_is_a_single_trace() {
        let mask = rasterize_tree(&straight(50.0), &[0.4], 128, 40).unwrap();
        assert_eq!(mask.foreground_count(), 51);
    }

    #[test]
    fn empty_tree_empty_mask() {
        let mask = rasterize_tree(&BezierTree::new(None, ""), &[], 32, 32).unwrap();
        assert_eq!(mask.foreground_count(), 0);
    }

    #[test]
    fn out_of_canvas_is_rejected() {
        assert!(matches!(
            rasterize_tree(&straight(200.0), &[1.0], 128, 40),
            Err(SynthError::OutOfCanvas { id: 1, .. })
        ));
        assert!(matches!(
            generate_tree(&SynthSpec { root_radius: 200.0, ..Default::default() }),
            Err(SynthError::ExceedsCanvas { .. })
        ));
    }
}
