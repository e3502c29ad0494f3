#![allow(dead_code)]

use bte_core::mask::distance_transform;
use bte_core::synth::{generate_tree, rasterize_with_stored_radii, GroundTruth, SynthSpec};
use bte_core::{BezierTree, CubicBezier, RadiusField, Segment, Vec2, VesselMask};
use proptest::prelude::*;

/// A synthetic start: generated tree, its raster and the raster's radius field.
pub struct Start {
    pub tree: BezierTree,
    pub truth: GroundTruth,
    pub mask: VesselMask,
    pub field: RadiusField,
}

pub fn synth_start(seed: u64, depth: usize, canvas: usize) -> Start {
    let spec = SynthSpec {
        seed,
        depth,
        canvas,
        ..SynthSpec::default()
    };
    let (tree, truth) = generate_tree(&spec).expect("valid spec");
    let mask = rasterize_with_stored_radii(&tree, canvas, canvas).expect("tree fits the canvas");
    let field = distance_transform(&mask).expect("mask has background");
    Start { tree, truth, mask, field }
}

pub fn coord() -> impl Strategy<Value = f64> {
    0.0..512.0f64
}

pub fn point() -> impl Strategy<Value = Vec2> {
    (coord(), coord()).prop_map(|(x, y)| Vec2::new(x, y))
}

/// Control points on the coordinate lattice with a chord of at least 1 px.
pub fn lattice_curve() -> impl Strategy<Value = CubicBezier> {
    (point(), point(), point(), point())
        .prop_filter("chord too short", |(a, _, _, d)| a.distance(*d) >= 1.0)
        .prop_map(|(a, b, c, d)| CubicBezier::new(a, b, c, d).snapped())
}

/// Trees whose parents always precede their children.
pub fn lattice_tree(max_segments: usize) -> impl Strategy<Value = BezierTree> {
    prop::collection::vec((lattice_curve(), 0.0..8.0f64, any::<prop::sample::Index>(), any::<bool>()), 1..=max_segments)
        .prop_map(|parts| {
            let mut tree = BezierTree::new(Some((512, 512)), "prop");
            for (i, (curve, radius, pick, root)) in parts.into_iter().enumerate() {
                let parent = (i > 0 && !root).then(|| pick.index(i) as u32 + 1);
                tree.segments.push(Segment {
                    id: i as u32 + 1,
                    parent,
                    curve,
                    radius,
                });
            }
            tree
        })
}

pub fn mask(max_side: usize, density: f64) -> impl Strategy<Value = VesselMask> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(w, h)| {
        prop::collection::vec(prop::bool::weighted(density), w * h).prop_map(move |cells| {
            VesselMask::new(w, h, cells.into_iter().map(u8::from).collect()).expect("consistent size")
        })
    })
}

pub fn brute_force_distance(mask: &VesselMask) -> Vec<f64> {
    let bg: Vec<(f64, f64)> = (0..mask.height())
        .flat_map(|r| (0..mask.width()).map(move |c| (r, c)))
        .filter(|&(r, c)| !mask.get(r, c))
        .map(|(r, c)| (r as f64, c as f64))
        .collect();
    let mut out = Vec::with_capacity(mask.width() * mask.height());
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            let d = bg
                .iter()
                .map(|&(br, bc)| ((r as f64 - br).powi(2) + (c as f64 - bc).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            out.push(d);
        }
    }
    out
}
