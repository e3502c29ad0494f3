mod common;

use bte_core::hint::{gaussian_smooth, render_hint, KERNEL_SIZE};
use bte_core::mask::{distance_transform, pixel_drop};
use bte_core::perturb::{apply, arc_drop, perturb_tortuosity, Family, PerturbationConfig, DEFAULT_GAMMA, TORTUOSITY_GRID};
use bte_core::synth::{generate_tree, rasterize_tree, roundtrip_report, SynthSpec};
use bte_core::{BezierTree, CubicBezier, Segment, Vec2};
use common::{lattice_tree, synth_start};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tortuosity_keeps_endpoints_chords_and_topology(
        tree in lattice_tree(24),
        alpha_pick in 0usize..3,
        gamma in 0.01..0.5f64,
        seed in any::<u64>(),
    ) {
        let alpha = TORTUOSITY_GRID[alpha_pick];
        let out = perturb_tortuosity(&tree, alpha, gamma, seed).unwrap();
        prop_assert_eq!(out.len(), tree.len());
        for (a, b) in tree.segments.iter().zip(&out.segments) {
            let (c, d) = (a.curve, b.curve);
            prop_assert_eq!((a.id, a.parent, a.radius), (b.id, b.parent, b.radius));
            prop_assert_eq!((c.p0, c.p3), (d.p0, d.p3));
            prop_assert_eq!(c.chord().to_bits(), d.chord().to_bits());
            prop_assert_eq!(d.p1 - c.p1, -(d.p2 - c.p2));
            let expected = gamma * alpha * c.chord();
            prop_assert!(((d.p1 - c.p1).norm() - expected).abs() <= 1e-9 * expected.max(1.0));
        }
    }

    #[test]
    fn tortuosity_is_seeded(tree in lattice_tree(24), seed in any::<u64>()) {
        let a = perturb_tortuosity(&tree, 2.0, DEFAULT_GAMMA, seed).unwrap();
        prop_assert_eq!(&a, &perturb_tortuosity(&tree, 2.0, DEFAULT_GAMMA, seed).unwrap());
    }

    #[test]
    fn arc_drop_removes_exactly_and_detaches_orphans(tree in lattice_tree(40), fraction in 0.05..0.95f64, seed in any::<u64>()) {
        let out = arc_drop(&tree, fraction, seed).unwrap();
        let removed = (fraction * tree.len() as f64).round() as usize;
        prop_assert_eq!(out.len(), tree.len() - removed);
        for s in &out.segments {
            let original = tree.get(s.id).unwrap();
            prop_assert_eq!((s.curve, s.radius), (original.curve, original.radius));
            match original.parent {
                Some(p) if out.get(p).is_some() => prop_assert_eq!(s.parent, Some(p)),
                _ => prop_assert_eq!(s.parent, None),
            }
        }
        prop_assert_eq!(&out, &arc_drop(&tree, fraction, seed).unwrap());
    }
}

/// Sixty-four short parallel segments: enough that two seeds agreeing on
/// every draw is practically impossible.
fn comb() -> BezierTree {
    let mut t = BezierTree::new(Some((128, 128)), "comb");
    for i in 0..64u32 {
        let y = 1.0 + 2.0 * f64::from(i);
        t.segments.push(Segment {
            id: i + 1,
            parent: None,
            curve: CubicBezier::line(Vec2::new(10.0, y), Vec2::new(40.0, y)).snapped(),
            radius: 1.0,
        });
    }
    t
}

#[test]
fn different_seeds_give_different_draws() {
    let t = comb();
    assert_ne!(perturb_tortuosity(&t, 1.0, DEFAULT_GAMMA, 1).unwrap(), perturb_tortuosity(&t, 1.0, DEFAULT_GAMMA, 2).unwrap());
    assert_ne!(arc_drop(&t, 0.3, 1).unwrap(), arc_drop(&t, 0.3, 2).unwrap());
    let mask = rasterize_tree(&t, &vec![1.0; 64], 128, 128).unwrap();
    assert_ne!(pixel_drop(&mask, 0.3, 1).unwrap(), pixel_drop(&mask, 0.3, 2).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn geometric_families_leave_the_field_untouched(seed in any::<u64>()) {
        let s = synth_start(seed, 2, 256);
        for cfg in [
            PerturbationConfig::new(Family::Tortuosity, 4.0, seed),
            PerturbationConfig::new(Family::ArcDrop, 0.3, seed),
        ] {
            let p = apply(&cfg, &s.tree, &s.field, &s.mask).unwrap();
            prop_assert!(p.field.values().iter().zip(s.field.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(&p.mask, &s.mask);
        }
    }

    #[test]
    fn every_family_is_seeded(seed in any::<u64>()) {
        let s = synth_start(seed, 2, 256);
        for cfg in bte_core::perturb::paper_grid(DEFAULT_GAMMA, seed) {
            let a = apply(&cfg, &s.tree, &s.field, &s.mask).unwrap();
            let b = apply(&cfg, &s.tree, &s.field, &s.mask).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn hints_are_bounded_and_deterministic(seed in any::<u64>()) {
        let s = synth_start(seed, 2, 256);
        let h = render_hint(&s.tree, &s.field);
        for ch in &h.channels {
            prop_assert!(ch.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        prop_assert_eq!(&h, &render_hint(&s.tree, &s.field));
    }

    #[test]
    fn third_channel_is_the_smoothed_second(seed in any::<u64>()) {
        let s = synth_start(seed, 2, 256);
        let h = render_hint(&s.tree, &s.field);
        let smoothed = gaussian_smooth(&h.unit_channel(1));
        let ch2 = h.unit_channel(2);
        let (w, ht) = (h.width, h.height);
        for r in 0..ht {
            for c in 0..w {
                prop_assert!((smoothed.get(r, c) - ch2.get(r, c)).abs() <= 1e-12);
            }
        }
        // Mass is conserved when the coverage stays clear of the border.
        let margin = KERNEL_SIZE / 2;
        let ch1 = h.unit_channel(1);
        let touches_border = (0..ht).any(|r| {
            (0..w).any(|c| ch1.get(r, c) > 0.0 && (r < margin || c < margin || r + margin >= ht || c + margin >= w))
        });
        if !touches_border {
            prop_assert!((ch2.sum() - ch1.sum()).abs() <= 1e-9 * ch1.sum());
        }
    }

    #[test]
    fn generation_is_seeded(seed in any::<u64>(), depth in 0usize..=4) {
        let spec = SynthSpec { seed, depth, ..SynthSpec::default() };
        prop_assert_eq!(generate_tree(&spec).unwrap(), generate_tree(&spec).unwrap());
    }
}

/// With distances measured to background pixel centres, a band painted to
/// radius `r` reads between `r` and `r + 1` on its centreline: the first
/// unpainted pixel lies beyond `r` but within one pixel step of it.
#[test]
fn centreline_distance_brackets_the_painted_radius() {
    let lines = [
        (Vec2::new(20.0, 64.0), Vec2::new(108.0, 64.0)),
        (Vec2::new(64.0, 20.0), Vec2::new(64.0, 108.0)),
        (Vec2::new(20.0, 20.0), Vec2::new(108.0, 108.0)),
        (Vec2::new(20.0, 108.0), Vec2::new(108.0, 20.0)),
    ];
    for (a, b) in lines {
        for r in [0.5, 1.0, 1.7, 2.5, 3.0, 4.2, 6.0] {
            let tree = BezierTree {
                segments: vec![Segment {
                    id: 1,
                    parent: None,
                    curve: CubicBezier::line(a, b),
                    radius: r,
                }],
                ..BezierTree::default()
            };
            let field = distance_transform(&rasterize_tree(&tree, &[r], 128, 128).unwrap()).unwrap();
            // Interior centreline pixels, away from the rounded caps.
            for i in 16..=72 {
                let p = a.lerp(b, i as f64 / 88.0);
                let d = field.get(p.y.round() as usize, p.x.round() as usize);
                assert!(d > r && d <= r + 1.0, "line {a:?}-{b:?} r {r}: {d}");
            }
        }
    }
}

/// Mean relative error over several trees of the recovered arc length and
/// tortuosity at a given canvas; geometry and radii scale with the canvas.
fn roundtrip_error(canvas: usize) -> f64 {
    let k = canvas as f64 / 512.0;
    let mut total = 0.0;
    let seeds = 0..6u64;
    for seed in seeds.clone() {
        let spec = SynthSpec {
            seed,
            depth: 2,
            canvas,
            root_radius: 3.0 * k,
            ..SynthSpec::default()
        };
        let report = roundtrip_report(&spec).unwrap();
        total += report.comparison("total_arc_length").unwrap().relative_error();
        total += report.comparison("mean_tortuosity").unwrap().relative_error();
    }
    total / (2 * seeds.count()) as f64
}

#[test]
fn roundtrip_error_shrinks_with_resolution() {
    let errors: Vec<f64> = [256, 512, 1024].into_iter().map(roundtrip_error).collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}
