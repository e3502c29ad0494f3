//! Parameter-level interventions on an encoded tree: tortuosity, arc drop,
//! radius scaling, and the pixel-drop control that degrades the mask and
//! re-encodes it.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::bezier::{BezierTree, Segment};
use crate::encode::{encode_mask, EncodeError, EncodeParams};
use crate::features::MIN_CHORD;
use crate::mask::{pixel_drop, MaskError, RadiusField, VesselMask};
use crate::rng;

pub const DEFAULT_GAMMA: f64 = 0.15;
pub const TORTUOSITY_GRID: [f64; 3] = [1.0, 2.0, 4.0];
pub const ARC_DROP_GRID: [f64; 3] = [0.10, 0.20, 0.30];
pub const RADIUS_GRID: [f64; 3] = [0.85, 0.70, 0.55];
pub const PIXEL_DROP_GRID: [f64; 3] = [0.10, 0.20, 0.30];

/// Tortuosity displacements fall back to multiples of this when the raw
/// displacement would not survive `P + d − P` exactly. Adding and subtracting
/// such a displacement is exact for coordinates on the same lattice, which
/// every tree built by this crate uses.
pub const DISPLACEMENT_QUANTUM: f64 = crate::geom::COORD_QUANTUM;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("unknown perturbation family {0:?}")]
    UnknownFamily(String),
    #[error("unknown configuration name {0:?}")]
    UnknownConfig(String),
    #[error("{family} strength {value} is out of range")]
    StrengthOutOfRange { family: Family, value: f64 },
    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("segment {0} has a degenerate chord")]
    ZeroChord(u32),
    #[error("tree has no segments")]
    EmptyTree,
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Baseline,
    Tortuosity,
    ArcDrop,
    RadiusScale,
    PixelDrop,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Baseline,
        Family::Tortuosity,
        Family::ArcDrop,
        Family::RadiusScale,
        Family::PixelDrop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Baseline => "baseline",
            Family::Tortuosity => "tortuosity",
            Family::ArcDrop => "arc_drop",
            Family::RadiusScale => "radius_scale",
            Family::PixelDrop => "pixel_drop",
        }
    }

    /// The strengths swept by default.
    pub fn grid(self) -> &'static [f64] {
        match self {
            Family::Baseline => &[],
            Family::Tortuosity => &TORTUOSITY_GRID,
            Family::ArcDrop => &ARC_DROP_GRID,
            Family::RadiusScale => &RADIUS_GRID,
            Family::PixelDrop => &PIXEL_DROP_GRID,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "baseline" => Family::Baseline,
            "tortuosity" => Family::Tortuosity,
            "arc_drop" => Family::ArcDrop,
            "radius_scale" | "radius" => Family::RadiusScale,
            "pixel_drop" | "pixdrop" => Family::PixelDrop,
            other => return Err(PerturbError::UnknownFamily(other.to_owned())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    pub family: Family,
    /// α for tortuosity, a fraction for the drops, a factor for radius.
    /// Ignored for the baseline.
    pub strength: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl PerturbationConfig {
    pub fn new(family: Family, strength: f64, seed: u64) -> Self {
        Self {
            family,
            strength,
            gamma: DEFAULT_GAMMA,
            seed,
        }
    }

    pub fn baseline(seed: u64) -> Self {
        Self::new(Family::Baseline, 0.0, seed)
    }

    /// Checks ranges. Off-grid strengths are accepted; the returned list
    /// says which ones were.
    pub fn validate(&self) -> Result<Vec<String>, PerturbError> {
        let s = self.strength;
        let in_range = match self.family {
            Family::Baseline => return Ok(Vec::new()),
            Family::Tortuosity => s > 0.0 && s.is_finite(),
            Family::ArcDrop | Family::PixelDrop => s > 0.0 && s < 1.0,
            Family::RadiusScale => s > 0.0 && s <= 1.0,
        };
        if !in_range {
            return Err(PerturbError::StrengthOutOfRange {
                family: self.family,
                value: s,
            });
        }
        if self.family == Family::Tortuosity && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(PerturbError::InvalidGamma(self.gamma));
        }
        let mut warnings = Vec::new();
        if !self.family.grid().iter().any(|g| (g - s).abs() < 1e-12) {
            warnings.push(format!("{} strength {} is off the default grid {:?}", self.family, s, self.family.grid()));
        }
        Ok(warnings)
    }

    /// Short name used in file names and reports: `baseline`,
    /// `tortuosity_4x`, `arc_drop_30`, `radius_x0.55`, `pixdrop_10`.
    pub fn name(&self) -> String {
        let pct = |f: f64| {
            let p = f * 100.0;
            if (p - p.round()).abs() < 1e-9 {
                format!("{}", p.round() as i64)
            } else {
                format!("{p}")
            }
        };
        match self.family {
            Family::Baseline => "baseline".into(),
            Family::Tortuosity => format!("tortuosity_{}x", self.strength),
            Family::ArcDrop => format!("arc_drop_{}", pct(self.strength)),
            Family::RadiusScale => format!("radius_x{:.2}", self.strength),
            Family::PixelDrop => format!("pixdrop_{}", pct(self.strength)),
        }
    }

    /// Inverse of [`PerturbationConfig::name`].
    pub fn from_name(name: &str, gamma: f64, seed: u64) -> Result<Self, PerturbError> {
        let bad = || PerturbError::UnknownConfig(name.to_owned());
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let (family, strength) = if name == "baseline" {
            (Family::Baseline, 0.0)
        } else if let Some(a) = name.strip_prefix("tortuosity_").and_then(|r| r.strip_suffix('x')) {
            (Family::Tortuosity, num(a)?)
        } else if let Some(p) = name.strip_prefix("arc_drop_") {
            (Family::ArcDrop, num(p)? / 100.0)
        } else if let Some(f) = name.strip_prefix("radius_x") {
            (Family::RadiusScale, num(f)?)
        } else if let Some(p) = name.strip_prefix("pixdrop_") {
            (Family::PixelDrop, num(p)? / 100.0)
        } else {
            return Err(bad());
        };
        let cfg = Self {
            family,
            strength,
            gamma,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The thirteen configurations: the baseline and three doses per family.
pub fn paper_grid(gamma: f64, seed: u64) -> Vec<PerturbationConfig> {
    let mut out = vec![PerturbationConfig {
        gamma,
        ..PerturbationConfig::baseline(seed)
    }];
    for family in &Family::ALL[1..] {
        for &s in family.grid() {
            out.push(PerturbationConfig {
                family: *family,
                strength: s,
                gamma,
                seed,
            });
        }
    }
    out
}

/// `d` itself when `p1 + d` and `p2 − d` both shift by exactly `±d`,
/// otherwise `d` rounded to the coordinate lattice.
fn exact_shift(p1: f64, p2: f64, d: f64) -> f64 {
    if (p1 + d) - p1 == d && (p2 - d) - p2 == -d {
        d
    } else {
        crate::geom::snap(d)
    }
}

/// Displaces the interior control points perpendicular to the chord:
/// `P1' = P1 + s·γαL·n̂`, `P2' = P2 − s·γαL·n̂`, with `s = ±1` drawn per
/// segment from a stream keyed by `(seed, segment id)`. Endpoints, ids,
/// parents and radii are untouched.
pub fn perturb_tortuosity(tree: &BezierTree, alpha: f64, gamma: f64, seed: u64) -> Result<BezierTree, PerturbError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(PerturbError::StrengthOutOfRange {
            family: Family::Tortuosity,
            value: alpha,
        });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(PerturbError::InvalidGamma(gamma));
    }
    let mut out = tree.clone();
    for seg in &mut out.segments {
        let c = &mut seg.curve;
        let v = c.p3 - c.p0;
        if v.norm() < MIN_CHORD {
            return Err(PerturbError::ZeroChord(seg.id));
        }
        let sign = if rng::keyed(seed, u64::from(seg.id)).random::<bool>() { 1.0 } else { -1.0 };
        // γαL·n̂ with n̂ = perp(v)/L is γα·perp(v).
        let k = sign * gamma * alpha;
        let n = v.perp();
        let d = crate::geom::Vec2::new(exact_shift(c.p1.x, c.p2.x, k * n.x), exact_shift(c.p1.y, c.p2.y, k * n.y));
        c.p1 += d;
        c.p2 -= d;
    }
    Ok(out)
}

/// Removes exactly `round(fraction · n)` segments chosen uniformly without
/// replacement; survivors are untouched apart from parents pointing at a
/// removed segment, which become `None`.
pub fn arc_drop(tree: &BezierTree, fraction: f64, seed: u64) -> Result<BezierTree, PerturbError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(PerturbError::StrengthOutOfRange {
            family: Family::ArcDrop,
            value: fraction,
        });
    }
    if tree.is_empty() {
        return Err(PerturbError::EmptyTree);
    }
    let n = tree.len();
    let k = (fraction * n as f64).round() as usize;
    let mut rng = rng::seeded(seed);
    let removed: BTreeSet<u32> = index::sample(&mut rng, n, k).into_iter().map(|i| tree.segments[i].id).collect();
    Ok(tree.without(&removed))
}

pub fn radius_scale(field: &RadiusField, factor: f64) -> Result<RadiusField, PerturbError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(PerturbError::StrengthOutOfRange {
            family: Family::RadiusScale,
            value: factor,
        });
    }
    Ok(field.scaled(factor))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub tree: BezierTree,
    pub field: RadiusField,
    pub mask: VesselMask,
}

pub fn apply(config: &PerturbationConfig, tree: &BezierTree, field: &RadiusField, mask: &VesselMask) -> Result<Perturbed, PerturbError> {
    apply_with(config, tree, field, mask, &EncodeParams::default())
}

/// Dispatches on the family. Radius scaling also scales each segment's
/// stored radius so the tree stays consistent with its field. Pixel drop
/// degrades the mask and re-encodes it with `params`.
pub fn apply_with(
    config: &PerturbationConfig,
    tree: &BezierTree,
    field: &RadiusField,
    mask: &VesselMask,
    params: &EncodeParams,
) -> Result<Perturbed, PerturbError> {
    for w in config.validate()? {
        log::warn!("{w}");
    }
    let s = config.strength;
    Ok(match config.family {
        Family::Baseline => Perturbed {
            tree: tree.clone(),
            field: field.clone(),
            mask: mask.clone(),
        },
        Family::Tortuosity => Perturbed {
            tree: perturb_tortuosity(tree, s, config.gamma, config.seed)?,
            field: field.clone(),
            mask: mask.clone(),
        },
        Family::ArcDrop => Perturbed {
            tree: arc_drop(tree, s, config.seed)?,
            field: field.clone(),
            mask: mask.clone(),
        },
        Family::RadiusScale => {
            let mut t = tree.clone();
            t.segments = t
                .segments
                .iter()
                .map(|seg| Segment {
                    radius: seg.radius * s,
                    ..*seg
                })
                .collect();
            Perturbed {
                tree: t,
                field: radius_scale(field, s)?,
                mask: mask.clone(),
            }
        }
        Family::PixelDrop => {
            let degraded = pixel_drop(mask, s, config.seed)?;
            let enc = encode_mask(&degraded, params, &tree.provenance)?;
            Perturbed {
                tree: enc.tree,
                field: enc.field,
                mask: degraded,
            }
        }
    })
}
