//! Vessel-geometry toolkit built around a cubic-Bézier tree encoding of
//! binary vessel masks.
//!
//! Stages, in pipeline order:
//!
//! 1. [`mask`]: load, resample and degrade masks; exact distance transform.
//! 2. [`skeleton`]: thinning, node classes, polyline tracing.
//! 3. [`bezier`]: chunked least-squares cubic fits, the tree, the BTE format.
//! 4. [`encode`]: mask → tree pipeline.
//! 5. [`features`]: the 20 geometric statistics of a tree.
//! 6. [`perturb`]: tortuosity, arc-drop, radius and pixel-drop interventions.
//! 7. [`hint`]: three-channel conditioning raster and its binary format.
//! 8. [`stats`]: paired counterfactual effects and observational statistics
//!    over externally produced classifier scores.
//!
//! [`synth`] generates trees with known geometry for end-to-end checks.

pub mod bezier;
pub mod encode;
pub mod features;
pub mod geom;
pub mod hint;
pub mod mask;
pub mod perturb;
pub mod pipeline;
pub mod provenance;
pub mod rng;
pub mod skeleton;
pub mod stats;
pub mod synth;

pub use bezier::{BezierTree, CubicBezier, Segment};
pub use features::FeatureVector;
pub use geom::Vec2;
pub use hint::HintImage;
pub use mask::{RadiusField, VesselMask};
