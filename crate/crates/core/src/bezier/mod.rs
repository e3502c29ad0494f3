//! Cubic Bézier segments: evaluation, arc length, curvature, least-squares
//! fitting and the tree they are assembled into.

mod bte;
mod fit;
mod tree;

pub use bte::{parse_bte, read_bte, to_bte_string, write_bte, BteError, BTE_VERSION};
pub use fit::{chord_params, chunk_polyline, fit_cubic, fit_cubic_at, Fit, FitError, CHUNK_LEN, CHUNK_OVERLAP, MIN_CHUNK};
pub use tree::{BezierTree, Segment, TreeError, LINK_TOLERANCE};

use thiserror::Error;

use crate::geom::Vec2;

/// Below this speed `|B'(t)|` the curvature is undefined.
pub const MIN_SPEED: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum BezierError {
    #[error("parameter {0} is outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("derivative vanishes at t = {0}")]
    VanishingDerivative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBezier {
    pub p0: Vec2,
    pub p1: Vec2,
    pub p2: Vec2,
    pub p3: Vec2,
}

// 5-point Gauss–Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];
const ARC_PANELS: usize = 64;

impl CubicBezier {
    pub const fn new(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2) -> Self {
        Self { p0, p1, p2, p3 }
    }

    /// Straight segment with control points at the chord thirds.
    pub fn line(p0: Vec2, p3: Vec2) -> Self {
        let v = p3 - p0;
        Self::new(p0, p0 + v * (1.0 / 3.0), p0 + v * (2.0 / 3.0), p3)
    }

    pub fn control_points(&self) -> [Vec2; 4] {
        [self.p0, self.p1, self.p2, self.p3]
    }

    pub fn from_control_points(p: [Vec2; 4]) -> Self {
        Self::new(p[0], p[1], p[2], p[3])
    }

    /// Control points moved to the nearest coordinate-lattice values.
    pub fn snapped(&self) -> Self {
        Self::new(self.p0.snapped(), self.p1.snapped(), self.p2.snapped(), self.p3.snapped())
    }

    /// Bernstein-form evaluation.
    pub fn eval(&self, t: f64) -> Result<Vec2, BezierError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(BezierError::ParameterOutOfRange(t));
        }
        Ok(self.point_at(t))
    }

    /// [`eval`](Self::eval) without the range check.
    pub fn point_at(&self, t: f64) -> Vec2 {
        let s = 1.0 - t;
        let b0 = s * s * s;
        let b1 = 3.0 * s * s * t;
        let b2 = 3.0 * s * t * t;
        let b3 = t * t * t;
        self.p0 * b0 + self.p1 * b1 + self.p2 * b2 + self.p3 * b3
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        let s = 1.0 - t;
        (self.p1 - self.p0) * (3.0 * s * s) + (self.p2 - self.p1) * (6.0 * s * t) + (self.p3 - self.p2) * (3.0 * t * t)
    }

    pub fn second_derivative(&self, t: f64) -> Vec2 {
        let a = self.p2 - self.p1 * 2.0 + self.p0;
        let b = self.p3 - self.p2 * 2.0 + self.p1;
        a * (6.0 * (1.0 - t)) + b * (6.0 * t)
    }

    pub fn chord(&self) -> f64 {
        self.p0.distance(self.p3)
    }

    /// Length of the curve by adaptive composite Gauss–Legendre quadrature of
    /// `|B'(t)|` over 64 base panels.
    pub fn arc_length(&self) -> f64 {
        let h = 1.0 / ARC_PANELS as f64;
        (0..ARC_PANELS)
            .map(|i| {
                let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                self.adaptive_speed_integral(a, b, self.gl_speed(a, b), 0)
            })
            .sum()
    }

    fn gl_speed(&self, a: f64, b: f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(&x, w)| w * self.derivative(mid + half * x).norm())
            .sum::<f64>()
            * half
    }

    fn adaptive_speed_integral(&self, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = self.gl_speed(a, m);
        let right = self.gl_speed(m, b);
        if depth >= 12 || (left + right - whole).abs() <= 1e-12 * whole.max(1.0) {
            return left + right;
        }
        self.adaptive_speed_integral(a, m, left, depth + 1) + self.adaptive_speed_integral(m, b, right, depth + 1)
    }

    /// Signed-free curvature `|x'y'' - y'x''| / |B'|^3`.
    pub fn curvature(&self, t: f64) -> Result<f64, BezierError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(BezierError::ParameterOutOfRange(t));
        }
        let d1 = self.derivative(t);
        let speed = d1.norm();
        if speed <= MIN_SPEED {
            return Err(BezierError::VanishingDerivative(t));
        }
        Ok(d1.cross(self.second_derivative(t)).abs() / (speed * speed * speed))
    }

    /// The piece of the curve over `[t0, t1]`, reparameterised to `[0, 1]`.
    pub fn subsegment(&self, t0: f64, t1: f64) -> CubicBezier {
        let (_, right) = self.split(t0);
        if t0 >= 1.0 {
            return right;
        }
        let u = ((t1 - t0) / (1.0 - t0)).clamp(0.0, 1.0);
        right.split(u).0
    }

    /// de Casteljau split at `t`.
    pub fn split(&self, t: f64) -> (CubicBezier, CubicBezier) {
        let a = self.p0.lerp(self.p1, t);
        let b = self.p1.lerp(self.p2, t);
        let c = self.p2.lerp(self.p3, t);
        let d = a.lerp(b, t);
        let e = b.lerp(c, t);
        let f = d.lerp(e, t);
        (
            CubicBezier::new(self.p0, a, d, f),
            CubicBezier::new(f, e, c, self.p3),
        )
    }

    pub fn map_points(&self, f: impl Fn(Vec2) -> Vec2) -> CubicBezier {
        CubicBezier::new(f(self.p0), f(self.p1), f(self.p2), f(self.p3))
    }

    pub fn is_finite(&self) -> bool {
        self.control_points().iter().all(|p| p.is_finite())
    }
}
