use std::ops::Range;

use thiserror::Error;

use super::CubicBezier;
use crate::geom::Vec2;

/// Points per fitted chunk.
pub const CHUNK_LEN: usize = 30;
/// Points shared by adjacent chunks.
pub const CHUNK_OVERLAP: usize = 4;
/// Fewest points a chunk (and a fittable polyline) may have.
pub const MIN_CHUNK: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {MIN_CHUNK} points, got {0}")]
    TooFewPoints(usize),
    #[error("chunk endpoints coincide")]
    DegenerateChord,
    #[error("{points} points but {params} parameters")]
    ParamCount { points: usize, params: usize },
    #[error("non-finite input coordinate")]
    NonFinite,
}

/// A fitted chunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub curve: CubicBezier,
    /// Root-mean-square distance between the points and the curve at their
    /// parameters.
    pub rms: f64,
    /// The normal equations were singular and the chord-thirds interpolant
    /// was used instead.
    pub fallback: bool,
}

/// Splits `n` ordered points into index ranges of [`CHUNK_LEN`] points with
/// [`CHUNK_OVERLAP`] points shared between neighbours. A trailing chunk
/// shorter than [`MIN_CHUNK`] is merged into its predecessor.
pub fn chunk_polyline(n: usize) -> Result<Vec<Range<usize>>, FitError> {
    if n < MIN_CHUNK {
        return Err(FitError::TooFewPoints(n));
    }
    let stride = CHUNK_LEN - CHUNK_OVERLAP;
    let mut chunks: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + CHUNK_LEN).min(n);
        if end - start < MIN_CHUNK {
            if let Some(last) = chunks.last_mut() {
                last.end = n;
            }
            break;
        }
        chunks.push(start..end);
        if end == n {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}

/// Cumulative chord length along the points, normalised to `[0, 1]`.
pub fn chord_params(points: &[Vec2]) -> Result<Vec<f64>, FitError> {
    let mut acc = Vec::with_capacity(points.len());
    let mut total = 0.0;
    acc.push(0.0);
    for w in points.windows(2) {
        total += w[0].distance(w[1]);
        acc.push(total);
    }
    if total <= 0.0 {
        return Err(FitError::DegenerateChord);
    }
    let last = acc.len() - 1;
    for (i, a) in acc.iter_mut().enumerate() {
        *a = if i == last { 1.0 } else { *a / total };
    }
    Ok(acc)
}

/// Least-squares cubic through `points` with the endpoints clamped and
/// chord-length parameters.
pub fn fit_cubic(points: &[Vec2]) -> Result<Fit, FitError> {
    if points.len() < MIN_CHUNK {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let params = chord_params(points)?;
    fit_cubic_at(points, &params)
}

/// Least-squares cubic with `P0 = points[0]`, `P3 = points[n-1]` and the
/// interior control points solving the 2x2 normal equations at the given
/// parameters.
pub fn fit_cubic_at(points: &[Vec2], params: &[f64]) -> Result<Fit, FitError> {
    if points.len() < MIN_CHUNK {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if points.len() != params.len() {
        return Err(FitError::ParamCount {
            points: points.len(),
            params: params.len(),
        });
    }
    let p0 = points[0];
    let p3 = points[points.len() - 1];
    if p0 == p3 {
        return Err(FitError::DegenerateChord);
    }

    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    let (mut r1, mut r2) = (Vec2::ZERO, Vec2::ZERO);
    for (&q, &t) in points.iter().zip(params) {
        let s = 1.0 - t;
        let b0 = s * s * s;
        let b1 = 3.0 * s * s * t;
        let b2 = 3.0 * s * t * t;
        let b3 = t * t * t;
        let r = q - p0 * b0 - p3 * b3;
        a11 += b1 * b1;
        a12 += b1 * b2;
        a22 += b2 * b2;
        r1 += r * b1;
        r2 += r * b2;
    }
    let det = a11 * a22 - a12 * a12;
    let (curve, fallback) = if a11 > 0.0 && a22 > 0.0 && det > 1e-12 * a11 * a22 {
        let p1 = (r1 * a22 - r2 * a12) * (1.0 / det);
        let p2 = (r2 * a11 - r1 * a12) * (1.0 / det);
        (CubicBezier::new(p0, p1, p2, p3), false)
    } else {
        (CubicBezier::line(p0, p3), true)
    };
    let sq: f64 = points
        .iter()
        .zip(params)
        .map(|(&q, &t)| (curve.point_at(t) - q).norm_sq())
        .sum();
    Ok(Fit {
        curve,
        rms: (sq / points.len() as f64).sqrt(),
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn chunking_rule() {
        assert_eq!(chunk_polyline(30).unwrap(), vec![0..30]);
        assert_eq!(chunk_polyline(56).unwrap(), vec![0..30, 26..56]);
        assert_eq!(chunk_polyline(33).unwrap(), vec![0..30, 26..33]);
        assert_eq!(chunk_polyline(5).unwrap(), vec![0..5]);
        assert_eq!(chunk_polyline(4), Err(FitError::TooFewPoints(4)));
        // every adjacent pair shares exactly CHUNK_OVERLAP points
        for n in 5..400 {
            let chunks = chunk_polyline(n).unwrap();
            assert_eq!(chunks.first().unwrap().start, 0);
            assert_eq!(chunks.last().unwrap().end, n);
            for w in chunks.windows(2) {
                assert_eq!(w[0].end - w[1].start, CHUNK_OVERLAP);
            }
            assert!(chunks.iter().all(|c| c.len() >= MIN_CHUNK && c.len() <= CHUNK_LEN));
        }
    }

    #[test]
    fn recovers_known_cubic_at_its_parameters() {
        let truth = CubicBezier::new(v(3.0, 4.0), v(10.0, 25.0), v(30.0, -6.0), v(41.0, 12.0));
        let params: Vec<f64> = (0..30).map(|i| (i as f64 / 29.0).powf(1.3)).collect();
        let pts: Vec<Vec2> = params.iter().map(|&t| truth.point_at(t)).collect();
        let fit = fit_cubic_at(&pts, &params).unwrap();
        assert!(!fit.fallback);
        assert!((fit.curve.p1 - truth.p1).norm() < 1e-6);
        assert!((fit.curve.p2 - truth.p2).norm() < 1e-6);
        assert!(fit.rms < 1e-9);
    }

    #[test]
    fn collinear_points_fit_a_line() {
        let pts: Vec<Vec2> = (0..30).map(|i| v(2.0 + 1.5 * i as f64, 7.0 - 0.5 * i as f64)).collect();
        let fit = fit_cubic(&pts).unwrap();
        let (a, d) = (pts[0], pts[29] - pts[0]);
        for i in 0..=100 {
            let p = fit.curve.point_at(i as f64 / 100.0);
            let off = (p - a).cross(d).abs() / d.norm();
            assert!(off < 1e-6);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let pts = vec![v(0.0, 0.0), v(1.0, 1.0), v(2.0, 0.0), v(1.0, -1.0), v(0.0, 0.0)];
        assert_eq!(fit_cubic(&pts), Err(FitError::DegenerateChord));
        assert_eq!(fit_cubic(&pts[..3]), Err(FitError::TooFewPoints(3)));
        // every parameter at an endpoint leaves the interior unconstrained
        let pts: Vec<Vec2> = (0..6).map(|i| v(i as f64, 0.0)).collect();
        let params = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let fit = fit_cubic_at(&pts, &params).unwrap();
        assert!(fit.fallback);
        assert_eq!(fit.curve, CubicBezier::line(pts[0], pts[5]));
    }

    proptest! {
        #[test]
        fn endpoints_are_clamped(pts in proptest::collection::vec((0.0..500.0f64, 0.0..500.0f64), 5..40)) {
            let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| v(x, y)).collect();
            prop_assume!(pts[0] != pts[pts.len() - 1]);
            let fit = fit_cubic(&pts).unwrap();
            prop_assert_eq!(fit.curve.p0, pts[0]);
            prop_assert_eq!(fit.curve.p3, pts[pts.len() - 1]);
        }

        #[test]
        fn refit_of_own_samples_is_idempotent(
            c in proptest::array::uniform8(0.0..300.0f64),
            n in 5usize..40,
        ) {
            let curve = CubicBezier::new(v(c[0], c[1]), v(c[2], c[3]), v(c[4], c[5]), v(c[6], c[7]));
            prop_assume!(curve.chord() > 1.0);
            let params: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let pts: Vec<Vec2> = params.iter().map(|&t| curve.point_at(t)).collect();
            let first = fit_cubic_at(&pts, &params).unwrap().curve;
            let again: Vec<Vec2> = params.iter().map(|&t| first.point_at(t)).collect();
            let second = fit_cubic_at(&again, &params).unwrap().curve;
            for (a, b) in first.control_points().iter().zip(second.control_points()) {
                prop_assert!((*a - b).norm() < 1e-6);
            }
        }
    }
}
