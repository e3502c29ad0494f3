//! The 20 geometric statistics of an encoded vessel tree.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::bezier::{BezierTree, CubicBezier};
use crate::mask::{RadiusField, VesselMask};

/// Curvature samples per segment, at `t = i / 49`.
pub const CURVATURE_SAMPLES: usize = 50;
/// Radius samples per segment.
pub const RADIUS_SAMPLES: usize = 20;
/// Radius (px at 512²) at or above which a sample counts as a thick vessel.
pub const THICK_THRESHOLD: f64 = 3.0;
/// Segments with a shorter chord are excluded from the aggregates.
pub const MIN_CHORD: f64 = 1e-6;

pub const FEATURE_COUNT: usize = 20;

/// Column order of the feature vector and of the features CSV.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "total_arc_length",
    "n_segments",
    "mean_segment_length",
    "std_segment_length",
    "mean_chord_length",
    "std_chord_length",
    "mean_tortuosity",
    "std_tortuosity",
    "max_tortuosity",
    "mean_curvature",
    "std_curvature",
    "max_curvature",
    "mean_radius",
    "std_radius",
    "min_radius",
    "max_radius",
    "radius_cv",
    "thick_vessel_ratio",
    "branching_density",
    "coverage_ratio",
];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("tree has no segments")]
    EmptyTree,
    #[error("every segment has a degenerate chord")]
    AllDegenerate,
    #[error("segment chord {0} is below the minimum")]
    DegenerateChord(f64),
    #[error("radius field is {field:?}, mask is {mask:?}")]
    DimensionMismatch { field: (usize, usize), mask: (usize, usize) },
    #[error("feature {feature} is not finite")]
    NonFinite { feature: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    pub thick_threshold: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            thick_threshold: THICK_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    pub total_arc_length: f64,
    pub n_segments: f64,
    pub mean_segment_length: f64,
    pub std_segment_length: f64,
    pub mean_chord_length: f64,
    pub std_chord_length: f64,
    pub mean_tortuosity: f64,
    pub std_tortuosity: f64,
    pub max_tortuosity: f64,
    pub mean_curvature: f64,
    pub std_curvature: f64,
    pub max_curvature: f64,
    pub mean_radius: f64,
    pub std_radius: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    pub radius_cv: f64,
    pub thick_vessel_ratio: f64,
    pub branching_density: f64,
    pub coverage_ratio: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.total_arc_length,
            self.n_segments,
            self.mean_segment_length,
            self.std_segment_length,
            self.mean_chord_length,
            self.std_chord_length,
            self.mean_tortuosity,
            self.std_tortuosity,
            self.max_tortuosity,
            self.mean_curvature,
            self.std_curvature,
            self.max_curvature,
            self.mean_radius,
            self.std_radius,
            self.min_radius,
            self.max_radius,
            self.radius_cv,
            self.thick_vessel_ratio,
            self.branching_density,
            self.coverage_ratio,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        Self {
            total_arc_length: v[0],
            n_segments: v[1],
            mean_segment_length: v[2],
            std_segment_length: v[3],
            mean_chord_length: v[4],
            std_chord_length: v[5],
            mean_tortuosity: v[6],
            std_tortuosity: v[7],
            max_tortuosity: v[8],
            mean_curvature: v[9],
            std_curvature: v[10],
            max_curvature: v[11],
            mean_radius: v[12],
            std_radius: v[13],
            min_radius: v[14],
            max_radius: v[15],
            radius_cv: v[16],
            thick_vessel_ratio: v[17],
            branching_density: v[18],
            coverage_ratio: v[19],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = FEATURE_NAMES.iter().position(|n| *n == name)?;
        Some(self.to_array()[i])
    }

    /// Name of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.to_array()
            .iter()
            .zip(FEATURE_NAMES)
            .find(|(v, _)| !v.is_finite())
            .map(|(_, n)| n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMetrics {
    pub arc: f64,
    pub chord: f64,
    pub tortuosity: f64,
    /// Mean over the curvature samples that have a defined tangent.
    pub mean_curvature: f64,
    /// Samples skipped because the derivative vanished there.
    pub flagged_curvature: usize,
    pub mean_radius: f64,
    pub radius_samples: Vec<f64>,
}

pub fn segment_metrics(seg: &CubicBezier, field: &RadiusField) -> Result<SegmentMetrics, FeatureError> {
    let chord = seg.chord();
    if chord < MIN_CHORD {
        return Err(FeatureError::DegenerateChord(chord));
    }
    let arc = seg.arc_length();
    let mut sum = 0.0;
    let mut used = 0usize;
    for i in 0..CURVATURE_SAMPLES {
        if let Ok(k) = seg.curvature(i as f64 / (CURVATURE_SAMPLES - 1) as f64) {
            sum += k;
            used += 1;
        }
    }
    let radius_samples: Vec<f64> = (0..RADIUS_SAMPLES)
        .map(|i| field.sample_nearest(seg.point_at(i as f64 / (RADIUS_SAMPLES - 1) as f64)))
        .collect();
    Ok(SegmentMetrics {
        arc,
        chord,
        // Quadrature can land an ulp under the chord on straight segments.
        tortuosity: (arc / chord).max(1.0),
        mean_curvature: if used > 0 { sum / used as f64 } else { 0.0 },
        flagged_curvature: CURVATURE_SAMPLES - used,
        mean_radius: radius_samples.iter().sum::<f64>() / RADIUS_SAMPLES as f64,
        radius_samples,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureDiagnostics {
    pub excluded_segments: usize,
    pub flagged_curvature_samples: usize,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn compute_features(
    tree: &BezierTree,
    field: &RadiusField,
    mask: &VesselMask,
    branch_count: usize,
) -> Result<FeatureVector, FeatureError> {
    compute_features_with(tree, field, mask, branch_count, &FeatureParams::default()).map(|(f, _)| f)
}

pub fn compute_features_with(
    tree: &BezierTree,
    field: &RadiusField,
    mask: &VesselMask,
    branch_count: usize,
    params: &FeatureParams,
) -> Result<(FeatureVector, FeatureDiagnostics), FeatureError> {
    if tree.is_empty() {
        return Err(FeatureError::EmptyTree);
    }
    if (field.width(), field.height()) != (mask.width(), mask.height()) {
        return Err(FeatureError::DimensionMismatch {
            field: (field.width(), field.height()),
            mask: (mask.width(), mask.height()),
        });
    }
    let mut diag = FeatureDiagnostics::default();
    let mut metrics = Vec::with_capacity(tree.len());
    for seg in &tree.segments {
        match segment_metrics(&seg.curve, field) {
            Ok(m) => {
                diag.flagged_curvature_samples += m.flagged_curvature;
                metrics.push(m);
            }
            Err(FeatureError::DegenerateChord(_)) => diag.excluded_segments += 1,
            Err(e) => return Err(e),
        }
    }
    if metrics.is_empty() {
        return Err(FeatureError::AllDegenerate);
    }

    let col = |f: fn(&SegmentMetrics) -> f64| metrics.iter().map(f).collect::<Vec<f64>>();
    let arcs = col(|m| m.arc);
    let chords = col(|m| m.chord);
    let tort = col(|m| m.tortuosity);
    let curv = col(|m| m.mean_curvature);
    let radii = col(|m| m.mean_radius);

    let total_arc: f64 = arcs.iter().sum();
    let (mean_arc, std_arc) = mean_std(&arcs);
    let (mean_chord, std_chord) = mean_std(&chords);
    let (mean_tort, std_tort) = mean_std(&tort);
    let (mean_curv, std_curv) = mean_std(&curv);
    let (mean_rad, std_rad) = mean_std(&radii);
    let pooled = metrics.iter().flat_map(|m| m.radius_samples.iter());
    let total_samples = metrics.len() * RADIUS_SAMPLES;
    let thick = pooled.filter(|&&r| r >= params.thick_threshold).count();

    let fv = FeatureVector {
        total_arc_length: total_arc,
        n_segments: metrics.len() as f64,
        mean_segment_length: mean_arc,
        std_segment_length: std_arc,
        mean_chord_length: mean_chord,
        std_chord_length: std_chord,
        mean_tortuosity: mean_tort,
        std_tortuosity: std_tort,
        max_tortuosity: max_of(&tort),
        mean_curvature: mean_curv,
        std_curvature: std_curv,
        max_curvature: max_of(&curv),
        mean_radius: mean_rad,
        std_radius: std_rad,
        min_radius: min_of(&radii),
        max_radius: max_of(&radii),
        radius_cv: if mean_rad > 0.0 { std_rad / mean_rad } else { 0.0 },
        thick_vessel_ratio: thick as f64 / total_samples as f64,
        branching_density: if total_arc > 0.0 { branch_count as f64 / total_arc } else { 0.0 },
        coverage_ratio: mask.foreground_fraction(),
    };
    if let Some(feature) = fv.first_non_finite() {
        return Err(FeatureError::NonFinite { feature });
    }
    Ok((fv, diag))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub features: FeatureVector,
    pub label: Option<u8>,
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("row {id:?}: feature {feature} is not finite")]
    NonFinite { id: String, feature: &'static str },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn header() -> Vec<&'static str> {
    let mut h = vec!["id"];
    h.extend(FEATURE_NAMES);
    h.push("label");
    h
}

/// Writes `#`-prefixed comment lines, then the header and one row per image.
/// Rows are validated before anything is written.
pub fn write_features_csv<W: Write>(mut out: W, rows: &[FeatureRow], comments: &[String]) -> Result<(), CsvError> {
    let mut seen = BTreeSet::new();
    for row in rows {
        if !seen.insert(row.id.as_str()) {
            return Err(CsvError::DuplicateId(row.id.clone()));
        }
        if let Some(feature) = row.features.first_non_finite() {
            return Err(CsvError::NonFinite {
                id: row.id.clone(),
                feature,
            });
        }
    }
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for row in rows {
        let mut rec = vec![row.id.clone()];
        rec.extend(row.features.to_array().iter().map(|v| v.to_string()));
        rec.push(row.label.map(|l| l.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_features_csv(path: impl AsRef<Path>, rows: &[FeatureRow], comments: &[String]) -> Result<(), CsvError> {
    let mut buf = Vec::new();
    write_features_csv(&mut buf, rows, comments)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_features_csv<R: Read>(input: R) -> Result<Vec<FeatureRow>, CsvError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let expected = header();
    let got: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if got != expected {
        return Err(CsvError::Parse {
            line: 1,
            message: format!("unexpected header {got:?}"),
        });
    }
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| CsvError::Parse { line, message };
        let id = rec[0].to_owned();
        let mut v = [0.0; FEATURE_COUNT];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = rec[i + 1]
                .trim()
                .parse()
                .map_err(|_| err(format!("{}: not a number: {:?}", FEATURE_NAMES[i], &rec[i + 1])))?;
        }
        let label = match rec[FEATURE_COUNT + 1].trim() {
            "" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => return Err(err(format!("label must be 0 or 1, got {other:?}"))),
        };
        if !seen.insert(id.clone()) {
            return Err(CsvError::DuplicateId(id));
        }
        rows.push(FeatureRow {
            id,
            features: FeatureVector::from_array(v),
            label,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::Segment;
    use crate::geom::Vec2;
    use crate::mask::distance_transform;

    fn line_case() -> (BezierTree, RadiusField, VesselMask) {
        let mask = VesselMask::from_fn(512, 512, |r, c| r == 200 && (100..=200).contains(&c));
        let field = distance_transform(&mask).unwrap();
        let mut tree = BezierTree::new(Some((512, 512)), "line");
        tree.segments.push(Segment {
            id: 1,
            parent: None,
            curve: CubicBezier::line(Vec2::new(100.0, 200.0), Vec2::new(200.0, 200.0)),
            radius: 1.0,
        });
        (tree, field, mask)
    }

    #[test]
    fn straight_segment_on_line_mask() {
        let (tree, field, mask) = line_case();
        let f = compute_features(&tree, &field, &mask, 0).unwrap();
        assert_eq!(f.n_segments, 1.0);
        assert!((f.total_arc_length - 100.0).abs() < 1e-9);
        assert_eq!(f.mean_tortuosity, 1.0);
        assert_eq!(f.mean_radius, 1.0);
        assert_eq!(f.std_radius, 0.0);
        assert!((f.coverage_ratio - 101.0 / (512.0 * 512.0)).abs() < 1e-15);
        assert_eq!(f.thick_vessel_ratio, 0.0);
        assert_eq!(f.mean_curvature, 0.0);
    }

    #[test]
    fn duplicating_segments_doubles_extensive_features() {
        let (mut tree, field, mask) = line_case();
        let bent = CubicBezier::new(
            Vec2::new(100.0, 200.0),
            Vec2::new(130.0, 180.0),
            Vec2::new(170.0, 220.0),
            Vec2::new(200.0, 200.0),
        );
        tree.segments[0].curve = bent;
        let a = compute_features(&tree, &field, &mask, 1).unwrap();
        let mut doubled = tree.clone();
        doubled.segments.push(Segment {
            id: 2,
            ..tree.segments[0]
        });
        let b = compute_features(&doubled, &field, &mask, 1).unwrap();
        assert_eq!(b.n_segments, 2.0);
        assert!((b.total_arc_length - 2.0 * a.total_arc_length).abs() < 1e-9);
        assert_eq!(b.mean_tortuosity, a.mean_tortuosity);
        assert_eq!(b.std_tortuosity, 0.0);
        assert_eq!(b.std_segment_length, 0.0);
    }

    #[test]
    fn empty_tree_is_an_error() {
        let (_, field, mask) = line_case();
        let tree = BezierTree::new(None, "");
        assert_eq!(compute_features(&tree, &field, &mask, 0), Err(FeatureError::EmptyTree));
    }

    #[test]
    fn quarter_circle_tortuosity() {
        let k = 0.5522847498 * 10.0;
        let c = CubicBezier::new(
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, k),
            Vec2::new(k, 10.0),
            Vec2::new(0.0, 10.0),
        );
        let m = segment_metrics(&c, &RadiusField::zeros(4, 4)).unwrap();
        let expected = (10.0 * std::f64::consts::FRAC_PI_2) / (10.0 * 2f64.sqrt());
        assert!((m.tortuosity / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn csv_roundtrip_and_rejections() {
        let (tree, field, mask) = line_case();
        let f = compute_features(&tree, &field, &mask, 0).unwrap();
        let rows = vec![
            FeatureRow { id: "a".into(), features: f, label: Some(1) },
            FeatureRow { id: "b".into(), features: f, label: None },
        ];
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &rows, &[]).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 3);
        assert_eq!(read_features_csv(&buf[..]).unwrap(), rows);

        let mut bad = rows.clone();
        bad[1].features.max_radius = f64::NAN;
        match write_features_csv(Vec::new(), &bad, &[]) {
            Err(CsvError::NonFinite { id, feature }) => assert_eq!((id.as_str(), feature), ("b", "max_radius")),
            other => panic!("{other:?}"),
        }
        let mut dup = rows.clone();
        dup[1].id = "a".into();
        assert!(matches!(write_features_csv(Vec::new(), &dup, &[]), Err(CsvError::DuplicateId(_))));
    }

    #[test]
    fn empty_list_is_header_only() {
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &[], &["seed=1".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(read_features_csv(text.as_bytes()).unwrap().is_empty());
    }
}
