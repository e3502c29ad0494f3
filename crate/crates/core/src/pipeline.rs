//! Batch plumbing shared by the command-line tool and the C interface:
//! run configuration, per-item pipelines that return artifact bytes, and an
//! order-preserving parallel map.
//!
//! Every item function is pure in its inputs and the run seed, so artifacts
//! are byte-identical across reruns and worker counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Cursor;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::bezier::{to_bte_string, BezierTree, BteError};
use crate::encode::{encode_mask, EncodeDiagnostics, EncodeError, EncodeParams, Encoding};
use crate::features::{compute_features_with, write_features_csv, CsvError, FeatureError, FeatureParams, FeatureRow};
use crate::hint::{preview_image, render_hint, write_btef, HintError, HintImage};
use crate::mask::{distance_transform, load_mask, resample_to_working, MaskError, VesselMask, WORKING_SIZE};
use crate::perturb::{apply_with, PerturbError, PerturbationConfig, DEFAULT_GAMMA};
use crate::provenance::Provenance;
use crate::rng::item_seed;
use crate::skeleton::{junction_count, skeletonize};
use crate::stats::report::{causal_rows, causal_table_csv, causal_table_text, contrast_csv, contrast_rows, observational_csv, observational_text};
use crate::stats::scores::{known_configs, paired_delta_in, strict_subset, ScoreTable, BASELINE, STRICT_THRESHOLD};
use crate::stats::{dedupe_cohort, observational_table, write_cohort_csv, CohortRow, DedupeReport, StatsError};
use crate::synth::{generate_tree, rasterize_with_stored_radii, roundtrip_report, GroundTruth, RoundtripError, SynthError, SynthSpec};

#[derive(Debug, Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Bte(#[from] BteError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Hint(#[from] HintError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Roundtrip(#[from] RoundtripError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Image(#[from] image::ImageError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Parameters of a run. Every field that can change an output byte is part
/// of the provenance hash; `workers` is not.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub gamma: f64,
    /// Masks are resampled to this square size before encoding.
    pub working_size: usize,
    pub link_tolerance: f64,
    pub min_polyline: usize,
    pub thick_threshold: f64,
    pub strict_threshold: f64,
    /// Configuration names of the perturbation grid, baseline included.
    pub configs: Vec<String>,
    pub previews: bool,
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let encode = EncodeParams::default();
        Self {
            seed: 0,
            gamma: DEFAULT_GAMMA,
            working_size: WORKING_SIZE,
            link_tolerance: encode.link_tolerance,
            min_polyline: encode.min_polyline,
            thick_threshold: FeatureParams::default().thick_threshold,
            strict_threshold: STRICT_THRESHOLD,
            configs: known_configs(),
            previews: false,
            workers: 0,
        }
    }
}

pub const CONFIG_KEYS: [&str; 10] = [
    "seed",
    "gamma",
    "working_size",
    "link_tolerance",
    "min_polyline",
    "thick_threshold",
    "strict_threshold",
    "configs",
    "previews",
    "workers",
];

/// Parses `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ConfigError { line: Some(i + 1), message };
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if !CONFIG_KEYS.contains(&k) {
            return Err(err(format!("unknown key {k:?}")));
        }
        if out.insert(k.to_owned(), v.to_owned()).is_some() {
            return Err(err(format!("duplicate key {k:?}")));
        }
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::new(format!("{key}: cannot parse {v:?}")))
}

impl RunConfig {
    /// Applies `key=value` pairs on top of the current values.
    pub fn apply_pairs(&mut self, pairs: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        for (k, v) in pairs {
            match k.as_str() {
                "seed" => self.seed = parse_value(k, v)?,
                "gamma" => self.gamma = parse_value(k, v)?,
                "working_size" => self.working_size = parse_value(k, v)?,
                "link_tolerance" => self.link_tolerance = parse_value(k, v)?,
                "min_polyline" => self.min_polyline = parse_value(k, v)?,
                "thick_threshold" => self.thick_threshold = parse_value(k, v)?,
                "strict_threshold" => self.strict_threshold = parse_value(k, v)?,
                "configs" => self.configs = v.split(',').map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect(),
                "previews" => self.previews = parse_value(k, v)?,
                "workers" => self.workers = parse_value(k, v)?,
                other => return Err(ConfigError::new(format!("unknown key {other:?}"))),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(ConfigError::new(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.working_size == 0 {
            return Err(ConfigError::new("working_size must be positive"));
        }
        if !(self.link_tolerance.is_finite() && self.link_tolerance >= 0.0) {
            return Err(ConfigError::new("link_tolerance must be non-negative"));
        }
        if !self.thick_threshold.is_finite() {
            return Err(ConfigError::new("thick_threshold must be finite"));
        }
        if !(0.0..=1.0).contains(&self.strict_threshold) {
            return Err(ConfigError::new("strict_threshold must lie in [0, 1]"));
        }
        if self.configs.is_empty() {
            return Err(ConfigError::new("configs is empty"));
        }
        for name in &self.configs {
            PerturbationConfig::from_name(name, self.gamma, self.seed).map_err(|e| ConfigError::new(e.to_string()))?;
        }
        Ok(())
    }

    /// The output-relevant settings as canonical strings.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("seed".into(), self.seed.to_string());
        m.insert("gamma".into(), format!("{:?}", self.gamma));
        m.insert("working_size".into(), self.working_size.to_string());
        m.insert("link_tolerance".into(), format!("{:?}", self.link_tolerance));
        m.insert("min_polyline".into(), self.min_polyline.to_string());
        m.insert("thick_threshold".into(), format!("{:?}", self.thick_threshold));
        m.insert("strict_threshold".into(), format!("{:?}", self.strict_threshold));
        m.insert("configs".into(), self.configs.join(","));
        m.insert("previews".into(), self.previews.to_string());
        m
    }

    pub fn provenance(&self) -> Provenance {
        Provenance::new(self.seed, &self.to_pairs())
    }

    pub fn encode_params(&self) -> EncodeParams {
        EncodeParams {
            min_polyline: self.min_polyline,
            link_tolerance: self.link_tolerance,
        }
    }

    pub fn feature_params(&self) -> FeatureParams {
        FeatureParams {
            thick_threshold: self.thick_threshold,
        }
    }
}

/// Maps `f` over `items` on the rayon pool, keeping input order.
pub fn run_batch<I: Sync, T: Send>(items: &[I], f: impl Fn(&I) -> T + Sync + Send) -> Vec<T> {
    items.par_iter().map(f).collect()
}

fn comment_block(prov: &Provenance, extra: &[String]) -> Vec<String> {
    let mut c = prov.comments();
    c.extend(extra.iter().cloned());
    c
}

/// Loads a mask and resamples it to the working size if needed.
pub fn load_working_mask(path: &Path, working_size: usize) -> Result<VesselMask, PipelineError> {
    let mask = load_mask(path)?;
    if mask.width() == working_size && mask.height() == working_size {
        return Ok(mask);
    }
    Ok(resample_to_working(&mask, working_size)?)
}

pub fn encode_start(id: &str, mask: &VesselMask, cfg: &RunConfig) -> Result<Encoding, PipelineError> {
    Ok(encode_mask(mask, &cfg.encode_params(), id)?)
}

pub fn bte_text(tree: &BezierTree, prov: &Provenance) -> String {
    to_bte_string(tree, &prov.comments())
}

pub const DIAGNOSTICS_HEADER: &str = "id,segments,polylines,discarded_polylines,fallback_fits,mean_rms,max_rms,skeleton_pixels,junctions";

pub fn diagnostics_line(id: &str, d: &EncodeDiagnostics) -> String {
    format!(
        "{id},{},{},{},{},{:.6},{:.6},{},{}",
        d.segments, d.polylines, d.discarded_polylines, d.fallback_fits, d.mean_rms, d.max_rms, d.skeleton_pixels, d.junctions
    )
}

pub fn diagnostics_csv(rows: &[(String, EncodeDiagnostics)], prov: &Provenance) -> String {
    let mut out = String::new();
    for c in prov.comments() {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "{DIAGNOSTICS_HEADER}");
    for (id, d) in rows {
        let _ = writeln!(out, "{}", diagnostics_line(id, d));
    }
    out
}

/// One rendered grid entry for a start.
#[derive(Debug, Clone, PartialEq)]
pub struct HintArtifact {
    pub config: String,
    pub hint: HintImage,
    /// Encoded BTEF bytes, provenance block included.
    pub btef: Vec<u8>,
    /// PNG preview bytes when previews are enabled.
    pub preview: Option<Vec<u8>>,
    /// The perturbed tree, as BTE text.
    pub bte: String,
}

impl HintArtifact {
    pub fn stem(&self, start: &str) -> String {
        format!("{start}_{}", self.config)
    }
}

/// Perturbs a start with every configured grid entry and renders each
/// result. The start's perturbation seed derives from the run seed and
/// `start` only.
pub fn hint_grid(start: &str, tree: &BezierTree, mask: &VesselMask, cfg: &RunConfig) -> Result<Vec<HintArtifact>, PipelineError> {
    let prov = cfg.provenance();
    let field = distance_transform(mask)?;
    let seed = item_seed(cfg.seed, start);
    let mut out = Vec::with_capacity(cfg.configs.len());
    for name in &cfg.configs {
        let config = PerturbationConfig::from_name(name, cfg.gamma, seed)?;
        let p = apply_with(&config, tree, &field, mask, &cfg.encode_params())?;
        let hint = render_hint(&p.tree, &p.field);
        let mut meta = prov.meta();
        meta.push(("start".into(), start.to_owned()));
        meta.push(("config".into(), name.clone()));
        let mut btef = Vec::new();
        write_btef(&mut btef, &hint, &meta)?;
        let preview = if cfg.previews {
            let mut png = Cursor::new(Vec::new());
            preview_image(&hint).write_to(&mut png, image::ImageFormat::Png)?;
            Some(png.into_inner())
        } else {
            None
        };
        let bte = to_bte_string(&p.tree, &[prov.comments(), vec![format!("config {name}")]].concat());
        out.push(HintArtifact {
            config: name.clone(),
            hint,
            btef,
            preview,
            bte,
        });
    }
    Ok(out)
}

/// Features of a tree against the mask it was encoded from. The branch
/// count is re-derived from the mask's skeleton.
pub fn feature_row(id: &str, tree: &BezierTree, mask: &VesselMask, cfg: &RunConfig) -> Result<FeatureRow, PipelineError> {
    let field = distance_transform(mask)?;
    let branches = junction_count(&skeletonize(mask));
    let (features, diag) = compute_features_with(tree, &field, mask, branches, &cfg.feature_params())?;
    if diag.excluded_segments > 0 {
        log::warn!("{id}: {} degenerate segments excluded", diag.excluded_segments);
    }
    Ok(FeatureRow {
        id: id.to_owned(),
        features,
        label: None,
    })
}

pub fn features_csv(rows: &[FeatureRow], prov: &Provenance) -> Result<String, PipelineError> {
    let mut buf = Vec::new();
    write_features_csv(&mut buf, rows, &prov.comments())?;
    Ok(String::from_utf8_lossy(&buf).into_owned())
}

/// `id,label` pairs; `#` comments allowed.
pub fn read_labels(text: &str) -> Result<BTreeMap<String, u8>, PipelineError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    let parse_err = |line: u64, message: String| PipelineError::Stats(StatsError::Parse { line, message });
    for rec in r.records() {
        let rec = rec.map_err(StatsError::from)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 2 {
            return Err(parse_err(line, "expected id,label".into()));
        }
        let label = match rec[1].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(line, format!("label must be 0 or 1, got {other:?}"))),
        };
        if out.insert(rec[0].trim().to_owned(), label).is_some() {
            return Err(parse_err(line, format!("duplicate id {:?}", &rec[0])));
        }
    }
    Ok(out)
}

/// Rendered outputs of the `score` step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub causal_csv: String,
    pub causal_text: String,
    /// The same table restricted to the strict subset.
    pub strict_csv: String,
    pub contrast_csv: String,
    pub strict_starts: usize,
}

/// Paired effects for every configuration in `table`, over all starts and
/// over the strict subset, with pixel-drop contrasts.
pub fn score_report(table: &ScoreTable, cfg: &RunConfig) -> Result<ScoreReport, PipelineError> {
    let prov = cfg.provenance();
    let requested: Vec<String> = table.configs().into_iter().filter(|c| *c != BASELINE).map(str::to_owned).collect();
    let subset = strict_subset(table, cfg.strict_threshold);
    let effects = |subset: Option<&std::collections::BTreeSet<String>>| {
        let mut m = BTreeMap::new();
        for c in &requested {
            match paired_delta_in(table, c, subset) {
                Ok(e) => {
                    m.insert(c.clone(), e);
                }
                Err(e) => log::warn!("{c}: {e}"),
            }
        }
        m
    };
    let all = effects(None);
    let strict = effects(Some(&subset.starts));
    let rows = causal_rows(&all, &requested);
    let strict_rows = causal_rows(&strict, &requested);
    let strict_comments = comment_block(
        &prov,
        &[format!(
            "strict subset: {} of {} starts (baseline prob < {}, fidelity pass)",
            subset.starts.len(),
            table.starts().len(),
            cfg.strict_threshold
        )],
    );
    Ok(ScoreReport {
        causal_csv: causal_table_csv(&rows, &prov.comments()),
        causal_text: causal_table_text(&rows, &prov.comments()),
        strict_csv: causal_table_csv(&strict_rows, &strict_comments),
        contrast_csv: contrast_csv(&contrast_rows(&all), &prov.comments()),
        strict_starts: subset.starts.len(),
    })
}

/// The 20-row observational table as CSV and aligned text.
pub fn obs_report(rows: &[FeatureRow], prov: &Provenance) -> Result<(String, String), PipelineError> {
    let table = observational_table(rows)?;
    Ok((observational_csv(&table, &prov.comments()), observational_text(&table, &prov.comments())))
}

pub fn dedupe_report(rows: &[CohortRow], prov: &Provenance) -> Result<(String, DedupeReport), PipelineError> {
    let (kept, report) = dedupe_cohort(rows);
    let extra = [
        format!("input rows {}", report.input_rows),
        format!("removed train rows sharing a test subject {}", report.anti_leakage),
        format!("removed duplicate val rows {}", report.val_collapsed),
        format!("removed duplicate test rows {}", report.test_collapsed),
        format!("output rows {}", report.output_rows),
    ];
    let mut buf = Vec::new();
    write_cohort_csv(&mut buf, &kept, &comment_block(prov, &extra))?;
    Ok((String::from_utf8_lossy(&buf).into_owned(), report))
}

pub fn ground_truth_csv(truth: &GroundTruth, prov: &Provenance) -> String {
    let mut out = String::new();
    let extra = [
        format!("branch_count {}", truth.branch_count),
        format!("total_arc_length {:.6}", truth.total_arc_length),
        format!("mean_tortuosity {:.6}", truth.mean_tortuosity),
        format!("crowded_segments {}", truth.crowded_segments),
    ];
    for c in comment_block(prov, &extra) {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "id,level,arc_length,chord,tortuosity,mean_curvature,radius");
    for s in &truth.segments {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.id, s.level, s.arc_length, s.chord, s.tortuosity, s.mean_curvature, s.radius
        );
    }
    out
}

/// Synthetic start: PNG mask bytes, BTE text and ground-truth CSV.
pub struct SynthArtifacts {
    pub mask: VesselMask,
    pub mask_png: Vec<u8>,
    pub bte: String,
    pub truth_csv: String,
}

pub fn synth_start(spec: &SynthSpec, prov: &Provenance) -> Result<SynthArtifacts, PipelineError> {
    let (tree, truth) = generate_tree(spec)?;
    let mask = rasterize_with_stored_radii(&tree, spec.canvas, spec.canvas)?;
    let mut png = Cursor::new(Vec::new());
    mask.to_gray_image().write_to(&mut png, image::ImageFormat::Png)?;
    Ok(SynthArtifacts {
        mask_png: png.into_inner(),
        bte: bte_text(&tree, prov),
        truth_csv: ground_truth_csv(&truth, prov),
        mask,
    })
}

/// Per-feature relative errors of a synthetic roundtrip, as CSV.
pub fn roundtrip_csv(spec: &SynthSpec, prov: &Provenance) -> Result<String, PipelineError> {
    let report = roundtrip_report(spec)?;
    let mut out = String::new();
    let extra = [
        format!("recovered_segments {}", report.recovered_segments),
        format!("recovered_branches {}", report.recovered_branches),
    ];
    for c in comment_block(prov, &extra) {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "feature,truth,recovered,relative_error");
    for c in &report.comparisons {
        let _ = writeln!(out, "{},{:.6},{:.6},{:.6}", c.name, c.truth, c.recovered, c.relative_error());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let pairs = parse_config("# run\nseed = 7\n\ngamma=0.2\n").unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_pairs(&pairs).unwrap();
        assert_eq!((cfg.seed, cfg.gamma), (7, 0.2));
        let err = parse_config("seed=1\nbogus=2\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(parse_config("seed 1").is_err());
        assert!(parse_config("seed=1\nseed=2").is_err());
    }

    #[test]
    fn workers_do_not_change_the_hash() {
        let a = RunConfig::default();
        let b = RunConfig { workers: 8, ..a.clone() };
        assert_eq!(a.provenance(), b.provenance());
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_ne!(a.provenance().config_hash, c.provenance().config_hash);
    }

    #[test]
    fn unknown_config_name_is_rejected() {
        let cfg = RunConfig {
            configs: vec!["twist_9x".into()],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn batch_keeps_order() {
        let items: Vec<u32> = (0..100).collect();
        assert_eq!(run_batch(&items, |x| x * 2), (0..100).map(|x| x * 2).collect::<Vec<_>>());
    }
}
