//! Ingested classifier scores and the within-start paired effects.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;

use super::dist::{t_quantile, t_two_sided_p};
use super::StatsError;
use crate::perturb::{paper_grid, DEFAULT_GAMMA};

pub const BASELINE: &str = "baseline";
/// Baseline probability below which a start enters the strict subset.
pub const STRICT_THRESHOLD: f64 = 0.3;
/// Inclusive bounds on a usable baseline's mean intensity (0–255 scale).
pub const MEAN_INTENSITY_RANGE: (f64, f64) = (50.0, 170.0);
/// Minimum (exclusive) pixel standard deviation.
pub const MIN_STD_INTENSITY: f64 = 25.0;
/// Minimum (exclusive) red-to-green ratio.
pub const MIN_RG_RATIO: f64 = 1.3;
/// Denominators below this make a contrast ratio undefined.
pub const RATIO_GUARD: f64 = 1e-9;

pub const SCORES_HEADER: [&str; 6] = ["start_id", "config", "prob", "mean_intensity", "std_intensity", "rg_ratio"];

/// Names of the thirteen configurations, baseline first.
pub fn known_configs() -> Vec<String> {
    paper_grid(DEFAULT_GAMMA, 0).iter().map(|c| c.name()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub start_id: String,
    pub config: String,
    pub prob: f64,
    pub mean_intensity: Option<f64>,
    pub std_intensity: Option<f64>,
    pub rg_ratio: Option<f64>,
}

/// Records indexed by `(start_id, config)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    records: Vec<ScoreRecord>,
    index: BTreeMap<(String, String), usize>,
}

impl ScoreTable {
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self, StatsError> {
        let known: BTreeSet<String> = known_configs().into_iter().collect();
        let mut index = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.prob) {
                return Err(StatsError::InvalidRecord(format!("{}/{}: prob {} outside [0, 1]", r.start_id, r.config, r.prob)));
            }
            if !known.contains(&r.config) {
                return Err(StatsError::InvalidRecord(format!("{}: unknown config {:?}", r.start_id, r.config)));
            }
            if index.insert((r.start_id.clone(), r.config.clone()), i).is_some() {
                return Err(StatsError::InvalidRecord(format!("duplicate record {}/{}", r.start_id, r.config)));
            }
        }
        Ok(Self { records, index })
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn get(&self, start: &str, config: &str) -> Option<&ScoreRecord> {
        self.index.get(&(start.to_owned(), config.to_owned())).map(|&i| &self.records[i])
    }

    pub fn baseline(&self, start: &str) -> Option<&ScoreRecord> {
        self.get(start, BASELINE)
    }

    pub fn starts(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.start_id.as_str()).collect()
    }

    /// Configurations present, baseline excluded.
    pub fn configs(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.config.as_str()).filter(|c| *c != BASELINE).collect()
    }
}

fn parse_opt(field: &str) -> Result<Option<f64>, String> {
    let f = field.trim();
    if f.is_empty() {
        Ok(None)
    } else {
        f.parse().map(Some).map_err(|_| format!("not a number: {f:?}"))
    }
}

pub fn read_scores_csv<R: Read>(input: R) -> Result<ScoreTable, StatsError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if header != SCORES_HEADER {
        return Err(StatsError::Parse {
            line: 1,
            message: format!("expected header {}", SCORES_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| StatsError::Parse { line, message };
        let prob = rec[2].trim().parse::<f64>().map_err(|_| err(format!("prob is not a number: {:?}", &rec[2])))?;
        let record = ScoreRecord {
            start_id: rec[0].trim().to_owned(),
            config: rec[1].trim().to_owned(),
            prob,
            mean_intensity: parse_opt(&rec[3]).map_err(err)?,
            std_intensity: parse_opt(&rec[4]).map_err(err)?,
            rg_ratio: parse_opt(&rec[5]).map_err(err)?,
        };
        records.push(record);
    }
    ScoreTable::new(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedEffect {
    pub config: String,
    pub n: usize,
    pub delta_mean: f64,
    pub sem: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    /// Starts scored under `config` but lacking a baseline.
    pub skipped: usize,
}

/// `Δ_i = P(config, i) − P(baseline, i)`.
pub fn start_delta(prob_config: f64, prob_baseline: f64) -> f64 {
    prob_config - prob_baseline
}

/// The per-start differences for `config`, in start order, and the number
/// of starts skipped for lack of a baseline. `subset` restricts the starts.
pub fn paired_deltas(table: &ScoreTable, config: &str, subset: Option<&BTreeSet<String>>) -> (Vec<(String, f64)>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut recs: Vec<&ScoreRecord> = table.records().iter().filter(|r| r.config == config).collect();
    recs.sort_by(|a, b| a.start_id.cmp(&b.start_id));
    for r in recs {
        if subset.is_some_and(|s| !s.contains(&r.start_id)) {
            continue;
        }
        match table.baseline(&r.start_id) {
            Some(b) => out.push((r.start_id.clone(), start_delta(r.prob, b.prob))),
            None => skipped += 1,
        }
    }
    (out, skipped)
}

/// Mean, SEM (sample SD / √n), two-sided Student-t 95% interval and the
/// two-sided p-value of `mean = 0`.
pub fn summarize(config: &str, deltas: &[f64]) -> Result<PairedEffect, StatsError> {
    let n = deltas.len();
    if n < 2 {
        return Err(StatsError::TooFewStarts { config: config.to_owned(), n });
    }
    let nf = n as f64;
    let mean = deltas.iter().sum::<f64>() / nf;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sem = var.sqrt() / nf.sqrt();
    let (ci_low, ci_high) = t_interval(mean, sem, n);
    let p_value = if sem > 0.0 {
        t_two_sided_p(mean / sem, nf - 1.0)
    } else if mean == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(PairedEffect {
        config: config.to_owned(),
        n,
        delta_mean: mean,
        sem,
        ci_low,
        ci_high,
        p_value,
        skipped: 0,
    })
}

/// `mean ± t_{0.975, n−1} · sem`.
pub fn t_interval(mean: f64, sem: f64, n: usize) -> (f64, f64) {
    let half = t_quantile(0.975, n as f64 - 1.0) * sem;
    (mean - half, mean + half)
}

pub fn paired_delta(table: &ScoreTable, config: &str) -> Result<PairedEffect, StatsError> {
    paired_delta_in(table, config, None)
}

pub fn paired_delta_in(table: &ScoreTable, config: &str, subset: Option<&BTreeSet<String>>) -> Result<PairedEffect, StatsError> {
    let (deltas, skipped) = paired_deltas(table, config, subset);
    let values: Vec<f64> = deltas.iter().map(|(_, d)| *d).collect();
    let mut effect = summarize(config, &values)?;
    effect.skipped = skipped;
    Ok(effect)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityFailure {
    NearBlack,
    SaturatedWhite,
    Monochromatic,
    ColourDrift,
}

impl fmt::Display for FidelityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FidelityFailure::NearBlack => "near-black collapse",
            FidelityFailure::SaturatedWhite => "saturated bright-white collapse",
            FidelityFailure::Monochromatic => "monochromatic collapse",
            FidelityFailure::ColourDrift => "gray/blue drift",
        })
    }
}

/// Every failed condition, in check order; empty means the record passes.
pub fn fidelity_filter(record: &ScoreRecord) -> Result<Vec<FidelityFailure>, StatsError> {
    let missing = || StatsError::MissingStats(record.start_id.clone());
    let mean = record.mean_intensity.ok_or_else(missing)?;
    let std = record.std_intensity.ok_or_else(missing)?;
    let rg = record.rg_ratio.ok_or_else(missing)?;
    let mut fails = Vec::new();
    let (lo, hi) = MEAN_INTENSITY_RANGE;
    if mean < lo {
        fails.push(FidelityFailure::NearBlack);
    }
    if mean > hi {
        fails.push(FidelityFailure::SaturatedWhite);
    }
    if std <= MIN_STD_INTENSITY {
        fails.push(FidelityFailure::Monochromatic);
    }
    if rg <= MIN_RG_RATIO {
        fails.push(FidelityFailure::ColourDrift);
    }
    Ok(fails)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrictSubset {
    pub starts: BTreeSet<String>,
    pub with_baseline: usize,
    pub fidelity_pass: usize,
    pub missing_stats: usize,
}

/// Starts whose baseline passes the fidelity filter and scores below
/// `threshold`. Baselines without image statistics are excluded and counted.
pub fn strict_subset(table: &ScoreTable, threshold: f64) -> StrictSubset {
    let mut out = StrictSubset::default();
    for r in table.records().iter().filter(|r| r.config == BASELINE) {
        out.with_baseline += 1;
        match fidelity_filter(r) {
            Ok(f) if f.is_empty() => {
                out.fidelity_pass += 1;
                if r.prob < threshold {
                    out.starts.insert(r.start_id.clone());
                }
            }
            Ok(_) => {}
            Err(_) => out.missing_stats += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Value(f64),
    NotAvailable,
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Value(v) => write!(f, "{v:.3}"),
            Ratio::NotAvailable => f.write_str("n/a"),
        }
    }
}

/// `|Δ(a)| / |Δ(b)|`.
pub fn ratio_of(a: f64, b: f64) -> Ratio {
    if b.abs() < RATIO_GUARD {
        Ratio::NotAvailable
    } else {
        Ratio::Value(a.abs() / b.abs())
    }
}

pub fn contrast_ratio(effects: &BTreeMap<String, PairedEffect>, a: &str, b: &str) -> Result<Ratio, StatsError> {
    let get = |c: &str| effects.get(c).ok_or_else(|| StatsError::MissingConfig(c.to_owned()));
    Ok(ratio_of(get(a)?.delta_mean, get(b)?.delta_mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(start: &str, config: &str, prob: f64) -> ScoreRecord {
        ScoreRecord {
            start_id: start.into(),
            config: config.into(),
            prob,
            mean_intensity: Some(100.0),
            std_intensity: Some(30.0),
            rg_ratio: Some(1.5),
        }
    }

    #[test]
    fn hand_computed_delta() {
        let t = ScoreTable::new(vec![
            rec("a", "baseline", 0.1),
            rec("b", "baseline", 0.2),
            rec("a", "tortuosity_4x", 0.4),
            rec("b", "tortuosity_4x", 0.6),
        ])
        .unwrap();
        let e = paired_delta(&t, "tortuosity_4x").unwrap();
        assert_eq!(e.n, 2);
        assert!((e.delta_mean - 0.35).abs() < 1e-12);
        assert!((e.sem - 0.05).abs() < 1e-12);
        assert!(e.ci_low <= e.delta_mean && e.delta_mean <= e.ci_high);
    }

    #[test]
    fn identical_columns() {
        let t = ScoreTable::new(vec![
            rec("a", "baseline", 0.1),
            rec("b", "baseline", 0.2),
            rec("a", "arc_drop_10", 0.1),
            rec("b", "arc_drop_10", 0.2),
        ])
        .unwrap();
        let e = paired_delta(&t, "arc_drop_10").unwrap();
        assert_eq!((e.delta_mean, e.p_value), (0.0, 1.0));
    }

    #[test]
    fn missing_baseline_is_skipped_and_short_input_fails() {
        let t = ScoreTable::new(vec![rec("a", "baseline", 0.1), rec("a", "pixdrop_10", 0.2), rec("b", "pixdrop_10", 0.3)]).unwrap();
        let (d, skipped) = paired_deltas(&t, "pixdrop_10", None);
        assert_eq!((d.len(), skipped), (1, 1));
        assert!(matches!(paired_delta(&t, "pixdrop_10"), Err(StatsError::TooFewStarts { n: 1, .. })));
    }

    #[test]
    fn fidelity_reasons() {
        assert!(fidelity_filter(&rec("a", "baseline", 0.1)).unwrap().is_empty());
        let mut r = rec("a", "baseline", 0.1);
        r.mean_intensity = Some(40.0);
        assert_eq!(fidelity_filter(&r).unwrap(), vec![FidelityFailure::NearBlack]);
        assert_eq!(FidelityFailure::NearBlack.to_string(), "near-black collapse");
        let mut r = rec("a", "baseline", 0.1);
        r.rg_ratio = Some(1.2);
        assert_eq!(fidelity_filter(&r).unwrap(), vec![FidelityFailure::ColourDrift]);
        assert_eq!(FidelityFailure::ColourDrift.to_string(), "gray/blue drift");
        r.std_intensity = None;
        assert!(fidelity_filter(&r).is_err());
    }

    #[test]
    fn strict_subset_threshold() {
        let t = ScoreTable::new(vec![rec("a", "baseline", 0.064), rec("b", "baseline", 0.31)]).unwrap();
        let s = strict_subset(&t, STRICT_THRESHOLD);
        assert_eq!(s.starts.into_iter().collect::<Vec<_>>(), vec!["a".to_owned()]);
    }

    #[test]
    fn ratios() {
        assert_eq!(ratio_of(0.2, 0.2), Ratio::Value(1.0));
        assert_eq!(ratio_of(0.2, 0.0).to_string(), "n/a");
        let Ratio::Value(r) = ratio_of(0.625, -0.036) else { panic!() };
        assert!((r - 17.361).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_records() {
        assert!(ScoreTable::new(vec![rec("a", "swirl_3", 0.1)]).is_err());
        assert!(ScoreTable::new(vec![rec("a", "baseline", 1.1)]).is_err());
        assert!(ScoreTable::new(vec![rec("a", "baseline", 0.1), rec("a", "baseline", 0.2)]).is_err());
    }

    #[test]
    fn csv_with_line_numbers() {
        let text = "start_id,config,prob,mean_intensity,std_intensity,rg_ratio\n\
                    s1,baseline,0.1,100,30,1.5\n\
                    s1,tortuosity_4x,abc,,,\n";
        match read_scores_csv(text.as_bytes()) {
            Err(StatsError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let ok = "start_id,config,prob,mean_intensity,std_intensity,rg_ratio\ns1,baseline,0.1,,,\n";
        let t = read_scores_csv(ok.as_bytes()).unwrap();
        assert_eq!(t.baseline("s1").unwrap().mean_intensity, None);
    }
}
