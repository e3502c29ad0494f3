//! Marginal associations between one feature and a binary label.

use super::dist::{t_two_sided_p, Z_975};
use super::StatsError;
use crate::features::{FeatureRow, FEATURE_NAMES};

pub const MAX_IRLS_ITERATIONS: usize = 50;
pub const IRLS_TOLERANCE: f64 = 1e-8;
/// A standardized slope beyond this means the classes are separable.
pub const SEPARATION_SLOPE: f64 = 30.0;
pub const HALDANE: f64 = 0.5;

/// Ranks from 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ and its two-sided p-value from `t = ρ√((n−2)/(1−ρ²))`.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, got: x.len() });
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y)).ok_or(StatsError::ConstantInput)?;
    let df = x.len() as f64 - 2.0;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        t_two_sided_p(rho * (df / (1.0 - rho * rho)).sqrt(), df)
    };
    Ok((rho, p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddsRatio {
    pub or: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn check_binary(feature: &[f64], label: &[u8], min_n: usize) -> Result<(), StatsError> {
    if feature.len() != label.len() {
        return Err(StatsError::LengthMismatch(feature.len(), label.len()));
    }
    if feature.len() < min_n {
        return Err(StatsError::TooFewObservations {
            needed: min_n,
            got: feature.len(),
        });
    }
    if label.iter().any(|&l| l > 1) {
        return Err(StatsError::NonBinaryLabel);
    }
    if label.iter().all(|&l| l == 0) || label.iter().all(|&l| l == 1) {
        return Err(StatsError::SingleClass);
    }
    Ok(())
}

/// Univariate logistic regression on the z-scored feature (sample SD), by
/// IRLS. Returns `exp(slope)` with its Wald 95% interval.
pub fn logistic_or(feature: &[f64], label: &[u8]) -> Result<OddsRatio, StatsError> {
    check_binary(feature, label, 10)?;
    let n = feature.len() as f64;
    let mean = feature.iter().sum::<f64>() / n;
    let sd = (feature.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd.is_nan() || sd <= 0.0 {
        return Err(StatsError::ConstantInput);
    }
    let z: Vec<f64> = feature.iter().map(|x| (x - mean) / sd).collect();
    let y: Vec<f64> = label.iter().map(|&l| f64::from(l)).collect();

    let (mut b0, mut b1) = (0.0, 0.0);
    for _ in 0..MAX_IRLS_ITERATIONS {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (zi, yi) in z.iter().zip(&y) {
            let p = 1.0 / (1.0 + (-(b0 + b1 * zi)).exp());
            let w = p * (1.0 - p);
            g0 += yi - p;
            g1 += (yi - p) * zi;
            h00 += w;
            h01 += w * zi;
            h11 += w * zi * zi;
        }
        let det = h00 * h11 - h01 * h01;
        if det.is_nan() || det <= 1e-300 {
            return Err(StatsError::Separation);
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        b0 += d0;
        b1 += d1;
        if b1.abs() > SEPARATION_SLOPE || !b1.is_finite() {
            return Err(StatsError::Separation);
        }
        if d0.abs().max(d1.abs()) < IRLS_TOLERANCE {
            // Observed information at the converged estimate.
            let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
            for zi in &z {
                let p = 1.0 / (1.0 + (-(b0 + b1 * zi)).exp());
                let w = p * (1.0 - p);
                h00 += w;
                h01 += w * zi;
                h11 += w * zi * zi;
            }
            let se = (h00 / (h00 * h11 - h01 * h01)).sqrt();
            return Ok(OddsRatio {
                or: b1.exp(),
                ci_low: (b1 - Z_975 * se).exp(),
                ci_high: (b1 + Z_975 * se).exp(),
            });
        }
    }
    Err(StatsError::NoConvergence)
}

/// Quintile index (0–4) of each observation by stable rank; tied values all
/// take the bin of the first of them.
pub fn quintile_bins(feature: &[f64]) -> Vec<usize> {
    let n = feature.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| feature[a].total_cmp(&feature[b]));
    let mut bins = vec![0; n];
    let mut first_bin = 0;
    for (rank, &i) in order.iter().enumerate() {
        let bin = rank * 5 / n;
        if rank == 0 || feature[i] != feature[order[rank - 1]] {
            first_bin = bin;
        }
        bins[i] = first_bin;
    }
    bins
}

/// Odds of the label in the top quintile over the bottom quintile, from the
/// 2×2 counts (0.5 added to every cell when any is zero), with a log-OR Wald
/// 95% interval.
pub fn quintile_or(feature: &[f64], label: &[u8]) -> Result<OddsRatio, StatsError> {
    check_binary(feature, label, 50)?;
    let bins = quintile_bins(feature);
    let mut cells = [[0.0f64; 2]; 5];
    for (&b, &l) in bins.iter().zip(label) {
        cells[b][usize::from(l)] += 1.0;
    }
    if let Some(q) = cells.iter().position(|c| c[0] + c[1] == 0.0) {
        return Err(StatsError::EmptyQuintile(q + 1));
    }
    Ok(two_by_two_or(cells[4][1], cells[4][0], cells[0][1], cells[0][0]))
}

/// `(d5/h5)/(d1/h1)` for positive/negative counts in the top and bottom bins.
pub fn two_by_two_or(d5: f64, h5: f64, d1: f64, h1: f64) -> OddsRatio {
    let (d5, h5, d1, h1) = if [d5, h5, d1, h1].contains(&0.0) {
        (d5 + HALDANE, h5 + HALDANE, d1 + HALDANE, h1 + HALDANE)
    } else {
        (d5, h5, d1, h1)
    };
    let log_or = (d5 / h5 / (d1 / h1)).ln();
    let se = (1.0 / d5 + 1.0 / h5 + 1.0 / d1 + 1.0 / h1).sqrt();
    OddsRatio {
        or: log_or.exp(),
        ci_low: (log_or - Z_975 * se).exp(),
        ci_high: (log_or + Z_975 * se).exp(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalRow {
    pub feature: &'static str,
    pub n: usize,
    pub spearman: Result<(f64, f64), String>,
    pub or_per_sd: Result<OddsRatio, String>,
    pub q5_q1: Result<OddsRatio, String>,
}

/// One row per feature over the labelled rows; per-statistic failures are
/// kept as messages so one degenerate feature does not sink the table.
pub fn observational_table(rows: &[FeatureRow]) -> Result<Vec<ObservationalRow>, StatsError> {
    let labelled: Vec<&FeatureRow> = rows.iter().filter(|r| r.label.is_some()).collect();
    if labelled.is_empty() {
        return Err(StatsError::TooFewObservations { needed: 3, got: 0 });
    }
    let label: Vec<u8> = labelled.iter().map(|r| r.label.unwrap_or(0)).collect();
    let y: Vec<f64> = label.iter().map(|&l| f64::from(l)).collect();
    Ok(FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let x: Vec<f64> = labelled.iter().map(|r| r.features.to_array()[i]).collect();
            ObservationalRow {
                feature: name,
                n: x.len(),
                spearman: spearman(&x, &y).map_err(|e| e.to_string()),
                or_per_sd: logistic_or(&x, &label).map_err(|e| e.to_string()),
                q5_q1: quintile_or(&x, &label).map_err(|e| e.to_string()),
            }
        })
        .collect())
}
