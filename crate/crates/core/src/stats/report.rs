//! Rendered reports: the causal table, contrast ratios and the
//! observational table, each as CSV and as aligned text.

use std::collections::BTreeMap;

use super::observational::{ObservationalRow, OddsRatio};
use super::scores::{ratio_of, PairedEffect, Ratio, BASELINE};

/// Row order of the causal table.
pub const TABLE_ORDER: [&str; 13] = [
    "tortuosity_4x",
    "tortuosity_2x",
    "tortuosity_1x",
    "arc_drop_30",
    "arc_drop_20",
    "arc_drop_10",
    "radius_x0.55",
    "radius_x0.70",
    "radius_x0.85",
    "pixdrop_30",
    "pixdrop_20",
    "pixdrop_10",
    "baseline",
];

pub const MISSING: &str = "—";

#[derive(Debug, Clone, PartialEq)]
pub enum CausalEntry {
    /// Zero by definition.
    Baseline,
    Effect(PairedEffect),
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalRow {
    pub config: String,
    pub entry: CausalEntry,
}

fn order_key(config: &str) -> (usize, String) {
    // Unknown names share the baseline's slot; the tiebreak puts them first.
    let pos = TABLE_ORDER.iter().position(|c| *c == config).unwrap_or(TABLE_ORDER.len() - 1);
    let tiebreak = if config == BASELINE { "\u{10FFFF}".to_owned() } else { config.to_owned() };
    (pos, tiebreak)
}

/// Rows for `requested` (plus the baseline, always present), in table order.
/// A requested configuration without an effect renders as missing.
pub fn causal_rows(effects: &BTreeMap<String, PairedEffect>, requested: &[String]) -> Vec<CausalRow> {
    let mut names: Vec<String> = requested.iter().filter(|c| c.as_str() != BASELINE).cloned().collect();
    names.sort_by_key(|c| order_key(c));
    names.dedup();
    let mut rows: Vec<CausalRow> = names
        .into_iter()
        .map(|c| CausalRow {
            entry: effects.get(&c).cloned().map_or(CausalEntry::Missing, CausalEntry::Effect),
            config: c,
        })
        .collect();
    rows.push(CausalRow {
        config: BASELINE.to_owned(),
        entry: CausalEntry::Baseline,
    });
    rows
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn causal_cells(row: &CausalRow) -> Vec<String> {
    match &row.entry {
        CausalEntry::Baseline => {
            let mut v = vec![row.config.clone(), MISSING.into(), f(0.0)];
            v.extend(std::iter::repeat_n(MISSING.to_owned(), 4));
            v
        }
        CausalEntry::Effect(e) => vec![
            row.config.clone(),
            e.n.to_string(),
            f(e.delta_mean),
            f(e.sem),
            f(e.ci_low),
            f(e.ci_high),
            format!("{:.3e}", e.p_value),
        ],
        CausalEntry::Missing => {
            let mut v = vec![row.config.clone()];
            v.extend(std::iter::repeat_n(MISSING.to_owned(), 6));
            v
        }
    }
}

pub const CAUSAL_HEADER: [&str; 7] = ["config", "n", "delta_mean", "sem", "ci_low", "ci_high", "p_value"];

fn csv_line(cells: &[String]) -> String {
    let escaped: Vec<String> = cells
        .iter()
        .map(|c| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        })
        .collect();
    escaped.join(",")
}

fn render_csv(header: &[&str], rows: &[Vec<String>], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

fn render_text(header: &[&str], rows: &[Vec<String>], comments: &[String]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = " ".repeat(w - c.chars().count());
                if i == 0 {
                    format!("{c}{pad}")
                } else {
                    format!("{pad}{c}")
                }
            })
            .collect();
        padded.join("  ").trim_end().to_owned() + "\n"
    };
    let mut out = String::new();
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str(&line(header.iter().map(|h| h.to_string()).collect()));
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.clone()));
    }
    out
}

pub fn causal_table_csv(rows: &[CausalRow], comments: &[String]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(causal_cells).collect();
    render_csv(&CAUSAL_HEADER, &cells, comments)
}

pub fn causal_table_text(rows: &[CausalRow], comments: &[String]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(causal_cells).collect();
    render_text(&CAUSAL_HEADER, &cells, comments)
}

/// Each geometric family against the pixel-drop control at the same dose
/// rank: `|Δ(config)| / |Δ(control)|`. Pairs with a missing side are left out.
pub fn contrast_rows(effects: &BTreeMap<String, PairedEffect>) -> Vec<(String, String, Ratio)> {
    const PAIRS: [(&str, &str); 9] = [
        ("tortuosity_4x", "pixdrop_30"),
        ("tortuosity_2x", "pixdrop_20"),
        ("tortuosity_1x", "pixdrop_10"),
        ("arc_drop_30", "pixdrop_30"),
        ("arc_drop_20", "pixdrop_20"),
        ("arc_drop_10", "pixdrop_10"),
        ("radius_x0.55", "pixdrop_30"),
        ("radius_x0.70", "pixdrop_20"),
        ("radius_x0.85", "pixdrop_10"),
    ];
    PAIRS
        .iter()
        .filter_map(|(a, b)| {
            let (ea, eb) = (effects.get(*a)?, effects.get(*b)?);
            Some((a.to_string(), b.to_string(), ratio_of(ea.delta_mean, eb.delta_mean)))
        })
        .collect()
}

pub fn contrast_csv(rows: &[(String, String, Ratio)], comments: &[String]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|(a, b, r)| vec![a.clone(), b.clone(), r.to_string()]).collect();
    render_csv(&["config", "control", "ratio"], &cells, comments)
}

fn or_cells(r: &Result<OddsRatio, String>) -> [String; 3] {
    match r {
        Ok(o) => [format!("{:.4}", o.or), format!("{:.4}", o.ci_low), format!("{:.4}", o.ci_high)],
        Err(_) => [MISSING.into(), MISSING.into(), MISSING.into()],
    }
}

pub const OBS_HEADER: [&str; 10] = [
    "feature",
    "n",
    "spearman_rho",
    "spearman_p",
    "or_per_sd",
    "or_per_sd_low",
    "or_per_sd_high",
    "q5_q1_or",
    "q5_q1_low",
    "q5_q1_high",
];

fn obs_cells(r: &ObservationalRow) -> Vec<String> {
    let mut v = vec![r.feature.to_owned(), r.n.to_string()];
    match &r.spearman {
        Ok((rho, p)) => v.extend([format!("{rho:.4}"), format!("{p:.3e}")]),
        Err(_) => v.extend([MISSING.to_owned(), MISSING.to_owned()]),
    }
    v.extend(or_cells(&r.or_per_sd));
    v.extend(or_cells(&r.q5_q1));
    v
}

pub fn observational_csv(rows: &[ObservationalRow], comments: &[String]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(obs_cells).collect();
    render_csv(&OBS_HEADER, &cells, comments)
}

pub fn observational_text(rows: &[ObservationalRow], comments: &[String]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(obs_cells).collect();
    render_text(&OBS_HEADER, &cells, comments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn effect(config: &str, d: f64) -> PairedEffect {
        PairedEffect {
            config: config.into(),
            n: 10,
            delta_mean: d,
            sem: 0.01,
            ci_low: d - 0.02,
            ci_high: d + 0.02,
            p_value: 0.01,
            skipped: 0,
        }
    }

    #[test]
    fn rows_follow_table_order_with_baseline_last() {
        let mut effects = BTreeMap::new();
        effects.insert("pixdrop_10".to_owned(), effect("pixdrop_10", -0.01));
        effects.insert("tortuosity_4x".to_owned(), effect("tortuosity_4x", 0.6));
        let requested: Vec<String> = effects.keys().cloned().collect();
        let rows = causal_rows(&effects, &requested);
        let names: Vec<&str> = rows.iter().map(|r| r.config.as_str()).collect();
        assert_eq!(names, ["tortuosity_4x", "pixdrop_10", "baseline"]);
        assert_eq!(rows[2].entry, CausalEntry::Baseline);
        let text = causal_table_csv(&rows, &[]);
        assert!(text.lines().nth(3).unwrap().starts_with("baseline,—,0.000000"));
    }

    #[test]
    fn full_grid_and_missing_rows() {
        let requested: Vec<String> = TABLE_ORDER.iter().map(|s| s.to_string()).collect();
        let rows = causal_rows(&BTreeMap::new(), &requested);
        assert_eq!(rows.len(), 13);
        assert_eq!(rows[0].entry, CausalEntry::Missing);
        let csv = causal_table_csv(&rows, &[]);
        assert!(csv.contains("tortuosity_4x,—,—,—,—,—,—"));
        let text = causal_table_text(&rows, &["seed=1".into()]);
        assert!(text.starts_with("# seed=1\nconfig"));
    }
}
