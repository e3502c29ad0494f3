use bte_core::stats::{
    dedupe_cohort, logistic_or, paired_deltas, spearman, t_quantile, CohortRow, ScoreRecord, ScoreTable, Split,
};
use proptest::prelude::*;

/// Probabilities on a 2^-16 grid, so offsets on the same grid add exactly.
fn dyadic(max: u32) -> impl Strategy<Value = f64> {
    (0..=max).prop_map(|k| f64::from(k) / 65536.0)
}

fn record(start: &str, config: &str, prob: f64) -> ScoreRecord {
    ScoreRecord {
        start_id: start.to_owned(),
        config: config.to_owned(),
        prob,
        mean_intensity: None,
        std_intensity: None,
        rg_ratio: None,
    }
}

proptest! {
    #[test]
    fn per_start_offsets_cancel_in_the_deltas(
        starts in prop::collection::vec((dyadic(32768), dyadic(32768), dyadic(32768)), 2..40),
    ) {
        let mut plain = Vec::new();
        let mut biased = Vec::new();
        for (i, &(base, pert, offset)) in starts.iter().enumerate() {
            let id = format!("s{i}");
            plain.push(record(&id, "baseline", base));
            plain.push(record(&id, "tortuosity_4x", pert));
            biased.push(record(&id, "baseline", base + offset));
            biased.push(record(&id, "tortuosity_4x", pert + offset));
        }
        let a = paired_deltas(&ScoreTable::new(plain).unwrap(), "tortuosity_4x", None).0;
        let b = paired_deltas(&ScoreTable::new(biased).unwrap(), "tortuosity_4x", None).0;
        prop_assert_eq!(a.len(), b.len());
        for ((ia, da), (ib, db)) in a.iter().zip(&b) {
            prop_assert_eq!(ia, ib);
            prop_assert_eq!(da.to_bits(), db.to_bits());
        }
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        pairs in prop::collection::vec((-50i32..50, -50i32..50), 5..60),
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        let base = spearman(&x, &y);
        prop_assume!(base.is_ok());
        let (rho, p) = base.unwrap();
        let tx: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let ty: Vec<f64> = y.iter().map(|v| (v / 10.0).exp()).collect();
        let (rho2, p2) = spearman(&tx, &ty).unwrap();
        prop_assert_eq!(rho.to_bits(), rho2.to_bits());
        prop_assert_eq!(p.to_bits(), p2.to_bits());
    }

    #[test]
    fn odds_ratio_per_sd_ignores_affine_rescaling(
        rows in prop::collection::vec((-3.0..3.0f64, 0.0..1.0f64), 40..120),
        scale in 0.01..100.0f64,
        shift in -1000.0..1000.0f64,
    ) {
        // Labels drawn from a logistic model in the feature, so neither class is empty
        // in practice and separation is unlikely.
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let label: Vec<u8> = rows.iter().map(|r| u8::from(r.1 < 1.0 / (1.0 + (-r.0).exp()))).collect();
        let base = logistic_or(&x, &label);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let moved: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let other = logistic_or(&moved, &label).unwrap();
        prop_assert!((base.or - other.or).abs() <= 1e-6 * base.or, "{} vs {}", base.or, other.or);
    }

    #[test]
    fn unique_subjects_are_never_removed(
        splits in prop::collection::vec((0u8..3, 0u8..2), 1..80),
    ) {
        let rows: Vec<CohortRow> = splits
            .iter()
            .enumerate()
            .map(|(i, &(s, label))| CohortRow {
                image_id: format!("img{i}"),
                base_id: format!("subject{i}"),
                split: [Split::Train, Split::Val, Split::Test][usize::from(s)],
                label,
            })
            .collect();
        let (kept, report) = dedupe_cohort(&rows);
        prop_assert_eq!(kept, rows);
        prop_assert_eq!(report.removed(), 0);
    }
}

#[test]
fn t_quantile_at_df_29() {
    assert_eq!(format!("{:.3}", t_quantile(0.975, 29.0)), "2.045");
}

#[test]
fn t_quantiles_match_high_precision_reference() {
    let text = include_str!("data/t_quantiles.csv");
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        let (df, p, want) = (v[0], v[1], v[2]);
        let got = t_quantile(p, df);
        assert!((got - want).abs() <= 1e-8, "df {df} p {p}: {got} vs {want}");
        rows += 1;
    }
    assert_eq!(rows, 600);
}
