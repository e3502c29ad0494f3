//! Paired-effect statistics over plain arrays.

use bte_core::stats::scores::{ratio_of, start_delta, summarize, Ratio};
use bte_core::stats::t_quantile;

use crate::{guard, out_ptr, BteStatus, Failure};

/// Mean within-start difference with its SEM, 95% t interval and two-sided
/// p-value.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BtePairedEffect {
    pub n: usize,
    pub delta_mean: f64,
    pub sem: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
}

/// Per-start differences `prob_config[i] - prob_baseline[i]` over `n`
/// starts, summarized.
///
/// # Safety
/// Both arrays must be readable for `n` doubles; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_paired_effect(prob_config: *const f64, prob_baseline: *const f64, n: usize, out: *mut BtePairedEffect) -> BteStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if prob_config.is_null() || prob_baseline.is_null() {
            return Err(Failure::new(BteStatus::NullArgument, "probability array is NULL"));
        }
        // SAFETY: the caller guarantees `n` readable doubles in each.
        let (a, b) = (std::slice::from_raw_parts(prob_config, n), std::slice::from_raw_parts(prob_baseline, n));
        if a.iter().chain(b).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Failure::new(BteStatus::InvalidArgument, "probabilities must lie in [0, 1]"));
        }
        let deltas: Vec<f64> = a.iter().zip(b).map(|(&c, &base)| start_delta(c, base)).collect();
        let e = summarize("ffi", &deltas).map_err(|e| Failure::new(BteStatus::Stats, e.to_string()))?;
        *out = BtePairedEffect {
            n: e.n,
            delta_mean: e.delta_mean,
            sem: e.sem,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            p_value: e.p_value,
        };
        Ok(())
    })
}

/// Quantile of Student's t with `df` degrees of freedom.
///
/// # Safety
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_t_quantile(p: f64, df: f64, out: *mut f64) -> BteStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if !(p > 0.0 && p < 1.0 && df > 0.0) {
            return Err(Failure::new(BteStatus::InvalidArgument, "need 0 < p < 1 and df > 0"));
        }
        *out = t_quantile(p, df);
        Ok(())
    })
}

/// `|a| / |b|`. Fails with `BTE_STATUS_STATS` when `|b|` is too small for
/// the ratio to be meaningful.
///
/// # Safety
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bte_contrast_ratio(a: f64, b: f64, out: *mut f64) -> BteStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        match ratio_of(a, b) {
            Ratio::Value(v) => {
                *out = v;
                Ok(())
            }
            Ratio::NotAvailable => Err(Failure::new(BteStatus::Stats, "denominator effect is zero")),
        }
    })
}
