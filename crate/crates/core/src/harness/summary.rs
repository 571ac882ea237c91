//! Late-training statistics of a log.

use crate::error::{Error, Result};
use crate::harness::record::StepRecord;

pub const MIN_RECORDS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    /// Records in the window (the last quartile of non-diverged records).
    pub window: usize,
    pub median_lambda1: f64,
    /// Median `|λ₁| / sam_edge`. The `sam_edge` column equals `gd_edge` when
    /// `ρ = 0`, so for GD runs this is the ratio to `2/η`.
    pub median_ratio_sam: f64,
    pub median_ratio_gd: f64,
    pub median_align_iterate: f64,
    pub median_align_uphill: f64,
    pub final_loss: f64,
    pub diverged: bool,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|x| x.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

pub fn summarize(records: &[StepRecord]) -> Result<Summary> {
    if records.len() < MIN_RECORDS {
        return Err(Error::Log(format!(
            "need at least {MIN_RECORDS} records to summarize, got {}",
            records.len()
        )));
    }
    let healthy: Vec<&StepRecord> = records.iter().filter(|r| !r.flags.diverged).collect();
    let window = &healthy[healthy.len() * 3 / 4..];
    if window.is_empty() {
        return Err(Error::Log("no non-diverged records to summarize".into()));
    }
    let col = |f: &dyn Fn(&StepRecord) -> f64| -> Result<f64> {
        let values: Vec<f64> = window.iter().map(|r| f(r)).collect();
        median(&values).ok_or_else(|| Error::Log("NaN in summarized column".into()))
    };
    let lambda1 = |r: &StepRecord| r.lambda_mags.first().copied().unwrap_or(f64::NAN);
    Ok(Summary {
        window: window.len(),
        median_lambda1: col(&lambda1)?,
        median_ratio_sam: col(&|r| lambda1(r) / r.sam_edge)?,
        median_ratio_gd: col(&|r| lambda1(r) / r.gd_edge)?,
        median_align_iterate: col(&|r| r.align_iterate)?,
        median_align_uphill: col(&|r| r.align_uphill)?,
        final_loss: healthy.last().map_or(f64::NAN, |r| r.loss),
        diverged: records.iter().any(|r| r.flags.diverged),
    })
}
