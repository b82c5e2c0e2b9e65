//! Grouped statistics over a results CSV: the numbers behind "restoration
//! quality versus distance / turbulence strength / stabilizer" summaries.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::eval::runner::{EvalRecord, RowStatus};
use crate::sim::format_km;

/// Axis to group rows by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    /// One group with everything.
    #[default]
    Overall,
    /// By path length `L_km`.
    Distance,
    /// By turbulence strength `cn2`.
    Cn2,
    /// By the `stabilizer` column.
    Stabilizer,
}

impl std::str::FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overall" => Ok(GroupBy::Overall),
            "distance" => Ok(GroupBy::Distance),
            "cn2" => Ok(GroupBy::Cn2),
            "stabilizer" => Ok(GroupBy::Stabilizer),
            _ => Err(Error::arg(format!(
                "unknown grouping {s:?} (expected overall, distance, cn2 or stabilizer)"
            ))),
        }
    }
}

/// Mean/spread of the scores inside one group. Only `ok` rows contribute.
/// Perfect matches (infinite PSNR) cannot enter a mean, so they are counted
/// separately and the PSNR statistics cover the finite rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStat {
    pub group: String,
    /// `ok` rows in the group.
    pub n: usize,
    /// Rows with infinite PSNR, excluded from `mean_psnr`/`sd_psnr`.
    pub inf_psnr: usize,
    pub mean_psnr: Option<f64>,
    /// Population standard deviation.
    pub sd_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub sd_ssim: Option<f64>,
}

/// Groups `records` along `by` and reduces each group. Groups appear for
/// every row (even all-failed ones, with `n = 0`) and come back in a fixed
/// order: numeric for distance and turbulence strength, lexicographic for
/// stabilizers.
pub fn aggregate(records: &[EvalRecord], by: GroupBy) -> Vec<GroupStat> {
    // BTreeMap over an order-preserving key: total_cmp bits for the numeric
    // axes, the label itself otherwise.
    let mut groups: BTreeMap<(u64, String), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        let key = match by {
            GroupBy::Overall => (0, "all".to_string()),
            GroupBy::Distance => (sort_bits(r.l_km), format!("L={}km", format_km(r.l_km))),
            GroupBy::Cn2 => (sort_bits(r.cn2), format!("cn2={:e}", r.cn2)),
            GroupBy::Stabilizer => (0, r.stabilizer.clone()),
        };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((_, group), rows)| reduce(group, &rows))
        .collect()
}

/// Monotone mapping from non-negative floats to u64 so `BTreeMap` sorts
/// groups numerically.
fn sort_bits(v: f64) -> u64 {
    debug_assert!(v >= 0.0, "group keys are physical magnitudes");
    v.to_bits()
}

fn reduce(group: String, rows: &[&EvalRecord]) -> GroupStat {
    let ok: Vec<&&EvalRecord> = rows.iter().filter(|r| r.status == RowStatus::Ok).collect();
    let psnr: Vec<f64> = ok
        .iter()
        .filter_map(|r| r.psnr_db)
        .filter(|p| p.is_finite())
        .collect();
    let inf_psnr = ok
        .iter()
        .filter(|r| r.psnr_db.is_some_and(|p| p.is_infinite()))
        .count();
    let ssim: Vec<f64> = ok.iter().filter_map(|r| r.ssim).collect();
    let (mean_psnr, sd_psnr) = mean_sd(&psnr);
    let (mean_ssim, sd_ssim) = mean_sd(&ssim);
    GroupStat {
        group,
        n: ok.len(),
        inf_psnr,
        mean_psnr,
        sd_psnr,
        mean_ssim,
        sd_ssim,
    }
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Plain-text table of grouped statistics with aligned columns, for the
/// report command and logs.
pub fn render_table(stats: &[GroupStat]) -> String {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    let width = stats
        .iter()
        .map(|s| s.group.len())
        .chain(["group".len()])
        .max()
        .unwrap_or(5);
    let mut out = format!(
        "{:<width$}  {:>5}  {:>9}  {:>9}  {:>8}  {:>8}  {:>8}\n",
        "group", "n", "mean_psnr", "sd_psnr", "inf_psnr", "mean_ssim", "sd_ssim"
    );
    for s in stats {
        out.push_str(&format!(
            "{:<width$}  {:>5}  {:>9}  {:>9}  {:>8}  {:>8}  {:>8}\n",
            s.group,
            s.n,
            fmt(s.mean_psnr),
            fmt(s.sd_psnr),
            s.inf_psnr,
            fmt(s.mean_ssim),
            fmt(s.sd_ssim),
        ));
    }
    out
}
