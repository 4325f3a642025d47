use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Mode, TrialRecord};
use crate::algorithms::Scheme;
use crate::error::{Error, Result};

/// Per `(sweep point, scheme)` statistics. Power means are taken over the
/// trials where every scheme at that point was feasible, so all schemes are
/// averaged over the same channel draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: Mode,
    pub sweep_index: usize,
    pub sweep_label: String,
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub trials: usize,
    pub infeasible: usize,
    /// Trials entering the power means
    pub common_feasible: usize,
    pub mean_total: f64,
    pub se_total: f64,
    pub mean_ap_side: f64,
    pub se_ap_side: f64,
    pub mean_mu_side: f64,
    pub se_mu_side: f64,
    pub mean_active: f64,
    pub se_active: f64,
}

/// Mean and standard error of the mean; NaN for an empty sample.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Reduces records to one row per `(sweep point, scheme)`, in that order.
/// The result does not depend on the order of `records`.
pub fn aggregate(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    let first = records.first().ok_or(Error::NoRecords)?;
    if let Some(r) = records.iter().find(|r| r.mode != first.mode) {
        return Err(Error::MixedModes(first.mode.name().into(), r.mode.name().into()));
    }
    let mut by_point: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_point.entry(r.sweep_index).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (index, recs) in by_point {
        // a trial counts for the power means only if no scheme failed on it
        let mut failed: BTreeSet<usize> = BTreeSet::new();
        for r in &recs {
            if !r.feasible {
                failed.insert(r.trial_index);
            }
        }
        let mut by_scheme: BTreeMap<Scheme, Vec<&TrialRecord>> = BTreeMap::new();
        for r in &recs {
            by_scheme.entry(r.scheme).or_default().push(r);
        }
        for (scheme, mut rs) in by_scheme {
            rs.sort_by_key(|r| r.trial_index);
            let used: Vec<&&TrialRecord> = rs.iter().filter(|r| !failed.contains(&r.trial_index)).collect();
            let col = |f: fn(&TrialRecord) -> f64| mean_se(&used.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (mean_total, se_total) = col(|r| r.total);
            let (mean_ap_side, se_ap_side) = col(|r| r.ap_static + r.ap_transmit);
            let (mean_mu_side, se_mu_side) = col(|r| r.mu_transmit);
            let (mean_active, se_active) = col(|r| r.active_count as f64);
            rows.push(SummaryRow {
                mode: first.mode,
                sweep_index: index,
                sweep_label: rs[0].sweep_label.clone(),
                sweep_value: rs[0].sweep_value,
                scheme,
                trials: rs.len(),
                infeasible: rs.iter().filter(|r| !r.feasible).count(),
                common_feasible: used.len(),
                mean_total,
                se_total,
                mean_ap_side,
                se_ap_side,
                mean_mu_side,
                se_mu_side,
                mean_active,
                se_active,
            });
        }
    }
    Ok(rows)
}
