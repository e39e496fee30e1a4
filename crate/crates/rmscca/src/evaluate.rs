//! Recovery metrics for fitted pairs against the planted ground truth.
//!
//! All metrics look only at the significant pairs (the j* prefix). A
//! variable is "true" when its row (x side) or column (y side) of B is
//! nonzero; a pair "contains a complete group" when some group's full x and
//! y index sets both sit inside the pair's supports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mscca::FitResult;
use crate::scca::CanonicalPair;
use crate::significance::{quantile_type7, PermutationSummary};
use crate::simulate::GroundTruth;

/// Recovery scores for one fitted dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Number of significant canonical pairs (j*).
    pub nc_pair: usize,
    /// Nonzero coefficients at true positions over all nonzero coefficients,
    /// counted per pair.
    pub tpr: f64,
    /// Fraction of significant pairs containing a complete group.
    pub tp_of_cg: f64,
    /// True variables left at zero in every significant pair, over all true
    /// variables.
    pub fn_rate: f64,
    /// Complete-group flag per significant pair.
    pub per_pair_flags: Vec<bool>,
}

/// Does the pair's support cover some group entirely? Extra nonzero
/// coefficients outside the group do not disqualify. Returns the first
/// matching group index.
pub fn contains_complete_group(pair: &CanonicalPair, truth: &GroundTruth) -> (bool, Option<usize>) {
    let alpha_support: Vec<bool> = pair.alpha.iter().map(|&v| v != 0.0).collect();
    let beta_support: Vec<bool> = pair.beta.iter().map(|&v| v != 0.0).collect();
    for (g, (x_set, y_set)) in truth.groups.iter().enumerate() {
        let x_ok = x_set.iter().all(|&i| alpha_support.get(i).copied().unwrap_or(false));
        let y_ok = y_set.iter().all(|&j| beta_support.get(j).copied().unwrap_or(false));
        if x_ok && y_ok && !x_set.is_empty() && !y_set.is_empty() {
            return (true, Some(g));
        }
    }
    (false, None)
}

/// Score the significant prefix of a fit against the ground truth.
pub fn compute_metrics(
    fit: &FitResult,
    summary: &PermutationSummary,
    truth: &GroundTruth,
) -> Result<MetricsReport> {
    if summary.j_star > fit.pairs.len() {
        return Err(Error::InvalidInput(format!(
            "j_star={} exceeds the {} fitted pairs",
            summary.j_star,
            fit.pairs.len()
        )));
    }
    let significant = &fit.pairs[..summary.j_star];
    let true_x = truth.true_x();
    let true_y = truth.true_y();
    if !significant.is_empty() {
        let pair = &significant[0];
        if pair.alpha.len() != true_x.len() || pair.beta.len() != true_y.len() {
            return Err(Error::DimensionMismatch(format!(
                "fit has dimensions ({}, {}) but truth has ({}, {})",
                pair.alpha.len(),
                pair.beta.len(),
                true_x.len(),
                true_y.len()
            )));
        }
    }

    // group membership per variable, for the TPR denominator
    let mut x_in_group = vec![false; true_x.len()];
    let mut y_in_group = vec![false; true_y.len()];
    for (x_set, y_set) in &truth.groups {
        for &i in x_set {
            x_in_group[i] = true;
        }
        for &j in y_set {
            y_in_group[j] = true;
        }
    }

    let mut true_nonzero = 0usize;
    let mut spurious_nonzero = 0usize;
    let mut x_hit = vec![false; true_x.len()];
    let mut y_hit = vec![false; true_y.len()];
    let mut per_pair_flags = Vec::with_capacity(significant.len());

    for pair in significant {
        for (i, &a) in pair.alpha.iter().enumerate() {
            if a != 0.0 {
                x_hit[i] = true;
                if true_x[i] {
                    true_nonzero += 1;
                } else if !x_in_group[i] {
                    spurious_nonzero += 1;
                }
            }
        }
        for (j, &b) in pair.beta.iter().enumerate() {
            if b != 0.0 {
                y_hit[j] = true;
                if true_y[j] {
                    true_nonzero += 1;
                } else if !y_in_group[j] {
                    spurious_nonzero += 1;
                }
            }
        }
        per_pair_flags.push(contains_complete_group(pair, truth).0);
    }

    let tpr_denominator = true_nonzero + spurious_nonzero;
    let tpr = if tpr_denominator > 0 { true_nonzero as f64 / tpr_denominator as f64 } else { 0.0 };

    let total_true = true_x.iter().filter(|&&t| t).count() + true_y.iter().filter(|&&t| t).count();
    let missed = true_x
        .iter()
        .zip(x_hit.iter())
        .filter(|(&t, &hit)| t && !hit)
        .count()
        + true_y.iter().zip(y_hit.iter()).filter(|(&t, &hit)| t && !hit).count();
    let fn_rate = if total_true > 0 { missed as f64 / total_true as f64 } else { 0.0 };

    let nc_pair = summary.j_star;
    let tp_of_cg = if nc_pair > 0 {
        per_pair_flags.iter().filter(|&&f| f).count() as f64 / nc_pair as f64
    } else {
        0.0
    };

    Ok(MetricsReport { nc_pair, tpr, tp_of_cg, fn_rate, per_pair_flags })
}

/// First, second, and third quartile of one metric over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

fn quartiles(values: &[f64]) -> Quartiles {
    Quartiles {
        q1: quantile_type7(values, 0.25),
        median: quantile_type7(values, 0.5),
        q3: quantile_type7(values, 0.75),
    }
}

/// Aggregate over many simulated runs. `frac_nc_pair_ge1` is the fraction of
/// runs declaring at least one significant pair: the type I rate on null
/// batches and the power on signal batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub label: String,
    pub n_reports: usize,
    pub frac_nc_pair_ge1: f64,
    pub nc_pair: Quartiles,
    pub tpr: Quartiles,
    pub tp_of_cg: Quartiles,
    pub fn_rate: Quartiles,
}

pub fn batch_summary(reports: &[MetricsReport], mode_label: &str) -> Result<BatchSummary> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("batch summary needs at least one report".into()));
    }
    let collect = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let nc: Vec<f64> = collect(|r| r.nc_pair as f64);
    Ok(BatchSummary {
        label: mode_label.to_string(),
        n_reports: reports.len(),
        frac_nc_pair_ge1: reports.iter().filter(|r| r.nc_pair >= 1).count() as f64
            / reports.len() as f64,
        nc_pair: quartiles(&nc),
        tpr: quartiles(&collect(|r| r.tpr)),
        tp_of_cg: quartiles(&collect(|r| r.tp_of_cg)),
        fn_rate: quartiles(&collect(|r| r.fn_rate)),
    })
}
