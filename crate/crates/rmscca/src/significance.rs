//! Permutation significance for canonical pairs.
//!
//! Breaking the row alignment of y destroys any real cross-structure, so the
//! mean held-out correlations of refits on permuted data trace the null
//! distribution. A pair is significant while its observed mean test
//! correlation stays above the per-pair permutation quantile, and the count
//! of significant pairs is the longest such prefix.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::DataPair;
use crate::error::{Error, Result};
use crate::mscca::{fit_pairs_partial, CvPlan, FitSettings};

/// Permutation cutoffs and the resulting count of significant pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSummary {
    pub n_perm: usize,
    pub q_level: f64,
    /// Mean test correlations per permutation (rows) and pair (columns).
    pub perm_cc: Array2<f64>,
    /// q_level empirical quantile of each perm_cc column.
    pub cutoffs: Vec<f64>,
    /// Longest prefix of pairs whose observed mean test correlation exceeds
    /// its cutoff.
    pub j_star: usize,
}

pub(crate) fn permutation_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Reorder the rows of y by a uniform random permutation, deterministically
/// for a given seed.
pub fn permute_rows(y: &Array2<f64>, seed: u64) -> Array2<f64> {
    let perm = permutation_indices(y.nrows(), seed);
    let mut out = Array2::zeros(y.raw_dim());
    for (i, &r) in perm.iter().enumerate() {
        out.row_mut(i).assign(&y.row(r));
    }
    out
}

/// Mean test correlations of a full refit on (x, y permuted by `perm`),
/// padded with -inf for pairs past a pair-level dead end.
pub(crate) fn permuted_cc_row(
    data: &DataPair,
    perm: &[usize],
    pq_star: usize,
    plan: &CvPlan,
    settings: &FitSettings,
) -> Result<Vec<f64>> {
    let permuted = data.with_permuted_y(perm);
    let (pairs, _failure) = fit_pairs_partial(&permuted, pq_star, plan, settings)?;
    let mut row: Vec<f64> = pairs.iter().map(|p| p.cc_test_mean).collect();
    row.resize(pq_star, f64::NEG_INFINITY);
    Ok(row)
}

/// Null distribution of mean test correlations: one full pipeline run per
/// permutation of the y rows, permutation r seeded by master_seed + r so runs
/// can parallelize yet stay reproducible.
pub fn permutation_distribution(
    data: &DataPair,
    pq_star: usize,
    plan: &CvPlan,
    settings: &FitSettings,
    n_perm: usize,
    master_seed: u64,
) -> Result<Array2<f64>> {
    if n_perm == 0 {
        return Err(Error::InvalidInput("n_perm must be at least 1".into()));
    }
    let rows: Vec<Vec<f64>> = (0..n_perm)
        .into_par_iter()
        .map(|r| {
            let perm = permutation_indices(data.n(), master_seed.wrapping_add(r as u64));
            permuted_cc_row(data, &perm, pq_star, plan, settings)
        })
        .collect::<Result<_>>()?;

    let mut out = Array2::zeros((n_perm, pq_star));
    for (r, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[r, j]] = v;
        }
    }
    Ok(out)
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" rule: h = (n - 1) q, interpolate between floor(h) and
/// floor(h) + 1).
pub fn quantile_type7(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level {q} outside [0, 1]");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let gamma = h - lo as f64;
    if gamma == 0.0 || lo + 1 >= sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + gamma * (sorted[lo + 1] - sorted[lo])
    }
}

/// Per-pair cutoffs and the prefix count j*: the largest j such that every
/// pair up to j beats its cutoff; the first failure stops the scan even if a
/// later pair would exceed its own cutoff.
pub fn count_significant(
    observed_cc_test: &[f64],
    perm_cc: &Array2<f64>,
    q_level: f64,
) -> Result<PermutationSummary> {
    if observed_cc_test.len() != perm_cc.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "observed has {} pairs but the permutation matrix has {} columns",
            observed_cc_test.len(),
            perm_cc.ncols()
        )));
    }
    if !(q_level > 0.0 && q_level < 1.0) {
        return Err(Error::InvalidInput(format!("q_level={q_level} outside (0, 1)")));
    }
    if perm_cc.nrows() == 0 {
        return Err(Error::InvalidInput("permutation matrix has no rows".into()));
    }

    let cutoffs: Vec<f64> = perm_cc
        .columns()
        .into_iter()
        .map(|col| quantile_type7(col.as_standard_layout().as_slice().unwrap(), q_level))
        .collect();

    let mut j_star = 0;
    for (obs, cut) in observed_cc_test.iter().zip(cutoffs.iter()) {
        if obs > cut {
            j_star += 1;
        } else {
            break;
        }
    }

    Ok(PermutationSummary {
        n_perm: perm_cc.nrows(),
        q_level,
        perm_cc: perm_cc.clone(),
        cutoffs,
        j_star,
    })
}
