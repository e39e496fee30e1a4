//! One sparse canonical pair from a K matrix.
//!
//! The search alternates power-iteration updates of the left and right
//! singular vectors with soft thresholding, so small coefficients collapse to
//! exact zero while the surviving support keeps unit norm.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::covariance::{midranks, DataPair, EstimatorMode, KMatrix};
use crate::error::{Error, Result};

/// Penalties and stopping rule for one thresholded power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsePairConfig {
    /// L1 penalty on the left singular vector, in `[0, 2]`.
    pub lambda_u: f64,
    /// L1 penalty on the right singular vector, in `[0, 2]`.
    pub lambda_v: f64,
    /// Convergence threshold on the max infinity-norm change of (u, v).
    pub tol: f64,
    /// Iteration cap; hitting it returns the current pair flagged unconverged.
    pub max_iter: usize,
}

impl SparsePairConfig {
    pub fn new(lambda_u: f64, lambda_v: f64) -> Self {
        Self { lambda_u, lambda_v, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, l) in [("lambda_u", self.lambda_u), ("lambda_v", self.lambda_v)] {
            if !(0.0..=2.0).contains(&l) {
                return Err(Error::InvalidInput(format!("{name}={l} outside [0, 2]")));
            }
        }
        if !self.tol.is_finite() || self.tol <= 0.0 || self.tol >= 1.0 {
            return Err(Error::InvalidInput(format!("tol={} outside (0, 1)", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SparsePairConfig {
    fn default() -> Self {
        Self { lambda_u: 0.0, lambda_v: 0.0, tol: 1e-6, max_iter: 1000 }
    }
}

/// One fitted canonical pair.
///
/// `u`, `v` are the unit-norm sparse singular vectors; `alpha`, `beta` the
/// canonical vectors recovered through the diagonal scaling (same supports).
/// `cc` is u' K v on the data the pair was fitted on; `cc_test_mean` the mean
/// held-out correlation from the cross-validated penalty search. The sign is
/// fixed so the largest-magnitude entry of `u` is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub cc: f64,
    pub cc_test_mean: f64,
    pub lambda_u_star: f64,
    pub lambda_v_star: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl CanonicalPair {
    pub fn support_alpha(&self) -> Vec<usize> {
        support(&self.alpha)
    }

    pub fn support_beta(&self) -> Vec<usize> {
        support(&self.beta)
    }
}

pub(crate) fn support(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, &x)| x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Shrink every entry toward zero by lambda/2, zeroing whatever falls below:
/// out_j = (|w_j| - lambda/2)_+ * sign(w_j).
pub fn soft_threshold(w: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = w.to_vec();
    threshold_in_place(&mut out, lambda);
    out
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

fn max_abs_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (&x, &y)| acc.max((x - y).abs()))
}

fn normalize_in_place(v: &mut [f64], cfg: &SparsePairConfig) -> Result<()> {
    let norm = l2_norm(v);
    if !norm.is_finite() || norm <= 0.0 {
        return Err(Error::DegeneratePair { lambda_u: cfg.lambda_u, lambda_v: cfg.lambda_v });
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(())
}

fn threshold_in_place(v: &mut [f64], lambda: f64) {
    let half = lambda / 2.0;
    for x in v.iter_mut() {
        let shrunk = x.abs() - half;
        *x = if shrunk > 0.0 { shrunk * x.signum() } else { 0.0 };
    }
}

/// Find the dominant sparse singular pair of `k` by alternating
/// multiply / normalize / soft-threshold / normalize updates.
///
/// Without an explicit `init`, the left and right vectors start at the row
/// and column means of `k`. Returns the pair with `cc = u' k v`; `alpha` and
/// `beta` stay empty until [`canonical_vectors`] fills them.
pub fn sparse_singular_pair(
    k: &KMatrix,
    cfg: &SparsePairConfig,
    init: Option<(&[f64], &[f64])>,
) -> Result<CanonicalPair> {
    cfg.validate()?;
    let m = &k.k;
    let (p, q) = (m.nrows(), m.ncols());

    let (u0, v0) = match init {
        Some((u, v)) => {
            if u.len() != p || v.len() != q {
                return Err(Error::DimensionMismatch(format!(
                    "init lengths ({}, {}) do not match k which is {p} x {q}",
                    u.len(),
                    v.len()
                )));
            }
            (u.to_vec(), v.to_vec())
        }
        None => {
            let u = m.rows().into_iter().map(|r| r.sum() / q as f64).collect::<Vec<_>>();
            let v = m.columns().into_iter().map(|c| c.sum() / p as f64).collect::<Vec<_>>();
            (u, v)
        }
    };
    if l2_norm(&u0) == 0.0 || l2_norm(&v0) == 0.0 {
        return Err(Error::InvalidInput("initial singular vector is zero".into()));
    }

    let mut u = u0;
    let mut v = v0;
    normalize_in_place(&mut u, cfg)?;
    normalize_in_place(&mut v, cfg)?;
    let mut converged = false;
    let mut iterations = 0;

    // the transpose is materialized once so both matvecs run over
    // contiguous rows
    let mt = m.t().as_standard_layout().to_owned();
    let mut u_new = vec![0.0; p];
    let mut v_new = vec![0.0; q];

    for _ in 0..cfg.max_iter {
        iterations += 1;
        mat_vec(m, &v, &mut u_new);
        normalize_in_place(&mut u_new, cfg)?;
        threshold_in_place(&mut u_new, cfg.lambda_u);
        normalize_in_place(&mut u_new, cfg)?;

        mat_vec(&mt, &u_new, &mut v_new);
        normalize_in_place(&mut v_new, cfg)?;
        threshold_in_place(&mut v_new, cfg.lambda_v);
        normalize_in_place(&mut v_new, cfg)?;

        let delta = max_abs_change(&u_new, &u).max(max_abs_change(&v_new, &v));
        std::mem::swap(&mut u, &mut u_new);
        std::mem::swap(&mut v, &mut v_new);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    let cc = bilinear(m, &u, &v);
    let (u, v) = fix_sign(u, v);
    Ok(CanonicalPair {
        u,
        v,
        alpha: Vec::new(),
        beta: Vec::new(),
        cc,
        cc_test_mean: f64::NAN,
        lambda_u_star: cfg.lambda_u,
        lambda_v_star: cfg.lambda_v,
        converged,
        iterations,
    })
}

fn mat_vec(m: &Array2<f64>, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.ncols(), x.len());
    debug_assert_eq!(m.nrows(), out.len());
    for (slot, row) in out.iter_mut().zip(m.rows()) {
        *slot = row.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum();
    }
}

pub(crate) fn bilinear(m: &Array2<f64>, u: &[f64], v: &[f64]) -> f64 {
    let mut kv = vec![0.0; m.nrows()];
    mat_vec(m, v, &mut kv);
    kv.iter().zip(u.iter()).map(|(&a, &b)| a * b).sum()
}

/// Flip (u, v) jointly so the largest-magnitude entry of u is positive;
/// joint flipping keeps u' K v unchanged.
fn fix_sign(mut u: Vec<f64>, mut v: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut lead = 0;
    for (i, &x) in u.iter().enumerate() {
        if x.abs() > u[lead].abs() {
            lead = i;
        }
    }
    if u[lead] < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
        v.iter_mut().for_each(|x| *x = -*x);
    }
    (u, v)
}

/// Recover the canonical vectors from the singular vectors by the diagonal
/// scaling: alpha_j = u_j / sd(x_j), beta_j = v_j / sd(y_j). Zero patterns
/// carry over unchanged.
pub fn canonical_vectors(pair: &CanonicalPair, k: &KMatrix) -> Result<CanonicalPair> {
    if pair.u.len() != k.p() || pair.v.len() != k.q() {
        return Err(Error::DimensionMismatch(format!(
            "pair has lengths ({}, {}) but k is {} x {}",
            pair.u.len(),
            pair.v.len(),
            k.p(),
            k.q()
        )));
    }
    let mut out = pair.clone();
    out.alpha = pair.u.iter().zip(k.dxx_inv_sqrt.iter()).map(|(&u, &d)| u * d).collect();
    out.beta = pair.v.iter().zip(k.dyy_inv_sqrt.iter()).map(|(&v, &d)| v * d).collect();
    Ok(out)
}

/// Correlation between the projections x * alpha and y * beta, Pearson or
/// rank-based per `mode`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedCorrelation {
    pub value: f64,
    /// True when a projection had zero variance; the value is 0 by convention.
    pub degenerate: bool,
}

pub fn projected_correlation(
    data: &DataPair,
    alpha: &[f64],
    beta: &[f64],
    mode: EstimatorMode,
) -> Result<ProjectedCorrelation> {
    if alpha.len() != data.p() || beta.len() != data.q() {
        return Err(Error::DimensionMismatch(format!(
            "alpha/beta lengths ({}, {}) do not match data which is {} x ({}, {})",
            alpha.len(),
            beta.len(),
            data.n(),
            data.p(),
            data.q()
        )));
    }
    let xa = data.x().dot(&Array1::from_vec(alpha.to_vec()));
    let yb = data.y().dot(&Array1::from_vec(beta.to_vec()));
    let (a, b) = match mode {
        EstimatorMode::Pearson => (xa.to_vec(), yb.to_vec()),
        EstimatorMode::Spearman => (midranks(xa.as_slice().unwrap()), midranks(yb.as_slice().unwrap())),
    };
    Ok(pearson(&a, &b))
}

fn pearson(a: &[f64], b: &[f64]) -> ProjectedCorrelation {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return ProjectedCorrelation { value: 0.0, degenerate: true };
    }
    ProjectedCorrelation { value: sab / (saa * sbb).sqrt(), degenerate: false }
}
