//! On-disk JSON schemas for fit, permutation-test, and ground-truth files,
//! plus the reconstruction of in-memory values when they are read back.
//!
//! Sparse coefficient vectors are stored as (0-based index, value) lists.
//! Cells where a permutation run hit a pair-level dead end are stored as
//! null and mapped back to -inf in memory.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use rmscca::{
    CanonicalPair, CvPlan, EstimatorMode, FitResult, GroundTruth, PermutationSummary,
    SimulationSpec,
};

use crate::error::AppError;
use crate::matrix_io::write_atomic;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to re-run the command that produced an output file.
/// Deliberately excludes paths and thread counts: neither affects results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub mode: EstimatorMode,
    pub test_cor: Option<EstimatorMode>,
    pub standardize: bool,
    pub seed: u64,
    pub n_cv: usize,
    pub lambda_grid: Vec<f64>,
    pub fold_assignment: Vec<usize>,
    pub pq_star: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Provenance {
    pub fn plan(&self) -> CvPlan {
        CvPlan {
            n_cv: self.n_cv,
            fold_assignment: self.fold_assignment.clone(),
            lambda_grid: self.lambda_grid.clone(),
            seed: self.seed,
        }
    }

}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDocument {
    /// 1-based position of the pair in the fitted sequence.
    pub index: usize,
    pub lambda_u: f64,
    pub lambda_v: f64,
    pub cc: f64,
    pub cc_test_mean: f64,
    pub converged: bool,
    pub iterations: usize,
    pub alpha: Vec<(usize, f64)>,
    pub beta: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub p: usize,
    pub q: usize,
    pub pairs: Vec<PairDocument>,
}

impl FitDocument {
    pub fn from_fit(fit: &FitResult, provenance: Provenance, p: usize, q: usize) -> Self {
        let sparse = |dense: &[f64]| {
            dense
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect::<Vec<_>>()
        };
        let pairs = fit
            .pairs
            .iter()
            .enumerate()
            .map(|(i, pair)| PairDocument {
                index: i + 1,
                lambda_u: pair.lambda_u_star,
                lambda_v: pair.lambda_v_star,
                cc: pair.cc,
                cc_test_mean: pair.cc_test_mean,
                converged: pair.converged,
                iterations: pair.iterations,
                alpha: sparse(&pair.alpha),
                beta: sparse(&pair.beta),
            })
            .collect();
        Self { schema_version: SCHEMA_VERSION, provenance, p, q, pairs }
    }

    /// Rebuild the in-memory fit; only fields the evaluation path consumes
    /// (supports, correlations, significance inputs) are recoverable, with
    /// u, v left at the scaled coefficients' zero pattern.
    pub fn to_fit(&self) -> FitResult {
        let pairs = self
            .pairs
            .iter()
            .map(|doc| {
                let mut alpha = vec![0.0; self.p];
                for &(i, v) in &doc.alpha {
                    alpha[i] = v;
                }
                let mut beta = vec![0.0; self.q];
                for &(j, v) in &doc.beta {
                    beta[j] = v;
                }
                CanonicalPair {
                    u: alpha.clone(),
                    v: beta.clone(),
                    alpha,
                    beta,
                    cc: doc.cc,
                    cc_test_mean: doc.cc_test_mean,
                    lambda_u_star: doc.lambda_u,
                    lambda_v_star: doc.lambda_v,
                    converged: doc.converged,
                    iterations: doc.iterations,
                }
            })
            .collect::<Vec<_>>();
        FitResult {
            pq_star: pairs.len(),
            pairs,
            mode: self.provenance.mode,
            plan: self.provenance.plan(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermtestDocument {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub n_perm: usize,
    pub q_level: f64,
    pub master_seed: u64,
    pub observed_cc_test: Vec<f64>,
    pub cutoffs: Vec<f64>,
    pub j_star: usize,
    /// Row per permutation, column per pair; null marks a dead-end cell.
    pub perm_cc: Vec<Vec<Option<f64>>>,
}

impl PermtestDocument {
    pub fn from_summary(
        summary: &PermutationSummary,
        observed: &[f64],
        provenance: Provenance,
        master_seed: u64,
    ) -> Self {
        let perm_cc = summary
            .perm_cc
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .map(|&v| if v == f64::NEG_INFINITY { None } else { Some(v) })
                    .collect()
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            provenance,
            n_perm: summary.n_perm,
            q_level: summary.q_level,
            master_seed,
            observed_cc_test: observed.to_vec(),
            cutoffs: summary.cutoffs.clone(),
            j_star: summary.j_star,
            perm_cc,
        }
    }

    pub fn to_summary(&self) -> PermutationSummary {
        let pq = self.observed_cc_test.len();
        let mut perm = Array2::zeros((self.n_perm, pq));
        for (r, row) in self.perm_cc.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                perm[[r, j]] = v.unwrap_or(f64::NEG_INFINITY);
            }
        }
        PermutationSummary {
            n_perm: self.n_perm,
            q_level: self.q_level,
            perm_cc: perm,
            cutoffs: self.cutoffs.clone(),
            j_star: self.j_star,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub schema_version: u32,
    pub spec: SimulationSpec,
    /// (x index set, y index set) per group, 0-based.
    pub groups: Vec<(Vec<usize>, Vec<usize>)>,
    pub b_value: f64,
    pub rho: f64,
}

impl TruthDocument {
    pub fn from_truth(spec: &SimulationSpec, truth: &GroundTruth) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            spec: spec.clone(),
            groups: truth.groups.clone(),
            b_value: spec.b_value,
            rho: spec.rho,
        }
    }

    pub fn to_truth(&self) -> Result<GroundTruth, AppError> {
        GroundTruth::from_spec(&self.spec).map_err(AppError::from_load)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| AppError::input(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::input(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| AppError::input(format!("{}: invalid JSON: {e}", path.display())))?;
    if let Some(v) = value.get("schema_version").and_then(|v| v.as_u64()) {
        if v != SCHEMA_VERSION as u64 {
            return Err(AppError::input(format!(
                "{}: schema version {v} is not the supported {SCHEMA_VERSION}",
                path.display()
            )));
        }
    }
    serde_json::from_value(value)
        .map_err(|e| AppError::input(format!("{}: unexpected schema: {e}", path.display())))
}
