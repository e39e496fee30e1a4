//! Multiple canonical pairs: deflation of the K matrix plus cross-validated
//! selection of the (lambda_u, lambda_v) penalties for every pair.
//!
//! Pair i is fitted on K_i, then K_{i+1} = K_i - (u' K_i v) u v' removes the
//! captured rank-1 component so later pairs see only remaining structure.
//! Penalties are chosen per pair by maximizing the mean held-out correlation
//! over cross-validation folds.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{build_k, DataPair, EstimatorMode, KMatrix};
use crate::error::{Error, Result};
use crate::scca::{
    bilinear, canonical_vectors, projected_correlation, sparse_singular_pair, CanonicalPair,
    SparsePairConfig,
};

/// Cross-validation layout and penalty grid shared by every pair of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_cv: usize,
    /// Fold id (0..n_cv) per observation row.
    pub fold_assignment: Vec<usize>,
    /// Candidate penalty values; lambda_u and lambda_v range over the full
    /// Cartesian product of this grid.
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
}

impl CvPlan {
    /// The penalty grid used throughout the simulation studies.
    pub fn default_grid() -> Vec<f64> {
        vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    }

    pub fn new(n: usize, n_cv: usize, lambda_grid: Vec<f64>, seed: u64) -> Result<Self> {
        if lambda_grid.is_empty() {
            return Err(Error::InvalidInput("lambda grid must be nonempty".into()));
        }
        if lambda_grid.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidInput("lambda grid values must be finite".into()));
        }
        for w in lambda_grid.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInput(
                    "lambda grid must be strictly ascending with no duplicates".into(),
                ));
            }
        }
        if lambda_grid[0] < 0.0 || *lambda_grid.last().unwrap() > 2.0 {
            return Err(Error::InvalidInput("lambda grid values must lie in [0, 2]".into()));
        }
        let fold_assignment = make_folds(n, n_cv, seed)?;
        Ok(Self { n_cv, fold_assignment, lambda_grid, seed })
    }

    fn splits(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        (0..self.n_cv)
            .map(|fold| {
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (row, &f) in self.fold_assignment.iter().enumerate() {
                    if f == fold {
                        test.push(row);
                    } else {
                        train.push(row);
                    }
                }
                (train, test)
            })
            .collect()
    }
}

/// Estimator mode and iteration controls threaded through a whole fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub mode: EstimatorMode,
    /// Correlation used to score held-out projections; defaults to `mode`.
    pub test_cor: Option<EstimatorMode>,
    pub tol: f64,
    pub max_iter: usize,
}

impl FitSettings {
    pub fn new(mode: EstimatorMode) -> Self {
        let defaults = SparsePairConfig::default();
        Self { mode, test_cor: None, tol: defaults.tol, max_iter: defaults.max_iter }
    }

    pub fn scoring_mode(&self) -> EstimatorMode {
        self.test_cor.unwrap_or(self.mode)
    }

    fn pair_config(&self, lambda_u: f64, lambda_v: f64) -> SparsePairConfig {
        SparsePairConfig { lambda_u, lambda_v, tol: self.tol, max_iter: self.max_iter }
    }
}

/// Ordered canonical pairs with the plan that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub pairs: Vec<CanonicalPair>,
    pub mode: EstimatorMode,
    pub plan: CvPlan,
    pub pq_star: usize,
}

impl FitResult {
    pub fn cc_test_means(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.cc_test_mean).collect()
    }
}

/// One evaluated penalty cell of the cross-validation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda_u: f64,
    pub lambda_v: f64,
    /// Mean held-out correlation over folds; -inf when any fold degenerated.
    pub mean_cc_test: f64,
    pub n_unconverged_folds: usize,
}

/// Outcome of the penalty search for one canonical pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub lambda_u_star: f64,
    pub lambda_v_star: f64,
    pub mean_cc_test: f64,
    /// Every cell in grid order (lambda_u outer, lambda_v inner).
    pub cells: Vec<GridCell>,
}

/// Remove the rank-1 component spanned by (u, v): k - (u' k v) u v'.
/// With unit-norm u, v the result satisfies u' out v = 0.
pub fn deflate(k: &Array2<f64>, u: &[f64], v: &[f64]) -> Result<Array2<f64>> {
    if u.len() != k.nrows() || v.len() != k.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "deflation vectors ({}, {}) do not match k which is {} x {}",
            u.len(),
            v.len(),
            k.nrows(),
            k.ncols()
        )));
    }
    let d = bilinear(k, u, v);
    let mut out = k.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry -= d * u[i] * v[j];
        }
    }
    Ok(out)
}

/// Assign each of n rows to one of n_cv folds, sizes differing by at most 1,
/// deterministically for a given seed.
pub fn make_folds(n: usize, n_cv: usize, seed: u64) -> Result<Vec<usize>> {
    if n_cv < 2 || n_cv > n {
        return Err(Error::InvalidInput(format!(
            "n_cv must satisfy 2 <= n_cv <= n, got n_cv={n_cv}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let base = n / n_cv;
    let remainder = n % n_cv;
    let mut assignment = vec![0usize; n];
    let mut pos = 0;
    for fold in 0..n_cv {
        let size = base + usize::from(fold < remainder);
        for _ in 0..size {
            assignment[order[pos]] = fold;
            pos += 1;
        }
    }
    Ok(assignment)
}

struct FoldContext {
    k_train: KMatrix,
    test: DataPair,
}

fn fold_contexts(
    data: &DataPair,
    prior: &[(Vec<f64>, Vec<f64>)],
    plan: &CvPlan,
    settings: &FitSettings,
) -> Result<Vec<FoldContext>> {
    plan.splits()
        .into_iter()
        .map(|(train, test)| {
            let train_pair = data.subset_rows(&train);
            let mut k_train = build_k(&train_pair, settings.mode)?;
            for (u, v) in prior {
                k_train.k = deflate(&k_train.k, u, v)?;
            }
            Ok(FoldContext { k_train, test: data.subset_rows(&test) })
        })
        .collect()
}

/// Mean held-out correlation of one penalty cell over all folds, or None
/// when any fold's thresholding annihilated a singular vector.
fn score_cell(
    folds: &[FoldContext],
    cfg: &SparsePairConfig,
    scoring_mode: EstimatorMode,
) -> Result<Option<(f64, usize)>> {
    let mut total = 0.0;
    let mut unconverged = 0;
    for fold in folds {
        let pair = match sparse_singular_pair(&fold.k_train, cfg, None) {
            Ok(pair) => pair,
            Err(Error::DegeneratePair { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !pair.converged {
            unconverged += 1;
        }
        let pair = canonical_vectors(&pair, &fold.k_train)?;
        let score = projected_correlation(&fold.test, &pair.alpha, &pair.beta, scoring_mode)?;
        total += score.value;
    }
    Ok(Some((total / folds.len() as f64, unconverged)))
}

/// Pick the best cell: highest mean, ties broken toward the sparsest cell
/// (largest lambda_u + lambda_v, then largest lambda_u). Returns an index
/// into `cells`, or None when every cell is degenerate.
pub(crate) fn select_best_cell(cells: &[GridCell]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (idx, cell) in cells.iter().enumerate() {
        if cell.mean_cc_test == f64::NEG_INFINITY {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &cells[b];
                let sum = cell.lambda_u + cell.lambda_v;
                let cur_sum = cur.lambda_u + cur.lambda_v;
                cell.mean_cc_test > cur.mean_cc_test
                    || (cell.mean_cc_test == cur.mean_cc_test
                        && (sum > cur_sum || (sum == cur_sum && cell.lambda_u > cur.lambda_u)))
            }
        };
        if better {
            best = Some(idx);
        }
    }
    best
}

/// Cross-validated penalty search for the canonical pair of index
/// `prior.len()`: every (lambda_u, lambda_v) cell is fitted on each fold's
/// training K (deflated by the full-data vectors of earlier pairs) and scored
/// by the correlation of the held-out projections.
pub fn cv_select(
    data: &DataPair,
    prior: &[(Vec<f64>, Vec<f64>)],
    plan: &CvPlan,
    settings: &FitSettings,
) -> Result<CvSelection> {
    if plan.fold_assignment.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} rows but data has {}",
            plan.fold_assignment.len(),
            data.n()
        )));
    }
    let folds = fold_contexts(data, prior, plan, settings)?;
    let scoring_mode = settings.scoring_mode();
    let grid = &plan.lambda_grid;

    let configs: Vec<SparsePairConfig> = grid
        .iter()
        .flat_map(|&lu| grid.iter().map(move |&lv| (lu, lv)))
        .map(|(lu, lv)| settings.pair_config(lu, lv))
        .collect();

    let cells: Vec<GridCell> = configs
        .par_iter()
        .map(|cfg| {
            score_cell(&folds, cfg, scoring_mode).map(|outcome| match outcome {
                Some((mean, unconverged)) => GridCell {
                    lambda_u: cfg.lambda_u,
                    lambda_v: cfg.lambda_v,
                    mean_cc_test: mean,
                    n_unconverged_folds: unconverged,
                },
                None => GridCell {
                    lambda_u: cfg.lambda_u,
                    lambda_v: cfg.lambda_v,
                    mean_cc_test: f64::NEG_INFINITY,
                    n_unconverged_folds: 0,
                },
            })
        })
        .collect::<Result<_>>()?;

    match select_best_cell(&cells) {
        Some(idx) => Ok(CvSelection {
            lambda_u_star: cells[idx].lambda_u,
            lambda_v_star: cells[idx].lambda_v,
            mean_cc_test: cells[idx].mean_cc_test,
            cells,
        }),
        None => Err(Error::NoViableLambda { pair_index: prior.len() }),
    }
}

/// Fit `pq_star` canonical pairs in sequence: penalty search, full-data
/// refit, then deflation of the full-data K by the refitted vectors.
pub fn fit_pairs(
    data: &DataPair,
    pq_star: usize,
    plan: &CvPlan,
    settings: &FitSettings,
) -> Result<FitResult> {
    let (pairs, failure) = fit_pairs_partial(data, pq_star, plan, settings)?;
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(FitResult { pairs, mode: settings.mode, plan: plan.clone(), pq_star })
}

/// Like [`fit_pairs`] but a pair-level dead end (no viable penalty cell, or a
/// full-data refit annihilated by its selected penalties) is handed back with
/// the pairs fitted so far instead of discarding them. Structural errors
/// still propagate.
pub(crate) fn fit_pairs_partial(
    data: &DataPair,
    pq_star: usize,
    plan: &CvPlan,
    settings: &FitSettings,
) -> Result<(Vec<CanonicalPair>, Option<Error>)> {
    if pq_star > data.p().min(data.q()) {
        return Err(Error::InvalidInput(format!(
            "pq_star={} exceeds min(p, q)={}",
            pq_star,
            data.p().min(data.q())
        )));
    }
    let mut k_full = build_k(data, settings.mode)?;
    let mut prior: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut pairs = Vec::with_capacity(pq_star);

    for pair_index in 0..pq_star {
        let selection = match cv_select(data, &prior, plan, settings) {
            Ok(sel) => sel,
            Err(e @ Error::NoViableLambda { .. }) => return Ok((pairs, Some(e))),
            Err(e) => return Err(e),
        };
        // the full-data refit can itself be annihilated by the selected
        // penalties even when every fold survived; such a cell is unusable,
        // so it drops out of the search like any other degenerate cell
        let mut cells = selection.cells;
        let (fitted, chosen) = loop {
            let Some(best) = select_best_cell(&cells) else {
                return Ok((pairs, Some(Error::NoViableLambda { pair_index })));
            };
            let cfg = settings.pair_config(cells[best].lambda_u, cells[best].lambda_v);
            match sparse_singular_pair(&k_full, &cfg, None) {
                Ok(pair) => break (pair, cells[best]),
                Err(Error::DegeneratePair { .. }) | Err(Error::InvalidInput(_)) => {
                    cells[best].mean_cc_test = f64::NEG_INFINITY;
                }
                Err(e) => return Err(e),
            }
        };
        let mut pair = canonical_vectors(&fitted, &k_full)?;
        pair.cc_test_mean = chosen.mean_cc_test;
        k_full.k = deflate(&k_full.k, &pair.u, &pair.v)?;
        prior.push((pair.u.clone(), pair.v.clone()));
        pairs.push(pair);
    }
    Ok((pairs, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn deflating_rank_one_matrix_leaves_zero() {
        let u = [0.6, 0.8];
        let v = [1.0 / 2.0f64.sqrt(), -1.0 / 2.0f64.sqrt()];
        let k = Array2::from_shape_fn((2, 2), |(i, j)| 1.7 * u[i] * v[j]);
        let out = deflate(&k, &u, &v).unwrap();
        let frob = out.iter().map(|&x| x * x).sum::<f64>().sqrt();
        assert!(frob <= 1e-12, "frobenius norm {frob}");
    }

    #[test]
    fn deflating_top_pair_exposes_second_singular_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // rank-2 matrix with known singular values via orthonormal factors
        let k = {
            let a = random_matrix(&mut rng, 6, 2);
            let b = random_matrix(&mut rng, 5, 2);
            // orthonormalize the factor columns
            let orthonormalize = |m: &Array2<f64>| {
                let c0 = m.column(0).to_owned();
                let c0 = &c0 / c0.dot(&c0).sqrt();
                let mut c1 = m.column(1).to_owned();
                let proj = c1.dot(&c0);
                c1 -= &(&c0 * proj);
                let c1 = &c1 / c1.dot(&c1).sqrt();
                (c0, c1)
            };
            let (a0, a1) = orthonormalize(&a);
            let (b0, b1) = orthonormalize(&b);
            let mut k = Array2::zeros((6, 5));
            for i in 0..6 {
                for j in 0..5 {
                    k[[i, j]] = 3.0 * a0[i] * b0[j] + 1.25 * a1[i] * b1[j];
                }
            }
            k
        };
        let na = nalgebra::DMatrix::from_fn(6, 5, |i, j| k[[i, j]]);
        let svd = na.clone().svd(true, true);
        let u1: Vec<f64> = svd.u.as_ref().unwrap().column(0).iter().copied().collect();
        let v1: Vec<f64> = svd.v_t.as_ref().unwrap().row(0).iter().copied().collect();

        let deflated = deflate(&k, &u1, &v1).unwrap();
        let top_after = nalgebra::DMatrix::from_fn(6, 5, |i, j| deflated[[i, j]])
            .svd(false, false)
            .singular_values[0];
        assert_abs_diff_eq!(top_after, svd.singular_values[1], epsilon = 1e-9);
        assert_abs_diff_eq!(top_after, 1.25, epsilon = 1e-9);
    }

    #[test]
    fn deflation_with_zero_coefficient_is_identity() {
        let k = array![[0.0, 1.0], [1.0, 0.0]];
        // u' k v = 0 for these unit vectors
        let out = deflate(&k, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(out, k);
    }

    #[test]
    fn deflate_checks_dimensions() {
        let k = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(deflate(&k, &[1.0], &[1.0, 0.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn folds_split_evenly() {
        let assignment = make_folds(10, 5, 1).unwrap();
        let mut sizes = vec![0usize; 5];
        for f in assignment {
            sizes[f] += 1;
        }
        assert_eq!(sizes, vec![2; 5]);
    }

    #[test]
    fn folds_spread_remainder() {
        let assignment = make_folds(7, 3, 1).unwrap();
        let mut sizes = vec![0usize; 3];
        for f in assignment {
            sizes[f] += 1;
        }
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 3]);
    }

    #[test]
    fn folds_are_deterministic() {
        assert_eq!(make_folds(23, 4, 99).unwrap(), make_folds(23, 4, 99).unwrap());
        assert!(make_folds(5, 6, 0).is_err());
        assert!(make_folds(5, 1, 0).is_err());
    }

    #[test]
    fn singleton_zero_grid_selects_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = DataPair::new(random_matrix(&mut rng, 30, 4), random_matrix(&mut rng, 30, 3)).unwrap();
        let plan = CvPlan::new(30, 5, vec![0.0], 11).unwrap();
        let settings = FitSettings::new(EstimatorMode::Pearson);
        let sel = cv_select(&data, &[], &plan, &settings).unwrap();
        assert_eq!((sel.lambda_u_star, sel.lambda_v_star), (0.0, 0.0));
        assert_eq!(sel.cells.len(), 1);
    }

    #[test]
    fn ties_prefer_sparser_cells() {
        let cell = |lu: f64, lv: f64, mean: f64| GridCell {
            lambda_u: lu,
            lambda_v: lv,
            mean_cc_test: mean,
            n_unconverged_folds: 0,
        };
        // equal means: larger lambda sum wins
        let cells = vec![cell(0.1, 0.1, 0.5), cell(0.3, 0.2, 0.5), cell(0.0, 0.0, 0.4)];
        assert_eq!(select_best_cell(&cells), Some(1));
        // equal means and sums: larger lambda_u wins
        let cells = vec![cell(0.1, 0.3, 0.5), cell(0.3, 0.1, 0.5)];
        assert_eq!(select_best_cell(&cells), Some(1));
        // degenerate cells are never selected
        let cells = vec![cell(0.5, 0.5, f64::NEG_INFINITY), cell(0.0, 0.0, -0.2)];
        assert_eq!(select_best_cell(&cells), Some(1));
        let cells = vec![cell(0.5, 0.5, f64::NEG_INFINITY)];
        assert_eq!(select_best_cell(&cells), None);
    }

    #[test]
    fn fit_pairs_zero_request_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = DataPair::new(random_matrix(&mut rng, 20, 3), random_matrix(&mut rng, 20, 4)).unwrap();
        let plan = CvPlan::new(20, 4, CvPlan::default_grid(), 5).unwrap();
        let fit = fit_pairs(&data, 0, &plan, &FitSettings::new(EstimatorMode::Pearson)).unwrap();
        assert!(fit.pairs.is_empty());
        assert_eq!(fit.pq_star, 0);
    }

    #[test]
    fn fit_pairs_rejects_oversized_request() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = DataPair::new(random_matrix(&mut rng, 20, 3), random_matrix(&mut rng, 20, 4)).unwrap();
        let plan = CvPlan::new(20, 4, CvPlan::default_grid(), 5).unwrap();
        assert!(fit_pairs(&data, 4, &plan, &FitSettings::new(EstimatorMode::Pearson)).is_err());
    }

    #[test]
    fn planted_rank_one_signal_dominates_first_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 120;
        let x = random_matrix(&mut rng, n, 5);
        let mut y = random_matrix(&mut rng, n, 6);
        for i in 0..n {
            let driver = x[[i, 0]] + x[[i, 1]];
            y[[i, 0]] += driver;
            y[[i, 1]] += driver;
        }
        let data = DataPair::new(x, y).unwrap();
        let plan = CvPlan::new(n, 5, CvPlan::default_grid(), 17).unwrap();
        let fit = fit_pairs(&data, 2, &plan, &FitSettings::new(EstimatorMode::Pearson)).unwrap();
        assert!(fit.pairs[0].cc > 2.0 * fit.pairs[1].cc,
            "expected dominant first pair, got cc = {} vs {}", fit.pairs[0].cc, fit.pairs[1].cc);
        assert!(fit.pairs[0].cc_test_mean > fit.pairs[1].cc_test_mean);
    }

    #[test]
    fn deflation_residuals_vanish_and_supports_are_nonempty() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let data = DataPair::new(random_matrix(&mut rng, 40, 6), random_matrix(&mut rng, 40, 7)).unwrap();
        let plan = CvPlan::new(40, 5, CvPlan::default_grid(), 3).unwrap();
        let settings = FitSettings::new(EstimatorMode::Spearman);
        let fit = fit_pairs(&data, 3, &plan, &settings).unwrap();

        // rebuild the deflation sequence and check u_i' K_{i+1} v_i = 0
        let mut k = build_k(&data, settings.mode).unwrap().k;
        for pair in &fit.pairs {
            assert!(!pair.support_alpha().is_empty());
            assert!(!pair.support_beta().is_empty());
            assert!(pair.cc.is_finite());
            k = deflate(&k, &pair.u, &pair.v).unwrap();
            let residual = bilinear(&k, &pair.u, &pair.v).abs();
            assert!(residual <= 1e-10, "residual {residual}");
        }
    }

    #[test]
    fn refits_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let data = DataPair::new(random_matrix(&mut rng, 35, 5), random_matrix(&mut rng, 35, 6)).unwrap();
        let plan = CvPlan::new(35, 5, CvPlan::default_grid(), 29).unwrap();
        let settings = FitSettings::new(EstimatorMode::Pearson);
        let a = fit_pairs(&data, 3, &plan, &settings).unwrap();
        let b = fit_pairs(&data, 3, &plan, &settings).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_grid_pearson_gives_nonincreasing_cc_matching_svd() {
        // lambda = 0 reduces to plain power iteration with deflation, so the
        // cc sequence must match the singular values of the initial K.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let data = DataPair::new(random_matrix(&mut rng, 60, 6), random_matrix(&mut rng, 60, 8)).unwrap();
        let plan = CvPlan::new(60, 5, vec![0.0], 41).unwrap();
        let settings =
            FitSettings { tol: 1e-10, max_iter: 20_000, ..FitSettings::new(EstimatorMode::Pearson) };
        let fit = fit_pairs(&data, 4, &plan, &settings).unwrap();

        let k = build_k(&data, EstimatorMode::Pearson).unwrap().k;
        let svd = nalgebra::DMatrix::from_fn(6, 8, |i, j| k[[i, j]]).svd(false, false);
        for (i, pair) in fit.pairs.iter().enumerate() {
            assert_abs_diff_eq!(pair.cc, svd.singular_values[i], epsilon = 1e-6);
            if i > 0 {
                assert!(pair.cc <= fit.pairs[i - 1].cc + 1e-12);
            }
        }
    }

    #[test]
    fn cv_selection_matches_exhaustive_reevaluation() {
        // simulated data with two planted groups; verify the selected cell
        // attains the maximum of independently recomputed cell means
        let spec = crate::simulate::SimulationSpec {
            n: 200,
            p: 30,
            q: 40,
            rho: 0.2,
            groups: vec![(5, 8), (4, 4)],
            tail: crate::simulate::TailMode::Clean,
            tail_divisor: crate::simulate::TailDivisor::Sqrt,
            contaminate_noise: false,
            df: 2.0,
            b_value: 1.0,
            seed: 404,
        };
        let (data, _) = crate::simulate::generate(&spec).unwrap();
        let plan = CvPlan::new(200, 5, CvPlan::default_grid(), 7).unwrap();
        let settings = FitSettings::new(EstimatorMode::Pearson);
        let sel = cv_select(&data, &[], &plan, &settings).unwrap();

        // independent pass over the grid using the low-level operations
        let splits = plan.splits();
        let mut best = f64::NEG_INFINITY;
        for &lu in &plan.lambda_grid {
            for &lv in &plan.lambda_grid {
                let mut total = 0.0;
                let mut dead = false;
                for (train, test) in &splits {
                    let train_pair = data.subset_rows(train);
                    let km = build_k(&train_pair, settings.mode).unwrap();
                    match sparse_singular_pair(&km, &settings.pair_config(lu, lv), None) {
                        Ok(pair) => {
                            let pair = canonical_vectors(&pair, &km).unwrap();
                            let test_pair = data.subset_rows(test);
                            total += projected_correlation(
                                &test_pair,
                                &pair.alpha,
                                &pair.beta,
                                settings.mode,
                            )
                            .unwrap()
                            .value;
                        }
                        Err(Error::DegeneratePair { .. }) => {
                            dead = true;
                            break;
                        }
                        Err(e) => panic!("unexpected error {e}"),
                    }
                }
                let mean = if dead { f64::NEG_INFINITY } else { total / splits.len() as f64 };
                let cell = sel
                    .cells
                    .iter()
                    .find(|c| c.lambda_u == lu && c.lambda_v == lv)
                    .expect("cell present");
                if mean.is_finite() {
                    assert_abs_diff_eq!(cell.mean_cc_test, mean, epsilon = 1e-12);
                } else {
                    assert_eq!(cell.mean_cc_test, f64::NEG_INFINITY);
                }
                best = best.max(mean);
            }
        }
        assert_abs_diff_eq!(sel.mean_cc_test, best, epsilon = 1e-12);
    }
}
