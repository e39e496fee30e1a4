//! Synthetic data with planted canonical structure.
//!
//! x rows are multivariate normal with unit variances and within-group
//! correlation rho; y rows are x * B plus independent normal noise whose
//! per-column variance is inflated so grouped y variables also end up with
//! pairwise correlation rho. Heavy-tailed variants divide each x row by a
//! chi-squared based factor before y is generated.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariance::DataPair;
use crate::error::{Error, Result};

/// Whether rows keep their normal tails or are inflated to t-like tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    Clean,
    TLike,
}

/// Form of the heavy-tail divisor applied to each row: the usual
/// sqrt(w/df) with w ~ chi-squared(df), or the plain ratio w/df.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailDivisor {
    Sqrt,
    Linear,
}

/// Everything needed to draw one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Within-group correlation, in (0, 1).
    pub rho: f64,
    /// (x block size, y block size) per planted group, laid out consecutively.
    pub groups: Vec<(usize, usize)>,
    pub tail: TailMode,
    pub tail_divisor: TailDivisor,
    /// Also divide the y noise term by the row's tail divisor.
    pub contaminate_noise: bool,
    /// Chi-squared degrees of freedom for the tail divisor.
    pub df: f64,
    /// Value written into the nonzero blocks of B.
    pub b_value: f64,
    pub seed: u64,
}

impl SimulationSpec {
    /// The five-group layout used by the main simulation studies
    /// (requires p >= 100 and q >= 100).
    pub fn default_groups() -> Vec<(usize, usize)> {
        vec![(10, 20), (5, 5), (20, 10), (50, 50), (15, 15)]
    }

    pub fn new(n: usize, p: usize, q: usize, groups: Vec<(usize, usize)>, seed: u64) -> Self {
        Self {
            n,
            p,
            q,
            rho: 0.2,
            groups,
            tail: TailMode::Clean,
            tail_divisor: TailDivisor::Sqrt,
            contaminate_noise: false,
            df: 2.0,
            b_value: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidInput(format!("n={} is below 3", self.n)));
        }
        if self.p == 0 || self.q == 0 {
            return Err(Error::InvalidInput("p and q must be positive".into()));
        }
        if !self.rho.is_finite() || self.rho <= 0.0 || self.rho >= 1.0 {
            return Err(Error::InvalidInput(format!("rho={} outside (0, 1)", self.rho)));
        }
        if !self.df.is_finite() || self.df <= 0.0 {
            return Err(Error::InvalidInput(format!("df={} must be positive", self.df)));
        }
        let x_total: usize = self.groups.iter().map(|g| g.0).sum();
        let y_total: usize = self.groups.iter().map(|g| g.1).sum();
        if x_total > self.p || y_total > self.q {
            return Err(Error::InvalidInput(format!(
                "group blocks ({x_total}, {y_total}) exceed dimensions ({}, {})",
                self.p, self.q
            )));
        }
        if self.groups.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(Error::InvalidInput("group block sizes must be positive".into()));
        }
        Ok(())
    }
}

/// The planted structure a simulated dataset was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// p x q coefficient matrix linking x to the y means.
    pub b: Array2<f64>,
    /// (x index set, y index set) per group, 0-based.
    pub groups: Vec<(Vec<usize>, Vec<usize>)>,
    /// Noise variance per y column.
    pub sigma_yy_diag: Vec<f64>,
}

impl GroundTruth {
    pub fn from_spec(spec: &SimulationSpec) -> Result<Self> {
        spec.validate()?;
        let b = build_b(spec)?;
        let mut groups = Vec::with_capacity(spec.groups.len());
        let mut x_off = 0;
        let mut y_off = 0;
        let mut sigma_yy_diag = vec![1.0; spec.q];
        for &(px, qy) in &spec.groups {
            groups.push(((x_off..x_off + px).collect(), (y_off..y_off + qy).collect()));
            let noise = sigma_yy_entry(px, spec.rho);
            for slot in sigma_yy_diag.iter_mut().skip(y_off).take(qy) {
                *slot = noise;
            }
            x_off += px;
            y_off += qy;
        }
        Ok(Self { b, groups, sigma_yy_diag })
    }

    /// True x variables: rows of B with any nonzero entry.
    pub fn true_x(&self) -> Vec<bool> {
        self.b.rows().into_iter().map(|r| r.iter().any(|&v| v != 0.0)).collect()
    }

    /// True y variables: columns of B with any nonzero entry.
    pub fn true_y(&self) -> Vec<bool> {
        self.b.columns().into_iter().map(|c| c.iter().any(|&v| v != 0.0)).collect()
    }
}

/// Lay the group blocks of B down the diagonal: block l holds `b_value` on
/// the Cartesian product of its x and y index ranges, zero elsewhere. An
/// empty group list yields the all-zero B of the null model.
pub fn build_b(spec: &SimulationSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let mut b = Array2::zeros((spec.p, spec.q));
    let mut x_off = 0;
    let mut y_off = 0;
    for &(px, qy) in &spec.groups {
        for i in x_off..x_off + px {
            for j in y_off..y_off + qy {
                b[[i, j]] = spec.b_value;
            }
        }
        x_off += px;
        y_off += qy;
    }
    Ok(b)
}

/// Noise variance giving grouped y columns pairwise correlation rho when each
/// is the sum of the same p1 unit-variance x variables plus independent
/// noise: (1/rho - 1) * (p1 + (p1^2 - p1) * rho).
pub fn sigma_yy_entry(x_block_size: usize, rho: f64) -> f64 {
    let p1 = x_block_size as f64;
    (1.0 / rho - 1.0) * (p1 + (p1 * p1 - p1) * rho)
}

/// Lower-triangular Cholesky factor; None when the matrix is not positive
/// definite.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Draw one dataset. Deterministic for a given spec: standard normals for x
/// are drawn first (row-major), then the tail divisors, then the noise
/// matrix, so equal seeds give bit-identical output.
pub fn generate(spec: &SimulationSpec) -> Result<(DataPair, GroundTruth)> {
    let truth = GroundTruth::from_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut x = Array2::from_shape_fn((spec.n, spec.p), |_| rng.sample::<f64, _>(StandardNormal));

    // mix each group's columns through the Cholesky factor of the
    // compound-symmetry block (1 - rho) I + rho J; ungrouped columns keep
    // the identity factor
    let mut x_off = 0;
    for &(px, _) in &spec.groups {
        let block = Array2::from_shape_fn((px, px), |(i, j)| if i == j { 1.0 } else { spec.rho });
        let l = cholesky(&block).ok_or_else(|| {
            Error::InvalidInput("within-group covariance block is not positive definite".into())
        })?;
        for row in 0..spec.n {
            let mut mixed = vec![0.0; px];
            for (i, slot) in mixed.iter_mut().enumerate() {
                let mut sum = 0.0;
                for j in 0..=i {
                    sum += l[[i, j]] * x[[row, x_off + j]];
                }
                *slot = sum;
            }
            for (i, value) in mixed.into_iter().enumerate() {
                x[[row, x_off + i]] = value;
            }
        }
        x_off += px;
    }

    let divisors: Vec<f64> = match spec.tail {
        TailMode::Clean => vec![1.0; spec.n],
        TailMode::TLike => {
            let chi = ChiSquared::new(spec.df)
                .map_err(|e| Error::InvalidInput(format!("chi-squared({}) invalid: {e}", spec.df)))?;
            (0..spec.n)
                .map(|_| {
                    let w: f64 = rng.sample(chi);
                    match spec.tail_divisor {
                        TailDivisor::Sqrt => (w / spec.df).sqrt(),
                        TailDivisor::Linear => w / spec.df,
                    }
                })
                .collect()
        }
    };
    for (row, &c) in divisors.iter().enumerate() {
        if c != 1.0 {
            for value in x.row_mut(row).iter_mut() {
                *value /= c;
            }
        }
    }

    let noise_sd: Vec<f64> = truth.sigma_yy_diag.iter().map(|&v| v.sqrt()).collect();
    let mut y = x.dot(&truth.b);
    for row in 0..spec.n {
        let noise_scale = if spec.contaminate_noise { divisors[row] } else { 1.0 };
        for col in 0..spec.q {
            let eps: f64 = rng.sample(StandardNormal);
            y[[row, col]] += eps * noise_sd[col] / noise_scale;
        }
    }

    let data = DataPair::new(x, y)?;
    Ok((data, truth))
}
