//! Run configuration: one serializable struct aggregating every tunable,
//! loadable from a JSON file with command-line flags taking precedence.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use rmscca::{CvPlan, EstimatorMode, TailDivisor, TailMode};

/// Everything a run can be configured with. Optional path fields are filled
/// by the subcommand that uses them; the whole struct round-trips through
/// JSON unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // estimation
    pub mode: EstimatorMode,
    /// Correlation used on held-out data; None means match `mode`.
    pub test_cor: Option<EstimatorMode>,
    pub n_cv: usize,
    pub lambda_grid: Vec<f64>,
    /// Number of canonical pairs; None means min(p, q, 10).
    pub pq_star: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub standardize: bool,

    // significance
    pub n_perm: usize,
    pub q_level: f64,

    // simulation
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub rho: f64,
    /// (x block size, y block size) per planted group; empty = null model.
    pub groups: Vec<(usize, usize)>,
    pub tail: TailMode,
    pub tail_divisor: TailDivisor,
    pub contaminate_noise: bool,
    pub df: f64,
    pub b_value: f64,

    // reproducibility and execution
    pub seed: u64,
    pub threads: Option<usize>,

    // paths (filled per subcommand)
    pub x_path: Option<PathBuf>,
    pub y_path: Option<PathBuf>,
    pub out_path: Option<PathBuf>,
    pub fan_path: Option<PathBuf>,
    pub fit_out_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: EstimatorMode::Spearman,
            test_cor: None,
            n_cv: 5,
            lambda_grid: CvPlan::default_grid(),
            pq_star: None,
            tol: 1e-6,
            max_iter: 1000,
            standardize: true,
            n_perm: 100,
            q_level: 0.9,
            n: 200,
            p: 100,
            q: 100,
            rho: 0.2,
            groups: rmscca::SimulationSpec::default_groups(),
            tail: TailMode::Clean,
            tail_divisor: TailDivisor::Sqrt,
            contaminate_noise: false,
            df: 2.0,
            b_value: 1.0,
            seed: 0,
            threads: None,
            x_path: None,
            y_path: None,
            out_path: None,
            fan_path: None,
            fit_out_path: None,
            out_dir: None,
        }
    }
}

impl RunConfig {
    /// Permutation streams must not overlap the fold-assignment stream, so
    /// the master seed is a fixed splitmix offset of the run seed.
    pub fn master_perm_seed(&self) -> u64 {
        self.seed.wrapping_add(0x9E37_79B9_7F4A_7C15)
    }

    pub fn resolved_pq_star(&self, p: usize, q: usize) -> usize {
        self.pq_star.unwrap_or_else(|| p.min(q).min(10))
    }
}

/// Parse a `--grid` value like "0,0.1,0.2".
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| format!("grid entry '{}' is not a number", tok.trim()))
        })
        .collect()
}

/// Parse a `--groups` value: "default", "none", or "10x20,5x5".
pub fn parse_groups(text: &str) -> Result<Vec<(usize, usize)>, String> {
    match text.trim() {
        "default" => Ok(rmscca::SimulationSpec::default_groups()),
        "none" | "" => Ok(Vec::new()),
        list => list
            .split(',')
            .map(|tok| {
                let mut parts = tok.trim().split('x');
                let px = parts.next().and_then(|s| s.parse::<usize>().ok());
                let qy = parts.next().and_then(|s| s.parse::<usize>().ok());
                match (px, qy, parts.next()) {
                    (Some(a), Some(b), None) => Ok((a, b)),
                    _ => Err(format!("group '{}' is not of the form PxQ", tok.trim())),
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig {
            mode: EstimatorMode::Pearson,
            test_cor: Some(EstimatorMode::Spearman),
            lambda_grid: vec![0.0, 0.25, 0.5],
            pq_star: Some(3),
            groups: vec![(4, 6), (2, 2)],
            x_path: Some(PathBuf::from("/tmp/x.csv")),
            threads: Some(4),
            ..Default::default()
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_config_files_use_defaults() {
        let back: RunConfig = serde_json::from_str(r#"{"mode": "pearson", "seed": 9}"#).unwrap();
        assert_eq!(back.mode, EstimatorMode::Pearson);
        assert_eq!(back.seed, 9);
        assert_eq!(back.n_cv, 5);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn grid_and_group_parsing() {
        assert_eq!(parse_grid("0,0.1, 0.2").unwrap(), vec![0.0, 0.1, 0.2]);
        assert!(parse_grid("0,abc").is_err());
        assert_eq!(parse_groups("10x20,5x5").unwrap(), vec![(10, 20), (5, 5)]);
        assert_eq!(parse_groups("none").unwrap(), vec![]);
        assert_eq!(parse_groups("default").unwrap().len(), 5);
        assert!(parse_groups("10y20").is_err());
    }

    #[test]
    fn pq_default_caps_at_ten() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.resolved_pq_star(50, 80), 10);
        assert_eq!(cfg.resolved_pq_star(4, 80), 4);
        assert_eq!(RunConfig { pq_star: Some(2), ..cfg }.resolved_pq_star(50, 80), 2);
    }
}
