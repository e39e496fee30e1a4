//! The four subcommands: simulate, fit, permtest, evaluate.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use rmscca::{
    batch_summary, compute_metrics, count_significant, fit_pairs, generate,
    permutation_distribution, CvPlan, DataPair, FitResult, FitSettings, MetricsReport,
    SimulationSpec,
};

use crate::config::RunConfig;
use crate::documents::{
    read_json, write_json, FitDocument, PermtestDocument, Provenance, TruthDocument,
};
use crate::error::AppError;
use crate::matrix_io::{format_float, read_matrix_csv, write_atomic, write_matrix_csv};

fn simulation_spec(cfg: &RunConfig) -> SimulationSpec {
    SimulationSpec {
        n: cfg.n,
        p: cfg.p,
        q: cfg.q,
        rho: cfg.rho,
        groups: cfg.groups.clone(),
        tail: cfg.tail,
        tail_divisor: cfg.tail_divisor,
        contaminate_noise: cfg.contaminate_noise,
        df: cfg.df,
        b_value: cfg.b_value,
        seed: cfg.seed,
    }
}

/// Draw one dataset and write x.csv, y.csv, and truth.json into out_dir.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), AppError> {
    let out_dir = cfg.out_dir.as_deref().ok_or_else(|| AppError::config("missing output directory"))?;
    let spec = simulation_spec(cfg);
    spec.validate().map_err(|e| AppError::config(e.to_string()))?;
    let (data, truth) = generate(&spec).map_err(AppError::from_fit)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| AppError::input(format!("cannot create {}: {e}", out_dir.display())))?;
    let x_names: Vec<String> = (1..=spec.p).map(|j| format!("x{j}")).collect();
    let y_names: Vec<String> = (1..=spec.q).map(|j| format!("y{j}")).collect();
    write_matrix_csv(&out_dir.join("x.csv"), data.x(), &x_names)?;
    write_matrix_csv(&out_dir.join("y.csv"), data.y(), &y_names)?;
    write_json(&out_dir.join("truth.json"), &TruthDocument::from_truth(&spec, &truth))?;
    Ok(())
}

fn standardize_columns(m: &mut Array2<f64>, names: &[String]) -> Result<(), AppError> {
    let n = m.nrows() as f64;
    for (j, mut col) in m.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if !var.is_finite() || var <= 0.0 {
            return Err(AppError::degenerate(format!(
                "column '{}' is constant and cannot be standardized",
                names[j]
            )));
        }
        let sd = var.sqrt();
        col.mapv_inplace(|v| (v - mean) / sd);
    }
    Ok(())
}

fn load_data(cfg: &RunConfig) -> Result<DataPair, AppError> {
    let x_path = cfg.x_path.as_deref().ok_or_else(|| AppError::config("missing --x input path"))?;
    let y_path = cfg.y_path.as_deref().ok_or_else(|| AppError::config("missing --y input path"))?;
    let (mut x, x_names) = read_matrix_csv(x_path)?;
    let (mut y, y_names) = read_matrix_csv(y_path)?;
    if x.nrows() != y.nrows() {
        return Err(AppError::input(format!(
            "{} has {} rows but {} has {}",
            x_path.display(),
            x.nrows(),
            y_path.display(),
            y.nrows()
        )));
    }
    if cfg.standardize {
        standardize_columns(&mut x, &x_names)?;
        standardize_columns(&mut y, &y_names)?;
    }
    DataPair::with_names(x, y, Some(x_names), Some(y_names)).map_err(AppError::from_load)
}

struct PreparedFit {
    data: DataPair,
    plan: CvPlan,
    settings: FitSettings,
    pq_star: usize,
}

fn prepare(cfg: &RunConfig) -> Result<PreparedFit, AppError> {
    let data = load_data(cfg)?;
    let pq_star = cfg.resolved_pq_star(data.p(), data.q());
    if pq_star > data.p().min(data.q()) {
        return Err(AppError::config(format!(
            "pq_star={} exceeds min(p, q)={}",
            pq_star,
            data.p().min(data.q())
        )));
    }
    let plan = CvPlan::new(data.n(), cfg.n_cv, cfg.lambda_grid.clone(), cfg.seed)
        .map_err(|e| AppError::config(e.to_string()))?;
    let settings = FitSettings {
        mode: cfg.mode,
        test_cor: cfg.test_cor,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    };
    Ok(PreparedFit { data, plan, settings, pq_star })
}

fn provenance(cfg: &RunConfig, plan: &CvPlan, pq_star: usize) -> Provenance {
    Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: cfg.mode,
        test_cor: cfg.test_cor,
        standardize: cfg.standardize,
        seed: cfg.seed,
        n_cv: plan.n_cv,
        lambda_grid: plan.lambda_grid.clone(),
        fold_assignment: plan.fold_assignment.clone(),
        pq_star,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    }
}

fn run_fit(prepared: &PreparedFit) -> Result<FitResult, AppError> {
    fit_pairs(&prepared.data, prepared.pq_star, &prepared.plan, &prepared.settings)
        .map_err(AppError::from_fit)
}

/// Fit canonical pairs to x.csv / y.csv and write the fit JSON.
pub fn cmd_fit(cfg: &RunConfig) -> Result<(), AppError> {
    let out = cfg.out_path.as_deref().ok_or_else(|| AppError::config("missing --out path"))?;
    let prepared = prepare(cfg)?;
    let fit = run_fit(&prepared)?;
    let doc = FitDocument::from_fit(
        &fit,
        provenance(cfg, &prepared.plan, prepared.pq_star),
        prepared.data.p(),
        prepared.data.q(),
    );
    write_json(out, &doc)
}

/// Fit, then compare against refits on permuted data; writes the summary
/// JSON, a fan-plot TSV of per-pair permutation quantiles, and optionally
/// the fit JSON itself.
pub fn cmd_permtest(cfg: &RunConfig) -> Result<(), AppError> {
    let out = cfg.out_path.as_deref().ok_or_else(|| AppError::config("missing --out path"))?;
    let prepared = prepare(cfg)?;
    let fit = run_fit(&prepared)?;
    let observed = fit.cc_test_means();

    let master_seed = cfg.master_perm_seed();
    let perm = permutation_distribution(
        &prepared.data,
        prepared.pq_star,
        &prepared.plan,
        &prepared.settings,
        cfg.n_perm,
        master_seed,
    )
    .map_err(AppError::from_fit)?;
    let summary = count_significant(&observed, &perm, cfg.q_level).map_err(AppError::from_fit)?;

    let prov = provenance(cfg, &prepared.plan, prepared.pq_star);
    write_json(out, &PermtestDocument::from_summary(&summary, &observed, prov.clone(), master_seed))?;

    if let Some(fan) = cfg.fan_path.as_deref() {
        write_fan_table(fan, &observed, &summary)?;
    }
    if let Some(fit_out) = cfg.fit_out_path.as_deref() {
        let doc = FitDocument::from_fit(&fit, prov, prepared.data.p(), prepared.data.q());
        write_json(fit_out, &doc)?;
    }
    Ok(())
}

/// One row per pair: observed mean test correlation, the significance
/// cutoff, and the permutation deciles needed to redraw the correlation fan.
fn write_fan_table(
    path: &Path,
    observed: &[f64],
    summary: &rmscca::PermutationSummary,
) -> Result<(), AppError> {
    let mut text = String::from("pair_index\tobserved_cc_test\tcutoff_q");
    for d in 1..=9 {
        text.push_str(&format!("\tperm_quantile_0.{d}"));
    }
    text.push('\n');
    for (j, &obs) in observed.iter().enumerate() {
        let column: Vec<f64> = summary.perm_cc.column(j).to_vec();
        text.push_str(&format!(
            "{}\t{}\t{}",
            j + 1,
            format_float(obs),
            format_float(summary.cutoffs[j])
        ));
        for d in 1..=9 {
            let q = rmscca::quantile_type7(&column, d as f64 / 10.0);
            text.push_str(&format!("\t{}", format_float(q)));
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Score each run directory (fit.json + permtest.json + truth.json) against
/// its ground truth; writes per-run metrics and the batch aggregate.
pub fn cmd_evaluate(
    runs: &[PathBuf],
    label: &str,
    metrics_out: &Path,
    summary_out: &Path,
) -> Result<(), AppError> {
    if runs.is_empty() {
        return Err(AppError::config("evaluate needs at least one --run directory"));
    }
    let mut reports: Vec<(String, MetricsReport)> = Vec::with_capacity(runs.len());
    for run in runs {
        let truth_doc: TruthDocument = read_json(&run.join("truth.json"))?;
        let fit_doc: FitDocument = read_json(&run.join("fit.json"))?;
        let perm_doc: PermtestDocument = read_json(&run.join("permtest.json"))?;
        let truth = truth_doc.to_truth()?;
        let fit = fit_doc.to_fit();
        let summary = perm_doc.to_summary();
        let report = compute_metrics(&fit, &summary, &truth)
            .map_err(|e| AppError::input(format!("{}: {e}", run.display())))?;
        reports.push((run.display().to_string(), report));
    }

    let mut text = String::from("run\tnc_pair\ttpr\ttp_of_cg\tfn_rate\tcomplete_group_flags\n");
    for (name, report) in &reports {
        let flags = report
            .per_pair_flags
            .iter()
            .map(|f| if *f { "true" } else { "false" })
            .collect::<Vec<_>>()
            .join(";");
        text.push_str(&format!(
            "{name}\t{}\t{}\t{}\t{}\t{flags}\n",
            report.nc_pair,
            format_float(report.tpr),
            format_float(report.tp_of_cg),
            format_float(report.fn_rate),
        ));
    }
    write_atomic(metrics_out, text.as_bytes())?;

    let only_reports: Vec<MetricsReport> = reports.into_iter().map(|(_, r)| r).collect();
    let batch = batch_summary(&only_reports, label).map_err(|e| AppError::input(e.to_string()))?;
    let mut text = String::from("label\tn_runs\tfrac_nc_pair_ge1");
    for metric in ["nc_pair", "tpr", "tp_of_cg", "fn_rate"] {
        for q in ["q1", "median", "q3"] {
            text.push_str(&format!("\t{metric}_{q}"));
        }
    }
    text.push('\n');
    text.push_str(&format!(
        "{}\t{}\t{}",
        batch.label,
        batch.n_reports,
        format_float(batch.frac_nc_pair_ge1)
    ));
    for qs in [batch.nc_pair, batch.tpr, batch.tp_of_cg, batch.fn_rate] {
        text.push_str(&format!(
            "\t{}\t{}\t{}",
            format_float(qs.q1),
            format_float(qs.median),
            format_float(qs.q3)
        ));
    }
    text.push('\n');
    write_atomic(summary_out, text.as_bytes())
}
