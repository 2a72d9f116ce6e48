//! The four pipeline stages. Each reads and extends the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::RunConfig;
use super::manifest::{RunManifest, MANIFEST_FILE};
use crate::certify::{
    certify_against_fields, parse_report_csv, report_csv, report_table, Category, CertificationReport,
};
use crate::error::{Error, Result};
use crate::lwr::{godunov_solve, lax_hopf_solve, read_dataset, write_dataset, DensityField, Environment};
use crate::nn::{read_model, sample_dataset, train, write_model, MlpParams, TrainReport};

pub const MODEL_FILE: &str = "model.tsem";
pub const TRAIN_REPORT_FILE: &str = "train_report.txt";
pub const CERT_CSV_FILE: &str = "certification.csv";
pub const CERT_TABLE_FILE: &str = "certification.txt";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const NPL_CURVE_FILE: &str = "npl_curve.csv";

/// Run-relative path of the dataset for free-flow speed `v_f`.
pub fn dataset_name(v_f: f64) -> String {
    format!("datasets/rho_vf{v_f}.tsed")
}

fn solve(config: &RunConfig, v_f: f64) -> Result<DensityField> {
    let env = config.env.with_v_f(v_f)?;
    Ok(lax_hopf_solve(&config.profile, &env, &config.grid)?.1)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads a dataset and checks it was produced for `env` on the config grid.
fn read_matching_dataset(path: &Path, config: &RunConfig, env: &Environment) -> Result<DensityField> {
    let field = read_dataset(&read_bytes(path)?)?;
    if *field.grid() != config.grid {
        return Err(Error::Pipeline(format!(
            "{} was generated on a different grid",
            path.display()
        )));
    }
    if field.env() != env {
        return Err(Error::Pipeline(format!(
            "{} holds v_f = {}, rho_m = {}; expected v_f = {}, rho_m = {}",
            path.display(),
            field.env().v_f(),
            field.env().rho_m(),
            env.v_f(),
            env.rho_m()
        )));
    }
    Ok(field)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOutcome {
    pub datasets: Vec<PathBuf>,
    /// Mean absolute Lax-Hopf vs Godunov difference in the training environment.
    pub godunov_l1: f64,
}

/// One dataset per speed in {training} ∪ sweep, plus a Godunov cross-check of
/// the training environment. Starts a fresh manifest.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateOutcome> {
    config.validate()?;
    let start = Instant::now();
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let speeds = config.all_speeds();
    let fields: Vec<DensityField> = speeds.par_iter().map(|&v| solve(config, v)).collect::<Result<_>>()?;

    let mut manifest = RunManifest::new(config);
    let mut datasets = Vec::with_capacity(speeds.len());
    for field in &fields {
        let rel = dataset_name(field.env().v_f());
        manifest.write_file(dir, &rel, &write_dataset(field))?;
        datasets.push(dir.join(rel));
    }

    let training = fields
        .iter()
        .find(|f| f.env().v_f() == config.env.v_f())
        .expect("training speed is in all_speeds");
    let godunov = godunov_solve(&config.profile, &config.env, &config.grid)?;
    let godunov_l1 = godunov.mean_abs_diff(training)?;
    log::info!(
        "Godunov cross-check at v_f = {}: mean |difference| = {godunov_l1:e}",
        config.env.v_f()
    );
    manifest.note(format!("godunov_l1 v_f={} {godunov_l1:e}", config.env.v_f()));

    manifest
        .wall_times
        .insert("generate".into(), start.elapsed().as_secs_f64());
    manifest.save(dir)?;
    Ok(GenerateOutcome { datasets, godunov_l1 })
}

/// Deterministic text form of a training report; wall time is left to the
/// manifest.
pub fn train_report_text(report: &TrainReport, model: &MlpParams, dataset: &str, config: &RunConfig) -> String {
    let mut out = String::new();
    let sizes: Vec<String> = model.layer_sizes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "dataset = {dataset}");
    let _ = writeln!(out, "samples = {}", config.sample_count);
    let _ = writeln!(out, "sample_seed = {}", config.sample_seed());
    let _ = writeln!(out, "init_seed = {}", config.train_config().seed);
    let _ = writeln!(out, "layer_sizes = {}", sizes.join(","));
    let _ = writeln!(out, "parameters = {}", model.num_params());
    let _ = writeln!(out, "final_mse = {}", report.final_mse);
    let _ = writeln!(out, "adam_iterations = {}", report.adam_iterations_run);
    let _ = writeln!(out, "lbfgs_iterations = {}", report.lbfgs_iterations_run);
    let _ = writeln!(out, "lbfgs_evaluations = {}", report.lbfgs_evaluations);
    let _ = writeln!(
        out,
        "lbfgs_stop = {}",
        report.lbfgs_stop.map_or("not run", |s| s.as_str())
    );
    out.push_str("\nphase,iteration,mse\n");
    for h in &report.mse_history {
        let phase = match h.phase {
            crate::nn::Phase::Adam => "adam",
            crate::nn::Phase::Lbfgs => "lbfgs",
        };
        let _ = writeln!(out, "{phase},{},{}", h.iteration, h.mse);
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpParams,
    pub report: TrainReport,
    pub model_path: PathBuf,
}

/// Samples the training dataset and trains a fresh network. `dataset`
/// defaults to the training environment's file in the run directory.
pub fn cmd_train(config: &RunConfig, dataset: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    let start = Instant::now();
    let dir = &config.output_dir;
    let default_path = dir.join(dataset_name(config.env.v_f()));
    let path = dataset.unwrap_or(&default_path);
    let field = read_matching_dataset(path, config, &config.env)?;
    let samples = sample_dataset(&field, config.sample_count, config.sample_seed())?;
    let (model, report) = train(&samples, &config.train_config())?;
    log::info!(
        "trained {} parameters to MSE {:e} in {:.1} s",
        model.num_params(),
        report.final_mse,
        report.wall_time_secs
    );

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = RunManifest::load_or_new(dir, config)?;
    manifest.write_file(dir, MODEL_FILE, &write_model(&model))?;
    // run-relative when the default dataset is used, so reruns elsewhere match
    let name = match dataset {
        None => dataset_name(config.env.v_f()),
        Some(p) => p.display().to_string(),
    };
    let text = train_report_text(&report, &model, &name, config);
    manifest.write_file(dir, TRAIN_REPORT_FILE, text.as_bytes())?;
    manifest
        .wall_times
        .insert("train".into(), start.elapsed().as_secs_f64());
    manifest.save(dir)?;
    Ok(TrainOutcome {
        model,
        report,
        model_path: dir.join(MODEL_FILE),
    })
}

#[derive(Debug, Clone)]
pub struct CertifyOutcome {
    pub report: CertificationReport,
    /// Datasets that were missing and had to be solved again.
    pub regenerated: Vec<PathBuf>,
}

/// Certifies the model in every sweep environment and writes the CSV and
/// text table. Verdicts are data: a Discard row is still a success.
pub fn cmd_certify(config: &RunConfig, model: Option<&Path>) -> Result<CertifyOutcome> {
    config.validate()?;
    let start = Instant::now();
    let dir = &config.output_dir;
    let default_model = dir.join(MODEL_FILE);
    let model_path = model.unwrap_or(&default_model);
    let model = read_model(&read_bytes(model_path)?)?;

    let mut manifest = RunManifest::load_or_new(dir, config)?;
    let speeds = config.all_speeds();
    let missing: Vec<f64> = speeds
        .iter()
        .copied()
        .filter(|&v| !dir.join(dataset_name(v)).is_file())
        .collect();
    let solved: Vec<DensityField> = missing.par_iter().map(|&v| solve(config, v)).collect::<Result<_>>()?;
    let mut regenerated = Vec::new();
    for field in &solved {
        let rel = dataset_name(field.env().v_f());
        log::info!("dataset {rel} was missing; regenerated");
        manifest.write_file(dir, &rel, &write_dataset(field))?;
        manifest.note(format!("regenerated {rel}"));
        regenerated.push(dir.join(rel));
    }

    let fields = speeds
        .iter()
        .map(|&v| read_matching_dataset(&dir.join(dataset_name(v)), config, &config.env.with_v_f(v)?))
        .collect::<Result<Vec<_>>>()?;
    let training = fields
        .iter()
        .find(|f| f.env().v_f() == config.env.v_f())
        .expect("training speed is in all_speeds");
    let sweep: Vec<DensityField> = fields
        .iter()
        .filter(|f| config.sweep_v_f.contains(&f.env().v_f()))
        .cloned()
        .collect();
    let report = certify_against_fields(&model, training, &sweep, &config.sweep_options())?;

    manifest.write_file(dir, CERT_CSV_FILE, report_csv(&report).as_bytes())?;
    manifest.write_file(dir, CERT_TABLE_FILE, report_table(&report).as_bytes())?;
    manifest
        .wall_times
        .insert("certify".into(), start.elapsed().as_secs_f64());
    manifest.save(dir)?;
    Ok(CertifyOutcome { report, regenerated })
}

/// `v_f,npl,category` rows in sweep order.
pub fn npl_curve_csv(report: &CertificationReport) -> String {
    let mut out = String::from("v_f,npl,category\n");
    for r in &report.rows {
        let _ = writeln!(out, "{},{},{}", r.env.v_f(), r.npl, r.category);
    }
    out
}

fn summary_text(report: &CertificationReport, train_report: Option<&str>, stale: &[String]) -> String {
    let mut out = String::new();
    let env = report.training_env;
    let _ = writeln!(
        out,
        "training environment: v_f = {} m/s, rho_m = {} veh/m",
        env.v_f(),
        env.rho_m()
    );
    if let Some(text) = train_report {
        for key in ["parameters", "final_mse", "lbfgs_stop"] {
            if let Some(line) = text.lines().find(|l| l.starts_with(&format!("{key} ="))) {
                let _ = writeln!(out, "{line}");
            }
        }
    }
    let _ = writeln!(out, "metric = {}", report.metric);
    let _ = writeln!(out, "normalization_constant = {}", report.normalization_constant);
    let _ = writeln!(
        out,
        "bands: C <= {} < R <= {} < D",
        report.thresholds.reuse_max(),
        report.thresholds.refine_max()
    );
    out.push('\n');
    out.push_str(&report_table(report));
    out.push('\n');
    for cat in [Category::Reuse, Category::Refine, Category::Discard] {
        let speeds: Vec<String> = report
            .rows
            .iter()
            .filter(|r| r.category == cat)
            .map(|r| r.env.v_f().to_string())
            .collect();
        let list = if speeds.is_empty() {
            "none".to_string()
        } else {
            speeds.join(", ")
        };
        let _ = writeln!(out, "{cat:?} ({cat}): {list}");
    }
    if stale.is_empty() {
        let _ = writeln!(out, "\nall manifest hashes match");
    } else {
        let _ = writeln!(out, "\nfiles changed since recorded: {}", stale.join(", "));
    }
    out
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub summary: String,
    pub report: CertificationReport,
}

/// Consolidated summary and plot-ready NPL curve for a certified run.
pub fn cmd_report(run_dir: &Path) -> Result<ReportOutcome> {
    let start = Instant::now();
    let mut manifest = RunManifest::load(run_dir)?;
    let csv_path = run_dir.join(CERT_CSV_FILE);
    if !csv_path.is_file() {
        return Err(Error::Pipeline(format!(
            "{} has no {CERT_CSV_FILE}; run certify first",
            run_dir.display()
        )));
    }
    let csv = String::from_utf8(read_bytes(&csv_path)?)
        .map_err(|_| Error::Pipeline(format!("{} is not UTF-8", csv_path.display())))?;
    let report = parse_report_csv(&csv)?;
    let train_text = fs::read_to_string(run_dir.join(TRAIN_REPORT_FILE)).ok();
    // the summary and curve are about to be rewritten, so skip them
    let stale: Vec<String> = manifest
        .verify(run_dir)
        .into_iter()
        .filter(|p| p != SUMMARY_FILE && p != NPL_CURVE_FILE && p != MANIFEST_FILE)
        .collect();
    let summary = summary_text(&report, train_text.as_deref(), &stale);

    manifest.write_file(run_dir, SUMMARY_FILE, summary.as_bytes())?;
    manifest.write_file(run_dir, NPL_CURVE_FILE, npl_curve_csv(&report).as_bytes())?;
    manifest
        .wall_times
        .insert("report".into(), start.elapsed().as_secs_f64());
    manifest.save(run_dir)?;
    Ok(ReportOutcome { summary, report })
}
