//! Spec execution: parallel run fan-out, per-run CSV/JSON artifacts, check
//! evaluation, slope reports, and a single-writer manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optimizers::{self, Algorithm, RunConstants, RunRecord};

use super::checks::{evaluate_check, CheckOutcome};
use super::slope::{slope, GapSeries, SlopeReport};
use super::{ExperimentSpec, HResult, OutputFormat};

/// Environment variable overriding the spec's output directory.
pub const OUTPUT_ENV: &str = "MDGS_OUT";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub algorithm: String,
    pub objective: String,
    pub seed: u64,
    pub t_max: usize,
    pub terminated_at_optimum: bool,
    pub constants: RunConstants,
    pub checks: Vec<CheckOutcome>,
    pub slopes: Vec<SlopeReport>,
    pub csv: Option<String>,
    pub json: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecReport {
    pub runs: Vec<RunSummary>,
    pub all_checks_passed: bool,
    pub manifest: Option<String>,
}

impl ExecReport {
    pub fn exit_code(&self) -> i32 {
        if self.all_checks_passed {
            0
        } else {
            1
        }
    }
}

/// Resolve the effective output directory (env override wins).
pub fn resolve_output_dir(spec: &ExperimentSpec) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => spec.output.dir.clone(),
    }
}

/// Execute every run of the spec. With `persist = false` no trajectory files
/// are written (the `check` subcommand), only the manifest is produced.
pub fn execute(spec: &ExperimentSpec, out_dir: &Path, persist: bool) -> HResult<ExecReport> {
    if spec.runs.is_empty() {
        return Ok(ExecReport { runs: Vec::new(), all_checks_passed: true, manifest: None });
    }
    fs::create_dir_all(out_dir)?;

    type WorkerOutput = (RunRecord, Vec<CheckOutcome>, Vec<SlopeReport>);
    let results: Vec<HResult<WorkerOutput>> = spec
        .runs
        .par_iter()
        .map(|cfg| {
            let record = optimizers::run(cfg)?;
            let mut outcomes = Vec::new();
            for check in &spec.checks {
                if let Some(outcome) = evaluate_check(*check, cfg, &record)? {
                    outcomes.push(outcome);
                }
            }
            let mut slopes = Vec::new();
            for &window in &spec.slope_windows {
                let series = match cfg.algorithm {
                    Algorithm::Md | Algorithm::Amd => GapSeries::Last,
                    Algorithm::Omd | Algorithm::Mp | Algorithm::Smd => GapSeries::Avg,
                };
                // Sparse or floored windows are reported as absent, not fatal.
                if let Ok(rep) = slope(&record, window, series) {
                    slopes.push(rep);
                }
            }
            Ok((record, outcomes, slopes))
        })
        .collect();

    let mut summaries = Vec::with_capacity(spec.runs.len());
    let mut all_passed = true;
    for (index, result) in results.into_iter().enumerate() {
        let (record, checks, slopes) = result?;
        all_passed &= checks.iter().all(|c| c.passed);

        let stem = format!("run_{index:03}_{}", record.config.algorithm.id());
        let mut csv_path = None;
        let mut json_path = None;
        if persist {
            if spec.output.formats.contains(&OutputFormat::Csv) {
                let path = out_dir.join(format!("{stem}.csv"));
                fs::write(&path, render_csv(&record))?;
                csv_path = Some(path.to_string_lossy().into_owned());
            }
            if spec.output.formats.contains(&OutputFormat::Json) {
                let path = out_dir.join(format!("{stem}.json"));
                let body = RunJson {
                    record: &record,
                    checks: &checks,
                    slopes: &slopes,
                };
                fs::write(&path, serde_json::to_string_pretty(&body).expect("serializable"))?;
                json_path = Some(path.to_string_lossy().into_owned());
            }
        }
        summaries.push(RunSummary {
            index,
            algorithm: record.config.algorithm.id().to_string(),
            objective: record.config.objective.preset_id().to_string(),
            seed: record.config.seed,
            t_max: record.config.t_max,
            terminated_at_optimum: record.terminated_at_optimum,
            constants: record.constants.clone(),
            checks,
            slopes,
            csv: csv_path,
            json: json_path,
        });
    }

    // Single-writer manifest after all workers are done.
    let manifest_path = out_dir.join("manifest.json");
    let report = ExecReport {
        runs: summaries,
        all_checks_passed: all_passed,
        manifest: Some(manifest_path.to_string_lossy().into_owned()),
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&report).expect("serializable"))?;
    Ok(report)
}

#[derive(Serialize)]
struct RunJson<'a> {
    record: &'a RunRecord,
    checks: &'a [CheckOutcome],
    slopes: &'a [SlopeReport],
}

/// Stable CSV schema; absent values render as empty fields.
///
/// Columns: t,f_gap,avg_gap,grad_dual_norm,aux_grad_dual_norm,step,move,e_t,bound
pub fn render_csv(record: &RunRecord) -> String {
    let mut out = String::new();
    out.push_str("t,f_gap,avg_gap,grad_dual_norm,aux_grad_dual_norm,step,move,e_t,bound\n");
    for (i, rec) in record.records.iter().enumerate() {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let bound = record.bound_curve.get(i).map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            rec.t,
            rec.f_gap,
            rec.avg_gap,
            rec.grad_dual_norm,
            opt(rec.aux_grad_dual_norm),
            rec.step,
            rec.move_norm,
            opt(rec.e_t),
            bound
        );
    }
    out
}

/// Convenience wrapper: parse, resolve the output dir, execute.
pub fn run_spec_text(text: &str, persist: bool) -> HResult<ExecReport> {
    let spec = super::parse_spec(text)?;
    let dir = resolve_output_dir(&spec);
    execute(&spec, &dir, persist)
}
