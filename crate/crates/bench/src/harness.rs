//! Running scenarios and writing their records.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mcfc_core::{
    apply_failures, beamwidth, cp_correct, dynamic_range, exhaustive_min, max_sll, pattern_db,
    AngularRegion, CorrectionResult, Excitations, OracleOutcome, TraceEvent, PATTERN_GRID_POINTS,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scenario::{BuiltScenario, ScenarioSpec};
use crate::HarnessError;

/// Rounds to six significant digits so records diff cleanly.
pub fn sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

fn sig6_opt(x: Option<f64>) -> Option<f64> {
    x.map(sig6)
}

fn sig6_vec(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    v.into_iter().map(sig6).collect()
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Output directory; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Samples of the exported pattern grid.
    pub grid_points: usize,
    /// Overrides the spec's constraint tolerance.
    pub constraint_tol_db: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: None,
            grid_points: PATTERN_GRID_POINTS,
            constraint_tol_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayMetrics {
    pub sll_db: f64,
    /// Beamwidth at the original sidelobe level; absent without a mainlobe.
    pub bw_deg: Option<f64>,
    pub dynamic_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub name: String,
    pub status: String,
    pub message: Option<String>,
    pub n_elements: usize,
    pub faulty_indices: Vec<usize>,
    pub n_failed: usize,
    pub n_reconfigurable: usize,
    pub eta_f_percent: f64,
    pub eta_c_percent: f64,
    pub target_db: f64,
    pub constraint_tol_db: f64,
    pub bw_target_deg: Option<f64>,
    pub region_samples: usize,
    pub original: ArrayMetrics,
    pub faulty: ArrayMetrics,
    pub corrected: Option<ArrayMetrics>,
    pub n_corrections: Option<usize>,
    pub eta_c_hat_percent: Option<f64>,
    pub l1: Option<f64>,
    pub achieved_phi_db: Option<f64>,
    pub k_opt: Option<usize>,
    /// 1-based indices of corrected elements.
    pub support: Vec<usize>,
    pub delta_re: Vec<f64>,
    pub delta_im: Vec<f64>,
    /// 1-based indices flagged required / non-required at the end.
    pub required: Vec<usize>,
    pub non_required: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: ResultRecord,
    pub result: Option<CorrectionResult>,
    pub elapsed_s: f64,
}

fn one_based(flags: &[bool]) -> Vec<usize> {
    (0..flags.len())
        .filter(|&k| flags[k])
        .map(|k| k + 1)
        .collect()
}

fn array_metrics(built: &BuiltScenario, w: &Excitations) -> Result<ArrayMetrics, HarnessError> {
    let grid = AngularRegion::uniform_grid(PATTERN_GRID_POINTS)?;
    Ok(ArrayMetrics {
        sll_db: sig6(max_sll(&built.geometry, w, &built.metric.region)?),
        bw_deg: sig6_opt(beamwidth(&built.geometry, w, built.original_sll_db, &grid).ok()),
        dynamic_range: sig6(dynamic_range(w)?),
    })
}

fn base_record(
    spec: &ScenarioSpec,
    built: &BuiltScenario,
    faulty: &Excitations,
) -> Result<ResultRecord, HarnessError> {
    let n = built.geometry.element_count();
    let mut faulty_indices = spec.faulty_indices.clone();
    faulty_indices.sort_unstable();
    Ok(ResultRecord {
        name: spec.name.clone(),
        status: "ok".into(),
        message: None,
        n_elements: n,
        faulty_indices,
        n_failed: built.scenario.n_failed(),
        n_reconfigurable: built.scenario.n_reconfigurable(),
        eta_f_percent: sig6(100.0 * built.scenario.n_failed() as f64 / n as f64),
        eta_c_percent: sig6(100.0 * built.scenario.n_reconfigurable() as f64 / n as f64),
        target_db: sig6(built.metric.target_db),
        constraint_tol_db: sig6(built.config.constraint_tol_db),
        bw_target_deg: sig6_opt(built.bw_target_deg),
        region_samples: built.metric.region.len(),
        original: array_metrics(built, &built.original)?,
        faulty: array_metrics(built, faulty)?,
        corrected: None,
        n_corrections: None,
        eta_c_hat_percent: None,
        l1: None,
        achieved_phi_db: None,
        k_opt: None,
        support: Vec::new(),
        delta_re: Vec::new(),
        delta_im: Vec::new(),
        required: Vec::new(),
        non_required: Vec::new(),
    })
}

fn build_with(spec: &ScenarioSpec, opts: &RunOptions) -> Result<BuiltScenario, HarnessError> {
    let mut built = spec.build()?;
    if let Some(tol) = opts.constraint_tol_db {
        built.config.constraint_tol_db = tol;
        built.config.validate()?;
    }
    Ok(built)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_pattern(
    path: &Path,
    built: &BuiltScenario,
    faulty: &Excitations,
    corrected: Option<&Excitations>,
    grid_points: usize,
) -> Result<(), HarnessError> {
    let grid = AngularRegion::uniform_grid(grid_points)?;
    let orig = pattern_db(&built.geometry, &built.original, &grid)?;
    let fault = pattern_db(&built.geometry, faulty, &grid)?;
    let corr = corrected
        .map(|w| pattern_db(&built.geometry, w, &grid))
        .transpose()?;
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["u", "original_db", "faulty_db", "corrected_db"])?;
    for (i, &u) in grid.samples().iter().enumerate() {
        let c = corr
            .as_ref()
            .map_or(String::new(), |c| sig6(c[i]).to_string());
        out.write_record([
            sig6(u).to_string(),
            sig6(orig[i]).to_string(),
            sig6(fault[i]).to_string(),
            c,
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn write_trace(path: &Path, result: &CorrectionResult) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["k", "step", "n_least", "event", "l0", "l1", "phi_db"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| sig6(x).to_string());
    for t in &result.trace {
        let event = match t.event {
            TraceEvent::Accepted => "accepted",
            TraceEvent::Backtracked => "backtracked",
            TraceEvent::Converged => "converged",
        };
        out.write_record([
            t.k.to_string(),
            t.step.to_string(),
            t.n_least.map_or(String::new(), |n| (n + 1).to_string()),
            event.to_string(),
            t.l0.map_or(String::new(), |v| v.to_string()),
            opt(t.l1),
            opt(t.phi_db),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Runs the correction loop on one scenario and writes its record, pattern
/// and trace files. An infeasible target still writes the record and pattern
/// before the error is returned.
pub fn run_scenario(spec: &ScenarioSpec, opts: &RunOptions) -> Result<RunOutput, HarnessError> {
    let started = Instant::now();
    let built = build_with(spec, opts)?;
    let faulty = apply_failures(&built.original, &built.scenario)?;
    let mut record = base_record(spec, &built, &faulty)?;
    let outcome = cp_correct(
        &built.geometry,
        &built.original,
        &built.scenario,
        &built.metric,
        &built.config,
    );
    let elapsed_s = started.elapsed().as_secs_f64();

    let result = match outcome {
        Ok(r) => {
            let n_c = built.scenario.n_reconfigurable();
            record.corrected = Some(array_metrics(&built, &r.corrected)?);
            record.n_corrections = Some(r.n_corrections);
            record.eta_c_hat_percent = Some(sig6(100.0 * r.n_corrections as f64 / n_c as f64));
            record.l1 = Some(sig6(r.l1));
            record.achieved_phi_db = Some(sig6(r.achieved_phi_db));
            record.k_opt = Some(r.k_opt);
            record.support = (0..r.delta_opt.len())
                .filter(|&k| r.delta_opt[k].norm() > built.config.zero_threshold)
                .map(|k| k + 1)
                .collect();
            record.delta_re = sig6_vec(r.delta_opt.iter().map(|c| c.re));
            record.delta_im = sig6_vec(r.delta_opt.iter().map(|c| c.im));
            record.required = one_based(&r.required);
            record.non_required = one_based(&r.non_required);
            Some(r)
        }
        Err(e) if e.is_infeasible() => {
            record.status = "infeasible".into();
            record.message = Some(e.to_string());
            None
        }
        Err(e) => return Err(e.into()),
    };

    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        let stem = file_stem(&spec.name);
        write_json(&dir.join(format!("{stem}.json")), &record)?;
        write_pattern(
            &dir.join(format!("{stem}.pattern.csv")),
            &built,
            &faulty,
            result.as_ref().map(|r| &r.corrected),
            opts.grid_points,
        )?;
        if let Some(r) = &result {
            write_trace(&dir.join(format!("{stem}.trace.csv")), r)?;
        }
    }

    match result {
        Some(r) => Ok(RunOutput {
            record,
            result: Some(r),
            elapsed_s,
        }),
        None => Err(HarnessError::Core(mcfc_core::Error::Infeasible(
            record.message.clone().unwrap_or_default(),
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub name: String,
    /// `minimum` or `infeasible_up_to`.
    pub status: String,
    pub max_support: usize,
    pub support: Vec<usize>,
    pub n_corrections: Option<usize>,
    pub l1: Option<f64>,
    pub achieved_phi_db: Option<f64>,
    pub corrected: Option<ArrayMetrics>,
    pub solves: u64,
}

/// Exhaustive minimum for a scenario, written as `<name>.oracle.json`.
pub fn run_oracle(
    spec: &ScenarioSpec,
    max_support: usize,
    opts: &RunOptions,
) -> Result<OracleRecord, HarnessError> {
    let built = build_with(spec, opts)?;
    let o = exhaustive_min(
        &built.geometry,
        &built.original,
        &built.scenario,
        &built.metric,
        &built.config,
        max_support,
    )?;
    let mut record = OracleRecord {
        name: spec.name.clone(),
        status: String::new(),
        max_support,
        support: Vec::new(),
        n_corrections: None,
        l1: None,
        achieved_phi_db: None,
        corrected: None,
        solves: o.solves,
    };
    match &o.outcome {
        OracleOutcome::Minimum { support, result } => {
            record.status = "minimum".into();
            record.support = support.iter().map(|k| k + 1).collect();
            record.n_corrections = Some(support.len());
            record.l1 = Some(sig6(result.l1));
            record.achieved_phi_db = Some(sig6(result.achieved_phi_db));
            record.corrected = Some(array_metrics(&built, &result.corrected)?);
        }
        OracleOutcome::InfeasibleUpTo { .. } => record.status = "infeasible_up_to".into(),
    }
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        write_json(
            &dir.join(format!("{}.oracle.json", file_stem(&spec.name))),
            &record,
        )?;
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub target_db: f64,
    pub status: String,
    pub n_corrections: Option<usize>,
    pub achieved_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub n_corrections: usize,
    pub best_sll_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub frontier: Vec<FrontierPoint>,
}

/// Lowest achieved level using at most `n` corrections, for every `n` from
/// the smallest to the largest count seen.
pub fn frontier(points: &[SweepPoint]) -> Vec<FrontierPoint> {
    let solved: Vec<(usize, f64)> = points
        .iter()
        .filter_map(|p| Some((p.n_corrections?, p.achieved_db?)))
        .collect();
    let Some(lo) = solved.iter().map(|p| p.0).min() else {
        return Vec::new();
    };
    let hi = solved.iter().map(|p| p.0).max().unwrap_or(lo);
    (lo..=hi)
        .map(|n| FrontierPoint {
            n_corrections: n,
            best_sll_db: solved
                .iter()
                .filter(|p| p.0 <= n)
                .map(|p| p.1)
                .fold(f64::INFINITY, f64::min),
        })
        .collect()
}

/// Runs the correction for each target (loosest first) and reports the
/// corrections-versus-level trade-off.
pub fn tradeoff_sweep(
    spec: &ScenarioSpec,
    targets: &[f64],
    opts: &RunOptions,
) -> Result<SweepReport, HarnessError> {
    if targets.windows(2).any(|w| w[1] > w[0]) {
        return Err(HarnessError::Invalid(
            "sweep targets must be sorted from loosest to tightest".into(),
        ));
    }
    let built = build_with(spec, opts)?;
    let points: Vec<SweepPoint> = targets
        .par_iter()
        .map(|&t| {
            let mut metric = built.metric.clone();
            metric.target_db = t;
            match cp_correct(
                &built.geometry,
                &built.original,
                &built.scenario,
                &metric,
                &built.config,
            ) {
                Ok(r) => SweepPoint {
                    target_db: sig6(t),
                    status: "ok".into(),
                    n_corrections: Some(r.n_corrections),
                    achieved_db: Some(sig6(r.achieved_phi_db)),
                },
                Err(e) => SweepPoint {
                    target_db: sig6(t),
                    status: if e.is_infeasible() {
                        "infeasible"
                    } else {
                        "error"
                    }
                    .into(),
                    n_corrections: None,
                    achieved_db: None,
                },
            }
        })
        .collect();
    let report = SweepReport {
        frontier: frontier(&points),
        points,
    };
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        let stem = file_stem(&spec.name);
        let mut out = csv::Writer::from_path(dir.join(format!("{stem}.sweep.csv")))?;
        for p in &report.points {
            out.serialize(p)?;
        }
        out.flush()?;
        let mut out = csv::Writer::from_path(dir.join(format!("{stem}.frontier.csv")))?;
        for p in &report.frontier {
            out.serialize(p)?;
        }
        out.flush()?;
    }
    Ok(report)
}

/// Maps 1-based fault indices of a `base_n` array onto an `m * base_n` array,
/// growing each fault into `count` adjacent ones away from the array centre.
pub fn scale_failure_scenario(
    base_faults: &[usize],
    base_n: usize,
    m: usize,
    count: usize,
) -> Result<Vec<usize>, HarnessError> {
    if m == 0 || count == 0 || base_n == 0 {
        return Err(HarnessError::Invalid(
            "base size, scale factor and count must be positive".into(),
        ));
    }
    let total = m * base_n;
    let mut out = Vec::with_capacity(base_faults.len() * count);
    for &f in base_faults {
        if f == 0 || f > base_n {
            return Err(HarnessError::Invalid(format!(
                "fault {f} outside 1..={base_n}"
            )));
        }
        if 2 * f == base_n {
            return Err(HarnessError::Invalid(format!(
                "fault {f} sits exactly at the array centre"
            )));
        }
        let lower_half = 2 * f < base_n;
        for j in 0..count {
            let idx = if lower_half {
                (m * f).checked_sub(j)
            } else {
                Some(m * f + j)
            };
            match idx {
                Some(i) if (1..=total).contains(&i) => out.push(i),
                _ => {
                    return Err(HarnessError::Invalid(format!(
                        "scaled index from fault {f} leaves 1..={total}"
                    )))
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub file: String,
    pub name: String,
    pub status: String,
    pub n_elements: Option<usize>,
    pub eta_f_percent: Option<f64>,
    pub sll_original_db: Option<f64>,
    pub sll_faulty_db: Option<f64>,
    pub target_db: Option<f64>,
    pub sll_corrected_db: Option<f64>,
    pub bw_original_deg: Option<f64>,
    pub bw_faulty_deg: Option<f64>,
    pub bw_target_deg: Option<f64>,
    pub bw_corrected_deg: Option<f64>,
    pub n_corrections: Option<usize>,
    pub eta_c_percent: Option<f64>,
    pub eta_c_hat_percent: Option<f64>,
    pub elapsed_s: Option<f64>,
    pub message: Option<String>,
}

impl SummaryRow {
    fn failed(file: String, name: String, status: &str, message: String) -> Self {
        Self {
            file,
            name,
            status: status.into(),
            n_elements: None,
            eta_f_percent: None,
            sll_original_db: None,
            sll_faulty_db: None,
            target_db: None,
            sll_corrected_db: None,
            bw_original_deg: None,
            bw_faulty_deg: None,
            bw_target_deg: None,
            bw_corrected_deg: None,
            n_corrections: None,
            eta_c_percent: None,
            eta_c_hat_percent: None,
            elapsed_s: None,
            message: Some(message),
        }
    }

    fn from_record(file: String, r: &ResultRecord, elapsed_s: f64) -> Self {
        Self {
            file,
            name: r.name.clone(),
            status: r.status.clone(),
            n_elements: Some(r.n_elements),
            eta_f_percent: Some(r.eta_f_percent),
            sll_original_db: Some(r.original.sll_db),
            sll_faulty_db: Some(r.faulty.sll_db),
            target_db: Some(r.target_db),
            sll_corrected_db: r.corrected.as_ref().map(|c| c.sll_db),
            bw_original_deg: r.original.bw_deg,
            bw_faulty_deg: r.faulty.bw_deg,
            bw_target_deg: r.bw_target_deg,
            bw_corrected_deg: r.corrected.as_ref().and_then(|c| c.bw_deg),
            n_corrections: r.n_corrections,
            eta_c_percent: Some(r.eta_c_percent),
            eta_c_hat_percent: r.eta_c_hat_percent,
            elapsed_s: Some(sig6(elapsed_s)),
            message: r.message.clone(),
        }
    }
}

/// Runs every `*.toml` scenario in `dir` (sorted by file name) with up to
/// `parallelism` concurrent runs, and writes `summary.csv` to the output
/// directory when one is set.
pub fn batch_run(
    dir: &Path,
    parallelism: usize,
    opts: &RunOptions,
) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    let rows: Vec<SummaryRow> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let file = path
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let spec = match ScenarioSpec::load(path) {
                    Ok(s) => s,
                    Err(e) => {
                        return SummaryRow::failed(file, String::new(), "error", e.to_string())
                    }
                };
                let started = Instant::now();
                match run_scenario(&spec, opts) {
                    Ok(out) => SummaryRow::from_record(file, &out.record, out.elapsed_s),
                    Err(e) if e.is_infeasible() => {
                        // The record was written; rebuild the summary from it.
                        match infeasible_row(&spec, opts, &file, started, &e) {
                            Ok(row) => row,
                            Err(e) => {
                                SummaryRow::failed(file, spec.name.clone(), "error", e.to_string())
                            }
                        }
                    }
                    Err(e) => SummaryRow::failed(file, spec.name.clone(), "error", e.to_string()),
                }
            })
            .collect()
    });

    if let Some(out) = &opts.out_dir {
        fs::create_dir_all(out)?;
        let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(rows)
}

fn infeasible_row(
    spec: &ScenarioSpec,
    opts: &RunOptions,
    file: &str,
    started: Instant,
    err: &HarnessError,
) -> Result<SummaryRow, HarnessError> {
    let built = build_with(spec, opts)?;
    let faulty = apply_failures(&built.original, &built.scenario)?;
    let mut record = base_record(spec, &built, &faulty)?;
    record.status = "infeasible".into();
    record.message = Some(err.to_string());
    Ok(SummaryRow::from_record(
        file.to_string(),
        &record,
        started.elapsed().as_secs_f64(),
    ))
}
