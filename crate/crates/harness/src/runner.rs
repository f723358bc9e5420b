//! Paired Monte Carlo execution across optimizers with CSV/JSON
//! persistence. Every run writes one trajectory file; the experiment writes
//! one summary CSV and one summary JSON. Output bytes depend only on the
//! config and master seed, not on the parallelism degree.

use crate::config::ResolvedExperiment;
use crate::HarnessError;
use rayon::prelude::*;
use rsgd_core::mean_std;
use rsgd_core::optimizers::{run, OptimizerConfig, RunRecord};
use rsgd_core::stream::RngFactory;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Coordinates are written inline up to this dimension; above it only the
/// iterate norm is recorded, keeping files inspectable.
pub const MAX_INLINE_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub lambda: Option<f64>,
    /// Chunk count M.
    pub m: usize,
    pub alpha: f64,
    pub runs: usize,
    pub diverged: usize,
    pub final_loss_mean: f64,
    pub final_loss_std: f64,
    pub avg_grad_norm_sq_mean: f64,
    pub avg_grad_norm_sq_std: f64,
    pub wall_seconds_mean: f64,
    pub wall_seconds_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub config_hash: String,
    pub master_seed: u64,
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub config_hash: String,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub trajectory_paths: Vec<PathBuf>,
    pub summary_csv: PathBuf,
    pub summary_json: PathBuf,
}

pub fn trajectory_header(dim: usize) -> String {
    let mut header = String::from("t");
    if dim <= MAX_INLINE_DIM {
        for k in 0..dim {
            write!(header, ",x{k}").unwrap();
        }
    } else {
        header.push_str(",x_norm");
    }
    header.push_str(",loss,grad_norm_sq,jstar,clipped,step_norm");
    header
}

pub const SUMMARY_HEADER: &str = "label,lambda,m,alpha,runs,diverged,final_loss_mean,final_loss_std,avg_grad_norm_sq_mean,avg_grad_norm_sq_std,wall_seconds_mean,wall_seconds_std";

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_bool(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders one trajectory as CSV: a provenance comment, a header row, one
/// row per recorded iterate, and a trailing `# diverged` marker when the
/// run was truncated. Wall time is deliberately absent so reruns are
/// byte-identical.
pub fn trajectory_csv(record: &RunRecord, config_hash: &str, master_seed: u64, dim: usize) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# config={} optimizer={} run={} seed={}",
        config_hash, record.label, record.run_id, master_seed
    )
    .unwrap();
    writeln!(out, "{}", trajectory_header(dim)).unwrap();
    for (t, row) in record.rows.iter().enumerate() {
        write!(out, "{t}").unwrap();
        if dim <= MAX_INLINE_DIM {
            for v in &row.iterate {
                write!(out, ",{v}").unwrap();
            }
        } else {
            let norm = row.iterate.iter().map(|v| v * v).sum::<f64>().sqrt();
            write!(out, ",{norm}").unwrap();
        }
        writeln!(
            out,
            ",{},{},{},{},{}",
            row.loss,
            row.grad_norm_sq,
            opt_usize(row.selected),
            opt_bool(row.clipped),
            opt_f64(row.step_norm)
        )
        .unwrap();
    }
    if record.diverged {
        writeln!(out, "# diverged").unwrap();
    }
    out
}

/// A trajectory read back from disk; everything the summary needs is
/// recoverable from the file alone.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub config_hash: String,
    pub label: String,
    pub run_id: u64,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub diverged: bool,
}

impl TrajectoryFile {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryFile, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    parse_trajectory(&text).map_err(|e| HarnessError::Run(format!("{}: {e}", path.display())))
}

pub fn parse_trajectory(text: &str) -> Result<TrajectoryFile, String> {
    let mut lines = text.lines();
    let meta = lines.next().ok_or("empty trajectory file")?;
    if !meta.starts_with("# config=") {
        return Err("missing provenance comment".into());
    }
    let mut config_hash = String::new();
    let mut label = String::new();
    let mut run_id = 0u64;
    for field in meta.trim_start_matches("# ").split_whitespace() {
        if let Some(v) = field.strip_prefix("config=") {
            config_hash = v.to_string();
        } else if let Some(v) = field.strip_prefix("optimizer=") {
            label = v.to_string();
        } else if let Some(v) = field.strip_prefix("run=") {
            run_id = v.parse().map_err(|_| "bad run id")?;
        }
    }
    let header: Vec<String> = lines
        .next()
        .ok_or("missing header row")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    let mut diverged = false;
    for line in lines {
        if line == "# diverged" {
            diverged = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cells: Vec<Option<f64>> = line
            .split(',')
            .map(|c| {
                if c.is_empty() {
                    None
                } else if c == "true" {
                    Some(1.0)
                } else if c == "false" {
                    Some(0.0)
                } else {
                    c.parse::<f64>().ok()
                }
            })
            .collect();
        if cells.len() != header.len() {
            return Err(format!(
                "row has {} cells, header has {}",
                cells.len(),
                header.len()
            ));
        }
        rows.push(cells);
    }
    Ok(TrajectoryFile {
        config_hash,
        label,
        run_id,
        header,
        rows,
        diverged,
    })
}

pub fn summary_csv(rows: &[SummaryRow], config_hash: &str) -> String {
    let mut out = String::new();
    writeln!(out, "# config={config_hash}").unwrap();
    writeln!(out, "{SUMMARY_HEADER}").unwrap();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.label,
            opt_f64(r.lambda),
            r.m,
            r.alpha,
            r.runs,
            r.diverged,
            r.final_loss_mean,
            r.final_loss_std,
            r.avg_grad_norm_sq_mean,
            r.avg_grad_norm_sq_std,
            r.wall_seconds_mean,
            r.wall_seconds_std
        )
        .unwrap();
    }
    out
}

/// Statistics over the completed runs of one optimizer; diverged runs are
/// counted separately instead of polluting the means.
pub fn summarize(cfg: &OptimizerConfig, records: &[&RunRecord]) -> SummaryRow {
    let completed: Vec<&&RunRecord> = records.iter().filter(|r| !r.diverged).collect();
    let finals: Vec<f64> = completed.iter().map(|r| r.final_loss()).collect();
    let avgs: Vec<f64> = completed
        .iter()
        .map(|r| r.time_avg_grad_norm_sq())
        .collect();
    let walls: Vec<f64> = completed.iter().map(|r| r.step_seconds).collect();
    let (final_loss_mean, final_loss_std) = mean_std(&finals);
    let (avg_mean, avg_std) = mean_std(&avgs);
    let (wall_mean, wall_std) = mean_std(&walls);
    SummaryRow {
        label: cfg.label.clone(),
        lambda: cfg.lambda,
        m: cfg.chunk_count(),
        alpha: cfg.step.resolve(cfg.horizon),
        runs: records.len(),
        diverged: records.len() - completed.len(),
        final_loss_mean,
        final_loss_std,
        avg_grad_norm_sq_mean: avg_mean,
        avg_grad_norm_sq_std: avg_std,
        wall_seconds_mean: wall_mean,
        wall_seconds_std: wall_std,
    }
}

pub fn trajectory_file_name(label: &str, run_id: u64) -> String {
    format!("{label}__run{run_id}.csv")
}

/// Executes (optimizers x runs) with paired noise streams and writes all
/// artifacts under the experiment's output directory.
pub fn run_experiment(
    experiment: &ResolvedExperiment,
    out_override: Option<&Path>,
) -> Result<ExperimentOutput, HarnessError> {
    let out_dir = out_override.unwrap_or(&experiment.output_dir);
    std::fs::create_dir_all(out_dir)?;
    let factory = RngFactory::new(experiment.master_seed);

    let jobs: Vec<(usize, u64)> = (0..experiment.optimizers.len())
        .flat_map(|oi| (0..experiment.runs as u64).map(move |r| (oi, r)))
        .collect();
    let results: Vec<Result<(usize, u64, RunRecord, PathBuf), HarnessError>> = jobs
        .par_iter()
        .map(|&(oi, run_id)| {
            let cfg = &experiment.optimizers[oi];
            let record = run(&experiment.problem, &experiment.noise, cfg, &factory, run_id)
                .map_err(|e| HarnessError::Run(format!("optimizer `{}`: {e}", cfg.label)))?;
            let csv = trajectory_csv(
                &record,
                &experiment.config_hash,
                experiment.master_seed,
                experiment.problem.dim(),
            );
            let path = out_dir.join(trajectory_file_name(&cfg.label, run_id));
            std::fs::write(&path, csv)?;
            Ok((oi, run_id, record, path))
        })
        .collect();

    let mut records: Vec<RunRecord> = Vec::with_capacity(jobs.len());
    let mut trajectory_paths = Vec::with_capacity(jobs.len());
    let mut by_optimizer: Vec<Vec<&RunRecord>> = vec![Vec::new(); experiment.optimizers.len()];
    let mut flat: Vec<(usize, RunRecord, PathBuf)> = Vec::with_capacity(jobs.len());
    for r in results {
        let (oi, _run_id, record, path) = r?;
        flat.push((oi, record, path));
    }
    flat.sort_by_key(|(oi, record, _)| (*oi, record.run_id));
    for (_, record, path) in &flat {
        trajectory_paths.push(path.clone());
        records.push(record.clone());
    }
    for (idx, (oi, _, _)) in flat.iter().enumerate() {
        by_optimizer[*oi].push(&records[idx]);
    }

    let summary: Vec<SummaryRow> = experiment
        .optimizers
        .iter()
        .zip(&by_optimizer)
        .map(|(cfg, recs)| summarize(cfg, recs))
        .collect();

    let summary_csv_path = out_dir.join("summary.csv");
    std::fs::write(&summary_csv_path, summary_csv(&summary, &experiment.config_hash))?;
    let summary_json_path = out_dir.join("summary.json");
    let file = SummaryFile {
        config_hash: experiment.config_hash.clone(),
        master_seed: experiment.master_seed,
        rows: summary.clone(),
    };
    let mut json = serde_json::to_string_pretty(&file).expect("summary serializes");
    json.push('\n');
    std::fs::write(&summary_json_path, json)?;

    Ok(ExperimentOutput {
        config_hash: experiment.config_hash.clone(),
        records,
        summary,
        trajectory_paths,
        summary_csv: summary_csv_path,
        summary_json: summary_json_path,
    })
}

/// Recomputes one optimizer's summary statistics from its trajectory files
/// alone; the independent route for the no-hidden-state check.
pub fn reaggregate_from_files(files: &[TrajectoryFile], horizon: usize) -> (f64, f64, usize) {
    let mut finals = Vec::new();
    let mut avgs = Vec::new();
    let mut diverged = 0usize;
    for f in files {
        if f.diverged {
            diverged += 1;
            continue;
        }
        let loss = f.column("loss").expect("loss column");
        finals.push(loss.last().unwrap().unwrap());
        let gns = f.column("grad_norm_sq").expect("grad column");
        avgs.push(gns.iter().map(|v| v.unwrap()).sum::<f64>() / horizon as f64);
    }
    let (final_mean, _) = mean_std(&finals);
    let (avg_mean, _) = mean_std(&avgs);
    (final_mean, avg_mean, diverged)
}
