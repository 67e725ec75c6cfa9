//! CSV tables and SVG figures. CSV files are canonical; every SVG is drawn
//! from the same rows and can be regenerated from the CSV alone.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wxnas_core::nas::{GenerationRecord, Individual, Representatives};
use wxnas_core::robustness::{Coverage, ImportanceReport};
use wxnas_core::transfer::TransferReport;
use wxnas_core::Feature;

use crate::bench::BenchResult;
use crate::error::{AppError, Result};
use crate::svg::{self, BarPanel, Scale, ScatterPoint, Series};

fn write_text(path: &Path, s: &str) -> Result<PathBuf> {
    crate::binio::write_atomic(path, s.as_bytes())?;
    Ok(path.to_path_buf())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<PathBuf> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::Format(e.to_string()))?;
    crate::binio::write_atomic(path, &bytes)?;
    Ok(path.to_path_buf())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(AppError::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub params: usize,
    pub rmse: f64,
    pub latency_ms: Option<f64>,
    pub size_bytes: Option<u64>,
}

/// `comparison.csv` plus a three-panel bar chart: RMSE, parameters on a log
/// axis, and latency.
pub fn emit_comparison_report(dir: &Path, rows: &[ComparisonRow]) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(AppError::Config("comparison needs at least one model".into()));
    }
    let csv = write_csv(&dir.join("comparison.csv"), rows)?;
    let labels: Vec<String> = rows.iter().map(|r| r.model.clone()).collect();
    let panels = [
        BarPanel { title: "RMSE (scaled)", scale: Scale::Linear, values: rows.iter().map(|r| Some(r.rmse)).collect() },
        BarPanel {
            title: "parameters (log scale)",
            scale: Scale::Log,
            values: rows.iter().map(|r| (r.params > 0).then_some(r.params as f64)).collect(),
        },
        BarPanel { title: "latency (ms)", scale: Scale::Linear, values: rows.iter().map(|r| r.latency_ms).collect() },
    ];
    let svg = write_text(&dir.join("comparison.svg"), &svg::bar_panels("Architecture comparison", &labels, &panels))?;
    Ok(vec![csv, svg])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub genome: String,
    pub val_rmse: f64,
    pub params: usize,
    pub depth: usize,
    /// `accuracy`, `balanced` and/or `efficiency`, joined by `+`.
    pub representative: Option<String>,
}

pub fn representative_tags(index: usize, reps: Option<Representatives>) -> Option<String> {
    let r = reps?;
    let tags: Vec<&str> = [(r.accuracy, "accuracy"), (r.balanced, "balanced"), (r.efficiency, "efficiency")]
        .into_iter()
        .filter(|&(i, _)| i == index)
        .map(|(_, t)| t)
        .collect();
    (!tags.is_empty()).then(|| tags.join("+"))
}

pub fn front_rows(front: &[Individual]) -> Vec<FrontRow> {
    let reps = wxnas_core::nas::representatives(front);
    front
        .iter()
        .enumerate()
        .map(|(i, ind)| FrontRow {
            genome: ind.genome.to_string(),
            val_rmse: ind.objectives.val_rmse,
            params: ind.objectives.param_count,
            depth: ind.objectives.depth,
            representative: representative_tags(i, reps),
        })
        .collect()
}

pub fn emit_front_csv(dir: &Path, rows: &[FrontRow]) -> Result<PathBuf> {
    write_csv(&dir.join("front.csv"), rows)
}

/// `pareto.csv` and a scatter of RMSE against parameters (log x axis) with
/// representatives highlighted.
pub fn emit_pareto_plot(dir: &Path, rows: &[FrontRow]) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(AppError::Config("Pareto front is empty".into()));
    }
    let csv = write_csv(&dir.join("pareto.csv"), rows)?;
    let points: Vec<ScatterPoint> = rows
        .iter()
        .map(|r| ScatterPoint {
            x: r.params as f64,
            y: r.val_rmse,
            label: format!("{} ({} params, RMSE {:.4})", r.genome, r.params, r.val_rmse),
            highlight: r.representative.clone(),
        })
        .collect();
    let svg = write_text(
        &dir.join("pareto.svg"),
        &svg::scatter("Pareto front", "parameters (log scale)", "validation RMSE", Scale::Log, &points),
    )?;
    Ok(vec![csv, svg])
}

#[derive(Debug, Serialize)]
struct MemberJson {
    genome: String,
    val_rmse: f64,
    params: usize,
    depth: usize,
    rank: usize,
    /// `null` encodes an infinite (boundary) distance.
    crowding: Option<f64>,
}

#[derive(Debug, Serialize)]
struct GenerationJson {
    generation: usize,
    evaluations: usize,
    population: Vec<MemberJson>,
    front: Vec<String>,
    failures: Vec<(String, String)>,
}

fn member(i: &Individual) -> MemberJson {
    MemberJson {
        genome: i.genome.to_string(),
        val_rmse: i.objectives.val_rmse,
        params: i.objectives.param_count,
        depth: i.objectives.depth,
        rank: i.rank,
        crowding: i.crowding.is_finite().then_some(i.crowding),
    }
}

/// One JSON object per generation.
pub fn emit_history(dir: &Path, history: &[GenerationRecord]) -> Result<PathBuf> {
    let mut out = Vec::new();
    for g in history {
        let line = GenerationJson {
            generation: g.generation,
            evaluations: g.evaluations,
            population: g.population.iter().map(member).collect(),
            front: g.front.iter().map(|i| i.genome.to_string()).collect(),
            failures: g.failures.iter().map(|(gen, e)| (gen.to_string(), e.clone())).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.push(b'\n');
    }
    let path = dir.join("history.jsonl");
    crate::binio::write_atomic(&path, &out)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub fraction: f64,
    pub block_rows: usize,
    pub train_windows: usize,
    pub scratch_mean: f64,
    pub scratch_std: f64,
    pub transfer_mean: f64,
    pub transfer_std: f64,
    pub improvement_pct: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub wilcoxon_z: f64,
    pub wilcoxon_p: f64,
    pub trials: usize,
}

pub fn transfer_rows(report: &TransferReport) -> Vec<TransferRow> {
    report
        .fractions
        .iter()
        .map(|f| TransferRow {
            fraction: f.fraction,
            block_rows: f.block_rows,
            train_windows: f.train_windows,
            scratch_mean: f.scratch_mean,
            scratch_std: f.scratch_std,
            transfer_mean: f.transfer_mean,
            transfer_std: f.transfer_std,
            improvement_pct: f.improvement_pct,
            t_statistic: f.ttest.statistic,
            p_value: f.ttest.p_value,
            wilcoxon_z: f.wilcoxon.statistic,
            wilcoxon_p: f.wilcoxon.p_value,
            trials: report.trials,
        })
        .collect()
}

pub fn emit_transfer_report(dir: &Path, rows: &[TransferRow]) -> Result<Vec<PathBuf>> {
    let csv = write_csv(&dir.join("transfer.csv"), rows)?;
    let labels: Vec<String> = rows.iter().map(|r| format!("{}%", r.fraction * 100.0)).collect();
    let series = [
        Series {
            name: "from scratch".into(),
            mean: rows.iter().map(|r| r.scratch_mean).collect(),
            std: rows.iter().map(|r| r.scratch_std).collect(),
        },
        Series {
            name: "transfer".into(),
            mean: rows.iter().map(|r| r.transfer_mean).collect(),
            std: rows.iter().map(|r| r.transfer_std).collect(),
        },
    ];
    let svg = write_text(
        &dir.join("transfer.svg"),
        &svg::lines_with_error("Transfer vs. scratch by data fraction", &labels, "target test RMSE", &series),
    )?;
    Ok(vec![csv, svg])
}

/// `coverage.csv`: one row per model with per-feature coverage columns.
pub fn emit_coverage(dir: &Path, rows: &[(String, usize, usize, f64, Coverage)]) -> Result<PathBuf> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_string(), "alpha".into(), "n_cal".into(), "n_test".into()];
    header.extend(Feature::ALL.iter().map(|f| format!("coverage_{}", f.name())));
    header.extend(["macro_coverage".to_string(), "mean_width".into()]);
    w.write_record(&header)?;
    for (model, n_cal, n_test, alpha, cov) in rows {
        let mut rec = vec![model.clone(), alpha.to_string(), n_cal.to_string(), n_test.to_string()];
        rec.extend(cov.per_feature.iter().map(f64::to_string));
        rec.extend([cov.macro_average.to_string(), cov.mean_width.to_string()]);
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::Format(e.to_string()))?;
    let path = dir.join("coverage.csv");
    crate::binio::write_atomic(&path, &bytes)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub baseline_rmse: f64,
    pub permuted_mean: f64,
    pub permuted_std: f64,
    pub delta: f64,
    pub repeats: usize,
}

pub fn importance_rows(report: &ImportanceReport) -> Vec<ImportanceRow> {
    report
        .features
        .iter()
        .map(|f| ImportanceRow {
            feature: Feature::ALL.get(f.feature).map_or_else(|| format!("feature_{}", f.feature), |x| x.name().into()),
            baseline_rmse: f.baseline_rmse,
            permuted_mean: f.permuted_mean,
            permuted_std: f.permuted_std,
            delta: f.delta,
            repeats: report.repeats,
        })
        .collect()
}

pub fn emit_importance(dir: &Path, rows: &[ImportanceRow]) -> Result<Vec<PathBuf>> {
    let csv = write_csv(&dir.join("importance.csv"), rows)?;
    let mut sorted: Vec<&ImportanceRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let labels: Vec<String> = sorted.iter().map(|r| r.feature.clone()).collect();
    let values: Vec<f64> = sorted.iter().map(|r| r.delta).collect();
    let errors: Vec<f64> = sorted.iter().map(|r| r.permuted_std).collect();
    let svg = write_text(
        &dir.join("importance.svg"),
        &svg::horizontal_bars("Permutation importance", &labels, &values, &errors, "RMSE increase when permuted"),
    )?;
    Ok(vec![csv, svg])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub horizon: usize,
    pub rmse: f64,
}

pub fn emit_horizon(dir: &Path, rmse: &[f64]) -> Result<PathBuf> {
    let rows: Vec<HorizonRow> = rmse.iter().enumerate().map(|(i, &r)| HorizonRow { horizon: i + 1, rmse: r }).collect();
    write_csv(&dir.join("horizon.csv"), &rows)
}

pub fn emit_bench(dir: &Path, rows: &[BenchResult]) -> Result<PathBuf> {
    write_csv(&dir.join("bench.csv"), rows)
}
