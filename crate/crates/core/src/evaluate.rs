//! Scoring of estimated direction maps against ground truth and the
//! filter × correlation × interpolation benchmark sweep.
//!
//! The per-window error is the Euclidean distance in the (Az, El) plane,
//! in degrees, with the azimuth residual wrapped to `(-180, 180]`. A map's
//! score is the mean over windows where both sides have a direction;
//! the remaining windows are counted as excluded.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::denoise::FilterSpec;
use crate::geometry::{Angles, ArrayGeometry};
use crate::pipeline::{denoise_record, estimated_angles, solve_directions, window_peaks};
use crate::signals::{SampleRecord, SegmentationPlan};
use crate::simulate::AngleTrack;
use crate::xcorr::{CorrelationMethod, InterpMethod, InterpSpec, WaveletCorrelation, CENTER_FREQUENCY_HZ};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("estimated map has {estimated} windows but ground truth has {truth}")]
    LengthMismatch { estimated: usize, truth: usize },
    #[error("no overlapping valid windows")]
    NoOverlap,
    #[error("benchmark grid has no {0}")]
    EmptyGrid(&'static str),
    #[error("no datasets to benchmark")]
    NoDatasets,
    #[error("report is empty")]
    EmptyReport,
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("report line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Azimuth difference wrapped to `(-180, 180]`.
pub fn azimuth_residual(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Euclidean distance between two directions in degrees.
pub fn angular_distance(a: &Angles, b: &Angles) -> f64 {
    azimuth_residual(a.az_deg, b.az_deg).hypot(a.el_deg - b.el_deg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapScore {
    pub mean_deg: f64,
    pub included: usize,
    pub excluded: usize,
}

/// Mean per-window distance over windows valid on both sides.
pub fn map_error(estimated: &[Option<Angles>], truth: &[Option<Angles>]) -> Result<MapScore, EvalError> {
    if estimated.len() != truth.len() {
        return Err(EvalError::LengthMismatch { estimated: estimated.len(), truth: truth.len() });
    }
    let (sum, included) = estimated
        .iter()
        .zip(truth)
        .filter_map(|(e, t)| Some(angular_distance(e.as_ref()?, t.as_ref()?)))
        .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
    if included == 0 {
        return Err(EvalError::NoOverlap);
    }
    Ok(MapScore { mean_deg: sum / included as f64, included, excluded: estimated.len() - included })
}

/// [`map_error`] against a ground-truth track, every window of which is valid.
pub fn track_error(estimated: &[Option<Angles>], truth: &AngleTrack) -> Result<MapScore, EvalError> {
    let t: Vec<Option<Angles>> = truth.points.iter().copied().map(Some).collect();
    map_error(estimated, &t)
}

/// A record with known ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub record: SampleRecord,
    pub truth: AngleTrack,
}

/// The parameter sweep. Every cell runs the full pipeline with one
/// filter, one correlation method and one interpolation setting.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkGrid {
    pub filters: Vec<FilterSpec>,
    pub methods: Vec<CorrelationMethod>,
    pub interps: Vec<InterpMethod>,
    pub factors: Vec<usize>,
    pub plan: SegmentationPlan,
    pub geometry: ArrayGeometry,
    /// Its `dt` is replaced by each record's.
    pub wavelet: WaveletCorrelation,
}

impl BenchmarkGrid {
    /// The full 10 × 3 × 2 × 4 sweep.
    pub fn full(plan: SegmentationPlan, geometry: ArrayGeometry) -> Self {
        Self {
            filters: FilterSpec::benchmark_rows(),
            methods: CorrelationMethod::ALL.to_vec(),
            interps: vec![InterpMethod::Linear, InterpMethod::Cubic],
            factors: vec![1, 2, 4, 8],
            plan,
            geometry,
            wavelet: WaveletCorrelation::new(crate::signals::DEFAULT_SAMPLE_INTERVAL),
        }
    }

    /// A one-cell grid.
    pub fn single(filter: FilterSpec, method: CorrelationMethod, interp: InterpSpec, plan: SegmentationPlan, geometry: ArrayGeometry) -> Self {
        Self {
            filters: vec![filter],
            methods: vec![method],
            interps: vec![interp.method],
            factors: vec![interp.factor],
            plan,
            geometry,
            wavelet: WaveletCorrelation::new(crate::signals::DEFAULT_SAMPLE_INTERVAL),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.filters.len() * self.methods.len() * self.interps.len() * self.factors.len()
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.filters.is_empty() {
            return Err(EvalError::EmptyGrid("filters"));
        }
        if self.methods.is_empty() {
            return Err(EvalError::EmptyGrid("correlation methods"));
        }
        if self.interps.is_empty() {
            return Err(EvalError::EmptyGrid("interpolation methods"));
        }
        if self.factors.is_empty() {
            return Err(EvalError::EmptyGrid("interpolation factors"));
        }
        Ok(())
    }

    fn interp_specs(&self) -> crate::Result<Vec<InterpSpec>> {
        let mut out = Vec::with_capacity(self.interps.len() * self.factors.len());
        for &m in &self.interps {
            for &f in &self.factors {
                out.push(InterpSpec::new(m, f)?);
            }
        }
        Ok(out)
    }
}

/// Score of one record within one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordScore {
    pub dataset: String,
    /// `None` when no window had a valid estimate.
    pub mean_deg: Option<f64>,
    pub included: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub filter: String,
    pub method: CorrelationMethod,
    pub interp: InterpMethod,
    pub factor: usize,
    /// Mean over the scored records of their per-record mean distance.
    pub mean_dist_deg: Option<f64>,
    pub records: usize,
    pub excluded_windows: usize,
    pub total_windows: usize,
    pub per_record: Vec<RecordScore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Ordered filter-major, then method, interpolation method, factor.
    pub cells: Vec<CellResult>,
}

impl ErrorReport {
    pub fn cell(&self, filter: &str, method: CorrelationMethod, interp: InterpMethod, factor: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.filter == filter && c.method == method && c.interp == interp && c.factor == factor)
    }
}

/// Runs every grid cell on every dataset.
///
/// Denoising is done once per (dataset, filter) and correlation once per
/// (dataset, filter, method); only peak refinement and direction solving
/// are repeated per interpolation cell. Work items run in parallel and
/// are reassembled in a fixed order, so the report does not depend on
/// scheduling.
pub fn run_benchmark(grid: &BenchmarkGrid, datasets: &[Dataset]) -> crate::Result<ErrorReport> {
    grid.validate()?;
    if datasets.is_empty() {
        return Err(EvalError::NoDatasets.into());
    }
    let interps = grid.interp_specs()?;
    for ds in datasets {
        let dt = ds.record.sample_interval();
        let windows = grid.plan.window_count(ds.record.len())?;
        if windows != ds.truth.len() {
            return Err(EvalError::LengthMismatch { estimated: windows, truth: ds.truth.len() }.into());
        }
        for f in &grid.filters {
            f.validate(dt)?;
        }
        if grid.methods.contains(&CorrelationMethod::Wavelet) {
            WaveletCorrelation { dt, ..grid.wavelet }.selected_levels()?;
        }
    }

    let denoise_jobs: Vec<(usize, usize)> =
        (0..datasets.len()).flat_map(|d| (0..grid.filters.len()).map(move |f| (d, f))).collect();
    let denoised: Vec<SampleRecord> = denoise_jobs
        .par_iter()
        .map(|&(d, f)| denoise_record(&datasets[d].record, &grid.filters[f]))
        .collect::<crate::Result<_>>()?;

    let corr_jobs: Vec<(usize, usize, usize)> = denoise_jobs
        .iter()
        .flat_map(|&(d, f)| (0..grid.methods.len()).map(move |m| (d, f, m)))
        .collect();
    let scores: Vec<Vec<RecordScore>> = corr_jobs
        .par_iter()
        .map(|&(d, f, m)| {
            let ds = &datasets[d];
            let record = &denoised[d * grid.filters.len() + f];
            let peaks = window_peaks(record, grid.plan, grid.methods[m], &grid.wavelet)?;
            let dt = record.sample_interval();
            interps
                .iter()
                .map(|interp| {
                    let est = solve_directions(&peaks, grid.plan, interp, &grid.geometry, dt, CENTER_FREQUENCY_HZ);
                    let score = match track_error(&estimated_angles(&est), &ds.truth) {
                        Ok(s) => RecordScore {
                            dataset: ds.name.clone(),
                            mean_deg: Some(s.mean_deg),
                            included: s.included,
                            excluded: s.excluded,
                        },
                        Err(EvalError::NoOverlap) => {
                            RecordScore { dataset: ds.name.clone(), mean_deg: None, included: 0, excluded: est.len() }
                        }
                        Err(e) => return Err(e.into()),
                    };
                    Ok(score)
                })
                .collect::<crate::Result<Vec<_>>>()
        })
        .collect::<crate::Result<_>>()?;

    let (nf, nm) = (grid.filters.len(), grid.methods.len());
    let mut cells = Vec::with_capacity(grid.cell_count());
    for f in 0..nf {
        for m in 0..nm {
            for (i, interp) in interps.iter().enumerate() {
                let per_record: Vec<RecordScore> =
                    (0..datasets.len()).map(|d| scores[(d * nf + f) * nm + m][i].clone()).collect();
                let scored: Vec<f64> = per_record.iter().filter_map(|r| r.mean_deg).collect();
                let mean_dist_deg =
                    if scored.is_empty() { None } else { Some(scored.iter().sum::<f64>() / scored.len() as f64) };
                cells.push(CellResult {
                    filter: grid.filters[f].label(),
                    method: grid.methods[m],
                    interp: interp.method,
                    factor: interp.factor,
                    mean_dist_deg,
                    records: scored.len(),
                    excluded_windows: per_record.iter().map(|r| r.excluded).sum(),
                    total_windows: per_record.iter().map(|r| r.included + r.excluded).sum(),
                    per_record,
                });
            }
        }
    }
    Ok(ErrorReport { cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl ReportFormat {
    /// Markdown for `.md`, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("md") => ReportFormat::Markdown,
            _ => ReportFormat::Csv,
        }
    }
}

pub const REPORT_CSV_HEADER: &str = "filter,method,interp,factor,mean_dist_deg,records,excluded_windows";

pub fn write_report_csv<W: Write>(report: &ErrorReport, w: &mut W, comments: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for c in &report.cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            c.filter,
            c.method.id(),
            c.interp.id(),
            c.factor,
            c.mean_dist_deg.map(|v| format!("{v:.6}")).unwrap_or_default(),
            c.records,
            c.excluded_windows
        )?;
    }
    Ok(())
}

/// Table with one row per filter and one column per
/// (method, interpolation, factor) combination, in report order.
pub fn write_report_markdown<W: Write>(report: &ErrorReport, w: &mut W, comments: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in comments {
        writeln!(w, "<!-- {k}={v} -->")?;
    }
    let mut columns: Vec<(CorrelationMethod, InterpMethod, usize)> = Vec::new();
    let mut rows: Vec<&str> = Vec::new();
    for c in &report.cells {
        let key = (c.method, c.interp, c.factor);
        if !columns.contains(&key) {
            columns.push(key);
        }
        if !rows.contains(&c.filter.as_str()) {
            rows.push(&c.filter);
        }
    }
    write!(w, "| Filter |")?;
    for (m, i, f) in &columns {
        write!(w, " {} {}×{} |", m.label(), i.label(), f)?;
    }
    writeln!(w)?;
    write!(w, "|---|")?;
    for _ in &columns {
        write!(w, "---:|")?;
    }
    writeln!(w)?;
    for row in rows {
        write!(w, "| {row} |")?;
        for &(m, i, f) in &columns {
            let v = report
                .cell(row, m, i, f)
                .and_then(|c| c.mean_dist_deg)
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "n/a".into());
            write!(w, " {v} |")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn emit_report(
    report: &ErrorReport,
    format: ReportFormat,
    path: &Path,
    comments: &[(String, String)],
) -> Result<(), EvalError> {
    if report.cells.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let io = |e: std::io::Error| EvalError::Io { path: path.display().to_string(), msg: e.to_string() };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    match format {
        ReportFormat::Csv => write_report_csv(report, &mut w, comments),
        ReportFormat::Markdown => write_report_markdown(report, &mut w, comments),
    }
    .and_then(|_| w.flush())
    .map_err(io)
}

/// One row of a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub filter: String,
    pub method: CorrelationMethod,
    pub interp: InterpMethod,
    pub factor: usize,
    pub mean_dist_deg: Option<f64>,
    pub records: usize,
    pub excluded_windows: usize,
}

impl fmt::Display for ReportRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}×{}", self.filter, self.method.label(), self.interp.label(), self.factor)
    }
}

pub fn read_report_csv<R: BufRead>(reader: R) -> Result<Vec<ReportRow>, EvalError> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let bad = |msg: String| EvalError::Parse { line: line_no, msg };
        let line = line.map_err(|e| bad(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == REPORT_CSV_HEADER {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields, got {}", f.len())));
        }
        let interp = match f[2] {
            "none" => InterpMethod::None,
            "linear" => InterpMethod::Linear,
            "cubic" => InterpMethod::Cubic,
            other => return Err(bad(format!("unknown interpolation `{other}`"))),
        };
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad integer `{s}`")));
        rows.push(ReportRow {
            filter: f[0].to_string(),
            method: f[1].parse().map_err(|e: crate::xcorr::XcorrError| bad(e.to_string()))?,
            interp,
            factor: int(f[3])?,
            mean_dist_deg: if f[4].is_empty() {
                None
            } else {
                Some(f[4].parse().map_err(|_| bad(format!("bad distance `{}`", f[4])))?)
            },
            records: int(f[5])?,
            excluded_windows: int(f[6])?,
        });
    }
    Ok(rows)
}
