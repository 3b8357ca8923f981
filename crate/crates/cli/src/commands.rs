use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use itf_core::evaluate::{
    emit_report, run_benchmark, write_report_markdown, BenchmarkGrid, Dataset, ReportFormat,
};
use itf_core::pipeline::{map_record, read_map_csv, write_elevation_series, write_map_csv, MappingConfig};
use itf_core::signals::{load_record, save_record, Channel, RecordFormat, SampleRecord, SignalError};
use itf_core::simulate::{
    add_channel_noise, augment_track, load_truth, make_track, save_truth, synth_reference, synthesize_record,
    truth_path, ReferenceSpec,
};

use crate::config::{GridKind, RunConfig};
use crate::plot::{render_svg, Point};
use crate::CliError;

fn processing(e: impl std::fmt::Display) -> CliError {
    CliError::Processing(e.to_string())
}

fn load(path: &Path) -> Result<SampleRecord, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(format!("input {} not found", path.display())));
    }
    load_record(path, RecordFormat::from_path(path)).map_err(|e| match e {
        SignalError::Io { .. } => CliError::MissingInput(e.to_string()),
        other => processing(other),
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Write(format!("cannot write {}: {e}", path.display()));
    let mut w = BufWriter::new(fs::File::create(path).map_err(fail)?);
    f(&mut w).and_then(|_| w.flush()).map_err(fail)
}

fn mapping(cfg: &RunConfig) -> MappingConfig {
    MappingConfig {
        plan: cfg.plan,
        filter: cfg.filter,
        method: cfg.method,
        interp: cfg.interp,
        geometry: cfg.geometry,
        wavelet: cfg.wavelet,
        ..MappingConfig::default()
    }
}

/// Simulated record plus ground-truth sidecar. Seeds: track `seed`,
/// augmentation `seed + 1`, synthetic reference `seed + 2`, channel
/// noise `seed + 3`.
pub fn simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let output = cfg.output()?;
    let track = make_track(cfg.track, cfg.windows, cfg.seed).map_err(processing)?;
    let track = augment_track(&track, &cfg.augment).map_err(processing)?;
    let needed = cfg.plan.record_length_for(cfg.windows);
    let reference = match &cfg.reference {
        Some(path) => {
            let rec = load(path)?;
            if cfg.is_set("dt-ns") && (rec.sample_interval() / cfg.dt - 1.0).abs() > 1e-6 {
                return Err(CliError::Config(format!(
                    "dt-ns {} does not match the reference record's {} ns",
                    cfg.dt * 1e9,
                    rec.sample_interval() * 1e9
                )));
            }
            rec.channel(Channel::B).to_vec()
        }
        None => {
            let spec = ReferenceSpec {
                low_hz: cfg.band_hz.0,
                high_hz: cfg.band_hz.1,
                ..ReferenceSpec::new(needed, cfg.dt, cfg.seed.wrapping_add(2))
            };
            synth_reference(&spec).map_err(processing)?
        }
    };
    let mut sim = synthesize_record(&reference, &track, &cfg.geometry, cfg.dt, cfg.plan).map_err(processing)?;
    sim.record = add_channel_noise(&sim.record, cfg.snr_db, cfg.seed.wrapping_add(3)).map_err(processing)?;

    let comments = cfg.provenance("simulate");
    save_record(&sim.record, output, RecordFormat::from_path(output), &comments)
        .map_err(|e| CliError::Write(e.to_string()))?;
    let sidecar = truth_path(output);
    save_truth(&sim, &sidecar, &comments).map_err(|e| CliError::Write(e.to_string()))?;
    Ok(format!(
        "wrote {} ({} samples, {} windows) and {}",
        output.display(),
        sim.record.len(),
        sim.truth.len(),
        sidecar.display()
    ))
}

pub fn map(cfg: &RunConfig) -> Result<String, CliError> {
    let input = cfg.single_input()?;
    let output = cfg.output()?;
    let record = load(input)?;
    if cfg.is_set("dt-ns") && (record.sample_interval() / cfg.dt - 1.0).abs() > 1e-6 {
        return Err(CliError::Config(format!(
            "dt-ns {} does not match the record's {} ns",
            cfg.dt * 1e9,
            record.sample_interval() * 1e9
        )));
    }
    let estimates = map_record(&record, &mapping(cfg)).map_err(processing)?;
    let comments = cfg.provenance("map");
    write_file(output, |w| write_map_csv(&estimates, w, &comments))?;
    if let Some(path) = &cfg.elevation_series {
        write_file(path, |w| write_elevation_series(&estimates, w, &comments))?;
    }
    let valid = estimates.iter().filter(|e| e.is_valid()).count();
    Ok(format!("wrote {} ({} windows, {} valid)", output.display(), estimates.len(), valid))
}

pub fn bench(cfg: &RunConfig) -> Result<String, CliError> {
    let output = cfg.output()?;
    if cfg.inputs.is_empty() {
        return Err(CliError::Config("missing --input (comma-separated simulated records)".into()));
    }
    let mut datasets = Vec::with_capacity(cfg.inputs.len());
    for path in &cfg.inputs {
        let record = load(path)?;
        let sidecar = truth_path(path);
        if !sidecar.exists() {
            return Err(CliError::MissingInput(format!(
                "{} has no ground truth (expected {})",
                path.display(),
                sidecar.display()
            )));
        }
        let truth = load_truth(&sidecar).map_err(processing)?;
        let name = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        datasets.push(Dataset { name, record, truth: truth.track });
    }
    let plan = datasets[0].truth.plan;
    if let Some(d) = datasets.iter().find(|d| d.truth.plan != plan) {
        return Err(CliError::Config(format!("{} uses a different window/hop than {}", d.name, datasets[0].name)));
    }
    if (cfg.is_set("window") || cfg.is_set("hop")) && cfg.plan != plan {
        return Err(CliError::Config(format!(
            "window/hop {}/{} differ from the datasets' {}/{}",
            cfg.plan.window_length, cfg.plan.hop, plan.window_length, plan.hop
        )));
    }
    let mut grid = match cfg.grid {
        GridKind::Full => BenchmarkGrid::full(plan, cfg.geometry),
        GridKind::Single => BenchmarkGrid::single(cfg.filter, cfg.method, cfg.interp, plan, cfg.geometry),
    };
    grid.wavelet = cfg.wavelet;
    let report = run_benchmark(&grid, &datasets).map_err(processing)?;
    let comments = cfg.provenance("bench");
    emit_report(&report, ReportFormat::from_path(output), output, &comments).map_err(|e| CliError::Write(e.to_string()))?;
    if let Some(path) = &cfg.markdown {
        write_file(path, |w| write_report_markdown(&report, w, &comments))?;
    }
    Ok(format!("wrote {} ({} cells over {} records)", output.display(), report.cells.len(), datasets.len()))
}

pub fn plot(cfg: &RunConfig) -> Result<String, CliError> {
    let input = cfg.single_input()?;
    let output = cfg.output()?;
    let file = fs::File::open(input)
        .map_err(|e| CliError::MissingInput(format!("input {}: {e}", input.display())))?;
    let rows = read_map_csv(BufReader::new(file)).map_err(processing)?;
    let points: Vec<Point> = rows
        .iter()
        .filter(|r| r.is_valid())
        .filter_map(|r| r.angles.map(|a| Point { az_deg: a.az_deg, el_deg: a.el_deg, time_s: r.time_s }))
        .collect();
    if points.is_empty() {
        return Err(CliError::Processing(format!("{}: no valid windows to plot", input.display())));
    }
    let svg = render_svg(&points, &cfg.provenance("plot"));
    write_file(output, |w| w.write_all(svg.as_bytes()))?;
    Ok(format!("wrote {} ({} points)", output.display(), points.len()))
}
