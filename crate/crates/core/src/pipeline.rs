//! End-to-end direction mapping of a three-channel record:
//! denoise, segment, correlate both baselines, refine the peak, convert to
//! TDOA and solve for azimuth/elevation.
//!
//! The stages are exposed separately so that a parameter sweep can reuse
//! the expensive ones (denoising and correlation) across cells.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::denoise::FilterSpec;
use crate::geometry::{direction_from_tdoa, Angles, ArrayGeometry};
use crate::signals::{normalize_window, segment, Channel, SampleRecord, SegmentationPlan, SignalError};
use crate::xcorr::{
    lag_to_tdoa, refine_region, CorrelationMethod, Correlator, InterpSpec, PeakRegion, WaveletCorrelation,
    XcorrError, CENTER_FREQUENCY_HZ,
};
use crate::Result;

/// Everything needed to turn a record into a direction map.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingConfig {
    pub plan: SegmentationPlan,
    pub filter: FilterSpec,
    pub method: CorrelationMethod,
    pub interp: InterpSpec,
    pub geometry: ArrayGeometry,
    /// Wavelet-correlator settings; its `dt` is replaced by the record's.
    pub wavelet: WaveletCorrelation,
    /// Frequency used for the reported phase difference, Hz.
    pub center_hz: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            plan: SegmentationPlan::default(),
            filter: FilterSpec::None,
            method: CorrelationMethod::Time,
            interp: InterpSpec::NONE,
            geometry: ArrayGeometry::default(),
            wavelet: WaveletCorrelation::new(crate::signals::DEFAULT_SAMPLE_INTERVAL),
            center_hz: CENTER_FREQUENCY_HZ,
        }
    }
}

impl MappingConfig {
    /// Checks every setting against the record's sample interval.
    pub fn validate(&self, dt: f64) -> Result<()> {
        self.plan.validate()?;
        self.geometry.validate()?;
        self.filter.validate(dt)?;
        if self.method == CorrelationMethod::Wavelet {
            WaveletCorrelation { dt, ..self.wavelet }.selected_levels()?;
        }
        Ok(())
    }

    /// `key=value` pairs describing this configuration, for file headers.
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("window".to_string(), self.plan.window_length.to_string()),
            ("hop".to_string(), self.plan.hop.to_string()),
            ("filter".to_string(), self.filter.to_string()),
            ("cc".to_string(), self.method.id().to_string()),
            ("interp".to_string(), self.interp.to_string()),
            ("baseline_m".to_string(), self.geometry.baseline_m.to_string()),
            ("speed_mps".to_string(), self.geometry.speed.to_string()),
        ];
        if self.method == CorrelationMethod::Wavelet {
            out.push(("ccwd_basis".into(), self.wavelet.basis.id().into()));
            out.push(("ccwd_levels".into(), self.wavelet.levels.to_string()));
            out.push(("ccwd_band_hz".into(), format!("{}-{}", self.wavelet.band_low_hz, self.wavelet.band_high_hz)));
        }
        out
    }
}

/// Applies the denoising filter to every channel independently.
pub fn denoise_record(record: &SampleRecord, filter: &FilterSpec) -> Result<SampleRecord> {
    let dt = record.sample_interval();
    record.map_channels(|s| filter.apply(s, dt).map_err(crate::Error::from))
}

/// Correlation peaks of one window on both baselines, or `None` when a
/// segment is degenerate (constant).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPeaks {
    pub index: usize,
    pub start: usize,
    /// `[BC, BD]`.
    pub peaks: Option<[PeakRegion; 2]>,
}

/// Segments and normalizes `record`, then correlates B with C and B with D
/// in every window.
pub fn window_peaks(
    record: &SampleRecord,
    plan: SegmentationPlan,
    method: CorrelationMethod,
    wavelet: &WaveletCorrelation,
) -> Result<Vec<WindowPeaks>> {
    let windows = segment(record, plan)?;
    let wavelet = WaveletCorrelation { dt: record.sample_interval(), ..*wavelet };
    let correlator = Correlator::new(method, plan.window_length, wavelet)?;
    windows
        .par_iter()
        .map(|w| {
            let norm = normalize_window(w);
            if norm.any_degenerate() {
                return Ok(WindowPeaks { index: w.index, start: w.start, peaks: None });
            }
            let b = norm.segment(Channel::B);
            let pair = correlator
                .correlate(b, norm.segment(Channel::C))
                .and_then(|bc| Ok([bc.peak_region(), correlator.correlate(b, norm.segment(Channel::D))?.peak_region()]));
            match pair {
                Ok(p) => Ok(WindowPeaks { index: w.index, start: w.start, peaks: Some(p) }),
                Err(XcorrError::Degenerate) => Ok(WindowPeaks { index: w.index, start: w.start, peaks: None }),
                Err(e) => Err(e.into()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowStatus {
    Valid,
    /// The delay pair exceeded the transit time.
    OutsideTransit,
    /// A segment was constant; no correlation was possible.
    Degenerate,
}

/// Direction estimate for one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionEstimate {
    pub window_index: usize,
    /// Time of the window center from the start of the record, s.
    pub time_s: f64,
    /// Present only for valid windows.
    pub angles: Option<Angles>,
    /// Transit gate `(c / d) |tau|`; at most 1 for valid windows.
    pub gate: Option<f64>,
    /// `(tau1, tau2)`, s.
    pub tdoa: Option<(f64, f64)>,
    /// `(phase1, phase2)` at the center frequency, rad.
    pub phase: Option<(f64, f64)>,
    /// Smaller of the two baseline peak coefficients.
    pub peak_coeff: Option<f64>,
    pub at_zenith: bool,
    pub status: WindowStatus,
}

impl DirectionEstimate {
    pub fn is_valid(&self) -> bool {
        self.status == WindowStatus::Valid
    }
}

/// Refines each window's peaks with `interp` and solves for direction.
pub fn solve_directions(
    peaks: &[WindowPeaks],
    plan: SegmentationPlan,
    interp: &InterpSpec,
    geometry: &ArrayGeometry,
    dt: f64,
    center_hz: f64,
) -> Vec<DirectionEstimate> {
    peaks
        .iter()
        .map(|wp| {
            let time_s = (wp.start as f64 + plan.window_length as f64 / 2.0) * dt;
            let Some([bc, bd]) = &wp.peaks else {
                return DirectionEstimate {
                    window_index: wp.index,
                    time_s,
                    angles: None,
                    gate: None,
                    tdoa: None,
                    phase: None,
                    peak_coeff: None,
                    at_zenith: false,
                    status: WindowStatus::Degenerate,
                };
            };
            let (tau1, phase1) = lag_to_tdoa(refine_region(bc, interp), dt, center_hz);
            let (tau2, phase2) = lag_to_tdoa(refine_region(bd, interp), dt, center_hz);
            let dir = direction_from_tdoa(tau1, tau2, geometry);
            let status = if dir.is_valid() { WindowStatus::Valid } else { WindowStatus::OutsideTransit };
            DirectionEstimate {
                window_index: wp.index,
                time_s,
                angles: dir.angles,
                gate: Some(if dir.is_valid() { dir.gate.min(1.0) } else { dir.gate }),
                tdoa: Some((tau1, tau2)),
                phase: Some((phase1, phase2)),
                peak_coeff: Some(bc.peak_value.min(bd.peak_value)),
                at_zenith: dir.at_zenith,
                status,
            }
        })
        .collect()
}

/// Full mapping pipeline on one record.
pub fn map_record(record: &SampleRecord, config: &MappingConfig) -> Result<Vec<DirectionEstimate>> {
    let dt = record.sample_interval();
    config.validate(dt)?;
    let clean = denoise_record(record, &config.filter)?;
    let peaks = window_peaks(&clean, config.plan, config.method, &config.wavelet)?;
    Ok(solve_directions(&peaks, config.plan, &config.interp, &config.geometry, dt, config.center_hz))
}

/// Per-window angles, `None` for windows without a valid direction.
pub fn estimated_angles(estimates: &[DirectionEstimate]) -> Vec<Option<Angles>> {
    estimates.iter().map(|e| if e.is_valid() { e.angles } else { None }).collect()
}

pub const MAP_CSV_HEADER: &str = "window_index,time_s,azimuth_deg,elevation_deg,peak_coeff,valid";

fn opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the direction map. Invalid windows leave the angle fields empty.
pub fn write_map_csv<W: Write>(
    estimates: &[DirectionEstimate],
    w: &mut W,
    comments: &[(String, String)],
) -> std::io::Result<()> {
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "{MAP_CSV_HEADER}")?;
    for e in estimates {
        let angles = if e.is_valid() { e.angles } else { None };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.window_index,
            e.time_s,
            opt(angles.map(|a| a.az_deg)),
            opt(angles.map(|a| a.el_deg)),
            opt(e.peak_coeff),
            e.is_valid()
        )?;
    }
    Ok(())
}

/// Elevation against time for the valid windows.
pub fn write_elevation_series<W: Write>(
    estimates: &[DirectionEstimate],
    w: &mut W,
    comments: &[(String, String)],
) -> std::io::Result<()> {
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "time_s,elevation_deg")?;
    for e in estimates.iter().filter(|e| e.is_valid()) {
        if let Some(a) = e.angles {
            writeln!(w, "{},{}", e.time_s, a.el_deg)?;
        }
    }
    Ok(())
}

/// Reads a map written by [`write_map_csv`]. Delays, phases and gate
/// values are not stored in the file and come back as `None`.
pub fn read_map_csv<R: BufRead>(reader: R) -> std::result::Result<Vec<DirectionEstimate>, SignalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| SignalError::Parse { line: i + 1, msg: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == MAP_CSV_HEADER {
            continue;
        }
        let bad = |msg: &str| SignalError::Parse { line: i + 1, msg: msg.to_string() };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let num = |s: &str| -> std::result::Result<Option<f64>, SignalError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| bad(&format!("bad number `{s}`")))
            }
        };
        let valid = match f[5] {
            "true" => true,
            "false" => false,
            other => return Err(bad(&format!("bad valid flag `{other}`"))),
        };
        let angles = match (num(f[2])?, num(f[3])?) {
            (Some(az), Some(el)) => Some(Angles::new(az, el)),
            (None, None) => None,
            _ => return Err(bad("azimuth and elevation must both be present or both empty")),
        };
        if valid != angles.is_some() {
            return Err(bad("valid flag disagrees with the angle fields"));
        }
        let peak_coeff = num(f[4])?;
        let status = if valid {
            WindowStatus::Valid
        } else if peak_coeff.is_some() {
            WindowStatus::OutsideTransit
        } else {
            WindowStatus::Degenerate
        };
        out.push(DirectionEstimate {
            window_index: f[0].parse().map_err(|_| bad("bad window index"))?,
            time_s: num(f[1])?.ok_or_else(|| bad("missing time"))?,
            angles,
            gate: None,
            tdoa: None,
            phase: None,
            peak_coeff,
            at_zenith: false,
            status,
        });
    }
    Ok(out)
}
