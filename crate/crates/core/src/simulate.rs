//! Closed-loop simulation: ground-truth angle tracks, track augmentation,
//! synthesis of three-channel records from a reference waveform, and
//! additive white Gaussian noise.
//!
//! Channels C and D are per-window, band-limited fractionally delayed
//! copies of channel B, with delays `(tau1, tau2)` taken from the inverse
//! geometry. Consecutive windows overlap; each output sample belongs to
//! the latest window that covers it.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::geometry::{tdoa_from_direction, wrap_degrees, Angles, ArrayGeometry, GeometryError};
use crate::signals::{SampleRecord, SegmentationPlan, SignalError};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("track must have at least one window")]
    EmptyTrack,
    #[error("reference has {have} samples but {need} are needed for {windows} windows")]
    ReferenceTooShort { have: usize, need: usize, windows: usize },
    #[error("cannot add noise at {0} dB SNR to a zero-power signal")]
    ZeroPower(f64),
    #[error("invalid simulation parameter: {0}")]
    Invalid(String),
    #[error("ground-truth file {path}: {msg}")]
    Truth { path: String, msg: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Per-window ground truth (or estimate) of source direction.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleTrack {
    pub points: Vec<Angles>,
    /// Window geometry the track is defined on.
    pub plan: SegmentationPlan,
}

impl AngleTrack {
    pub fn new(points: Vec<Angles>, plan: SegmentationPlan) -> Result<Self, SimulateError> {
        if points.is_empty() {
            return Err(SimulateError::EmptyTrack);
        }
        if let Some(p) = points.iter().find(|p| !(0.0..=90.0).contains(&p.el_deg)) {
            return Err(GeometryError::ElevationOutOfRange(p.el_deg).into());
        }
        Ok(Self { points, plan })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ground-truth track shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackKind {
    Constant(Angles),
    /// Linear interpolation from `from` (first window) to `to` (last window).
    LinearSweep { from: Angles, to: Angles },
    /// Gaussian random walk with per-window step `step_deg` on both angles.
    RandomWalk { start: Angles, step_deg: f64 },
}

fn clip_elevation(el: f64) -> f64 {
    el.clamp(0.0, 90.0)
}

pub fn make_track(kind: TrackKind, n: usize, seed: u64) -> Result<AngleTrack, SimulateError> {
    if n == 0 {
        return Err(SimulateError::EmptyTrack);
    }
    let points = match kind {
        TrackKind::Constant(a) => vec![Angles::new(wrap_degrees(a.az_deg), clip_elevation(a.el_deg)); n],
        TrackKind::LinearSweep { from, to } => (0..n)
            .map(|i| {
                let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                let az = from.az_deg + f * (to.az_deg - from.az_deg);
                let el = from.el_deg + f * (to.el_deg - from.el_deg);
                Angles::new(wrap_degrees(az), clip_elevation(el))
            })
            .collect(),
        TrackKind::RandomWalk { start, step_deg } => {
            let step = Normal::new(0.0, step_deg)
                .map_err(|_| SimulateError::Invalid(format!("random-walk step must be >= 0, got {step_deg}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut az = start.az_deg;
            let mut el = clip_elevation(start.el_deg);
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                if i > 0 {
                    az += step.sample(&mut rng);
                    el = clip_elevation(el + step.sample(&mut rng));
                }
                out.push(Angles::new(wrap_degrees(az), el));
            }
            out
        }
    };
    AngleTrack::new(points, SegmentationPlan::default())
}

/// Track augmentation settings. Noise, scaling and flipping are applied
/// in that order; each step is skipped at its identity value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    /// Standard deviation of the additive angle noise, degrees.
    pub noise_sigma_deg: f64,
    /// Also perturb azimuth (elevation is always perturbed when sigma > 0).
    pub noise_azimuth: bool,
    /// Outward expansion about the track centroid; 1 is identity.
    pub scale_factor: f64,
    /// Horizontal flip: rotate azimuth by 180 degrees.
    pub flip: bool,
    pub seed: u64,
}

impl AugmentSpec {
    pub const IDENTITY: AugmentSpec =
        AugmentSpec { noise_sigma_deg: 0.0, noise_azimuth: false, scale_factor: 1.0, flip: false, seed: 0 };

    /// Defaults: unit-variance noise, 1.2x outward scaling, no flip.
    pub fn defaults(seed: u64) -> Self {
        Self { noise_sigma_deg: 1.0, noise_azimuth: false, scale_factor: 1.2, flip: false, seed }
    }
}

fn wrap_signed(deg: f64) -> f64 {
    let w = wrap_degrees(deg);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Noise / scale / flip augmentation. Elevation is clipped to `[0, 90]`
/// after every step, which keeps every implied delay within the transit
/// time.
pub fn augment_track(track: &AngleTrack, spec: &AugmentSpec) -> Result<AngleTrack, SimulateError> {
    if track.is_empty() {
        return Err(SimulateError::EmptyTrack);
    }
    if !(spec.scale_factor > 0.0 && spec.scale_factor.is_finite()) {
        return Err(SimulateError::Invalid(format!("scale factor must be positive, got {}", spec.scale_factor)));
    }
    let mut points = track.points.clone();
    if spec.noise_sigma_deg > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma_deg)
            .map_err(|_| SimulateError::Invalid(format!("bad noise sigma {}", spec.noise_sigma_deg)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for p in &mut points {
            p.el_deg = clip_elevation(p.el_deg + noise.sample(&mut rng));
            if spec.noise_azimuth {
                p.az_deg = wrap_degrees(p.az_deg + noise.sample(&mut rng));
            }
        }
    }
    if spec.scale_factor != 1.0 {
        let n = points.len() as f64;
        let (s, c) = points.iter().fold((0.0, 0.0), |(s, c), p| {
            let (ps, pc) = p.az_deg.to_radians().sin_cos();
            (s + ps, c + pc)
        });
        let az_center = if s == 0.0 && c == 0.0 { 0.0 } else { s.atan2(c).to_degrees() };
        let el_center = points.iter().map(|p| p.el_deg).sum::<f64>() / n;
        for p in &mut points {
            p.az_deg = wrap_degrees(az_center + spec.scale_factor * wrap_signed(p.az_deg - az_center));
            p.el_deg = clip_elevation(el_center + spec.scale_factor * (p.el_deg - el_center));
        }
    }
    if spec.flip {
        for p in &mut points {
            p.az_deg = wrap_degrees(p.az_deg + 180.0);
        }
    }
    AngleTrack::new(points, track.plan)
}

/// Circular band-limited fractional delay by a spectral phase ramp.
/// Positive `delay` (in samples) moves content later in time.
pub struct FractionalDelay {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FractionalDelay {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { len, forward: planner.plan_fft_forward(len), inverse: planner.plan_fft_inverse(len) }
    }

    pub fn apply(&self, segment: &[f64], delay: f64) -> Vec<f64> {
        assert_eq!(segment.len(), self.len, "segment length does not match the plan");
        let n = self.len;
        let mut spec: Vec<Complex64> = segment.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut spec);
        for (k, bin) in spec.iter_mut().enumerate() {
            // signed frequency index keeps the ramp Hermitian
            let f = if 2 * k < n { k as f64 } else if 2 * k == n { 0.0 } else { k as f64 - n as f64 };
            let phase = -2.0 * PI * f * delay / n as f64;
            if 2 * k == n {
                *bin *= (PI * delay).cos();
            } else {
                *bin *= Complex64::from_polar(1.0, phase);
            }
        }
        self.inverse.process(&mut spec);
        spec.iter().map(|c| c.re / n as f64).collect()
    }
}

/// Spectral phase-ramp delay of a whole segment (circular).
pub fn fractional_delay(segment: &[f64], delay: f64) -> Vec<f64> {
    FractionalDelay::new(segment.len()).apply(segment, delay)
}

/// A synthesized record with its embedded ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRecord {
    pub record: SampleRecord,
    pub truth: AngleTrack,
    /// Per-window `(tau1, tau2)` in seconds.
    pub delays: Vec<(f64, f64)>,
}

/// Context on each side of a window used when delaying it.
const SYNTH_MARGIN: usize = 128;
/// Raised-cosine taper length at the outer edge of the context.
const SYNTH_TAPER: usize = 64;

/// Synthesizes channels C and D from reference channel B for every window
/// of `track` laid out on `plan`.
pub fn synthesize_record(
    reference: &[f64],
    track: &AngleTrack,
    geom: &ArrayGeometry,
    dt: f64,
    plan: SegmentationPlan,
) -> Result<SimulatedRecord, SimulateError> {
    plan.validate()?;
    geom.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SignalError::SampleInterval(dt).into());
    }
    if track.is_empty() {
        return Err(SimulateError::EmptyTrack);
    }
    let windows = track.len();
    let total = plan.record_length_for(windows);
    if reference.len() < total {
        return Err(SimulateError::ReferenceTooShort { have: reference.len(), need: total, windows });
    }
    let delays = track
        .points
        .iter()
        .map(|p| tdoa_from_direction(p.az_deg, p.el_deg, geom))
        .collect::<Result<Vec<_>, _>>()?;

    let b = reference[..total].to_vec();
    let mut c = vec![0.0; total];
    let mut d = vec![0.0; total];
    let w = plan.window_length;
    let ext_len = w + 2 * SYNTH_MARGIN;
    let shifter = FractionalDelay::new(ext_len);
    let taper: Vec<f64> = (0..ext_len)
        .map(|i| {
            let edge = i.min(ext_len - 1 - i);
            if edge >= SYNTH_TAPER {
                1.0
            } else {
                0.5 - 0.5 * (PI * (edge as f64 + 0.5) / SYNTH_TAPER as f64).cos()
            }
        })
        .collect();

    for (i, &(tau1, tau2)) in delays.iter().enumerate() {
        let start = plan.start_of(i);
        let owned = if i + 1 == windows { start..start + w } else { start..(start + plan.hop).min(total) };
        if owned.is_empty() {
            continue;
        }
        let ext: Vec<f64> = (0..ext_len)
            .map(|k| {
                let t = (start + k) as isize - SYNTH_MARGIN as isize;
                let v = if t >= 0 && (t as usize) < total { b[t as usize] } else { 0.0 };
                v * taper[k]
            })
            .collect();
        for (out, tau) in [(&mut c, tau1), (&mut d, tau2)] {
            let shifted = if tau == 0.0 { ext.clone() } else { shifter.apply(&ext, tau / dt) };
            for t in owned.clone() {
                out[t] = if tau == 0.0 { b[t] } else { shifted[t - start + SYNTH_MARGIN] };
            }
        }
    }

    let record = SampleRecord::new([b, c, d], dt)?.with_label("simulated");
    let truth = AngleTrack::new(track.points.clone(), plan)?;
    Ok(SimulatedRecord { record, truth, delays })
}

/// Adds white Gaussian noise at `snr_db` relative to the signal's mean
/// power. An infinite SNR returns the input unchanged.
pub fn add_awgn(signal: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>, SimulateError> {
    if snr_db == f64::INFINITY {
        return Ok(signal.to_vec());
    }
    if snr_db.is_nan() {
        return Err(SimulateError::Invalid("SNR is NaN".into()));
    }
    let power = signal.iter().map(|v| v * v).sum::<f64>() / signal.len().max(1) as f64;
    if !(power > 0.0) {
        return Err(SimulateError::ZeroPower(snr_db));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(signal
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sigma * z
        })
        .collect())
}

/// Independent AWGN on each channel, seeded per channel from `seed`.
pub fn add_channel_noise(record: &SampleRecord, snr_db: f64, seed: u64) -> Result<SampleRecord, SimulateError> {
    let mut ch = 0u64;
    record.map_channels(|s| {
        let out = add_awgn(s, snr_db, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(ch));
        ch += 1;
        out
    })
}

/// Synthetic stand-in for a measured antenna-B waveform: Gaussian noise
/// under a bursty envelope, band-limited to `[low_hz, high_hz]` with
/// raised-cosine band edges, scaled to unit RMS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub samples: usize,
    pub dt: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Expected number of bursts per 1000 samples.
    pub burst_rate: f64,
    pub seed: u64,
}

impl ReferenceSpec {
    pub fn new(samples: usize, dt: f64, seed: u64) -> Self {
        Self { samples, dt, low_hz: 40e6, high_hz: 80e6, burst_rate: 4.0, seed }
    }
}

pub fn synth_reference(spec: &ReferenceSpec) -> Result<Vec<f64>, SimulateError> {
    let n = spec.samples;
    if n < 2 {
        return Err(SimulateError::Invalid("reference needs at least 2 samples".into()));
    }
    let nyquist = 0.5 / spec.dt;
    if !(spec.low_hz >= 0.0 && spec.low_hz < spec.high_hz && spec.high_hz <= nyquist) {
        return Err(SimulateError::Invalid(format!("bad reference band {}..{} Hz", spec.low_hz, spec.high_hz)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut envelope = vec![0.35; n];
    let bursts = ((n as f64) * spec.burst_rate / 1000.0).ceil() as usize;
    for _ in 0..bursts {
        let at = rng.gen_range(0..n);
        let amp = rng.gen_range(0.5..2.0);
        let decay = rng.gen_range(20.0..150.0);
        for (t, e) in envelope.iter_mut().enumerate().skip(at.saturating_sub(8)) {
            let x = t as f64 - at as f64;
            let shape = if x < 0.0 { (x / 4.0).exp() } else { (-x / decay).exp() };
            if shape < 1e-4 && x > 0.0 {
                break;
            }
            *e += amp * shape;
        }
    }
    let mut spectrum: Vec<Complex64> = envelope
        .iter()
        .map(|&e| {
            let z: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(e * z, 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spectrum);
    let edge = 0.1 * (spec.high_hz - spec.low_hz);
    for (k, bin) in spectrum.iter_mut().enumerate() {
        let kk = if k <= n / 2 { k } else { n - k };
        let f = kk as f64 / (n as f64 * spec.dt);
        let gain = if f < spec.low_hz - edge || f > spec.high_hz + edge {
            0.0
        } else if f < spec.low_hz + edge {
            0.5 - 0.5 * (PI * (f - (spec.low_hz - edge)) / (2.0 * edge)).cos()
        } else if f > spec.high_hz - edge {
            0.5 + 0.5 * (PI * (f - (spec.high_hz - edge)) / (2.0 * edge)).cos()
        } else {
            1.0
        };
        *bin *= gain;
    }
    planner.plan_fft_inverse(n).process(&mut spectrum);
    let out: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if !(rms > 0.0) {
        return Err(SimulateError::Invalid("reference band contains no energy".into()));
    }
    Ok(out.into_iter().map(|v| v / rms).collect())
}

/// Path of the ground-truth sidecar for a record path: `x.csv` becomes
/// `x.truth.csv`.
pub fn truth_path(record_path: &Path) -> std::path::PathBuf {
    let stem = record_path.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
    record_path.with_file_name(format!("{stem}.truth.csv"))
}

/// Writes the `window_index,az_deg,el_deg,tau1_s,tau2_s` sidecar.
pub fn write_truth<W: Write>(sim: &SimulatedRecord, w: &mut W, comments: &[(String, String)]) -> std::io::Result<()> {
    writeln!(w, "# window={}", sim.truth.plan.window_length)?;
    writeln!(w, "# hop={}", sim.truth.plan.hop)?;
    writeln!(w, "# dt={:e}", sim.record.sample_interval())?;
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "window_index,az_deg,el_deg,tau1_s,tau2_s")?;
    for (i, (p, (t1, t2))) in sim.truth.points.iter().zip(&sim.delays).enumerate() {
        writeln!(w, "{i},{},{},{:e},{:e}", p.az_deg, p.el_deg, t1, t2)?;
    }
    Ok(())
}

pub fn save_truth(sim: &SimulatedRecord, path: &Path, comments: &[(String, String)]) -> Result<(), SimulateError> {
    let io = |e: std::io::Error| SimulateError::Truth { path: path.display().to_string(), msg: e.to_string() };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    write_truth(sim, &mut w, comments).and_then(|_| w.flush()).map_err(io)
}

/// Ground truth read back from a sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthFile {
    pub track: AngleTrack,
    pub delays: Vec<(f64, f64)>,
}

pub fn read_truth<R: BufRead>(reader: R, origin: &str) -> Result<TruthFile, SimulateError> {
    let err = |msg: String| SimulateError::Truth { path: origin.to_string(), msg };
    let mut window = None;
    let mut hop = None;
    let mut points = Vec::new();
    let mut delays = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with("window_index") {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            let c = c.trim();
            if let Some(v) = c.strip_prefix("window=") {
                window = Some(v.parse::<usize>().map_err(|_| err(format!("bad window `{v}`")))?);
            } else if let Some(v) = c.strip_prefix("hop=") {
                hop = Some(v.parse::<usize>().map_err(|_| err(format!("bad hop `{v}`")))?);
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(err(format!("line {}: expected 5 fields", lineno + 1)));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err(format!("line {}: bad number `{s}`", lineno + 1)));
        let idx: usize = f[0].trim().parse().map_err(|_| err(format!("line {}: bad index", lineno + 1)))?;
        if idx != points.len() {
            return Err(err(format!("line {}: window index {idx} out of order", lineno + 1)));
        }
        points.push(Angles::new(num(f[1])?, num(f[2])?));
        delays.push((num(f[3])?, num(f[4])?));
    }
    let plan = SegmentationPlan::new(
        window.ok_or_else(|| err("missing `# window=` header".into()))?,
        hop.ok_or_else(|| err("missing `# hop=` header".into()))?,
    )?;
    Ok(TruthFile { track: AngleTrack::new(points, plan)?, delays })
}

pub fn load_truth(path: &Path) -> Result<TruthFile, SimulateError> {
    let file = fs::File::open(path)
        .map_err(|e| SimulateError::Truth { path: path.display().to_string(), msg: e.to_string() })?;
    read_truth(BufReader::new(file), &path.display().to_string())
}
