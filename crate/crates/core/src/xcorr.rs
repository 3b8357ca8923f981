//! Normalized cross-correlation of window pairs in the time, frequency and
//! wavelet domains, correlation-peak refinement, and lag to TDOA
//! conversion.
//!
//! All three correlators share one lag axis `-(W-1) ..= W-1` and one sign
//! convention: the coefficient at lag `k` is
//! `sum_n x[n] * y[n + k] / (|x| |y|)` with zeros outside the window, so a
//! positive lag means `y` is delayed relative to `x`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::denoise::{level_band, modwt, DenoiseError, WaveletKind};

/// Center frequency used for the phase difference, Hz.
pub const CENTER_FREQUENCY_HZ: f64 = 60e6;
/// Half-width, in integer lags, of the neighborhood resampled around the
/// correlation peak.
pub const REFINE_HALF_WIDTH: usize = 8;

#[derive(Debug, Error)]
pub enum XcorrError {
    #[error("degenerate (zero-variance) input")]
    Degenerate,
    #[error("segment lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no wavelet level between 1 and {levels} overlaps the {low_hz}-{high_hz} Hz band")]
    NoLevelInBand { levels: usize, low_hz: f64, high_hz: f64 },
    #[error("invalid correlation setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Wavelet(#[from] DenoiseError),
}

/// Normalized correlation coefficients on lags `-max_lag ..= max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub max_lag: usize,
    pub coefficients: Vec<f64>,
}

impl CorrelationSeries {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn lag_of(&self, index: usize) -> isize {
        index as isize - self.max_lag as isize
    }

    pub fn at_lag(&self, lag: isize) -> Option<f64> {
        let idx = lag + self.max_lag as isize;
        if idx < 0 {
            return None;
        }
        self.coefficients.get(idx as usize).copied()
    }

    pub fn lags(&self) -> impl Iterator<Item = isize> + '_ {
        (0..self.coefficients.len()).map(|i| self.lag_of(i))
    }

    /// Integer lag of the largest coefficient; ties go to the smallest
    /// `|lag|`, then to the negative side.
    pub fn peak(&self) -> (isize, f64) {
        let mut best: Option<(isize, f64)> = None;
        for (i, &c) in self.coefficients.iter().enumerate() {
            let lag = self.lag_of(i);
            best = match best {
                None => Some((lag, c)),
                Some((bl, bc)) if c > bc || (c == bc && lag.unsigned_abs() < bl.unsigned_abs()) => Some((lag, c)),
                keep => keep,
            };
        }
        best.unwrap_or((0, 0.0))
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(f64, f64), XcorrError> {
    if x.len() != y.len() {
        return Err(XcorrError::LengthMismatch(x.len(), y.len()));
    }
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if x.is_empty() || !(nx > 0.0) || !(ny > 0.0) || !nx.is_finite() || !ny.is_finite() {
        return Err(XcorrError::Degenerate);
    }
    Ok((nx, ny))
}

/// Unnormalized zero-padded correlation by direct summation.
fn raw_correlation(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; 2 * n - 1];
    for (i, slot) in out.iter_mut().enumerate() {
        let k = i as isize - (n as isize - 1);
        let (xs, ys) = if k >= 0 { (&x[..n - k as usize], &y[k as usize..]) } else { (&x[(-k) as usize..], &y[..n - (-k) as usize]) };
        *slot = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
    }
    out
}

/// Time-domain correlation (direct sliding dot product).
pub fn cc_time(x: &[f64], y: &[f64]) -> Result<CorrelationSeries, XcorrError> {
    let (nx, ny) = check_pair(x, y)?;
    let scale = 1.0 / (nx * ny);
    let coefficients = raw_correlation(x, y).into_iter().map(|v| v * scale).collect();
    Ok(CorrelationSeries { max_lag: x.len() - 1, coefficients })
}

/// Frequency-domain correlator with FFT plans cached for one window length.
pub struct FreqCorrelator {
    len: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FreqCorrelator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FreqCorrelator").field("len", &self.len).field("fft_len", &self.fft_len).finish()
    }
}

impl FreqCorrelator {
    pub fn new(len: usize) -> Self {
        let fft_len = (2 * len.max(1) - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self { len, fft_len, forward: planner.plan_fft_forward(fft_len), inverse: planner.plan_fft_inverse(fft_len) }
    }

    pub fn correlate(&self, x: &[f64], y: &[f64]) -> Result<CorrelationSeries, XcorrError> {
        let (nx, ny) = check_pair(x, y)?;
        if x.len() != self.len {
            return Err(XcorrError::LengthMismatch(x.len(), self.len));
        }
        let m = self.fft_len;
        let mut fx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fx.resize(m, Complex64::new(0.0, 0.0));
        let mut fy: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fy.resize(m, Complex64::new(0.0, 0.0));
        self.forward.process(&mut fx);
        self.forward.process(&mut fy);
        let mut prod: Vec<Complex64> = fx.iter().zip(&fy).map(|(a, b)| a.conj() * b).collect();
        self.inverse.process(&mut prod);
        let scale = 1.0 / (m as f64 * nx * ny);
        let n = self.len;
        let mut coefficients = Vec::with_capacity(2 * n - 1);
        for k in -(n as isize - 1)..=(n as isize - 1) {
            coefficients.push(prod[k.rem_euclid(m as isize) as usize].re * scale);
        }
        Ok(CorrelationSeries { max_lag: n - 1, coefficients })
    }
}

/// Frequency-domain correlation via the conjugate spectral product.
pub fn cc_freq(x: &[f64], y: &[f64]) -> Result<CorrelationSeries, XcorrError> {
    FreqCorrelator::new(x.len()).correlate(x, y)
}

/// Configuration of the wavelet-domain correlator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletCorrelation {
    pub basis: WaveletKind,
    /// MODWT depth.
    pub levels: usize,
    /// Signal band used to pick the contributing levels, Hz.
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    /// Sample interval, s.
    pub dt: f64,
}

impl WaveletCorrelation {
    pub fn new(dt: f64) -> Self {
        Self { basis: WaveletKind::Sym4, levels: 4, band_low_hz: 40e6, band_high_hz: 80e6, dt }
    }

    /// Detail levels (1-based) whose nominal pass-band overlaps the signal band.
    pub fn selected_levels(&self) -> Result<Vec<usize>, XcorrError> {
        let levels: Vec<usize> = (1..=self.levels)
            .filter(|&j| {
                let (lo, hi) = level_band(j, self.dt);
                lo < self.band_high_hz && self.band_low_hz < hi
            })
            .collect();
        if levels.is_empty() {
            return Err(XcorrError::NoLevelInBand {
                levels: self.levels,
                low_hz: self.band_low_hz,
                high_hz: self.band_high_hz,
            });
        }
        Ok(levels)
    }
}

/// Wavelet-domain correlation: per-level correlation of undecimated detail
/// coefficients over the band-matched levels, combined with weights equal
/// to each level's coefficient energy `|Wx_j| |Wy_j|`.
pub fn cc_wavelet(x: &[f64], y: &[f64], config: &WaveletCorrelation) -> Result<CorrelationSeries, XcorrError> {
    check_pair(x, y)?;
    let selected = config.selected_levels()?;
    let depth = *selected.last().unwrap();
    let basis = config.basis.basis();
    // zero padding past the deepest filter's support keeps the transform
    // from wrapping one end of the window onto the other
    let pad = ((1usize << depth) - 1) * (basis.len() - 1);
    let n = x.len();
    let padded = |s: &[f64]| {
        let mut v = s.to_vec();
        v.resize(n + pad, 0.0);
        v
    };
    let wx = modwt(&padded(x), &basis, depth)?;
    let wy = modwt(&padded(y), &basis, depth)?;
    let mut acc = vec![0.0; 2 * n - 1];
    let mut weight = 0.0;
    for j in selected {
        let (dx, dy) = (&wx.details[j - 1], &wy.details[j - 1]);
        let ex = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ey = dy.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(ex > 0.0 && ey > 0.0) {
            continue;
        }
        // weight * (raw / weight) collapses to the raw level correlation
        let raw = raw_correlation(dx, dy);
        for (a, r) in acc.iter_mut().zip(&raw[pad..pad + 2 * n - 1]) {
            *a += r;
        }
        weight += ex * ey;
    }
    if !(weight > 0.0) {
        return Err(XcorrError::Degenerate);
    }
    acc.iter_mut().for_each(|v| *v /= weight);
    Ok(CorrelationSeries { max_lag: n - 1, coefficients: acc })
}

/// Correlation domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorrelationMethod {
    Time,
    Frequency,
    Wavelet,
}

impl CorrelationMethod {
    pub const ALL: [CorrelationMethod; 3] =
        [CorrelationMethod::Time, CorrelationMethod::Frequency, CorrelationMethod::Wavelet];

    pub fn id(self) -> &'static str {
        match self {
            CorrelationMethod::Time => "cctd",
            CorrelationMethod::Frequency => "ccfd",
            CorrelationMethod::Wavelet => "ccwd",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CorrelationMethod::Time => "CCTD",
            CorrelationMethod::Frequency => "CCFD",
            CorrelationMethod::Wavelet => "CCWD",
        }
    }
}

impl fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CorrelationMethod {
    type Err = XcorrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cctd" => Ok(CorrelationMethod::Time),
            "ccfd" => Ok(CorrelationMethod::Frequency),
            "ccwd" => Ok(CorrelationMethod::Wavelet),
            _ => Err(XcorrError::Invalid(format!("unknown correlation method `{s}`"))),
        }
    }
}

/// A correlator bound to one method and window length.
#[derive(Debug)]
pub enum Correlator {
    Time,
    Frequency(FreqCorrelator),
    Wavelet(WaveletCorrelation),
}

impl Correlator {
    pub fn new(method: CorrelationMethod, window_len: usize, wavelet: WaveletCorrelation) -> Result<Self, XcorrError> {
        Ok(match method {
            CorrelationMethod::Time => Correlator::Time,
            CorrelationMethod::Frequency => Correlator::Frequency(FreqCorrelator::new(window_len)),
            CorrelationMethod::Wavelet => {
                wavelet.selected_levels()?;
                Correlator::Wavelet(wavelet)
            }
        })
    }

    pub fn correlate(&self, x: &[f64], y: &[f64]) -> Result<CorrelationSeries, XcorrError> {
        match self {
            Correlator::Time => cc_time(x, y),
            Correlator::Frequency(f) => f.correlate(x, y),
            Correlator::Wavelet(cfg) => cc_wavelet(x, y, cfg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpMethod {
    None,
    Linear,
    Cubic,
}

impl InterpMethod {
    pub fn id(self) -> &'static str {
        match self {
            InterpMethod::None => "none",
            InterpMethod::Linear => "linear",
            InterpMethod::Cubic => "cubic",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InterpMethod::None => "None",
            InterpMethod::Linear => "Linear",
            InterpMethod::Cubic => "Cubic",
        }
    }
}

/// Peak interpolation: method and upsampling factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InterpSpec {
    pub method: InterpMethod,
    pub factor: usize,
}

impl InterpSpec {
    pub const NONE: InterpSpec = InterpSpec { method: InterpMethod::None, factor: 1 };

    pub fn new(method: InterpMethod, factor: usize) -> Result<Self, XcorrError> {
        if !(1..=64).contains(&factor) {
            return Err(XcorrError::Invalid(format!("interpolation factor must be in 1..=64, got {factor}")));
        }
        if method == InterpMethod::None && factor != 1 {
            return Err(XcorrError::Invalid("`none` interpolation takes factor 1".into()));
        }
        Ok(Self { method, factor })
    }

    pub fn linear(factor: usize) -> Self {
        Self::new(InterpMethod::Linear, factor).expect("valid factor")
    }

    pub fn cubic(factor: usize) -> Self {
        Self::new(InterpMethod::Cubic, factor).expect("valid factor")
    }

    /// Factor 1 is a plain integer peak whatever the method.
    pub fn is_identity(&self) -> bool {
        self.method == InterpMethod::None || self.factor == 1
    }
}

impl fmt::Display for InterpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            InterpMethod::None => f.write_str("none"),
            m => write!(f, "{}:{}", m.id(), self.factor),
        }
    }
}

impl FromStr for InterpSpec {
    type Err = XcorrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "none" {
            return Ok(InterpSpec::NONE);
        }
        let bad = || XcorrError::Invalid(format!("bad interpolation `{s}`, expected none, linear:N or cubic:N"));
        let (method, factor) = lower.split_once(':').ok_or_else(bad)?;
        let factor: usize = factor.parse().map_err(|_| bad())?;
        let method = match method {
            "linear" => InterpMethod::Linear,
            "cubic" => InterpMethod::Cubic,
            _ => return Err(bad()),
        };
        InterpSpec::new(method, factor)
    }
}

/// Natural cubic spline second derivatives for unit-spaced knots.
fn spline_second_derivatives(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1])
    let inner = n - 2;
    let mut c = vec![0.0; inner];
    let mut d = vec![0.0; inner];
    for i in 0..inner {
        let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
        if i == 0 {
            c[i] = 1.0 / 4.0;
            d[i] = rhs / 4.0;
        } else {
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
    }
    for i in (0..inner).rev() {
        m[i + 1] = if i + 1 < inner { d[i] - c[i] * m[i + 2] } else { d[i] };
    }
    m
}

fn spline_eval(y: &[f64], m: &[f64], t: f64) -> f64 {
    let last = y.len() - 1;
    let i = (t.floor() as usize).min(last.saturating_sub(1));
    let u = t - i as f64;
    if i >= last {
        return y[last];
    }
    let a = 1.0 - u;
    a * y[i] + u * y[i + 1] + ((a * a * a - a) * m[i] + (u * u * u - u) * m[i + 1]) / 6.0
}

/// The integer correlation peak with its `+-8` lag neighborhood, enough
/// to refine the peak without keeping the full series.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakRegion {
    pub peak_lag: isize,
    pub peak_value: f64,
    /// Lag of `values[0]`.
    pub first_lag: isize,
    pub values: Vec<f64>,
}

impl CorrelationSeries {
    pub fn peak_region(&self) -> PeakRegion {
        let (peak_lag, peak_value) = self.peak();
        if self.is_empty() {
            return PeakRegion { peak_lag, peak_value, first_lag: 0, values: vec![peak_value] };
        }
        let peak_idx = (peak_lag + self.max_lag as isize) as usize;
        let lo = peak_idx.saturating_sub(REFINE_HALF_WIDTH);
        let hi = (peak_idx + REFINE_HALF_WIDTH).min(self.len() - 1);
        PeakRegion { peak_lag, peak_value, first_lag: self.lag_of(lo), values: self.coefficients[lo..=hi].to_vec() }
    }
}

/// Fractional lag of the correlation peak.
///
/// The integer argmax is found first; its `+-8` lag neighborhood is then
/// resampled `factor` times more densely (piecewise-linear or natural
/// cubic spline) and the argmax of the resampled curve is returned. Ties
/// go to the smallest `|lag|`.
pub fn refine_peak(series: &CorrelationSeries, interp: &InterpSpec) -> f64 {
    refine_region(&series.peak_region(), interp)
}

/// [`refine_peak`] on a precomputed neighborhood.
pub fn refine_region(region: &PeakRegion, interp: &InterpSpec) -> f64 {
    let knots = &region.values;
    if interp.is_identity() || knots.len() < 2 {
        return region.peak_lag as f64;
    }
    let second = match interp.method {
        InterpMethod::Cubic => spline_second_derivatives(knots),
        _ => Vec::new(),
    };
    let f = interp.factor;
    let steps = (knots.len() - 1) * f;
    let mut best = (f64::NEG_INFINITY, region.peak_lag as f64);
    for s in 0..=steps {
        let t = s as f64 / f as f64;
        let v = match interp.method {
            InterpMethod::Cubic => spline_eval(knots, &second, t),
            _ => {
                let i = s / f;
                let u = (s % f) as f64 / f as f64;
                if i + 1 < knots.len() {
                    knots[i] * (1.0 - u) + knots[i + 1] * u
                } else {
                    knots[i]
                }
            }
        };
        let lag = region.first_lag as f64 + t;
        if v > best.0 || (v == best.0 && lag.abs() < best.1.abs()) {
            best = (v, lag);
        }
    }
    best.1
}

/// One of the two orthogonal baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    /// Antennae B and C; its delay is `tau1`.
    Bc,
    /// Antennae B and D; its delay is `tau2`.
    Bd,
}

/// Per-window, per-baseline delay estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdoaEstimate {
    pub window_index: usize,
    pub baseline: Baseline,
    /// Fractional lag in samples.
    pub lag: f64,
    /// `lag * dt`, seconds.
    pub tau: f64,
    pub peak_coefficient: f64,
    /// `2 pi f tau`, radians.
    pub phase: f64,
}

/// `(tau, phase)` for a fractional lag: `tau = lag * dt`,
/// `phase = 2 pi f tau`.
pub fn lag_to_tdoa(lag: f64, dt: f64, freq_hz: f64) -> (f64, f64) {
    let tau = lag * dt;
    (tau, 2.0 * PI * freq_hz * tau)
}
