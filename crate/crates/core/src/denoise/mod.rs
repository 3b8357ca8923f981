//! Channel preprocessing: Butterworth band-pass, scalar Kalman smoothing
//! and wavelet threshold denoising behind one [`FilterSpec`].
//!
//! Filter strings (CLI and config) are `none`, `bpf`, `bpf:<low>-<high>`
//! (MHz), `kf`, `kf:<q>,<r>` and `wt-<basis>-<rule>` such as `wt-sym4-sure`.

mod butterworth;
mod kalman;
pub mod wavelet;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use butterworth::{Biquad, SosFilter};
pub use kalman::{kalman_filter, kalman_trace, KalmanParams, KalmanTrace};
pub use wavelet::{
    level_band, modwt, wavedec, wavelet_denoise, waverec, Decomposition, Modwt, ThresholdRule, WaveletBasis,
    WaveletFamily, WaveletKind,
};

#[derive(Debug, Error)]
pub enum DenoiseError {
    #[error("invalid filter spec: {0}")]
    InvalidSpec(String),
    #[error("unknown wavelet basis `{0}`")]
    UnknownBasis(String),
    #[error("signal of {len} samples is too short for {levels} decomposition levels")]
    SignalTooShort { len: usize, levels: usize },
}

/// Default wavelet decomposition depth.
pub const DEFAULT_WAVELET_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandpassSpec {
    /// Total band-pass order (even).
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl BandpassSpec {
    /// Digital preprocessing preset: order 4, 20-100 MHz.
    pub const DIGITAL: BandpassSpec = BandpassSpec { order: 4, low_hz: 20e6, high_hz: 100e6 };
    /// Analog front-end pass-band preset: order 4, 40-80 MHz.
    pub const FRONT_END: BandpassSpec = BandpassSpec { order: 4, low_hz: 40e6, high_hz: 80e6 };

    pub fn design(&self, dt: f64) -> Result<SosFilter, DenoiseError> {
        SosFilter::butterworth_bandpass(self.order, self.low_hz, self.high_hz, dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletSpec {
    pub basis: WaveletKind,
    pub levels: usize,
    pub rule: ThresholdRule,
}

/// One preprocessing filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    /// Bypass.
    None,
    Bandpass(BandpassSpec),
    /// Local-level Kalman; `None` estimates `(q, r)` from each signal.
    Kalman(Option<KalmanParams>),
    Wavelet(WaveletSpec),
}

impl FilterSpec {
    pub fn wavelet(basis: WaveletKind, rule: ThresholdRule) -> Self {
        FilterSpec::Wavelet(WaveletSpec { basis, levels: DEFAULT_WAVELET_LEVELS, rule })
    }

    /// The ten preprocessing rows of the reference benchmark table.
    pub fn benchmark_rows() -> Vec<FilterSpec> {
        let mut rows = Vec::with_capacity(10);
        for basis in [WaveletKind::Coif5, WaveletKind::Db10, WaveletKind::Fk14, WaveletKind::Sym4] {
            rows.push(FilterSpec::wavelet(basis, ThresholdRule::Sure));
            rows.push(FilterSpec::wavelet(basis, ThresholdRule::Universal));
        }
        rows.push(FilterSpec::Bandpass(BandpassSpec::DIGITAL));
        rows.push(FilterSpec::Kalman(None));
        rows
    }

    pub fn validate(&self, dt: f64) -> Result<(), DenoiseError> {
        match self {
            FilterSpec::None => Ok(()),
            FilterSpec::Bandpass(bp) => bp.design(dt).map(|_| ()),
            FilterSpec::Kalman(Some(p)) => p.validate(),
            FilterSpec::Kalman(None) => Ok(()),
            FilterSpec::Wavelet(w) if w.levels == 0 => {
                Err(DenoiseError::InvalidSpec("wavelet levels must be >= 1".into()))
            }
            FilterSpec::Wavelet(_) => Ok(()),
        }
    }

    /// Filters one channel sampled at interval `dt`. Output length always
    /// equals input length.
    pub fn apply(&self, signal: &[f64], dt: f64) -> Result<Vec<f64>, DenoiseError> {
        match self {
            FilterSpec::None => Ok(signal.to_vec()),
            FilterSpec::Bandpass(bp) => bandpass_filter(signal, bp, dt),
            FilterSpec::Kalman(params) => {
                let params = params.unwrap_or_else(|| KalmanParams::estimate(signal));
                kalman_filter(signal, params)
            }
            FilterSpec::Wavelet(w) => wavelet_denoise(signal, &w.basis.basis(), w.levels, w.rule),
        }
    }

    /// Row label in benchmark reports, e.g. `WT-Sym4-SURE`, `BPF`, `KF`.
    pub fn label(&self) -> String {
        match self {
            FilterSpec::None => "NONE".into(),
            FilterSpec::Bandpass(bp) if *bp == BandpassSpec::DIGITAL => "BPF".into(),
            FilterSpec::Bandpass(bp) => format!("BPF-{}-{}", bp.low_hz / 1e6, bp.high_hz / 1e6),
            FilterSpec::Kalman(_) => "KF".into(),
            FilterSpec::Wavelet(w) => format!("WT-{}-{}", w.basis.label(), w.rule.id().to_ascii_uppercase()),
        }
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::None => f.write_str("none"),
            FilterSpec::Bandpass(bp) if *bp == BandpassSpec::DIGITAL => f.write_str("bpf"),
            FilterSpec::Bandpass(bp) => write!(f, "bpf:{}-{}", bp.low_hz / 1e6, bp.high_hz / 1e6),
            FilterSpec::Kalman(None) => f.write_str("kf"),
            FilterSpec::Kalman(Some(p)) => write!(f, "kf:{},{}", p.q, p.r),
            FilterSpec::Wavelet(w) if w.levels == DEFAULT_WAVELET_LEVELS => {
                write!(f, "wt-{}-{}", w.basis.id(), w.rule.id())
            }
            FilterSpec::Wavelet(w) => write!(f, "wt-{}-{}-{}", w.basis.id(), w.rule.id(), w.levels),
        }
    }
}

impl FromStr for FilterSpec {
    type Err = DenoiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || DenoiseError::InvalidSpec(format!("unrecognized filter `{s}`"));
        match lower.as_str() {
            "none" => return Ok(FilterSpec::None),
            "bpf" => return Ok(FilterSpec::Bandpass(BandpassSpec::DIGITAL)),
            "kf" => return Ok(FilterSpec::Kalman(None)),
            _ => {}
        }
        if let Some(band) = lower.strip_prefix("bpf:") {
            let (lo, hi) = band.split_once('-').ok_or_else(bad)?;
            let lo: f64 = lo.parse().map_err(|_| bad())?;
            let hi: f64 = hi.parse().map_err(|_| bad())?;
            return Ok(FilterSpec::Bandpass(BandpassSpec { order: 4, low_hz: lo * 1e6, high_hz: hi * 1e6 }));
        }
        if let Some(qr) = lower.strip_prefix("kf:") {
            let (q, r) = qr.split_once(',').ok_or_else(bad)?;
            let q: f64 = q.parse().map_err(|_| bad())?;
            let r: f64 = r.parse().map_err(|_| bad())?;
            return Ok(FilterSpec::Kalman(Some(KalmanParams::new(q, r)?)));
        }
        if let Some(rest) = lower.strip_prefix("wt-") {
            let parts: Vec<&str> = rest.split('-').collect();
            let (basis, rule, levels) = match parts.as_slice() {
                [b, r] => (*b, *r, DEFAULT_WAVELET_LEVELS),
                [b, r, l] => (*b, *r, l.parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            };
            let spec = WaveletSpec { basis: basis.parse()?, levels, rule: rule.parse()? };
            let spec = FilterSpec::Wavelet(spec);
            spec.validate(1.0)?;
            return Ok(spec);
        }
        Err(bad())
    }
}

/// Zero-phase Butterworth band-pass.
pub fn bandpass_filter(signal: &[f64], spec: &BandpassSpec, dt: f64) -> Result<Vec<f64>, DenoiseError> {
    Ok(spec.design(dt)?.filtfilt(signal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const DT: f64 = 4e-9;

    fn tone(freq: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 * DT).sin()).collect()
    }

    fn rms(v: &[f64]) -> f64 {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn parses_filter_strings() {
        assert_eq!("bpf".parse::<FilterSpec>().unwrap(), FilterSpec::Bandpass(BandpassSpec::DIGITAL));
        assert_eq!("bpf:40-80".parse::<FilterSpec>().unwrap(), FilterSpec::Bandpass(BandpassSpec::FRONT_END));
        assert_eq!("kf".parse::<FilterSpec>().unwrap(), FilterSpec::Kalman(None));
        assert_eq!(
            "wt-sym4-sure".parse::<FilterSpec>().unwrap(),
            FilterSpec::wavelet(WaveletKind::Sym4, ThresholdRule::Sure)
        );
        assert!("wt-haar-sure".parse::<FilterSpec>().is_err());
        assert!("kf:0.1,0".parse::<FilterSpec>().is_err());
        assert!("lowpass".parse::<FilterSpec>().is_err());
        for spec in FilterSpec::benchmark_rows() {
            assert_eq!(spec.to_string().parse::<FilterSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn benchmark_rows_labels() {
        let labels: Vec<String> = FilterSpec::benchmark_rows().iter().map(FilterSpec::label).collect();
        assert_eq!(labels.len(), 10);
        assert_eq!(labels[0], "WT-Coif5-SURE");
        assert_eq!(labels[7], "WT-Sym4-UNIVERSAL");
        assert_eq!(labels[8], "BPF");
        assert_eq!(labels[9], "KF");
    }

    #[test]
    fn bandpass_passes_mid_band() {
        let x = tone(60e6, 4096);
        let y = bandpass_filter(&x, &BandpassSpec::DIGITAL, DT).unwrap();
        let ratio_db = 20.0 * (rms(&y[256..3840]) / rms(&x[256..3840])).log10();
        assert!(ratio_db.abs() < 1.0, "{ratio_db} dB");
    }

    #[test]
    fn bandpass_rejects_low_tone_and_dc() {
        let x = tone(5e6, 8192);
        let y = bandpass_filter(&x, &BandpassSpec::DIGITAL, DT).unwrap();
        let atten_db = 20.0 * (rms(&y[1024..7168]) / rms(&x[1024..7168])).log10();
        assert!(atten_db <= -40.0, "{atten_db} dB");

        let dc = vec![1.0; 2048];
        let y = bandpass_filter(&dc, &BandpassSpec::DIGITAL, DT).unwrap();
        assert!(y[64..1984].iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn bandpass_attenuation_matches_analytic_magnitude() {
        // two passes square the single-pass Butterworth magnitude
        let f = BandpassSpec::DIGITAL.design(DT).unwrap();
        let analytic_db = 40.0 * f.magnitude(5e6, DT).log10();
        assert!(analytic_db <= -40.0, "{analytic_db}");
    }

    #[test]
    fn bandpass_rejects_cutoff_at_nyquist() {
        let spec = BandpassSpec { order: 4, low_hz: 20e6, high_hz: 125e6 };
        assert!(bandpass_filter(&[0.0; 64], &spec, DT).is_err());
    }

    #[test]
    fn every_filter_preserves_length() {
        let x = tone(50e6, 777);
        for spec in FilterSpec::benchmark_rows().into_iter().chain([FilterSpec::None]) {
            let y = spec.apply(&x, DT).unwrap();
            assert_eq!(y.len(), x.len(), "{spec}");
            assert_eq!(y, spec.apply(&x, DT).unwrap(), "{spec} not deterministic");
        }
    }
}
