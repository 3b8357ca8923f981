//! Run configuration: a flat `key = value` file, overridden by flags of
//! the same name, resolved into typed settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use itf_core::denoise::{FilterSpec, WaveletKind};
use itf_core::geometry::{Angles, ArrayGeometry};
use itf_core::signals::SegmentationPlan;
use itf_core::simulate::{AugmentSpec, TrackKind};
use itf_core::xcorr::{CorrelationMethod, InterpSpec, WaveletCorrelation};

use crate::CliError;

/// Every recognised key with its default (empty = unset) and help text.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("input", "", "input file(s); comma-separated for bench"),
    ("output", "", "output file"),
    ("filter", "wt-sym4-sure", "denoising filter: none, bpf, bpf:LO-HI, kf, kf:Q,R, wt-<basis>-<rule>"),
    ("cc", "ccwd", "correlation method: cctd, ccfd, ccwd"),
    ("interp", "linear:1", "peak interpolation: none, linear:N, cubic:N"),
    ("window", "256", "window length in samples"),
    ("hop", "1", "window hop in samples"),
    ("baseline-m", "15", "baseline length in metres"),
    ("speed", "299792458", "propagation speed in m/s"),
    ("dt-ns", "4", "sample interval in ns (simulation; checked against map inputs)"),
    ("band-mhz", "40-80", "signal band in MHz (reference synthesis and CCWD level selection)"),
    ("ccwd-basis", "sym4", "wavelet basis of the wavelet-domain correlator"),
    ("ccwd-levels", "4", "decomposition depth of the wavelet-domain correlator"),
    ("seed", "0", "base random seed"),
    ("snr-db", "inf", "channel SNR in dB for simulate (inf = no noise)"),
    ("windows", "1000", "number of windows to simulate"),
    ("track", "random-walk", "track shape: constant, sweep, random-walk"),
    ("az", "120", "track start azimuth, degrees"),
    ("el", "45", "track start elevation, degrees"),
    ("az-end", "240", "sweep end azimuth, degrees"),
    ("el-end", "30", "sweep end elevation, degrees"),
    ("step-deg", "0.25", "random-walk step, degrees"),
    ("aug-noise-deg", "0", "augmentation noise sigma, degrees"),
    ("aug-noise-az", "false", "also add augmentation noise to azimuth"),
    ("aug-scale", "1", "augmentation scale factor about the track centroid"),
    ("aug-flip", "false", "rotate the track by 180 degrees of azimuth"),
    ("reference", "", "record whose channel B is the simulation reference (default: synthetic)"),
    ("grid", "full", "bench grid: full or single (uses filter/cc/interp)"),
    ("markdown", "", "bench: also write a markdown table here"),
    ("elevation-series", "", "map: also write elevation against time here"),
];

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

/// Raw key-value settings after merging file and flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::MissingInput(format!("config file {} not found", path.display()))
            } else {
                CliError::Config(format!("cannot read config file {}: {e}", path.display()))
            }
        })?;
        Self::parse_str(&text, &path.display().to_string())
    }

    pub fn parse_str(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut settings = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected `key = value`", i + 1)))?;
            settings.set(key, value.trim()).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{origin}:{}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(settings)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = normalize_key(key);
        if !known(&key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.get(key).is_some_and(|v| !v.is_empty())
    }

    /// Value with the default filled in.
    pub fn get(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(v) => v,
            None => KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d).unwrap_or(""),
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(key);
        v.trim().parse().map_err(|e| CliError::Config(format!("invalid {key} `{v}`: {e}")))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.is_set(key).then(|| PathBuf::from(self.get(key)))
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key).trim().to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" | "" => Ok(false),
            other => Err(CliError::Config(format!("invalid {key} `{other}`: expected true or false"))),
        }
    }
}

fn parse_band(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Config(format!("invalid band-mhz `{text}`: expected LO-HI"));
    let (lo, hi) = text.split_once('-').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo >= 0.0 && lo < hi) {
        return Err(bad());
    }
    Ok((lo * 1e6, hi * 1e6))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Full,
    Single,
}

/// Fully validated settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub geometry: ArrayGeometry,
    pub dt: f64,
    pub band_hz: (f64, f64),
    pub plan: SegmentationPlan,
    pub filter: FilterSpec,
    pub method: CorrelationMethod,
    pub interp: InterpSpec,
    pub wavelet: WaveletCorrelation,
    pub seed: u64,
    pub snr_db: f64,
    pub windows: usize,
    pub track: TrackKind,
    pub augment: AugmentSpec,
    pub reference: Option<PathBuf>,
    pub grid: GridKind,
    pub markdown: Option<PathBuf>,
    pub elevation_series: Option<PathBuf>,
    settings: Settings,
}

impl RunConfig {
    pub fn resolve(settings: Settings) -> Result<Self, CliError> {
        let s = &settings;
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        let geometry = ArrayGeometry::new(s.parse("baseline-m")?, s.parse("speed")?).map_err(|e| cfg(&e))?;
        let dt_ns: f64 = s.parse("dt-ns")?;
        if !(dt_ns > 0.0 && dt_ns.is_finite()) {
            return Err(CliError::Config(format!("dt-ns must be positive, got {dt_ns}")));
        }
        let dt = dt_ns * 1e-9;
        let band_hz = parse_band(s.get("band-mhz"))?;
        let plan = SegmentationPlan::new(s.parse("window")?, s.parse("hop")?).map_err(|e| cfg(&e))?;
        let filter: FilterSpec = s.parse("filter")?;
        filter.validate(dt).map_err(|e| cfg(&e))?;
        let method: CorrelationMethod = s.parse("cc")?;
        let interp: InterpSpec = s.parse("interp")?;
        let basis: WaveletKind = s.parse("ccwd-basis")?;
        let wavelet = WaveletCorrelation {
            basis,
            levels: s.parse("ccwd-levels")?,
            band_low_hz: band_hz.0,
            band_high_hz: band_hz.1,
            dt,
        };
        if method == CorrelationMethod::Wavelet {
            wavelet.selected_levels().map_err(|e| cfg(&e))?;
        }
        let snr_db: f64 = match s.get("snr-db").trim() {
            "inf" | "+inf" | "none" => f64::INFINITY,
            _ => s.parse("snr-db")?,
        };
        let windows: usize = s.parse("windows")?;
        if windows == 0 {
            return Err(CliError::Config("windows must be at least 1".into()));
        }
        let start = Angles::new(s.parse("az")?, s.parse("el")?);
        let track = match s.get("track").trim() {
            "constant" => TrackKind::Constant(start),
            "sweep" | "linear-sweep" => TrackKind::LinearSweep { from: start, to: Angles::new(s.parse("az-end")?, s.parse("el-end")?) },
            "random-walk" => TrackKind::RandomWalk { start, step_deg: s.parse("step-deg")? },
            other => return Err(CliError::Config(format!("invalid track `{other}`"))),
        };
        for el in [start.el_deg, s.parse("el-end")?] {
            if !(0.0..=90.0).contains(&el) {
                return Err(CliError::Config(format!("elevation {el} outside [0, 90]")));
            }
        }
        let seed: u64 = s.parse("seed")?;
        let augment = AugmentSpec {
            noise_sigma_deg: s.parse("aug-noise-deg")?,
            noise_azimuth: s.flag("aug-noise-az")?,
            scale_factor: s.parse("aug-scale")?,
            flip: s.flag("aug-flip")?,
            seed: seed.wrapping_add(1),
        };
        if !(augment.noise_sigma_deg >= 0.0) || !(augment.scale_factor > 0.0) {
            return Err(CliError::Config("aug-noise-deg must be >= 0 and aug-scale > 0".into()));
        }
        let grid = match s.get("grid").trim() {
            "full" => GridKind::Full,
            "single" => GridKind::Single,
            other => return Err(CliError::Config(format!("invalid grid `{other}`: expected full or single"))),
        };
        let inputs = if s.is_set("input") {
            s.get("input").split(',').map(|p| PathBuf::from(p.trim())).filter(|p| !p.as_os_str().is_empty()).collect()
        } else {
            Vec::new()
        };
        Ok(RunConfig {
            inputs,
            output: s.path("output"),
            geometry,
            dt,
            band_hz,
            plan,
            filter,
            method,
            interp,
            wavelet,
            seed,
            snr_db,
            windows,
            track,
            augment,
            reference: s.path("reference"),
            grid,
            markdown: s.path("markdown"),
            elevation_series: s.path("elevation-series"),
            settings,
        })
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.settings.is_set(key)
    }

    pub fn single_input(&self) -> Result<&Path, CliError> {
        match self.inputs.as_slice() {
            [one] => Ok(one),
            [] => Err(CliError::Config("missing --input".into())),
            _ => Err(CliError::Config("expected a single --input".into())),
        }
    }

    pub fn output(&self) -> Result<&Path, CliError> {
        self.output.as_deref().ok_or_else(|| CliError::Config("missing --output".into()))
    }

    /// Header comments for output files: the resolved value of every
    /// setting. Paths are reduced to file names so that reruns in another
    /// directory produce identical files.
    pub fn provenance(&self, command: &str) -> Vec<(String, String)> {
        let mut out = vec![
            ("generator".to_string(), format!("itf {}", env!("CARGO_PKG_VERSION"))),
            ("command".to_string(), command.to_string()),
        ];
        for (key, _, _) in KEYS {
            if *key == "output" {
                continue;
            }
            let value = self.settings.get(key);
            let value = match *key {
                "input" | "reference" | "markdown" | "elevation-series" => value
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| Path::new(p.trim()).file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
                    .collect::<Vec<_>>()
                    .join(","),
                _ => value.to_string(),
            };
            out.push((key.to_string(), value));
        }
        out
    }
}
