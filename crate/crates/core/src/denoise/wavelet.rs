//! Orthogonal wavelet filter banks, periodic DWT/IDWT, the undecimated
//! (MODWT) transform, and threshold denoising.
//!
//! Filters are stored as the scaling (low-pass reconstruction) sequence
//! `g`, normalized so that `sum(g) = sqrt(2)` and `sum(g^2) = 1`. The
//! wavelet filter is the quadrature mirror `h[n] = (-1)^n g[L-1-n]`.

use std::fmt;
use std::str::FromStr;

use super::DenoiseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletFamily {
    Symlet,
    Coiflet,
    Daubechies,
    FejerKorovkin,
}

/// The shipped filter banks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletKind {
    Sym4,
    Coif5,
    Db10,
    Fk14,
}

impl WaveletKind {
    pub const ALL: [WaveletKind; 4] = [WaveletKind::Sym4, WaveletKind::Coif5, WaveletKind::Db10, WaveletKind::Fk14];

    pub fn lookup(family: WaveletFamily, order: usize) -> Result<Self, DenoiseError> {
        match (family, order) {
            (WaveletFamily::Symlet, 4) => Ok(WaveletKind::Sym4),
            (WaveletFamily::Coiflet, 5) => Ok(WaveletKind::Coif5),
            (WaveletFamily::Daubechies, 10) => Ok(WaveletKind::Db10),
            (WaveletFamily::FejerKorovkin, 14) => Ok(WaveletKind::Fk14),
            _ => Err(DenoiseError::UnknownBasis(format!("{family:?} of order {order}"))),
        }
    }

    pub fn family(self) -> WaveletFamily {
        match self {
            WaveletKind::Sym4 => WaveletFamily::Symlet,
            WaveletKind::Coif5 => WaveletFamily::Coiflet,
            WaveletKind::Db10 => WaveletFamily::Daubechies,
            WaveletKind::Fk14 => WaveletFamily::FejerKorovkin,
        }
    }

    pub fn order(self) -> usize {
        match self {
            WaveletKind::Sym4 => 4,
            WaveletKind::Coif5 => 5,
            WaveletKind::Db10 => 10,
            WaveletKind::Fk14 => 14,
        }
    }

    /// Lower-case identifier used in filter strings (`sym4`, `fk14`, ...).
    pub fn id(self) -> &'static str {
        match self {
            WaveletKind::Sym4 => "sym4",
            WaveletKind::Coif5 => "coif5",
            WaveletKind::Db10 => "db10",
            WaveletKind::Fk14 => "fk14",
        }
    }

    /// Report label (`Sym4`, `Coif5`, `db10`, `FK14`).
    pub fn label(self) -> &'static str {
        match self {
            WaveletKind::Sym4 => "Sym4",
            WaveletKind::Coif5 => "Coif5",
            WaveletKind::Db10 => "db10",
            WaveletKind::Fk14 => "FK14",
        }
    }

    pub fn basis(self) -> WaveletBasis {
        let scaling: &'static [f64] = match self {
            WaveletKind::Sym4 => &SYM4,
            WaveletKind::Coif5 => &COIF5,
            WaveletKind::Db10 => &DB10,
            WaveletKind::Fk14 => &FK14,
        };
        WaveletBasis::new(self, scaling)
    }
}

impl fmt::Display for WaveletKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for WaveletKind {
    type Err = DenoiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let split = lower.find(|c: char| c.is_ascii_digit()).unwrap_or(lower.len());
        let (name, digits) = lower.split_at(split);
        let family = match name {
            "sym" => WaveletFamily::Symlet,
            "coif" => WaveletFamily::Coiflet,
            "db" => WaveletFamily::Daubechies,
            "fk" => WaveletFamily::FejerKorovkin,
            _ => return Err(DenoiseError::UnknownBasis(s.to_string())),
        };
        let order = digits.parse().map_err(|_| DenoiseError::UnknownBasis(s.to_string()))?;
        WaveletKind::lookup(family, order)
    }
}

/// Analysis/synthesis filters of an orthogonal wavelet.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBasis {
    pub kind: WaveletKind,
    scaling: Vec<f64>,
    wavelet: Vec<f64>,
}

impl WaveletBasis {
    fn new(kind: WaveletKind, scaling: &[f64]) -> Self {
        let l = scaling.len();
        let wavelet = (0..l)
            .map(|n| if n % 2 == 0 { scaling[l - 1 - n] } else { -scaling[l - 1 - n] })
            .collect();
        Self { kind, scaling: scaling.to_vec(), wavelet }
    }

    /// Low-pass (scaling) filter.
    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }

    /// High-pass (wavelet) filter.
    pub fn wavelet(&self) -> &[f64] {
        &self.wavelet
    }

    pub fn len(&self) -> usize {
        self.scaling.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaling.is_empty()
    }

    /// Largest deviation from the orthonormal quadrature-mirror identities:
    /// `sum g = sqrt 2`, `sum g[n] g[n+2k] = delta_k`, `sum h = 0`,
    /// `sum g[n] h[n+2k] = 0`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = &self.scaling;
        let h = &self.wavelet;
        let l = g.len();
        let mut worst = (g.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs();
        worst = worst.max(h.iter().sum::<f64>().abs());
        for shift in (0..l).step_by(2) {
            let dot = |a: &[f64], b: &[f64]| (0..l - shift).map(|n| a[n] * b[n + shift]).sum::<f64>();
            let target = if shift == 0 { 1.0 } else { 0.0 };
            worst = worst.max((dot(g, g) - target).abs());
            worst = worst.max((dot(h, h) - target).abs());
            worst = worst.max(dot(g, h).abs());
            worst = worst.max(dot(h, g).abs());
        }
        worst
    }
}

/// One periodic analysis step on an even-length input.
fn analysis_step(x: &[f64], basis: &WaveletBasis) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (j, (&g, &h)) in basis.scaling.iter().zip(&basis.wavelet).enumerate() {
            let v = x[(2 * k + j) % n];
            a += g * v;
            d += h * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

/// Adjoint of [`analysis_step`].
fn synthesis_step(approx: &[f64], detail: &[f64], basis: &WaveletBasis) -> Vec<f64> {
    let n = approx.len() * 2;
    let mut x = vec![0.0; n];
    for k in 0..approx.len() {
        for (j, (&g, &h)) in basis.scaling.iter().zip(&basis.wavelet).enumerate() {
            x[(2 * k + j) % n] += g * approx[k] + h * detail[k];
        }
    }
    x
}

/// Multi-level periodic DWT.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    /// `details[0]` is level 1 (finest).
    pub details: Vec<Vec<f64>>,
    /// Input length at each level before even-length extension.
    lengths: Vec<usize>,
}

pub fn wavedec(signal: &[f64], basis: &WaveletBasis, levels: usize) -> Result<Decomposition, DenoiseError> {
    check_levels(signal.len(), levels)?;
    let mut current = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        lengths.push(current.len());
        if current.len() % 2 == 1 {
            current.push(*current.last().unwrap());
        }
        let (a, d) = analysis_step(&current, basis);
        details.push(d);
        current = a;
    }
    Ok(Decomposition { approx: current, details, lengths })
}

pub fn waverec(dec: &Decomposition, basis: &WaveletBasis) -> Vec<f64> {
    let mut current = dec.approx.clone();
    for (detail, &len) in dec.details.iter().zip(&dec.lengths).rev() {
        current = synthesis_step(&current, detail, basis);
        current.truncate(len);
    }
    current
}

fn check_levels(len: usize, levels: usize) -> Result<(), DenoiseError> {
    if levels == 0 {
        return Err(DenoiseError::InvalidSpec("decomposition needs at least one level".into()));
    }
    let needed = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if len < needed {
        return Err(DenoiseError::SignalTooShort { len, levels });
    }
    Ok(())
}

/// Thresholding rule for detail coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThresholdRule {
    /// Stein's unbiased risk estimate, chosen per level.
    Sure,
    /// `sigma * sqrt(2 ln n)`.
    Universal,
    /// Threshold of zero; the transform round-trips unchanged.
    Passthrough,
}

impl ThresholdRule {
    pub fn id(self) -> &'static str {
        match self {
            ThresholdRule::Sure => "sure",
            ThresholdRule::Universal => "universal",
            ThresholdRule::Passthrough => "none",
        }
    }
}

impl FromStr for ThresholdRule {
    type Err = DenoiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sure" => Ok(ThresholdRule::Sure),
            "universal" => Ok(ThresholdRule::Universal),
            "none" | "passthrough" => Ok(ThresholdRule::Passthrough),
            _ => Err(DenoiseError::InvalidSpec(format!("unknown threshold rule `{s}`"))),
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Robust noise scale `median(|d|) / 0.6745`.
pub fn noise_sigma(detail: &[f64]) -> f64 {
    let mut abs: Vec<f64> = detail.iter().map(|d| d.abs()).collect();
    median(&mut abs) / 0.6745
}

/// Threshold (in units of `sigma`) minimizing Stein's unbiased risk
/// estimate of soft thresholding for unit-variance coefficients `x`.
pub fn sure_threshold(x: &[f64]) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    sq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = (f64::INFINITY, 0.0);
    let mut cumsum = 0.0;
    for (k, &s) in sq.iter().enumerate() {
        cumsum += s;
        // risk for t^2 = s: n - 2 #{|x| <= t} + sum_{|x|<=t} x^2 + #{|x|>t} t^2
        let risk = (n as f64 - 2.0 * (k + 1) as f64 + cumsum + (n - k - 1) as f64 * s) / n as f64;
        if risk < best.0 {
            best = (risk, s.sqrt());
        }
    }
    best.1
}

pub fn soft_threshold(value: f64, t: f64) -> f64 {
    let m = value.abs() - t;
    if m > 0.0 {
        m * value.signum()
    } else {
        0.0
    }
}

/// Periodic DWT, per-level soft thresholding of the detail coefficients,
/// and reconstruction. Output length equals input length.
pub fn wavelet_denoise(
    signal: &[f64],
    basis: &WaveletBasis,
    levels: usize,
    rule: ThresholdRule,
) -> Result<Vec<f64>, DenoiseError> {
    let mut dec = wavedec(signal, basis, levels)?;
    if rule != ThresholdRule::Passthrough {
        let universal = (2.0 * (signal.len() as f64).ln()).sqrt();
        for detail in &mut dec.details {
            let sigma = noise_sigma(detail);
            if !(sigma > 0.0) {
                continue;
            }
            let t = match rule {
                ThresholdRule::Universal => universal * sigma,
                ThresholdRule::Sure => {
                    let scaled: Vec<f64> = detail.iter().map(|d| d / sigma).collect();
                    sure_threshold(&scaled) * sigma
                }
                ThresholdRule::Passthrough => 0.0,
            };
            detail.iter_mut().for_each(|d| *d = soft_threshold(*d, t));
        }
    }
    Ok(waverec(&dec, basis))
}

/// Undecimated (maximal overlap) wavelet transform with circular boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Modwt {
    /// `details[j - 1]` holds the level-`j` wavelet coefficients.
    pub details: Vec<Vec<f64>>,
    pub smooth: Vec<f64>,
}

pub fn modwt(signal: &[f64], basis: &WaveletBasis, levels: usize) -> Result<Modwt, DenoiseError> {
    check_levels(signal.len(), levels)?;
    let n = signal.len();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g: Vec<f64> = basis.scaling.iter().map(|v| v * scale).collect();
    let h: Vec<f64> = basis.wavelet.iter().map(|v| v * scale).collect();
    let mut v = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    for j in 1..=levels {
        let stride = 1usize << (j - 1);
        let mut w_next = vec![0.0; n];
        let mut v_next = vec![0.0; n];
        for t in 0..n {
            let mut wt = 0.0;
            let mut vt = 0.0;
            for (l, (&gl, &hl)) in g.iter().zip(&h).enumerate() {
                let idx = (t + n - (stride * l) % n) % n;
                wt += hl * v[idx];
                vt += gl * v[idx];
            }
            w_next[t] = wt;
            v_next[t] = vt;
        }
        details.push(w_next);
        v = v_next;
    }
    Ok(Modwt { details, smooth: v })
}

/// Nominal pass-band `(low, high)` in Hz of MODWT/DWT detail level `level`
/// for sampling interval `dt`: `[fs / 2^(j+1), fs / 2^j]`.
pub fn level_band(level: usize, dt: f64) -> (f64, f64) {
    let fs = 1.0 / dt;
    let hi = fs / (1u64 << level) as f64;
    (hi / 2.0, hi)
}

const SYM4: [f64; 8] = [
    0.0322231006040427,
    -0.012603967262037833,
    -0.09921954357684722,
    0.29785779560527736,
    0.8037387518059161,
    0.49761866763201545,
    -0.02963552764599851,
    -0.07576571478927333,
];

const COIF5: [f64; 30] = [
    -0.000212081862067494,
    0.0003585777411617577,
    0.0021782943778456947,
    -0.00415931262757864,
    -0.010131584846900276,
    0.023408322118927783,
    0.028169744270532353,
    -0.09192158806008609,
    -0.052046670253554764,
    0.42157126673075435,
    0.7742936228603274,
    0.4379823066591634,
    -0.06203775157498196,
    -0.10556315130733723,
    0.041287530472117834,
    0.032674799467057355,
    -0.019758391600965465,
    -0.009159507338676163,
    0.006761520220620417,
    0.0024315754425382886,
    -0.0016616273039298788,
    -0.0006375589261258812,
    0.0003018579416682448,
    0.00014035632812373243,
    -4.12198619242655e-05,
    -2.1270221672515614e-05,
    3.7007277113394796e-06,
    2.0612203985788783e-06,
    -1.6237995172048338e-07,
    -9.604010112767894e-08,
];

const DB10: [f64; 20] = [
    0.026670057900555554,
    0.1881768000776915,
    0.5272011889317256,
    0.6884590394536035,
    0.2811723436605775,
    -0.24984642432731538,
    -0.19594627437737705,
    0.12736934033579325,
    0.09305736460357235,
    -0.07139414716639708,
    -0.029457536821875813,
    0.033212674059341,
    0.0036065535669561697,
    -0.010733175483330575,
    0.001395351747052901,
    0.001992405295185056,
    -0.0006858566949597116,
    -0.00011646685512928545,
    9.358867032006959e-05,
    -1.3264202894521244e-05,
];

const FK14: [f64; 14] = [
    0.2603717693037009,
    0.686891477246636,
    0.6115546539472099,
    0.05142165412892757,
    -0.2456139281610015,
    -0.048575339077288754,
    0.12428256092000188,
    0.02222673961876614,
    -0.06399737303879399,
    -0.005074372547497621,
    0.029779711589290988,
    -0.0032974791532950297,
    -0.009270613373860545,
    0.0035141009702991523,
];
