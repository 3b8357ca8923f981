//! Multi-channel waveform records, sliding-window segmentation and
//! per-window amplitude normalization.
//!
//! Two on-disk record formats are supported:
//!
//! * CSV: `# dt=<seconds>` and `# label=<text>` header comments followed by
//!   `b,c,d` rows. Any other `#` line is treated as a comment.
//! * Raw binary: a 16-byte header (`ITFR` magic, `u32` sample count, `f32`
//!   sample interval, 4 reserved zero bytes, all little-endian) followed by
//!   the three channels as little-endian `f32`, channel-major.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

/// Sample interval of the reference acquisition system (250 MS/s).
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 4e-9;
pub const DEFAULT_WINDOW_LENGTH: usize = 256;
pub const DEFAULT_HOP: usize = 1;

const RAW_MAGIC: &[u8; 4] = b"ITFR";
const RAW_HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("channel count: expected 3 channels (B, C, D), found {0}")]
    ChannelCount(usize),
    #[error("unequal channel lengths: B={b}, C={c}, D={d}")]
    UnequalLengths { b: usize, c: usize, d: usize },
    #[error("sample interval must be positive and finite, got {0}")]
    SampleInterval(f64),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("window length {window} exceeds record length {record}")]
    WindowTooLong { window: usize, record: usize },
    #[error("invalid segmentation plan: {0}")]
    InvalidPlan(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SignalError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        SignalError::Io { path: path.display().to_string(), source }
    }
}

/// Antenna identity. B sits at the array origin; BC and BD are the two
/// orthogonal baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    B = 0,
    C = 1,
    D = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::B, Channel::C, Channel::D];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Channel::B => "B",
            Channel::C => "C",
            Channel::D => "D",
        };
        f.write_str(s)
    }
}

/// Three synchronized sample channels with their sample interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    channels: [Vec<f64>; 3],
    sample_interval: f64,
    pub label: String,
}

impl SampleRecord {
    pub fn new(channels: [Vec<f64>; 3], sample_interval: f64) -> Result<Self, SignalError> {
        let [b, c, d] = &channels;
        if b.len() != c.len() || b.len() != d.len() {
            return Err(SignalError::UnequalLengths { b: b.len(), c: c.len(), d: d.len() });
        }
        if !(sample_interval > 0.0 && sample_interval.is_finite()) {
            return Err(SignalError::SampleInterval(sample_interval));
        }
        Ok(Self { channels, sample_interval, label: String::new() })
    }

    /// Builds a record from an arbitrary list of channels, rejecting
    /// anything other than exactly three.
    pub fn from_channels(channels: Vec<Vec<f64>>, sample_interval: f64) -> Result<Self, SignalError> {
        let n = channels.len();
        let arr: [Vec<f64>; 3] = channels.try_into().map_err(|_| SignalError::ChannelCount(n))?;
        Self::new(arr, sample_interval)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn channel(&self, ch: Channel) -> &[f64] {
        &self.channels[ch.index()]
    }

    pub fn channels(&self) -> &[Vec<f64>; 3] {
        &self.channels
    }

    /// Applies `f` to every channel, keeping the interval and label.
    pub fn map_channels<F, E>(&self, mut f: F) -> Result<Self, E>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>, E>,
        E: From<SignalError>,
    {
        let b = f(&self.channels[0])?;
        let c = f(&self.channels[1])?;
        let d = f(&self.channels[2])?;
        Ok(Self::new([b, c, d], self.sample_interval)?.with_label(self.label.clone()))
    }

    pub fn into_channels(self) -> [Vec<f64>; 3] {
        self.channels
    }
}

/// On-disk record formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    RawBinary,
}

impl RecordFormat {
    /// Guesses the format from a file extension: `.csv` is CSV, anything
    /// else is raw binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => RecordFormat::Csv,
            _ => RecordFormat::RawBinary,
        }
    }
}

pub fn load_record(path: impl AsRef<Path>, format: RecordFormat) -> Result<SampleRecord, SignalError> {
    let path = path.as_ref();
    match format {
        RecordFormat::Csv => {
            let file = fs::File::open(path).map_err(|e| SignalError::io(path, e))?;
            read_csv(BufReader::new(file))
        }
        RecordFormat::RawBinary => {
            let bytes = fs::read(path).map_err(|e| SignalError::io(path, e))?;
            decode_raw(&bytes)
        }
    }
}

/// Writes a record. `comments` are extra `key=value` provenance lines
/// emitted as `#` comments in CSV output (ignored for raw binary).
pub fn save_record(
    record: &SampleRecord,
    path: impl AsRef<Path>,
    format: RecordFormat,
    comments: &[(String, String)],
) -> Result<(), SignalError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| SignalError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        RecordFormat::Csv => write_csv(record, &mut w, comments),
        RecordFormat::RawBinary => w.write_all(&encode_raw(record)),
    };
    res.and_then(|_| w.flush()).map_err(|e| SignalError::io(path, e))
}

pub fn read_csv<R: BufRead>(reader: R) -> Result<SampleRecord, SignalError> {
    let mut dt: Option<f64> = None;
    let mut label = String::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| SignalError::Parse { line: lineno + 1, msg: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("dt=") {
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| SignalError::MalformedHeader(format!("bad dt value `{}`", v.trim())))?;
                dt = Some(v);
            } else if let Some(v) = comment.strip_prefix("label=") {
                label = v.to_string();
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.is_empty() {
            if fields.len() != 3 {
                return Err(SignalError::ChannelCount(fields.len()));
            }
            cols = vec![Vec::new(), Vec::new(), Vec::new()];
        } else if fields.len() != 3 {
            return Err(SignalError::Parse {
                line: lineno + 1,
                msg: format!("expected 3 columns, found {}", fields.len()),
            });
        }
        for (col, field) in cols.iter_mut().zip(&fields) {
            let v: f64 = field
                .parse()
                .map_err(|_| SignalError::Parse { line: lineno + 1, msg: format!("bad sample `{field}`") })?;
            col.push(v);
        }
    }
    let dt = dt.ok_or_else(|| SignalError::MalformedHeader("missing `# dt=` line".into()))?;
    if cols.is_empty() {
        cols = vec![Vec::new(), Vec::new(), Vec::new()];
    }
    Ok(SampleRecord::from_channels(cols, dt)?.with_label(label))
}

pub fn write_csv<W: Write>(
    record: &SampleRecord,
    w: &mut W,
    comments: &[(String, String)],
) -> std::io::Result<()> {
    writeln!(w, "# dt={:e}", record.sample_interval)?;
    writeln!(w, "# label={}", record.label)?;
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    let [b, c, d] = &record.channels;
    for i in 0..record.len() {
        writeln!(w, "{},{},{}", b[i], c[i], d[i])?;
    }
    Ok(())
}

/// Serializes to the raw-binary layout. Samples and the interval are
/// narrowed to `f32`.
pub fn encode_raw(record: &SampleRecord) -> Vec<u8> {
    let n = record.len();
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + 3 * 4 * n);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(record.sample_interval as f32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for ch in &record.channels {
        for &v in ch {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<SampleRecord, SignalError> {
    if bytes.len() < RAW_HEADER_LEN {
        return Err(SignalError::MalformedHeader(format!(
            "raw header needs {RAW_HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != RAW_MAGIC {
        return Err(SignalError::MalformedHeader("bad magic, expected `ITFR`".into()));
    }
    let word = |at: usize| [bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]];
    let n = u32::from_le_bytes(word(4)) as usize;
    let dt = f32::from_le_bytes(word(8)) as f64;
    let body = &bytes[RAW_HEADER_LEN..];
    if !body.len().is_multiple_of(4) || !(body.len() / 4).is_multiple_of(3) {
        return Err(SignalError::MalformedHeader(format!(
            "payload of {} bytes is not 3 channels of f32",
            body.len()
        )));
    }
    let per_channel = body.len() / 12;
    if per_channel != n {
        return Err(SignalError::UnequalLengths { b: n, c: per_channel, d: per_channel });
    }
    let samples: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let channels = samples.chunks_exact(n.max(1)).take(3).map(<[f64]>::to_vec);
    let channels: Vec<Vec<f64>> = if n == 0 { vec![Vec::new(); 3] } else { channels.collect() };
    SampleRecord::from_channels(channels, dt)
}

/// Window length and hop of a sliding-window segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentationPlan {
    pub window_length: usize,
    pub hop: usize,
}

impl Default for SegmentationPlan {
    fn default() -> Self {
        Self { window_length: DEFAULT_WINDOW_LENGTH, hop: DEFAULT_HOP }
    }
}

impl SegmentationPlan {
    pub fn new(window_length: usize, hop: usize) -> Result<Self, SignalError> {
        let plan = Self { window_length, hop };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.window_length < 2 {
            return Err(SignalError::InvalidPlan(format!(
                "window length must be at least 2, got {}",
                self.window_length
            )));
        }
        if self.hop == 0 {
            return Err(SignalError::InvalidPlan("hop must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of windows `floor((len - W) / hop) + 1`.
    pub fn window_count(&self, record_len: usize) -> Result<usize, SignalError> {
        self.validate()?;
        if self.window_length > record_len {
            return Err(SignalError::WindowTooLong { window: self.window_length, record: record_len });
        }
        Ok((record_len - self.window_length) / self.hop + 1)
    }

    /// Record length that supports exactly `windows` windows.
    pub fn record_length_for(&self, windows: usize) -> usize {
        (windows.saturating_sub(1)) * self.hop + self.window_length
    }

    pub fn start_of(&self, index: usize) -> usize {
        index * self.hop
    }
}

/// A borrowed view of one sliding window across all three channels.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub index: usize,
    pub start: usize,
    pub segments: [&'a [f64]; 3],
}

impl<'a> Window<'a> {
    pub fn len(&self) -> usize {
        self.segments[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segment(&self, ch: Channel) -> &'a [f64] {
        self.segments[ch.index()]
    }
}

pub fn segment(record: &SampleRecord, plan: SegmentationPlan) -> Result<Vec<Window<'_>>, SignalError> {
    let count = plan.window_count(record.len())?;
    let w = plan.window_length;
    Ok((0..count)
        .map(|index| {
            let start = plan.start_of(index);
            let seg = |ch: Channel| &record.channel(ch)[start..start + w];
            Window { index, start, segments: [seg(Channel::B), seg(Channel::C), seg(Channel::D)] }
        })
        .collect())
}

/// Owned, normalized copy of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWindow {
    pub index: usize,
    pub start: usize,
    pub segments: [Vec<f64>; 3],
    /// Set for channels whose segment was constant (zero variance).
    pub degenerate: [bool; 3],
}

impl NormalizedWindow {
    pub fn segment(&self, ch: Channel) -> &[f64] {
        &self.segments[ch.index()]
    }

    pub fn is_degenerate(&self, ch: Channel) -> bool {
        self.degenerate[ch.index()]
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Removes the mean and scales to unit peak magnitude. The flag is set for
/// a constant segment, which maps to all zeros.
pub fn normalize_segment(segment: &[f64]) -> (Vec<f64>, bool) {
    if segment.is_empty() {
        return (Vec::new(), true);
    }
    let mean = segment.iter().sum::<f64>() / segment.len() as f64;
    let mut out: Vec<f64> = segment.iter().map(|&v| v - mean).collect();
    // second pass drops the residual of the first mean estimate
    let residual = out.iter().sum::<f64>() / out.len() as f64;
    out.iter_mut().for_each(|v| *v -= residual);
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let spread = segment.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        - segment.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if spread == 0.0 || peak == 0.0 || !peak.is_finite() {
        return (vec![0.0; segment.len()], true);
    }
    out.iter_mut().for_each(|v| *v /= peak);
    (out, false)
}

pub fn normalize_window(window: &Window<'_>) -> NormalizedWindow {
    let (b, db) = normalize_segment(window.segments[0]);
    let (c, dc) = normalize_segment(window.segments[1]);
    let (d, dd) = normalize_segment(window.segments[2]);
    NormalizedWindow {
        index: window.index,
        start: window.start,
        segments: [b, c, d],
        degenerate: [db, dc, dd],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp_record(n: usize) -> SampleRecord {
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let c: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let d: Vec<f64> = (0..n).map(|i| -(i as f64)).collect();
        SampleRecord::new([b, c, d], DEFAULT_SAMPLE_INTERVAL).unwrap()
    }

    #[test]
    fn rejects_bad_records() {
        assert!(matches!(
            SampleRecord::new([vec![1.0], vec![1.0, 2.0], vec![1.0]], 4e-9),
            Err(SignalError::UnequalLengths { .. })
        ));
        assert!(matches!(
            SampleRecord::new([vec![1.0], vec![1.0], vec![1.0]], 0.0),
            Err(SignalError::SampleInterval(_))
        ));
        assert!(matches!(
            SampleRecord::from_channels(vec![vec![1.0], vec![2.0]], 4e-9),
            Err(SignalError::ChannelCount(2))
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let mut text = String::from("# dt=4e-9\n# label=test shot\n");
        for i in 0..1000 {
            text.push_str(&format!("{},{},{}\n", i, i * 2, -i));
        }
        let rec = read_csv(text.as_bytes()).unwrap();
        assert_eq!(rec.len(), 1000);
        assert_eq!(rec.sample_interval(), 4e-9);
        assert_eq!(rec.label, "test shot");
        assert_eq!(rec.channel(Channel::C)[10], 20.0);
    }

    #[test]
    fn csv_two_columns_is_channel_count_error() {
        let err = read_csv("# dt=4e-9\n1,2\n3,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SignalError::ChannelCount(2)));
        assert!(err.to_string().contains("channel count"));
    }

    #[test]
    fn csv_missing_dt_is_header_error() {
        let err = read_csv("1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SignalError::MalformedHeader(_)));
        let err = read_csv("# dt=abc\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SignalError::MalformedHeader(_)));
        let err = read_csv("# dt=-1\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SignalError::SampleInterval(_)));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rec = ramp_record(50).with_label("ramp");
        let mut buf = Vec::new();
        write_csv(&rec, &mut buf, &[("seed".into(), "7".into())]).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn raw_round_trip_is_bit_identical_after_f32_narrowing() {
        let rec = ramp_record(64);
        let bytes = encode_raw(&rec);
        assert_eq!(bytes.len(), 16 + 3 * 4 * 64);
        assert_eq!(&bytes[..4], b"ITFR");
        let back = decode_raw(&bytes).unwrap();
        assert_eq!(encode_raw(&back), bytes);
        for ch in Channel::ALL {
            for (a, b) in rec.channel(ch).iter().zip(back.channel(ch)) {
                assert_eq!((*a as f32) as f64, *b);
            }
        }
    }

    #[test]
    fn raw_rejects_truncated_or_bad_magic() {
        assert!(decode_raw(b"ITFR").is_err());
        let mut bytes = encode_raw(&ramp_record(4));
        bytes[0] = b'X';
        assert!(decode_raw(&bytes).is_err());
        let mut bytes = encode_raw(&ramp_record(4));
        bytes.truncate(bytes.len() - 4);
        assert!(decode_raw(&bytes).is_err());
    }

    #[test]
    fn segment_counts() {
        let rec = ramp_record(300);
        assert_eq!(segment(&rec, SegmentationPlan::new(256, 1).unwrap()).unwrap().len(), 45);
        let rec = ramp_record(512);
        let w = segment(&rec, SegmentationPlan::new(256, 256).unwrap()).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].start + 256, w[1].start);
        let rec = ramp_record(255);
        assert!(matches!(
            segment(&rec, SegmentationPlan::default()),
            Err(SignalError::WindowTooLong { window: 256, record: 255 })
        ));
    }

    #[test]
    fn normalize_examples() {
        let (v, deg) = normalize_segment(&[1.0, 3.0]);
        assert_eq!(v, vec![-1.0, 1.0]);
        assert!(!deg);
        let (v, deg) = normalize_segment(&[5.0, 5.0, 5.0]);
        assert_eq!(v, vec![0.0; 3]);
        assert!(deg);
    }

    #[test]
    fn normalize_window_flags_constant_channel() {
        let rec = SampleRecord::new([vec![1.0, 2.0, 4.0], vec![7.0; 3], vec![0.0, -1.0, 1.0]], 4e-9).unwrap();
        let w = segment(&rec, SegmentationPlan::new(3, 1).unwrap()).unwrap();
        let n = normalize_window(&w[0]);
        assert_eq!(n.degenerate, [false, true, false]);
        assert!(n.any_degenerate());
    }

    proptest! {
        #[test]
        fn count_formula(len in 2usize..2000, w in 2usize..300, hop in 1usize..64) {
            prop_assume!(w <= len);
            let plan = SegmentationPlan::new(w, hop).unwrap();
            let n = plan.window_count(len).unwrap();
            prop_assert_eq!(n, (len - w) / hop + 1);
            prop_assert!(plan.start_of(n - 1) + w <= len);
            prop_assert!(plan.start_of(n) + w > len);
        }

        #[test]
        fn disjoint_windows_reconstruct_prefix(len in 8usize..600, w in 2usize..64) {
            prop_assume!(w <= len);
            let rec = ramp_record(len);
            let windows = segment(&rec, SegmentationPlan::new(w, w).unwrap()).unwrap();
            for ch in Channel::ALL {
                let joined: Vec<f64> = windows.iter().flat_map(|win| win.segment(ch).iter().copied()).collect();
                prop_assert_eq!(&joined[..], &rec.channel(ch)[..joined.len()]);
            }
        }

        #[test]
        fn normalization_mean_peak_and_idempotence(v in prop::collection::vec(-1e3f64..1e3, 2..400)) {
            let (out, deg) = normalize_segment(&v);
            prop_assume!(!deg);
            // direct recomputation oracle
            let mean = out.iter().sum::<f64>() / out.len() as f64;
            let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(mean.abs() < 1e-12);
            prop_assert!((peak - 1.0).abs() < 1e-12);
            let (again, _) = normalize_segment(&out);
            for (a, b) in out.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
