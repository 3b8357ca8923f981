//! Butterworth band-pass design (bilinear transform of the analog
//! prototype) and zero-phase forward-backward application as cascaded
//! second-order sections.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::DenoiseError;

/// One biquad, `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b[0] + self.b[1] * zi + self.b[2] * zi2) / (1.0 + self.a[0] * zi + self.a[1] * zi2)
    }

    /// Steady-state transposed direct form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let [_, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let y = self.dc_gain();
        let z1 = b2 - a2 * y;
        [b1 - a1 * y + z1, z1]
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// A band-pass filter as a cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Designs a Butterworth band-pass of total order `order` (even; the
    /// low-pass prototype has `order / 2` poles) with -3 dB edges at
    /// `low_hz` and `high_hz`.
    pub fn butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, dt: f64) -> Result<Self, DenoiseError> {
        let fs = 1.0 / dt;
        let nyquist = fs / 2.0;
        if order < 2 || !order.is_multiple_of(2) {
            return Err(DenoiseError::InvalidSpec(format!("band-pass order must be even and >= 2, got {order}")));
        }
        if !(low_hz > 0.0 && low_hz < high_hz) {
            return Err(DenoiseError::InvalidSpec(format!(
                "band edges must satisfy 0 < low < high, got {low_hz} .. {high_hz}"
            )));
        }
        if high_hz >= nyquist {
            return Err(DenoiseError::InvalidSpec(format!(
                "cut-off {high_hz} Hz is at or above Nyquist ({nyquist} Hz)"
            )));
        }
        let proto = order / 2;
        let fs2 = 2.0 * fs;
        let wl = fs2 * (PI * low_hz / fs).tan();
        let wh = fs2 * (PI * high_hz / fs).tan();
        let w0 = (wl * wh).sqrt();
        let bw = wh - wl;

        let mut poles = Vec::with_capacity(2 * proto);
        for k in 0..proto {
            let theta = PI * (2 * k + proto + 1) as f64 / (2 * proto) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let half = p * (bw / 2.0);
            let root = (half * half - w0 * w0).sqrt();
            for s in [half + root, half - root] {
                poles.push((fs2 + s) / (fs2 - s));
            }
        }

        // pair conjugates; any real poles pair with each other
        let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > 1e-12).collect();
        complex.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
        let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= 1e-12).map(|p| p.re).collect();
        real.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut sections = Vec::with_capacity(proto);
        for p in complex {
            sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [-2.0 * p.re, p.norm_sqr()] });
        }
        for pair in real.chunks(2) {
            let (p1, p2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
            sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [-(p1 + p2), p1 * p2] });
        }

        let mut filt = SosFilter { sections };
        let center = 2.0 * (w0 / fs2).atan();
        let gain = filt.response(center).norm();
        let per_section = gain.powf(1.0 / filt.sections.len() as f64);
        for s in &mut filt.sections {
            s.b.iter_mut().for_each(|b| *b /= per_section);
        }
        Ok(filt)
    }

    /// Complex response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, omega);
        self.sections.iter().map(|s| s.response(z)).product()
    }

    /// Magnitude response at `freq_hz` for sampling interval `dt`.
    pub fn magnitude(&self, freq_hz: f64, dt: f64) -> f64 {
        self.response(2.0 * PI * freq_hz * dt).norm()
    }

    fn initial_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let st = s.step_state();
                let out = [st[0] * scale, st[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], states: &[[f64; 2]], x0: f64) {
        for (sec, st) in self.sections.iter().zip(states) {
            let [b0, b1, b2] = sec.b;
            let [a1, a2] = sec.a;
            let mut z0 = st[0] * x0;
            let mut z1 = st[1] * x0;
            for v in x.iter_mut() {
                let input = *v;
                let y = b0 * input + z0;
                z0 = b1 * input - a1 * y + z1;
                z1 = b2 * input - a2 * y;
                *v = y;
            }
        }
    }

    /// Single causal pass with zero initial state.
    pub fn filter(&self, signal: &[f64]) -> Vec<f64> {
        let mut out = signal.to_vec();
        let zero = vec![[0.0; 2]; self.sections.len()];
        self.run(&mut out, &zero, 0.0);
        out
    }

    /// Zero-phase forward-backward filtering with odd-extension padding and
    /// step-response initial conditions.
    pub fn filtfilt(&self, signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        if n == 0 {
            return Vec::new();
        }
        if n == 1 {
            return vec![signal[0] * self.response(0.0).re.powi(2)];
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let first = signal[0];
        let last = signal[n - 1];
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

        let zi = self.initial_states();
        let x0 = ext[0];
        self.run(&mut ext, &zi, x0);
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, &zi, y0);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 4e-9;

    fn tone(freq: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 * DT).sin()).collect()
    }

    fn rms(v: &[f64]) -> f64 {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn rejects_edges_at_nyquist() {
        assert!(SosFilter::butterworth_bandpass(4, 20e6, 125e6, DT).is_err());
        assert!(SosFilter::butterworth_bandpass(4, 0.0, 100e6, DT).is_err());
        assert!(SosFilter::butterworth_bandpass(3, 20e6, 100e6, DT).is_err());
    }

    #[test]
    fn half_power_at_band_edges() {
        let f = SosFilter::butterworth_bandpass(4, 20e6, 100e6, DT).unwrap();
        assert_eq!(f.sections.len(), 2);
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        assert!((f.magnitude(20e6, DT) - inv_sqrt2).abs() < 1e-9);
        assert!((f.magnitude(100e6, DT) - inv_sqrt2).abs() < 1e-9);
        assert!(f.magnitude(0.0, DT) < 1e-12);
        let center = 2.0 * ((2.0 / DT * (PI * 20e6 * DT).tan() * 2.0 / DT * (PI * 100e6 * DT).tan()).sqrt() * DT / 2.0).atan();
        assert!((f.response(center).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_phase_keeps_tone_aligned() {
        let f = SosFilter::butterworth_bandpass(4, 20e6, 100e6, DT).unwrap();
        let x = tone(60e6, 2048);
        let y = f.filtfilt(&x);
        // central region: output matches input (|H|^2 ~ 1 at 60 MHz, no phase)
        let gain = f.magnitude(60e6, DT).powi(2);
        for i in 200..1800 {
            assert!((y[i] - gain * x[i]).abs() < 1e-6, "i={i}");
        }
        assert!((rms(&y[200..1800]) / rms(&x[200..1800]) - gain).abs() < 1e-3);
    }

    #[test]
    fn single_pass_has_phase_lag() {
        let f = SosFilter::butterworth_bandpass(4, 20e6, 100e6, DT).unwrap();
        assert!(f.response(2.0 * PI * 30e6 * DT).arg().abs() > 0.1);
    }
}
