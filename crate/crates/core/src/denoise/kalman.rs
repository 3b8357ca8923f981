//! Scalar local-level Kalman filter.
//!
//! State model: `x_k = x_{k-1} + w_k`, `w ~ N(0, q)`; observation
//! `z_k = x_k + v_k`, `v ~ N(0, r)`. The first observation initializes the
//! state with variance `r` (diffuse prior), so with `q = 0` the output is
//! the running mean of the observations.

use super::DenoiseError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    /// Process (random-walk) variance.
    pub q: f64,
    /// Measurement variance.
    pub r: f64,
}

impl KalmanParams {
    pub fn new(q: f64, r: f64) -> Result<Self, DenoiseError> {
        let p = Self { q, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DenoiseError> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(DenoiseError::InvalidSpec(format!("measurement variance must be positive, got {}", self.r)));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(DenoiseError::InvalidSpec(format!("process variance must be non-negative, got {}", self.q)));
        }
        Ok(())
    }

    /// Data-driven defaults: `r` is half the variance of the first
    /// differences and `q = r / 100`.
    pub fn estimate(signal: &[f64]) -> Self {
        let diffs: Vec<f64> = signal.windows(2).map(|w| w[1] - w[0]).collect();
        let r = if diffs.len() < 2 {
            1.0
        } else {
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
            var / 2.0
        };
        let r = if r > 0.0 && r.is_finite() { r } else { f64::MIN_POSITIVE.sqrt() };
        Self { q: r / 100.0, r }
    }
}

/// Per-step diagnostics, exposed for testing the gain/variance invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTrace {
    pub estimates: Vec<f64>,
    pub gains: Vec<f64>,
    pub variances: Vec<f64>,
}

pub fn kalman_trace(signal: &[f64], params: KalmanParams) -> Result<KalmanTrace, DenoiseError> {
    params.validate()?;
    let n = signal.len();
    let mut trace = KalmanTrace {
        estimates: Vec::with_capacity(n),
        gains: Vec::with_capacity(n),
        variances: Vec::with_capacity(n),
    };
    let Some((&z0, rest)) = signal.split_first() else {
        return Ok(trace);
    };
    let mut x = z0;
    let mut p = params.r;
    trace.estimates.push(x);
    trace.gains.push(1.0);
    trace.variances.push(p);
    for &z in rest {
        let prior = p + params.q;
        let gain = prior / (prior + params.r);
        x += gain * (z - x);
        p = (1.0 - gain) * prior;
        trace.estimates.push(x);
        trace.gains.push(gain);
        trace.variances.push(p);
    }
    Ok(trace)
}

pub fn kalman_filter(signal: &[f64], params: KalmanParams) -> Result<Vec<f64>, DenoiseError> {
    Ok(kalman_trace(signal, params)?.estimates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_signal_is_reproduced() {
        let z = vec![2.5; 100];
        let out = kalman_filter(&z, KalmanParams::new(0.0, 0.3).unwrap()).unwrap();
        assert!(out.iter().all(|&v| v == 2.5));
        let out = kalman_filter(&z, KalmanParams::new(0.01, 0.3).unwrap()).unwrap();
        assert!(out.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn static_state_equals_running_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let z: Vec<f64> = (0..500).map(|_| 3.0 + noise.sample(&mut rng)).collect();
        let out = kalman_filter(&z, KalmanParams::new(0.0, 0.25).unwrap()).unwrap();
        let mut sum = 0.0;
        for (k, (&zk, &xk)) in z.iter().zip(&out).enumerate() {
            sum += zk;
            let mean = sum / (k + 1) as f64;
            assert!((xk - mean).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn gain_and_variance_invariants() {
        let z: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let t = kalman_trace(&z, KalmanParams::new(0.02, 0.5).unwrap()).unwrap();
        assert!(t.gains.iter().all(|&g| g > 0.0 && g <= 1.0));
        assert!(t.variances.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn rejects_non_positive_measurement_variance() {
        assert!(KalmanParams::new(0.1, 0.0).is_err());
        assert!(KalmanParams::new(-0.1, 1.0).is_err());
        assert!(kalman_filter(&[1.0, 2.0], KalmanParams { q: 0.0, r: -1.0 }).is_err());
    }

    #[test]
    fn estimated_params_are_valid() {
        let p = KalmanParams::estimate(&[1.0, 3.0, 2.0, 5.0, 4.0]);
        assert!(p.validate().is_ok());
        assert!((p.q - p.r / 100.0).abs() < 1e-15);
        assert!(KalmanParams::estimate(&[7.0; 10]).validate().is_ok());
    }
}
