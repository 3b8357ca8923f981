//! Crossed-baseline geometry: TDOA pairs to azimuth/elevation and back.
//!
//! Baseline BD lies along the x axis and BC along the y axis, both of
//! length `d`. `tau1` is the BC delay and `tau2` the BD delay. Azimuth is
//! measured from the BD axis (0 degrees), counter-clockwise towards BC,
//! in `[0, 360)`; elevation is above the horizon in `[0, 90]`.
//!
//! ```text
//! Az = atan2(tau1, tau2)
//! El = acos((c / d) * sqrt(tau1^2 + tau2^2))
//! ```

use thiserror::Error;

/// Exact SI speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Default baseline length, m.
pub const DEFAULT_BASELINE_M: f64 = 15.0;

/// Slack above 1 that is still treated as the horizon (`El = 0`).
const GATE_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("elevation {0} deg outside [0, 90]")]
    ElevationOutOfRange(f64),
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    /// Baseline length in metres (both arms).
    pub baseline_m: f64,
    /// Propagation speed in m/s.
    pub speed: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self { baseline_m: DEFAULT_BASELINE_M, speed: SPEED_OF_LIGHT }
    }
}

impl ArrayGeometry {
    pub fn new(baseline_m: f64, speed: f64) -> Result<Self, GeometryError> {
        let g = Self { baseline_m, speed };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.baseline_m > 0.0 && self.baseline_m.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!("baseline must be positive, got {}", self.baseline_m)));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!("speed must be positive, got {}", self.speed)));
        }
        Ok(())
    }

    /// Largest physically possible delay on one baseline, `d / c`.
    pub fn transit_time(&self) -> f64 {
        self.baseline_m / self.speed
    }
}

/// An (azimuth, elevation) pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angles {
    pub az_deg: f64,
    pub el_deg: f64,
}

impl Angles {
    pub fn new(az_deg: f64, el_deg: f64) -> Self {
        Self { az_deg, el_deg }
    }
}

/// Direction solved from one TDOA pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    /// `None` when the transit-time gate rejected the pair.
    pub angles: Option<Angles>,
    /// `(c / d) * sqrt(tau1^2 + tau2^2)`.
    pub gate: f64,
    /// Both delays exactly zero: the source is overhead and azimuth is
    /// undefined (reported as 0).
    pub at_zenith: bool,
}

impl Direction {
    pub fn is_valid(&self) -> bool {
        self.angles.is_some()
    }
}

/// Wraps an angle in degrees to `[0, 360)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

pub fn direction_from_tdoa(tau1: f64, tau2: f64, geom: &ArrayGeometry) -> Direction {
    let norm = tau1.hypot(tau2);
    let gate = norm / geom.transit_time();
    if !gate.is_finite() || gate > 1.0 + GATE_CLAMP {
        return Direction { angles: None, gate, at_zenith: false };
    }
    let at_zenith = tau1 == 0.0 && tau2 == 0.0;
    let el_deg = gate.min(1.0).acos().to_degrees();
    let az_deg = if at_zenith { 0.0 } else { wrap_degrees(tau1.atan2(tau2).to_degrees()) };
    Direction { angles: Some(Angles { az_deg, el_deg }), gate, at_zenith }
}

/// Inverse mapping: the `(tau1, tau2)` a source at `(az, el)` produces.
///
/// `tau2` is the positive root `sqrt(d^2 cos^2 El / (c^2 (1 + tan^2 Az)))`
/// given the sign of `cos Az`, and `tau1 = tan(Az) * tau2`. At
/// `Az = +-90` the limit `tau2 = 0`, `tau1 = +-(d / c) cos El` is used.
pub fn tdoa_from_direction(az_deg: f64, el_deg: f64, geom: &ArrayGeometry) -> Result<(f64, f64), GeometryError> {
    if !(0.0..=90.0).contains(&el_deg) {
        return Err(GeometryError::ElevationOutOfRange(el_deg));
    }
    if el_deg == 90.0 {
        return Ok((0.0, 0.0));
    }
    let transit = geom.transit_time();
    let az = az_deg.to_radians();
    let el = el_deg.to_radians();
    let reach = transit * el.cos();
    let (sin_az, cos_az) = az.sin_cos();
    let (tau1, tau2) = if cos_az.abs() < 1e-15 {
        (reach * sin_az.signum(), 0.0)
    } else {
        let tan_az = sin_az / cos_az;
        let tau2 = (reach * reach / (1.0 + tan_az * tan_az)).sqrt() * cos_az.signum();
        (tan_az * tau2, tau2)
    };
    // rounding can leave |tau| one ulp past d/c
    let norm = tau1.hypot(tau2);
    if norm > transit {
        let s = transit / norm;
        return Ok((tau1 * s, tau2 * s));
    }
    Ok((tau1, tau2))
}
