use thiserror::Error;

use crate::denoise::DenoiseError;
use crate::evaluate::EvalError;
use crate::geometry::GeometryError;
use crate::signals::SignalError;
use crate::simulate::SimulateError;
use crate::xcorr::XcorrError;

/// Crate-level error wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Denoise(#[from] DenoiseError),
    #[error(transparent)]
    Xcorr(#[from] XcorrError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
