//! Broadband VHF interferometer lightning mapping.
//!
//! A three-antenna crossed-baseline interferometer (antennae B, C and D,
//! with the BC and BD baselines orthogonal) sees each VHF radiation source
//! as two time differences of arrival. This crate turns sampled records into
//! azimuth/elevation maps:
//!
//! 1. [`denoise`] — band-pass, Kalman or wavelet denoising of each channel,
//! 2. [`signals`] — sliding-window segmentation and per-window normalization,
//! 3. [`xcorr`] — cross-correlation in the time, frequency or wavelet domain
//!    with optional peak interpolation,
//! 4. [`geometry`] — TDOA pair to direction conversion with transit-time gating.
//!
//! [`simulate`] closes the loop by synthesizing records from ground-truth
//! angle tracks, and [`evaluate`] scores estimated maps against the truth and
//! sweeps the filter x correlation x interpolation benchmark grid.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denoise;
pub mod error;
pub mod evaluate;
pub mod geometry;
pub mod pipeline;
pub mod signals;
pub mod simulate;
pub mod xcorr;

pub use error::{Error, Result};
