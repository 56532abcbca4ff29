//! Asymptotic model hierarchy for slowly varying media: ray tracing, steady
//! wavenumber fields with wave-action (energy-form) transport, the envelope
//! Schrödinger equation with its exact constant-medium propagator, and
//! mild-slope coefficients with an operator residual check.

pub mod action;
pub mod mild_slope;
pub mod rays;
pub mod schrodinger;
