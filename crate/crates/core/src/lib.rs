//! Pseudo-spectral Navier–Stokes on the periodic box, with diagnostics for
//! super-level-set sparseness, harmonic-measure tuning and chains of
//! derivatives.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chains;
pub mod config;
pub mod fft;
pub mod field;
pub mod harmonic;
pub mod pipeline;
pub mod snapshot;
pub mod solver;
pub mod sparseness;
pub mod svg;

pub use field::{DerivativeOptions, FieldError, MultiIndex, PeriodicField};
