//! Spectral laboratory for linear and nonlinear incompressible flow in a half-space.

/// Warns on the first occurrence per call site; repeats go to the debug level.
macro_rules! warn_once {
    ($($arg:tt)+) => {{
        static SEEN: std::sync::atomic::AtomicBool = std::sync::atomic::AtomicBool::new(false);
        if SEEN.swap(true, std::sync::atomic::Ordering::Relaxed) {
            log::debug!($($arg)+);
        } else {
            log::warn!("{} (repeats logged at debug level)", format_args!($($arg)+));
        }
    }};
}

pub mod besov;
pub mod data;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod harness;
pub mod ins;
pub mod interp;
pub mod lagrangian;
pub mod io;
pub mod multiplier;
pub mod quadrature;
pub mod stokes;
pub mod ukai;

pub use error::{Error, Result};
pub use field::{BoundaryFunction, ExtMode, Mode, Parity, SpectralField, VectorField, WholeField, ZeroModePolicy};
pub use grid::SpectralGrid;
