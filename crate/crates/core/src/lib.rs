//! Fidelity-based non-Markovianity of single-mode Gaussian channels.
//!
//! The crate covers two dynamical maps, a phenomenological damping channel
//! with a time-dependent rate and the secular weak-coupling quantum Brownian
//! motion channel with an Ohmic bath, and measures the largest revival of
//! fidelity between pairs of evolved Gaussian states.

pub mod channels;
pub mod error;
pub mod format;
pub mod experiments;
pub mod gauss;
pub mod measure;
pub mod optimize;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
