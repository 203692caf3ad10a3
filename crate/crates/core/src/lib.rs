//! Luzin-type correction of integrable functions so that the corrected
//! function has an `L1`-convergent Fourier series with respect to a bounded
//! orthonormal system.
//!
//! The pipeline lives in [`corrector`]; the building blocks are the
//! discretized cylinder spaces of [`measure`], the systems of [`systems`]
//! and [`homogeneous`], coefficient tools in [`fourier`] and the oscillating
//! bumps of [`bump`].

pub mod bump;
pub mod corrector;
pub mod error;
pub mod fourier;
pub mod homogeneous;
pub mod measure;
mod par;
pub mod systems;

pub use error::{Error, Result};
