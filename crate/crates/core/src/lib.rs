//! Planar p-harmonic functions near critical points, built from hodograph
//! series, together with numerical checks of the asymptotic mean value
//! expansion
//!
//! ```text
//! u(x) = (p-2)/(p+2) * (max u + min u)/2 + 4/(p+2) * mean u + o(eps^2)
//! ```
//!
//! over disks `B(x, eps)`.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the CLI and the
//! acceptance suite use.

pub mod error;
pub mod exponents;
pub mod hodograph;
pub mod meanvalue;
pub mod oracle;
pub mod scalar;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use scalar::Scalar;

pub type PLaplaceParams = exponents::PLaplaceParams<f64>;
pub type ExponentTable = exponents::ExponentTable<f64>;
pub type ThresholdResult = exponents::ThresholdResult<f64>;
pub type ComplexValue = hodograph::ComplexValue<f64>;
pub type HodographSeries = hodograph::HodographSeries<f64>;
pub type WirtingerPair = hodograph::WirtingerPair<f64>;
pub type Mode = hodograph::Mode<f64>;
pub type DiskStatistics = meanvalue::DiskStatistics<f64>;
pub type DecayLadderReport = meanvalue::DecayLadderReport<f64>;
pub type LadderConfig = meanvalue::LadderConfig<f64>;
pub type GridField = oracle::GridField<f64>;
pub type SolveReport = oracle::SolveReport<f64>;

pub type PLaplaceParams32 = exponents::PLaplaceParams<f32>;
pub type HodographSeries32 = hodograph::HodographSeries<f32>;
pub type GridField32 = oracle::GridField<f32>;
