//! Trace reconstruction over deletion, insertion and substitution channels
//! using single-position output means.
//!
//! The numerical core ([`analytic`], [`meanstats`]) is generic over the
//! floating point type through [`Scalar`]; the aliases below fix it to `f64`,
//! which is what the reconstruction and lower-bound modules use.

pub mod analytic;
pub mod binom;
pub mod channels;
pub mod error;
pub mod hardpairs;
pub mod meanstats;
pub mod reconstruct;
pub mod scalar;
pub mod seed;
pub mod tracefile;

pub use analytic::{ArcSpec, SignedSeq};
pub use channels::{BitString, ChannelSpec, Stage, Trace, TraceSet};
pub use error::{Error, Result};
pub use meanstats::{MeanKind, MeanProfile};
pub use scalar::Scalar;

pub type Complex64 = num_complex::Complex<f64>;
pub type Complex32 = num_complex::Complex<f32>;
pub type MeanProfile64 = MeanProfile<f64>;
pub type MeanProfile32 = MeanProfile<f32>;
