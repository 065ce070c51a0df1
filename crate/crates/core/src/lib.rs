//! Differentially private mean estimation for bounded scalar data under
//! add-remove neighbors.
//!
//! The crate provides three estimators (see [`mechanisms`]), the
//! linear-transform geometry that relates them ([`geometry`]), closed-form
//! error bounds ([`bounds`]) and a reproducible Monte-Carlo harness
//! ([`harness`]) with its file formats ([`io`]).

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod mechanisms;
pub mod noise;
pub mod numeric;

pub use error::{Error, Result};
pub use mechanisms::{BoundedDataset, Mechanism, MeanEstimate, NoisePair, PrivacyBudget};
pub use noise::{derive_stream, RandomStream};
