//! Random walks conditioned to stay in the Weyl chamber.
//!
//! The crate is organised bottom-up:
//!
//! * [`chamber`]: chamber points and Vandermonde products;
//! * [`walk`]: step laws, reproducible random streams, path simulation with
//!   exit and sign-change times, direct and splitting survival estimators;
//! * [`invariant`]: estimators of the invariant function `V`, the auxiliary
//!   `V^(T)`, harmonicity checks and interpolated `V`-tables;
//! * [`conditioned`]: the Doob `V`-transform chain, a weighted particle
//!   sampler and conditioning-on-survival by rejection;
//! * [`dyson`]: Brownian reference layer (constants, Karlin-McGregor
//!   determinants, Dyson SDE, GUE, the limit density `mu`);
//! * [`stats`]: tail-exponent regression and goodness-of-fit tests.

pub mod chamber;
pub mod conditioned;
pub mod dyson;
pub mod error;
pub mod invariant;
pub mod stats;
pub mod walk;

pub use chamber::{
    in_weyl, in_weyl_eps, perturbed_vandermonde, vandermonde, vandermonde_signed_log, RawPoint,
    SignedLog, WeylPoint,
};
pub use error::{Error, Result};
pub use walk::{Estimate, RngStream, StepLaw};
