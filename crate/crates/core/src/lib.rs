//! Heavy-tailed directed polymers on the 1+1 dimensional lattice.
//!
//! The crate provides exact machinery for symmetric Cauchy-domain step
//! distributions (pmfs, scaling constants, local-limit diagnostics), seeded
//! random environments, window-restricted partition-function transfer
//! matrices with Monte Carlo free-energy estimation, the collision overlap
//! functional D(N) with its inverse, and the coarse-graining / change-of-
//! measure statistics used to probe disorder relevance.

pub mod convolve;
pub mod environment;
pub mod error;
pub mod heavy_walk;
pub mod numeric;

pub use error::{Error, Result};
pub use heavy_walk::{IncrementLaw, NStepPmf, ScalingSequence};
pub use environment::{EnvKind, EnvSpec, Field, FieldView};
