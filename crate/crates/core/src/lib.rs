//! Normal approximation of one-dimensional projections `W = <X, θ>` of
//! high-dimensional random vectors with reflection or rotation symmetries.
//!
//! The crate has three layers:
//!
//! * **samplers** for the symmetric isotropic laws of interest (ℓp balls,
//!   cones and surfaces, the regular simplex, Euclidean sphere and ball, and
//!   two exponential-type densities), all seeded and reproducible;
//! * **bounds** that evaluate the Stein's-method error estimates for the
//!   Kolmogorov and total-variation distance of `W` from the standard normal,
//!   together with exact moment and density formulas used as oracles;
//! * **empirical** estimators and **subspaces** diagnostics which measure the
//!   same distances and exchangeable-pair quantities from samples, so that
//!   every theoretical bound can be certified against data.
//!
//! [`report`] ties the three together into per-cell certification verdicts.

pub mod batch;
pub mod bounds;
pub mod empirical;
pub mod error;
pub mod frames;
pub mod moments;
pub mod normal;
pub mod norms;
pub mod quad;
pub mod report;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod subspaces;

pub use batch::{SampleBatch, Vector};
pub use error::{Error, Result};
pub use norms::{lp_norm, Exponent};
pub use normal::{normal_cdf, normal_pdf};
