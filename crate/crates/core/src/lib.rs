//! Geodesic Langevin sampling on Riemannian model spaces.
//!
//! The crate covers the Euler-Maruyama geodesic scheme and its stochastic
//! gradient variant on flat space, spheres and hyperbolic space, a
//! multilevel dyadic construction sharing one Brownian path across
//! stepsizes, synchronous and reflection couplings, the concave distance
//! function used for contraction estimates, numerical checks of the
//! comparison inequalities behind the analysis, and Wasserstein-distance
//! diagnostics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod manifolds;
pub mod numerics;
pub mod noise;
pub mod potentials;
pub mod samplers;
pub mod diagnostics;
pub mod couplings;
pub mod lemma_lab;
pub mod lyapunov;
pub mod scans;
pub mod experiments;

pub use error::{Error, Result};
pub use manifolds::{Frame, Manifold};
