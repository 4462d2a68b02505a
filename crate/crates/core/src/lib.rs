//! Bures-Wasserstein geometry of 3D Gaussian distributions with a
//! state-consistency tracking filter.
//!
//! The crate provides, bottom up:
//!
//! - [`spd`]: stabilized symmetric/SPD 3×3 kernels (eigendecomposition,
//!   clamped square roots, Sylvester solve);
//! - [`gaussian`]: Gaussian domain types in full-covariance and
//!   rotation/scale decomposed form, plus validity projection;
//! - [`metric`]: the 2-Wasserstein distance, its decomposed trace term, and
//!   the Bures tangent metric;
//! - [`geometry`]: logarithmic/exponential maps, geodesics, and the
//!   constant-velocity predictor;
//! - [`filter`]: the Kalman-like predict/gate/merge tracking loop;
//! - [`losses`]: alignment and temporal-regularization losses with their
//!   Euclidean baselines;
//! - [`sim`]: a synthetic dynamic-scene generator, noise model, and
//!   flow-projection evaluation harness;
//! - [`selftest`]: the runnable acceptance/property suite.

// Indexed loops over fixed 3×3 arrays read better than iterator chains in
// the kernels, and `!(x > 0.0)` guards must stay negated so NaN is rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filter;
pub mod gaussian;
pub mod geometry;
pub mod losses;
pub mod mat3;
pub mod metric;
pub mod selftest;
pub mod sim;
pub mod spd;

pub use error::{BuresError, Result};
pub use filter::{FilterConfig, GateDecision, TrackState, TrackStatus};
pub use gaussian::{DecomposedCov, DecomposedGaussian, Gaussian3, GaussianVelocity, TangentCov};
pub use geometry::{exp_map_cov, geodesic, log_map_cov, predict, velocity};
pub use losses::{
    linear_soa_loss, linear_wr_loss, soa_loss, total_loss, wr_loss, wr_loss_mean, LossWeights,
};
pub use metric::{w2_distance, w2_squared, w2_trace_term_decomposed};
pub use sim::{MetricsReport, Mode, NoiseModel, PinholeCamera, ScenarioConfig, Scene};
pub use spd::{eigh3, solve_sylvester, sqrt_spd, symmetrize, SpdMat3, SymMat3, EPSILON_PD};
