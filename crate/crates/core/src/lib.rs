//! Underdamped Langevin dynamics with singular interaction potentials.
//!
//! The crate is organised around five pieces:
//!
//! * [`potential`]: admissible potential families (confinement, singular
//!   wall, pairwise Lennard-Jones type systems) with analytic gradients and
//!   Hessians, plus numerical admissibility probes.
//! * [`lyapunov`]: the exponential Lyapunov function `W = exp(bH + psi)`,
//!   constructive selection of its constants, the closed-form generator
//!   ratio `LW/W` and a sampled drift-condition verifier.
//! * [`dynamics`]: Euler-Maruyama and split Ornstein-Uhlenbeck integrators
//!   with a singularity safeguard, trajectories and reproducible ensembles.
//! * [`control`]: deterministic control paths between phase points and
//!   their re-integration.
//! * [`diagnostics`]: Gibbs reference quadrature, histogram distances,
//!   decorrelation fits, test-function gaps and moment bounds.
//!
//! Evaluation code is generic over [`Scalar`] (`f32` or `f64`); the
//! statistical pipelines in [`control`] and [`diagnostics`] work in `f64`.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod control;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod lyapunov;
pub mod potential;
pub mod rng;
pub mod sampling;
mod scalar;

pub use error::{Error, Result};
pub use scalar::{lit, Scalar};

pub use dynamics::{Scheme, SdeConfig, TrajectorySummary};
pub use lyapunov::{CutoffFunction, DriftReport, LyapunovFunction, LyapunovParams};
pub use potential::{Family, ParticleConfig, PhaseState, PotentialModel};

pub type PotentialModelF64 = PotentialModel<f64>;
pub type PotentialModelF32 = PotentialModel<f32>;
pub type PhaseStateF64 = PhaseState<f64>;
pub type PhaseStateF32 = PhaseState<f32>;
pub type SdeConfigF64 = SdeConfig<f64>;
pub type SdeConfigF32 = SdeConfig<f32>;
pub type LyapunovParamsF64 = LyapunovParams<f64>;
pub type LyapunovFunctionF64 = LyapunovFunction<f64>;
pub type TrajectorySummaryF64 = TrajectorySummary<f64>;
