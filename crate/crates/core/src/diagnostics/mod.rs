//! Convergence diagnostics.
//!
//! Everything here works in `f64`; the quadrature reference covers models with
//! `N d <= 2`.

pub mod decay;
pub mod gibbs;
pub mod moments;
pub mod overlap;
pub mod quadrature;
pub mod stats;

pub use decay::{decay_fit, test_function_gap, DecayFit, GapSeries, TestFunction};
pub use gibbs::{gibbs_reference, z_p, GibbsReference, GridSpec};
pub use moments::{energy_bound_check, moment_bound_check, EnergyPoint, MomentBoundReport, MomentPoint};
pub use overlap::{level_set_starts, minorization_overlap, OverlapReport, OverlapSpec};
pub use stats::{
    autocorrelation, effective_sample_size, equipartition, histogram_distance, integrated_autocorrelation_time,
    ks_statistic, momentum_ks, Equipartition, HistogramDistance, KsTest,
};
