//! Error metrics, correlation curves and covariance kernels.

pub mod correlation;
pub mod covariance;
pub mod kernels;
pub mod metrics;

pub use correlation::{correlation_vs_distance, pearson, CorrelationCurve, DEFAULT_PAIR_COUNT};
pub use covariance::{
    empirical_covariance, jacobian_covariance_limit, l2_noise_limit, velocity_cov_limit, CovKind, CovValues,
    CovarianceEstimate, VelocityCovEntry, VelocityCovLimit,
};
pub use kernels::{kernel_at, kernel_k_mu_x, kernel_k_omega, largest_entries, DensityKernels, StationaryCovariance};
pub use metrics::{artifact_map, median, mse_metrics, mse_real, percent_error, ArtifactMap, MseMetrics, Reference};
