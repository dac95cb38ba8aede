//! Metric tensor fields and the equivariant metric smoothing pipeline.

pub mod field;
pub mod mollify;
pub mod seminorm;

pub use field::{
    finite_difference_jet, jet, pullback_metric, ConformalMetric, ConstantMetric, DerivativeMode,
    Jet, MetricDifference, MetricField, PullbackMetric, RayCachedMetric, Regularity, ScaledMetric,
    SharedField, DEFAULT_FD_STEP,
};
pub use mollify::{
    compose_hg, haar_average_metric, isometry_residual, ChartSmoothedMetric, HaarAveragedMetric,
    MollifiedMetric, ISOMETRY_TOLERANCE,
};
pub use seminorm::{
    a_nu, select_epsilon_for_k, sobolev_seminorm, w2_inf_distance, EpsilonSearch, EpsilonSelection,
    Exponent, SampleGrid, SeminormOrder, SeminormReport,
};
