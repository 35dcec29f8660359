//! Parameter sweeps, sup-in-time error extraction, log-log rate fits and
//! bound-ratio monitoring.

pub mod bounds;
pub mod fit;
pub mod plot;
pub mod sweep;

pub use bounds::{bound_ratios, monitor_bounds, trend_flatness, BoundMonitor, BoundTrend, TREND_FACTOR};
pub use fit::{fit_rate, RateFit};
pub use plot::emit_plots;
pub use sweep::{
    predicted_slope, run_sweep, run_sweep_with, Abscissa, DtPolicy, LadderKind, Metric, MetricRate, PointResult,
    RateReport, RateStatus, ReferencePolicy, SharedReference, SweepPlan,
};
