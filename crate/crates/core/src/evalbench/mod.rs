//! Baseline metrics, correlation analysis, F0 perturbations and score
//! distribution reports.

mod correlation;
mod distribution;
mod edit;
mod pitch;
mod stats;

pub use correlation::{correlation_run, render_table, CorrelationReport, Level, MetricRecord, MetricTable};
pub use distribution::{cohens_d, distribution_summary, DistributionReport, DistributionSummary, Histogram, Shift};
pub use edit::{cer, edit_distance, error_rate, normalize_text, wer};
pub use pitch::{
    f0_corr, f0_rmse, perturb, perturb_flip, perturb_inverse, PerturbKind, INVERSE_FLOOR_HZ, LOG_FLOOR_HZ,
};
pub use stats::{average_ranks, mean, pearson, quantile, sample_std, spearman, system_aggregate};
