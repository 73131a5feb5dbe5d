//! Run-level metrics, closure diagnostics, counterfactual report rescoring,
//! and paired feedback comparisons. Everything here is a pure read of settled traces.

mod metrics;
mod run;
pub mod tables;

pub use metrics::{
    aggregate, belief_lag, conditional_rates, counterfactual_b, false_success_buckets, post_attainment_distribution,
    rescore_counterfactual, retry_count, BeliefLag, ConditionalRates, CounterfactualPanel, EventMeans, FalseSuccess,
    FamilyMetrics, MetricsReport, PostAttainment, Rates, ReportPolicy, ACTION_CLASSES,
};
pub use run::{
    check_same_pack, compare_feedback, load_run, read_manifest, trace_file_name, write_manifest, write_trace,
    FeedbackComparison, RunError, RunManifest, TraceSet, RUN_FORMAT, TRACE_DIR,
};
