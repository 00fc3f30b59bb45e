//! Full protocol runner: fraction sweep over one or both protected
//! attributes, every embedding variant, audit and downstream evaluation, and
//! the text and JSON reports built from the results.

mod config;
mod pipeline;
mod report;

pub use config::{AttributeChoice, ExperimentConfig, InputSource};
pub use pipeline::{
    fraction_sweep, fraction_tag, oversample_rows, run_pipeline, trend_summary, write_atomic,
    write_json, Failure, RunResults, TrainRun, TrendLine,
};
pub use report::{
    classifier_from_label, emit_reports, failures_name, load_results, render_effect_table,
    render_los_table, render_probe_table, render_table, render_trend, structured_name,
    text_reports, ReportFormat, TEXT_DECIMALS,
};
