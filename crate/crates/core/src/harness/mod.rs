//! Batch evaluation against subjective scores.

mod distort;
mod eval;
mod manifest;
mod report;

pub use distort::synth_distort;
pub use eval::{
    run_eval, CodecSummary, EvalOptions, EvalReport, RecordResult, RunInfo, THREADS_ENV,
    TOOL_VERSION,
};
pub use manifest::{parse_manifest, parse_manifest_str, EvalRecord, MANIFEST_HEADER};
pub use report::{emit_report, report_json, write_csv, write_json, write_scatter, CSV_HEADER};
