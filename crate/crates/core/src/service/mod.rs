//! Sessions, payloads and the two front doors to the pipeline: an HTTP API
//! under `/api/v1` and a batch runner that writes a bundle directory.

pub mod http;
pub mod payloads;
mod pipeline;
mod session;

use serde_json::{json, Value};

use crate::diagnostics::ScanReport;
use crate::error::Result;

pub use pipeline::{
    run_config, run_pipeline, spillover_payload, write_reference_fixture, BundleSummary,
    PipelineConfig, PipelineError, BUNDLE_PAYLOADS, RUN_LOG, STATUS_FILE,
};
pub use session::{
    DatasetRef, FitLocalRequest, LocalState, Loaded, RegionState, RegionalizeRequest, ScanState,
    Session, SessionSnapshot, SpecRequest, SpecState, Stage, StageError, WeightsConfig,
};

/// Ranking table with a printable label per group.
pub fn scan_payload(report: &ScanReport) -> Value {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).expect("scan rows serialize");
            v["label"] = json!(r.group.label());
            v
        })
        .collect();
    let excluded: Vec<Value> = report
        .excluded
        .iter()
        .map(|(g, c)| json!({"group": g, "label": g.label(), "coverage": c}))
        .collect();
    json!({"rows": rows, "excluded": excluded})
}

pub fn local_payload(session: &Session) -> Result<Value> {
    let l = session.loaded()?;
    let local = session.local_state()?;
    let mut v = local.fit.to_json(&l.frame.unit_ids());
    v["group"] = json!(session.selected()?.group.label());
    v["bandwidth_selection"] = json!(local.selection);
    Ok(v)
}

pub fn regionalization_payload(session: &Session) -> Result<Value> {
    let l = session.loaded()?;
    let r = session.region_state()?;
    let mut v = r.reg.to_json(&r.tree, &l.frame.unit_ids());
    v["cluster_stats"] = json!(r.stats);
    v["warnings"] = json!(r.warnings);
    Ok(v)
}
