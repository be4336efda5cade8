use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::session::{DatasetRef, FitLocalRequest, RegionalizeRequest, Session, SpecRequest, Stage, WeightsConfig};
use crate::diagnostics::ScanConfig;
use crate::error::{Error, Result};
use crate::groups::GroupKey;
use crate::models::ModelSpec;
use crate::spillover::{aggregate_clusters, SECTOR_LABELS};
use crate::synthgen::{write_fixture, FixtureSpec};
use crate::weights::ContiguityRule;

/// Payload files of a complete bundle, in the order they are written.
pub const BUNDLE_PAYLOADS: [&str; 6] = [
    "correlation.json",
    "scan.json",
    "local_coefficients.json",
    "spillover.json",
    "regionalization.json",
    "projection.json",
];
pub const RUN_LOG: &str = "run.log";
pub const STATUS_FILE: &str = "status.json";

/// Batch configuration. Relative dataset paths resolve against the
/// directory holding the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: DatasetRef,
    pub spec: ModelSpec,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub contiguity: ContiguityRule,
    pub scan: ScanConfig,
    /// Group to model; the top of the scan ranking when absent.
    #[serde(default)]
    pub group: Option<GroupKey>,
    #[serde(default)]
    pub bandwidth: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub cluster_variables: Option<Vec<String>>,
}

impl PipelineConfig {
    /// Configuration for the files written by [`write_reference_fixture`].
    pub fn reference() -> Self {
        PipelineConfig {
            dataset: DatasetRef::Files {
                geometry: "geometry.geojson".into(),
                census: "census.csv".into(),
                subgroups: "subgroups.csv".into(),
                id_column: None,
            },
            spec: ModelSpec::new("voted", &["x1", "x2", "x3"]),
            weights: WeightsConfig::default(),
            contiguity: ContiguityRule::Queen,
            scan: ScanConfig::new(&["edu", "race"]),
            group: None,
            bandwidth: None,
            k: None,
            cluster_variables: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Writes the reference fixture and its `config.json` into `dir`. Returns
/// the configuration path.
pub fn write_reference_fixture(dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    write_fixture(&FixtureSpec::reference(), dir)?;
    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(&PipelineConfig::reference())? + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// A failed run: the stage that failed (absent for configuration errors)
/// and the cause.
#[derive(Debug, thiserror::Error)]
#[error("{}{error}", stage.map(|s| format!("{s} stage failed: ")).unwrap_or_default())]
pub struct PipelineError {
    pub stage: Option<Stage>,
    #[source]
    pub error: Error,
}

impl PipelineError {
    /// 2 for configuration problems (unreadable config, unknown names,
    /// invalid specification), 1 for failures while computing.
    pub fn exit_code(&self) -> i32 {
        let config = self.stage.is_none()
            || matches!(
                self.error,
                Error::UnknownVariable(_)
                    | Error::UnknownAttribute(_)
                    | Error::UnknownBehavior(_)
                    | Error::InvalidSpec(_)
            );
        if config {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub group: GroupKey,
    pub bandwidth: usize,
    pub n_clusters: usize,
}

struct Bundle {
    dir: PathBuf,
    log: String,
    files: Vec<String>,
}

impl Bundle {
    fn log(&mut self, line: impl AsRef<str>) {
        log::info!("{}", line.as_ref());
        let _ = writeln!(self.log, "{}", line.as_ref());
    }

    fn write(&mut self, name: &str, value: &Value) -> Result<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        self.log(format!("wrote {name}"));
        Ok(())
    }

    fn finish(&mut self, status: Value) -> Result<()> {
        let path = self.dir.join(RUN_LOG);
        fs::write(&path, &self.log).map_err(|e| Error::io(&path, e))?;
        let path = self.dir.join(STATUS_FILE);
        let text = serde_json::to_string_pretty(&status)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Runs every stage headlessly and writes one JSON file per payload plus
/// `run.log` and `status.json` into `out_dir`. On a stage failure the
/// payloads written so far stay and `status.json` marks the bundle
/// incomplete.
pub fn run_pipeline(config_path: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<BundleSummary, PipelineError> {
    let config_path = config_path.as_ref();
    let config = PipelineConfig::load(config_path).map_err(|error| PipelineError { stage: None, error })?;
    let base = config_path.parent().map(Path::to_path_buf);
    run_config(&config, base.as_deref(), out_dir.as_ref())
}

pub fn run_config(config: &PipelineConfig, base_dir: Option<&Path>, out_dir: &Path) -> Result<BundleSummary, PipelineError> {
    let cfg_err = |error| PipelineError { stage: None, error };
    config.spec.validate().map_err(cfg_err)?;
    fs::create_dir_all(out_dir).map_err(|e| cfg_err(Error::io(out_dir, e)))?;
    let mut bundle = Bundle {
        dir: out_dir.to_path_buf(),
        log: String::new(),
        files: Vec::new(),
    };
    let mut stage = Stage::Load;
    let result = run_stages(config, base_dir, &mut bundle, &mut stage);
    match result {
        Ok(summary) => {
            let status = json!({
                "complete": true,
                "files": bundle.files,
                "group": summary.group.label(),
                "bandwidth": summary.bandwidth,
                "n_clusters": summary.n_clusters,
            });
            bundle.log("pipeline complete");
            bundle.finish(status).map_err(cfg_err)?;
            Ok(summary)
        }
        Err(error) => {
            bundle.log(format!("{stage} stage failed: {error}"));
            let status = json!({
                "complete": false,
                "failed_stage": stage,
                "error": error.to_string(),
                "files": bundle.files,
            });
            let _ = bundle.finish(status);
            Err(PipelineError {
                stage: Some(stage),
                error,
            })
        }
    }
}

fn run_stages(config: &PipelineConfig, base_dir: Option<&Path>, bundle: &mut Bundle, stage: &mut Stage) -> Result<BundleSummary> {
    let mut session = Session::new("batch");

    *stage = Stage::Load;
    let loaded = session.load(config.dataset.clone(), base_dir)?;
    let n = loaded.frame.len();
    let report = loaded.report.lines();
    bundle.log(format!("loaded {n} units"));
    for line in report {
        bundle.log(format!("join: {line}"));
    }
    let corr = session.correlation(Some(config.spec.independents.clone()))?;
    for w in &corr.warnings {
        bundle.log(format!("correlation: {w}"));
    }
    bundle.write("correlation.json", &serde_json::to_value(&corr)?)?;

    *stage = Stage::Spec;
    session.set_spec(SpecRequest {
        spec: config.spec.clone(),
        weights: config.weights,
        contiguity: config.contiguity,
    })?;
    bundle.log(format!(
        "spec: {} ~ {}",
        config.spec.dependent,
        config.spec.independents.join(" + ")
    ));

    *stage = Stage::Scan;
    let scan = session.scan(config.scan.clone())?;
    bundle.log(format!(
        "scanned {} group(s), {} excluded by coverage",
        scan.rows.len(),
        scan.excluded.len()
    ));
    let scan_json = super::scan_payload(scan);
    let top = scan.top().map(|r| r.group.clone());
    bundle.write("scan.json", &scan_json)?;

    *stage = Stage::SelectGroup;
    let group = config
        .group
        .clone()
        .or(top)
        .ok_or_else(|| Error::InvalidArgument("scan produced no groups".into()))?;
    let y = session.select_group(group.clone())?;
    bundle.log(format!("selected group {group} (coverage {:.3})", y.coverage));

    *stage = Stage::FitLocal;
    let local = session.fit_local(FitLocalRequest {
        bandwidth: config.bandwidth,
    })?;
    let bandwidth = local.fit.bandwidth;
    bundle.log(format!(
        "local fit: bandwidth {bandwidth}, {} of {n} units fitted",
        local.fit.fitted_count()
    ));
    for w in &local.fit.warnings {
        bundle.log(format!("local fit: {w}"));
    }
    let local_json = super::local_payload(&session)?;
    bundle.write("local_coefficients.json", &local_json)?;

    *stage = Stage::Regionalize;
    let region = session.regionalize(RegionalizeRequest {
        k: config.k,
        variables: config.cluster_variables.clone(),
    })?;
    let n_clusters = region.reg.n_clusters;
    bundle.log(format!("regionalized into {n_clusters} cluster(s)"));
    for w in region.warnings.clone() {
        bundle.log(format!("regionalize: {w}"));
    }
    bundle.write("spillover.json", &spillover_payload(&session)?)?;
    bundle.write("regionalization.json", &super::regionalization_payload(&session)?)?;
    bundle.write("projection.json", &session.projection()?)?;

    Ok(BundleSummary {
        dir: bundle.dir.clone(),
        files: bundle.files.clone(),
        group,
        bandwidth,
        n_clusters,
    })
}

/// Per-unit sector vectors by channel plus cluster means.
pub fn spillover_payload(session: &Session) -> Result<Value> {
    let l = session.loaded()?;
    let local = session.local_state()?;
    let field = &local.field;
    let units: Vec<Value> = l
        .frame
        .meta
        .units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let per: serde_json::Map<String, Value> = field
                .channels
                .iter()
                .zip(&field.per_channel[i])
                .map(|(c, v)| (c.clone(), json!(v)))
                .collect();
            json!({"unit_id": u.id, "combined": field.combined[i], "channels": per})
        })
        .collect();
    let clusters = match session.region_state() {
        Ok(r) => json!(aggregate_clusters(field, &r.reg).vectors),
        Err(_) => Value::Null,
    };
    Ok(json!({
        "sectors": SECTOR_LABELS,
        "channels": field.channels,
        "skipped_pairs": local.spillover_skipped,
        "units": units,
        "clusters": clusters,
        "warnings": field.warnings,
    }))
}
