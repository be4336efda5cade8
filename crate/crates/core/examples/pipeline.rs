//! The whole workflow through a session: load, specify, scan groups,
//! select the top group, fit locally and regionalize. Then the same run as
//! a batch bundle.

use nbhd::diagnostics::ScanConfig;
use nbhd::models::ModelSpec;
use nbhd::service::{
    run_config, DatasetRef, FitLocalRequest, PipelineConfig, RegionalizeRequest, Session, SpecRequest,
    WeightsConfig,
};
use nbhd::synthgen::FixtureSpec;
use nbhd::weights::ContiguityRule;

fn main() -> nbhd::Result<()> {
    let mut s = Session::new("demo");
    s.load(DatasetRef::Synthetic { synthetic: FixtureSpec::reference() }, None)?;
    s.set_spec(SpecRequest {
        spec: ModelSpec::new("voted", &["x1", "x2", "x3"]),
        weights: WeightsConfig::default(),
        contiguity: ContiguityRule::Queen,
    })?;

    let report = s.scan(ScanConfig::new(&["edu", "race"]))?;
    for row in &report.rows {
        let i = row.moran_sdm.as_ref().map_or(f64::NAN, |m| m.i);
        println!("{:<12} residual I after SDM {:+.4}", row.group.label(), i);
    }
    let top = report.top().expect("at least one group").group.clone();
    s.select_group(top)?;

    let local = s.fit_local(FitLocalRequest::default())?;
    println!("local bandwidth {}", local.fit.bandwidth);
    let region = s.regionalize(RegionalizeRequest::default())?;
    println!("{} clusters, sizes {:?}", region.reg.n_clusters, region.stats.sizes);
    println!("completed stages: {:?}", s.completed());

    let dir = tempfile::tempdir().expect("temporary directory");
    let mut config = PipelineConfig::reference();
    config.dataset = DatasetRef::Synthetic { synthetic: FixtureSpec::reference() };
    let summary = run_config(&config, None, dir.path()).map_err(|e| e.error)?;
    println!("bundle files: {:?}", summary.files);
    Ok(())
}
