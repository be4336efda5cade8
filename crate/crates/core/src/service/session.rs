use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::payloads;
use crate::diagnostics::{correlation_matrix, scan_groups, CorrelationMatrix, ScanConfig, ScanReport};
use crate::error::{Error, Result};
use crate::geodata::{
    join_frame, load_geometry, CensusDataset, JoinReport, SpatialFrame, SubgroupDataset,
    DEFAULT_ID_COLUMN,
};
use crate::groups::{aggregate_rate, GroupKey, GroupSeries};
use crate::models::{BandwidthCriterion, BandwidthSelection, Kernel, LocalDesign, LocalFit, ModelSpec};
use crate::regionalize::{
    build_features, cluster_stats, constrained_cluster, ClusterStats, MergeTree, Regionalization,
    DEFAULT_K,
};
use crate::spillover::{bin_directions, pairwise_spillover, SpilloverField};
use crate::synthgen::FixtureSpec;
use crate::weights::{
    build_contiguity, build_gaussian, build_knn_binary, ContiguityRule, WeightsKind, WeightsMatrix,
    DEFAULT_GAUSSIAN_K,
};

/// Pipeline stages, in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Load,
    Spec,
    Scan,
    SelectGroup,
    FitLocal,
    Regionalize,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Load,
        Stage::Spec,
        Stage::Scan,
        Stage::SelectGroup,
        Stage::FitLocal,
        Stage::Regionalize,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Load => "dataset",
            Stage::Spec => "model specification",
            Stage::Scan => "group scan",
            Stage::SelectGroup => "group selection",
            Stage::FitLocal => "local fit",
            Stage::Regionalize => "regionalization",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A request arrived before the stage it depends on.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{missing} required")]
pub struct StageError {
    pub missing: Stage,
}

/// Where a session's data comes from. File paths are resolved against the
/// base directory handed to [`Session::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Files {
        geometry: PathBuf,
        census: PathBuf,
        subgroups: PathBuf,
        #[serde(default)]
        id_column: Option<String>,
    },
    Synthetic {
        synthetic: FixtureSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightsConfig {
    pub kind: WeightsKind,
    /// Neighbor count for the k-nearest kinds.
    #[serde(default)]
    pub k: Option<usize>,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig {
            kind: WeightsKind::GaussianKnn,
            k: Some(DEFAULT_GAUSSIAN_K),
        }
    }
}

impl WeightsConfig {
    pub fn build(&self, frame: &SpatialFrame) -> Result<WeightsMatrix> {
        let k = self.k.unwrap_or(DEFAULT_GAUSSIAN_K);
        let w = match self.kind {
            WeightsKind::GaussianKnn => build_gaussian(&frame.meta, k)?,
            WeightsKind::KnnBinary => build_knn_binary(&frame.meta, k)?,
            WeightsKind::Queen => build_contiguity(&frame.meta, ContiguityRule::Queen),
            WeightsKind::Rook => build_contiguity(&frame.meta, ContiguityRule::Rook),
        };
        Ok(w.row_standardize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecRequest {
    pub spec: ModelSpec,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub contiguity: ContiguityRule,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitLocalRequest {
    /// Adaptive bandwidth; selected by AICc when absent.
    #[serde(default)]
    pub bandwidth: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionalizeRequest {
    #[serde(default)]
    pub k: Option<usize>,
    /// Attributes joining the coefficients in the clustering features and
    /// shown on the glyph radar; defaults to the independents.
    #[serde(default)]
    pub variables: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: DatasetRef,
    pub frame: SpatialFrame,
    pub subgroups: SubgroupDataset,
    pub report: JoinReport,
}

#[derive(Debug, Clone)]
pub struct SpecState {
    pub request: SpecRequest,
    pub w: WeightsMatrix,
    pub contiguity: WeightsMatrix,
}

#[derive(Debug, Clone)]
pub struct ScanState {
    pub config: ScanConfig,
    pub report: ScanReport,
}

#[derive(Debug, Clone)]
pub struct LocalState {
    pub request: FitLocalRequest,
    pub selection: Option<BandwidthSelection>,
    pub fit: LocalFit,
    pub field: SpilloverField,
    pub spillover_skipped: usize,
}

#[derive(Debug, Clone)]
pub struct RegionState {
    pub request: RegionalizeRequest,
    pub variables: Vec<String>,
    pub tree: MergeTree,
    pub reg: Regionalization,
    pub stats: ClusterStats,
    pub warnings: Vec<String>,
}

/// Replayable record of the choices made in a session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub dataset: Option<DatasetRef>,
    pub base_dir: Option<PathBuf>,
    pub spec: Option<SpecRequest>,
    pub scan: Option<ScanConfig>,
    pub group: Option<GroupKey>,
    pub fit_local: Option<FitLocalRequest>,
    pub regionalize: Option<RegionalizeRequest>,
}

/// One analyst's pipeline state. Each stage requires the one before it and
/// redoing a stage clears everything downstream.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    base_dir: Option<PathBuf>,
    loaded: Option<Loaded>,
    spec: Option<SpecState>,
    scan: Option<ScanState>,
    selected: Option<GroupSeries>,
    local: Option<LocalState>,
    region: Option<RegionState>,
    /// Group rates already aggregated, by (group, behavior, min_pop).
    rate_cache: BTreeMap<(GroupKey, String, u64), GroupSeries>,
    sample_cache: BTreeMap<(usize, usize, u64), serde_json::Value>,
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Session {
            id: id.into(),
            base_dir: None,
            loaded: None,
            spec: None,
            scan: None,
            selected: None,
            local: None,
            region: None,
            rate_cache: BTreeMap::new(),
            sample_cache: BTreeMap::new(),
        }
    }

    pub fn completed(&self) -> Vec<Stage> {
        let done = [
            self.loaded.is_some(),
            self.spec.is_some(),
            self.scan.is_some(),
            self.selected.is_some(),
            self.local.is_some(),
            self.region.is_some(),
        ];
        Stage::ALL
            .iter()
            .zip(done)
            .filter(|(_, d)| *d)
            .map(|(s, _)| *s)
            .collect()
    }

    pub fn is_complete(&self, stage: Stage) -> bool {
        self.completed().contains(&stage)
    }

    /// Fails with the first missing stage before `stage`.
    pub fn require(&self, stage: Stage) -> Result<(), StageError> {
        for s in Stage::ALL.iter().take_while(|s| **s < stage) {
            if !self.is_complete(*s) {
                return Err(StageError { missing: *s });
            }
        }
        Ok(())
    }

    /// Clears `stage` and every stage after it.
    fn invalidate_from(&mut self, stage: Stage) {
        if stage <= Stage::Load {
            self.loaded = None;
            self.rate_cache.clear();
        }
        if stage <= Stage::Spec {
            self.spec = None;
        }
        if stage <= Stage::Scan {
            self.scan = None;
        }
        if stage <= Stage::SelectGroup {
            self.selected = None;
        }
        if stage <= Stage::FitLocal {
            self.local = None;
        }
        if stage <= Stage::Regionalize {
            self.region = None;
            self.sample_cache.clear();
        }
    }

    pub fn loaded(&self) -> Result<&Loaded> {
        self.loaded.as_ref().ok_or(Error::Stage(StageError { missing: Stage::Load }))
    }

    pub fn spec_state(&self) -> Result<&SpecState> {
        self.require(Stage::Spec)?;
        self.spec.as_ref().ok_or(Error::Stage(StageError { missing: Stage::Spec }))
    }

    pub fn scan_state(&self) -> Result<&ScanState> {
        self.scan.as_ref().ok_or(Error::Stage(StageError { missing: Stage::Scan }))
    }

    pub fn selected(&self) -> Result<&GroupSeries> {
        self.selected
            .as_ref()
            .ok_or(Error::Stage(StageError { missing: Stage::SelectGroup }))
    }

    pub fn local_state(&self) -> Result<&LocalState> {
        self.local.as_ref().ok_or(Error::Stage(StageError { missing: Stage::FitLocal }))
    }

    pub fn region_state(&self) -> Result<&RegionState> {
        self.region
            .as_ref()
            .ok_or(Error::Stage(StageError { missing: Stage::Regionalize }))
    }

    pub fn load(&mut self, dataset: DatasetRef, base_dir: Option<&Path>) -> Result<&Loaded> {
        let (md, cd, sd) = match &dataset {
            DatasetRef::Files {
                geometry,
                census,
                subgroups,
                id_column,
            } => {
                let id = id_column.as_deref().unwrap_or(DEFAULT_ID_COLUMN);
                let md = load_geometry(resolve(base_dir, geometry), id)?;
                let cd = CensusDataset::load(resolve(base_dir, census), id)?;
                let sd = SubgroupDataset::load(resolve(base_dir, subgroups), id)?;
                (md, cd, sd)
            }
            DatasetRef::Synthetic { synthetic } => synthetic.generate()?,
        };
        let (frame, report) = join_frame(&md, &cd, Some(&sd))?;
        let subgroups = frame.subgroups.clone().unwrap_or(SubgroupDataset { rows: Vec::new() });
        self.invalidate_from(Stage::Load);
        self.base_dir = base_dir.map(Path::to_path_buf);
        Ok(self.loaded.insert(Loaded {
            dataset,
            frame,
            subgroups,
            report,
        }))
    }

    pub fn correlation(&self, variables: Option<Vec<String>>) -> Result<CorrelationMatrix> {
        let l = self.loaded()?;
        let vars = variables.unwrap_or_else(|| l.frame.variable_names());
        correlation_matrix(&l.frame, &vars)
    }

    pub fn set_spec(&mut self, request: SpecRequest) -> Result<&SpecState> {
        let l = self.loaded()?;
        request.spec.validate()?;
        for v in &request.spec.independents {
            l.frame.variable(v)?;
        }
        if !l.subgroups.behaviors().contains(&request.spec.dependent) {
            return Err(Error::UnknownVariable(request.spec.dependent.clone()));
        }
        let w = request.weights.build(&l.frame)?;
        let contiguity = build_contiguity(&l.frame.meta, request.contiguity);
        self.invalidate_from(Stage::Spec);
        Ok(self.spec.insert(SpecState {
            request,
            w,
            contiguity,
        }))
    }

    pub fn scan(&mut self, config: ScanConfig) -> Result<&ScanReport> {
        self.require(Stage::Scan)?;
        let l = self.loaded()?;
        let s = self.spec_state()?;
        let report = scan_groups(&s.request.spec, &l.frame, &l.subgroups, &config, &s.w)?;
        self.invalidate_from(Stage::Scan);
        Ok(&self.scan.insert(ScanState { config, report }).report)
    }

    fn group_series(&mut self, group: &GroupKey) -> Result<GroupSeries> {
        let l = self.loaded()?;
        let dependent = self.spec_state()?.request.spec.dependent.clone();
        let min_pop = self.scan_state()?.config.min_pop;
        let key = (group.clone(), dependent.clone(), min_pop);
        if let Some(s) = self.rate_cache.get(&key) {
            return Ok(s.clone());
        }
        let s = aggregate_rate(&l.subgroups, &l.frame.unit_ids(), group, &dependent, min_pop)?;
        self.rate_cache.insert(key, s.clone());
        Ok(s)
    }

    /// Chooses the group whose rate becomes the dependent variable. It must
    /// be one of the scanned groups.
    pub fn select_group(&mut self, group: GroupKey) -> Result<&GroupSeries> {
        self.require(Stage::SelectGroup)?;
        let scan = self.scan_state()?;
        if !scan.report.rows.iter().any(|r| r.group == group) {
            return Err(Error::InvalidArgument(format!(
                "group {group} is not among the scanned groups"
            )));
        }
        let series = self.group_series(&group)?;
        self.invalidate_from(Stage::SelectGroup);
        Ok(self.selected.insert(series))
    }

    pub fn fit_local(&mut self, request: FitLocalRequest) -> Result<&LocalState> {
        self.require(Stage::FitLocal)?;
        let l = self.loaded()?;
        let s = self.spec_state()?;
        let y = self.selected()?;
        let design = LocalDesign::new(&s.request.spec, &l.frame, y, &s.w)?;
        let (bandwidth, selection) = match request.bandwidth {
            Some(b) => (b, None),
            None => {
                let sel = design.select_bandwidth(BandwidthCriterion::Aicc)?;
                (sel.bandwidth, Some(sel))
            }
        };
        let fit = design.fit(bandwidth, Kernel::Bisquare)?;
        let pairs = pairwise_spillover(&fit, &s.w)?;
        let field = bin_directions(&pairs, &l.frame.centroids());
        let state = LocalState {
            request,
            selection,
            fit,
            field,
            spillover_skipped: pairs.skipped,
        };
        self.invalidate_from(Stage::FitLocal);
        Ok(self.local.insert(state))
    }

    pub fn regionalize(&mut self, request: RegionalizeRequest) -> Result<&RegionState> {
        self.require(Stage::Regionalize)?;
        let l = self.loaded()?;
        let s = self.spec_state()?;
        let local = self.local_state()?;
        let variables = request
            .variables
            .clone()
            .unwrap_or_else(|| s.request.spec.independents.clone());
        let k = request.k.unwrap_or(DEFAULT_K);
        let features = build_features(&local.fit, &l.frame, &variables)?;
        let (tree, reg) = constrained_cluster(&features, &s.contiguity, k)?;
        let stats = cluster_stats(&reg, &l.frame, &variables)?;
        let state = RegionState {
            request,
            variables,
            tree,
            reg,
            stats,
            warnings: features.warnings,
        };
        self.invalidate_from(Stage::Regionalize);
        Ok(self.region.insert(state))
    }

    pub fn variables_payload(&self) -> Result<serde_json::Value> {
        Ok(payloads::variables(self.loaded()?))
    }

    pub fn projection(&self) -> Result<serde_json::Value> {
        self.require(Stage::Regionalize)?;
        payloads::projection(self)
    }

    pub fn glyphs(&self) -> Result<serde_json::Value> {
        self.require(Stage::Regionalize)?;
        payloads::glyphs(self)
    }

    pub fn cluster_histograms(&self, bins: usize) -> Result<serde_json::Value> {
        self.require(Stage::Regionalize)?;
        payloads::cluster_histograms(self, bins)
    }

    pub fn representative(&self, cluster: usize) -> Result<serde_json::Value> {
        self.require(Stage::Regionalize)?;
        payloads::representative(self, cluster)
    }

    /// Seeded pseudo-individuals drawn from the subgroup counts of a
    /// cluster's units. Memoized per `(cluster, m, seed)`.
    pub fn parallel_sets_sample(&mut self, cluster: usize, m: usize, seed: u64) -> Result<serde_json::Value> {
        self.require(Stage::Regionalize)?;
        let key = (cluster, m, seed);
        if let Some(v) = self.sample_cache.get(&key) {
            return Ok(v.clone());
        }
        let v = payloads::parallel_sets_sample(self, cluster, m, seed)?;
        self.sample_cache.insert(key, v.clone());
        Ok(v)
    }

    pub fn status(&self) -> serde_json::Value {
        serde_json::json!({
            "session_id": self.id,
            "completed": self.completed(),
        })
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            dataset: self.loaded.as_ref().map(|l| l.dataset.clone()),
            base_dir: self.base_dir.clone(),
            spec: self.spec.as_ref().map(|s| s.request.clone()),
            scan: self.scan.as_ref().map(|s| s.config.clone()),
            group: self.selected.as_ref().map(|s| s.group.clone()),
            fit_local: self.local.as_ref().map(|s| s.request.clone()),
            regionalize: self.region.as_ref().map(|s| s.request.clone()),
        }
    }

    /// Rebuilds a session by replaying the recorded choices. Every stage is
    /// deterministic, so the result equals the original.
    pub fn restore(id: impl Into<String>, snap: &SessionSnapshot) -> Result<Session> {
        let mut s = Session::new(id);
        let Some(ds) = &snap.dataset else {
            return Ok(s);
        };
        s.load(ds.clone(), snap.base_dir.as_deref())?;
        if let Some(r) = &snap.spec {
            s.set_spec(r.clone())?;
        } else {
            return Ok(s);
        }
        if let Some(c) = &snap.scan {
            s.scan(c.clone())?;
        } else {
            return Ok(s);
        }
        if let Some(g) = &snap.group {
            s.select_group(g.clone())?;
        } else {
            return Ok(s);
        }
        if let Some(r) = &snap.fit_local {
            s.fit_local(r.clone())?;
        } else {
            return Ok(s);
        }
        if let Some(r) = &snap.regionalize {
            s.regionalize(r.clone())?;
        }
        Ok(s)
    }
}
