use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moran::{residual_moran, MoranResult};
use crate::error::Result;
use crate::geodata::{SpatialFrame, SubgroupDataset};
use crate::groups::{aggregate_rate, enumerate_groups, GroupKey, DEFAULT_MIN_POP};
use crate::models::{fit_ols, fit_sdm, GlobalFit, ModelSpec};
use crate::weights::WeightsMatrix;

/// Groups covering fewer units than this fraction are left out of a scan.
pub const DEFAULT_MIN_COVERAGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub attrs: Vec<String>,
    #[serde(default = "default_min_pop")]
    pub min_pop: u64,
    #[serde(default = "default_min_coverage")]
    pub min_coverage: f64,
}

fn default_min_pop() -> u64 {
    DEFAULT_MIN_POP
}

fn default_min_coverage() -> f64 {
    DEFAULT_MIN_COVERAGE
}

impl ScanConfig {
    pub fn new(attrs: &[&str]) -> Self {
        ScanConfig {
            attrs: attrs.iter().map(|s| s.to_string()).collect(),
            min_pop: DEFAULT_MIN_POP,
            min_coverage: DEFAULT_MIN_COVERAGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScanRow {
    pub group: GroupKey,
    pub coverage: f64,
    pub moran_ols: Option<MoranResult>,
    pub moran_sdm: Option<MoranResult>,
    pub r2_ols: Option<f64>,
    pub r2_sdm: Option<f64>,
    pub rho: Option<f64>,
    /// Failures of the fits or statistics for this group.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    /// Sorted by SDM residual Moran's I, descending; rows without it last.
    pub rows: Vec<GroupScanRow>,
    /// Groups below the coverage threshold, with their coverage.
    pub excluded: Vec<(GroupKey, f64)>,
}

impl ScanReport {
    pub fn top(&self) -> Option<&GroupScanRow> {
        self.rows.first()
    }
}

/// Fits OLS and SDM for every group enumerated from `config.attrs`, with the
/// group's rate of the behavior `spec.dependent` as the dependent variable,
/// and ranks groups by residual Moran's I.
pub fn scan_groups(
    spec: &ModelSpec,
    frame: &SpatialFrame,
    sd: &SubgroupDataset,
    config: &ScanConfig,
    w: &WeightsMatrix,
) -> Result<ScanReport> {
    spec.validate()?;
    for v in &spec.independents {
        frame.variable(v)?;
    }
    let groups = if config.attrs.is_empty() {
        vec![GroupKey::all()]
    } else {
        enumerate_groups(&config.attrs, sd)?
    };
    let ids = frame.unit_ids();
    let series = groups
        .iter()
        .map(|g| aggregate_rate(sd, &ids, g, &spec.dependent, config.min_pop))
        .collect::<Result<Vec<_>>>()?;

    let mut excluded = Vec::new();
    let mut eligible = Vec::new();
    for s in series {
        if s.coverage >= config.min_coverage {
            eligible.push(s);
        } else {
            excluded.push((s.group.clone(), s.coverage));
        }
    }

    let mut rows: Vec<GroupScanRow> = eligible
        .par_iter()
        .map(|y| {
            let mut errors = Vec::new();
            let mut moran = |fit: &Result<GlobalFit>, label: &str| match fit {
                Ok(f) => match residual_moran(&f.residuals, &f.used_units, w) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        errors.push(format!("{label} Moran: {e}"));
                        None
                    }
                },
                Err(e) => {
                    errors.push(format!("{label} fit: {e}"));
                    None
                }
            };
            let ols = fit_ols(spec, frame, y);
            let sdm = fit_sdm(spec, frame, y, w);
            let moran_ols = moran(&ols, "OLS");
            let moran_sdm = moran(&sdm, "SDM");
            GroupScanRow {
                group: y.group.clone(),
                coverage: y.coverage,
                moran_ols,
                moran_sdm,
                r2_ols: ols.as_ref().ok().map(|f| f.r2),
                r2_sdm: sdm.as_ref().ok().map(|f| f.r2),
                rho: sdm.as_ref().ok().and_then(|f| f.rho),
                errors,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |r: &GroupScanRow| r.moran_sdm.map(|m| m.i).filter(|i| i.is_finite());
        match (key(a), key(b)) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
    });
    Ok(ScanReport { rows, excluded })
}
