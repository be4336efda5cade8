//! Global and local regression models.
//!
//! * [`fit_ols`]: least squares on `[1, X]`.
//! * [`fit_sdm`]: spatial Durbin model `y = ρWy + Xβ + WXγ + ε`, estimated by
//!   concentrated maximum likelihood with an eigenvalue log-determinant.
//! * [`fit_gwr_sdm`]: geographically weighted least squares on the augmented
//!   design `[1, X, Wy, WX]` with an adaptive bisquare kernel. `Wy` is used as
//!   an ordinary regressor here, so the local ρ ignores its endogeneity; the
//!   surfaces are what downstream stages consume.
//!
//! Units with a missing dependent value are dropped listwise. Lag terms are
//! then built from the weights restricted to the remaining units and
//! re-standardized.

mod gwr;
mod ols;
mod sdm;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geodata::SpatialFrame;
use crate::groups::GroupSeries;
use crate::weights::WeightsMatrix;

pub use gwr::{
    fit_gwr_sdm, fit_gwr_sdm_with_kernel, select_bandwidth, BandwidthCriterion,
    BandwidthSelection, Kernel, LocalCoefficients, LocalDesign, LocalFit,
};
pub use ols::fit_ols;
pub use sdm::{fit_sdm, SdmProfile, RHO_BOUND, RHO_TOLERANCE};

pub const INTERCEPT: &str = "intercept";

/// Name of the lag of `var`.
pub fn lag_name(var: &str) -> String {
    format!("W_{var}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dependent: String,
    pub independents: Vec<String>,
    #[serde(default = "yes")]
    pub include_wy: bool,
    #[serde(default = "yes")]
    pub include_wx: bool,
    /// Independents whose lag is left out even when `include_wx` is set.
    #[serde(default)]
    pub wx_exclude: BTreeSet<String>,
}

fn yes() -> bool {
    true
}

impl ModelSpec {
    pub fn new(dependent: &str, independents: &[&str]) -> Self {
        ModelSpec {
            dependent: dependent.to_string(),
            independents: independents.iter().map(|s| s.to_string()).collect(),
            include_wy: true,
            include_wx: true,
            wx_exclude: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.independents.is_empty() {
            return Err(Error::InvalidSpec("no independent variables".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &self.independents {
            if !seen.insert(v) {
                return Err(Error::InvalidSpec(format!("duplicate independent `{v}`")));
            }
        }
        if seen.contains(&self.dependent) {
            return Err(Error::InvalidSpec(format!(
                "dependent `{}` listed as independent",
                self.dependent
            )));
        }
        for v in &self.wx_exclude {
            if !seen.contains(v) {
                return Err(Error::InvalidSpec(format!(
                    "lag exclusion `{v}` is not an independent"
                )));
            }
        }
        Ok(())
    }

    /// Independents that enter as `WX` terms.
    pub fn lagged(&self) -> Vec<String> {
        if !self.include_wx {
            return Vec::new();
        }
        self.independents
            .iter()
            .filter(|v| !self.wx_exclude.contains(*v))
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    /// `[1, X, WX]` without a lagged dependent.
    Slx,
    Sdm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFit {
    pub model_kind: ModelKind,
    pub dependent: String,
    pub independents: Vec<String>,
    /// Intercept followed by one coefficient per independent.
    pub beta: Vec<f64>,
    pub rho: Option<f64>,
    pub gamma: Option<Vec<f64>>,
    /// Independents carrying a `gamma` coefficient, in order.
    pub lagged: Vec<String>,
    /// Aligned to `used_units`.
    pub residuals: Vec<f64>,
    pub used_units: Vec<usize>,
    pub loglik: Option<f64>,
    pub r2: f64,
    pub sigma2: f64,
}

impl GlobalFit {
    pub fn coefficients(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        out.insert(INTERCEPT.to_string(), self.beta[0]);
        for (name, b) in self.independents.iter().zip(&self.beta[1..]) {
            out.insert(name.clone(), *b);
        }
        if let Some(g) = &self.gamma {
            for (name, c) in self.lagged.iter().zip(g) {
                out.insert(lag_name(name), *c);
            }
        }
        if let Some(rho) = self.rho {
            out.insert(lag_name(&self.dependent), rho);
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "model": self.model_kind,
            "dependent": self.dependent,
            "coefficients": self.coefficients(),
            "diagnostics": {
                "n": self.used_units.len(),
                "r2": self.r2,
                "loglik": self.loglik,
                "sigma2": self.sigma2,
                "rho": self.rho,
            }
        })
    }
}

/// Dependent and regressors restricted to the units usable for a fit.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub used: Vec<usize>,
    pub y: DVector<f64>,
    /// Columns of X, each of length `used.len()`.
    pub x: Vec<Vec<f64>>,
}

impl Prepared {
    pub fn new(spec: &ModelSpec, frame: &SpatialFrame, y: &GroupSeries) -> Result<Self> {
        spec.validate()?;
        if y.len() != frame.len() {
            return Err(Error::LengthMismatch {
                expected: frame.len(),
                got: y.len(),
            });
        }
        let columns = spec
            .independents
            .iter()
            .map(|v| frame.variable(v))
            .collect::<Result<Vec<_>>>()?;
        let used: Vec<usize> = (0..frame.len())
            .filter(|&i| {
                y.rate[i].is_some_and(f64::is_finite) && columns.iter().all(|c| c[i].is_finite())
            })
            .collect();
        let yv = DVector::from_iterator(used.len(), used.iter().map(|&i| y.rate[i].unwrap()));
        let x = columns
            .iter()
            .map(|c| used.iter().map(|&i| c[i]).collect())
            .collect();
        Ok(Prepared { used, y: yv, x })
    }

    pub fn m(&self) -> usize {
        self.used.len()
    }

    /// Weights restricted to the used units and row-standardized.
    pub fn weights(&self, w: &WeightsMatrix, n_frame: usize) -> Result<WeightsMatrix> {
        if w.n() != n_frame {
            return Err(Error::LengthMismatch {
                expected: n_frame,
                got: w.n(),
            });
        }
        if !w.is_row_standardized() {
            return Err(Error::InvalidArgument(
                "spatial weights must be row-standardized".into(),
            ));
        }
        Ok(w.subset(&self.used).row_standardize())
    }

    /// `[1, x_1, ..., x_k, extra...]`.
    pub fn design(&self, extra: &[&[f64]]) -> DMatrix<f64> {
        let m = self.m();
        let p = 1 + self.x.len() + extra.len();
        DMatrix::from_fn(m, p, |r, c| match c {
            0 => 1.0,
            c if c <= self.x.len() => self.x[c - 1][r],
            c => extra[c - 1 - self.x.len()][r],
        })
    }
}

pub(crate) fn r_squared(y: &DVector<f64>, residuals: &DVector<f64>) -> f64 {
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let rss = residuals.norm_squared();
    if tss > 0.0 {
        1.0 - rss / tss
    } else {
        1.0
    }
}

pub(crate) fn gaussian_loglik(n: usize, sigma2: f64) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
}

pub(crate) fn rank_error(design: &DMatrix<f64>, names: &[String]) -> Error {
    let cols = crate::linalg::collinear_columns(design);
    let named = if cols.is_empty() {
        names.to_vec()
    } else {
        cols.into_iter().map(|c| names[c].clone()).collect()
    };
    Error::RankDeficient(named)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new("y", &[]).validate().is_err());
        assert!(ModelSpec::new("y", &["a", "a"]).validate().is_err());
        assert!(ModelSpec::new("y", &["a", "y"]).validate().is_err());
        let mut s = ModelSpec::new("y", &["a", "b"]);
        s.wx_exclude.insert("b".into());
        assert_eq!(s.lagged(), vec!["a"]);
        s.wx_exclude.insert("c".into());
        assert!(s.validate().is_err());
    }
}
