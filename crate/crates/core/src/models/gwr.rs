use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{lag_name, ModelSpec, Prepared, INTERCEPT};
use crate::error::{Error, Result};
use crate::geodata::{Point, SpatialFrame};
use crate::groups::GroupSeries;
use crate::linalg::least_squares;
use crate::optimize::golden_section_min_int;
use crate::weights::WeightsMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `(1 - (d/h)^2)^2` inside the bandwidth, zero outside.
    #[default]
    Bisquare,
    /// Weight one inside the bandwidth. Mostly useful as a test hook: at
    /// bandwidth n it reproduces the global fit.
    Uniform,
}

impl Kernel {
    fn weight(self, d: f64, h: f64) -> f64 {
        if h <= 0.0 {
            return if d <= 0.0 { 1.0 } else { 0.0 };
        }
        match self {
            Kernel::Bisquare if d < h => (1.0 - (d / h).powi(2)).powi(2),
            Kernel::Uniform if d <= h => 1.0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthCriterion {
    #[default]
    Aicc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalCoefficients {
    /// Intercept followed by one coefficient per independent.
    pub beta: Vec<f64>,
    /// Coefficient on `Wy`.
    pub rho: Option<f64>,
    /// Coefficients on the lagged independents.
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub dependent: String,
    pub independents: Vec<String>,
    pub lagged: Vec<String>,
    pub has_rho: bool,
    /// One entry per frame unit; `None` for excluded or rank-deficient units.
    pub units: Vec<Option<LocalCoefficients>>,
    pub local_r2: Vec<Option<f64>>,
    /// Adaptive bandwidth as a neighbor count.
    pub bandwidth: usize,
    pub kernel: Kernel,
    /// Projected centroids of every frame unit.
    pub coords: Vec<Point>,
    pub aicc: f64,
    pub trace_hat: f64,
    pub rss: f64,
    pub warnings: Vec<String>,
}

impl LocalFit {
    /// Column names in the order of [`LocalFit::row`].
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = vec![INTERCEPT.to_string()];
        names.extend(self.independents.iter().cloned());
        if self.has_rho {
            names.push(lag_name(&self.dependent));
        }
        names.extend(self.lagged.iter().map(|v| lag_name(v)));
        names
    }

    /// Flattened coefficients of unit `i`.
    pub fn row(&self, i: usize) -> Option<Vec<f64>> {
        self.units[i].as_ref().map(|c| {
            let mut r = c.beta.clone();
            r.extend(c.rho);
            r.extend(c.gamma.iter().copied());
            r
        })
    }

    /// Per-unit surface of one named coefficient.
    pub fn surface(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.coefficient_names().iter().position(|n| n == name)?;
        Some((0..self.units.len()).map(|i| self.row(i).map(|r| r[k])).collect())
    }

    pub fn fitted_count(&self) -> usize {
        self.units.iter().filter(|u| u.is_some()).count()
    }

    pub fn to_json(&self, unit_ids: &[String]) -> serde_json::Value {
        let names = self.coefficient_names();
        let rows: Vec<serde_json::Value> = (0..self.units.len())
            .map(|i| {
                let coefs = self.row(i).map(|r| {
                    names
                        .iter()
                        .cloned()
                        .zip(r.into_iter().map(|v| json!(v)))
                        .collect::<serde_json::Map<String, serde_json::Value>>()
                });
                json!({
                    "unit_id": unit_ids.get(i),
                    "coefficients": coefs,
                    "local_r2": self.local_r2[i],
                })
            })
            .collect();
        json!({
            "dependent": self.dependent,
            "columns": names,
            "units": rows,
            "diagnostics": {
                "bandwidth": self.bandwidth,
                "kernel": self.kernel,
                "aicc": self.aicc,
                "trace_hat": self.trace_hat,
                "rss": self.rss,
                "fitted": self.fitted_count(),
                "warnings": self.warnings,
            }
        })
    }
}

/// Everything a local fit needs, prepared once and shared by every
/// bandwidth evaluation.
#[derive(Debug, Clone)]
pub struct LocalDesign {
    spec: ModelSpec,
    prep: Prepared,
    lagged: Vec<String>,
    /// Rows aligned to the used units: `[1, X, Wy, WX]`.
    z: DMatrix<f64>,
    coords: Vec<Point>,
    all_coords: Vec<Point>,
    n_frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitFit {
    pub coef: Vec<f64>,
    pub fitted: f64,
    pub leverage: f64,
    pub local_r2: f64,
}

/// Inflation of the b-th neighbor distance so that neighbor keeps a small
/// positive bisquare weight.
const BANDWIDTH_INFLATION: f64 = 1.000_000_1;

impl LocalDesign {
    pub fn new(
        spec: &ModelSpec,
        frame: &SpatialFrame,
        y: &GroupSeries,
        w: &WeightsMatrix,
    ) -> Result<Self> {
        let prep = Prepared::new(spec, frame, y)?;
        let needs_w = spec.include_wy || !spec.lagged().is_empty();
        let lagged = spec.lagged();
        let mut extra: Vec<Vec<f64>> = Vec::new();
        if needs_w {
            let wsub = prep.weights(w, frame.len())?;
            if spec.include_wy {
                extra.push(wsub.spatial_lag(prep.y.as_slice())?);
            }
            for v in &lagged {
                let k = spec.independents.iter().position(|x| x == v).expect("lagged ⊆ X");
                extra.push(wsub.spatial_lag(&prep.x[k])?);
            }
        }
        let refs: Vec<&[f64]> = extra.iter().map(Vec::as_slice).collect();
        let z = prep.design(&refs);
        let all_coords = frame.centroids();
        let coords = prep.used.iter().map(|&i| all_coords[i]).collect();
        Ok(LocalDesign {
            spec: spec.clone(),
            prep,
            lagged,
            z,
            coords,
            all_coords,
            n_frame: frame.len(),
        })
    }

    /// Number of local coefficients.
    pub fn n_params(&self) -> usize {
        self.z.ncols()
    }

    pub fn n_used(&self) -> usize {
        self.prep.m()
    }

    pub fn used_units(&self) -> &[usize] {
        &self.prep.used
    }

    /// Inclusive search range for the adaptive bandwidth.
    pub fn bandwidth_bounds(&self) -> (usize, usize) {
        (self.n_params() + 5, self.n_used())
    }

    fn kernel_weights(&self, i: usize, bandwidth: usize, kernel: Kernel) -> Vec<f64> {
        let c = self.coords[i];
        let d: Vec<f64> = self
            .coords
            .iter()
            .map(|q| ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2)).sqrt())
            .collect();
        let mut sorted = d.clone();
        let b = bandwidth.clamp(1, sorted.len());
        let (_, &mut kth, _) = sorted.select_nth_unstable_by(b - 1, f64::total_cmp);
        let h = kth * BANDWIDTH_INFLATION;
        d.iter().map(|&dist| kernel.weight(dist, h)).collect()
    }

    /// Weighted least squares centred on used unit `i` (an index into the
    /// used units). `None` when the local design is rank deficient.
    pub fn fit_unit(&self, i: usize, bandwidth: usize, kernel: Kernel) -> Option<UnitFit> {
        let weights = self.kernel_weights(i, bandwidth, kernel);
        let rows: Vec<usize> = (0..weights.len()).filter(|&j| weights[j] > 0.0).collect();
        let p = self.n_params();
        let xw = DMatrix::from_fn(rows.len(), p, |r, c| weights[rows[r]].sqrt() * self.z[(rows[r], c)]);
        let yw = DVector::from_iterator(
            rows.len(),
            rows.iter().map(|&j| weights[j].sqrt() * self.prep.y[j]),
        );
        let ls = least_squares(&xw, &yw)?;
        let zi = self.z.row(i).transpose();
        let fitted = zi.dot(&ls.coef);
        let leverage = weights[i] * ls.leverage(&zi);

        let wsum: f64 = rows.iter().map(|&j| weights[j]).sum();
        let ybar = rows.iter().map(|&j| weights[j] * self.prep.y[j]).sum::<f64>() / wsum;
        let (mut rss, mut tss) = (0.0, 0.0);
        for &j in &rows {
            let e = self.prep.y[j] - self.z.row(j).transpose().dot(&ls.coef);
            rss += weights[j] * e * e;
            tss += weights[j] * (self.prep.y[j] - ybar).powi(2);
        }
        let local_r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
        Some(UnitFit {
            coef: ls.coef.iter().copied().collect(),
            fitted,
            leverage,
            local_r2,
        })
    }

    fn fit_all(&self, bandwidth: usize, kernel: Kernel) -> Vec<Option<UnitFit>> {
        (0..self.n_used())
            .into_par_iter()
            .map(|i| self.fit_unit(i, bandwidth, kernel))
            .collect()
    }

    fn summarize(&self, fits: &[Option<UnitFit>]) -> (f64, f64, f64) {
        let mut rss = 0.0;
        let mut tr = 0.0;
        let mut n = 0usize;
        for (i, f) in fits.iter().enumerate() {
            if let Some(f) = f {
                rss += (self.prep.y[i] - f.fitted).powi(2);
                tr += f.leverage;
                n += 1;
            }
        }
        (aicc(n, rss, tr), tr, rss)
    }

    /// Corrected AIC of the local fit at `bandwidth`.
    pub fn aicc(&self, bandwidth: usize, kernel: Kernel) -> f64 {
        self.summarize(&self.fit_all(bandwidth, kernel)).0
    }

    pub fn fit(&self, bandwidth: usize, kernel: Kernel) -> Result<LocalFit> {
        let p = self.n_params();
        if bandwidth < p + 2 {
            return Err(Error::InvalidArgument(format!(
                "bandwidth {bandwidth} below local parameter count {p} + 2"
            )));
        }
        if bandwidth > self.n_used() {
            return Err(Error::InvalidArgument(format!(
                "bandwidth {bandwidth} exceeds usable units {}",
                self.n_used()
            )));
        }
        let fits = self.fit_all(bandwidth, kernel);
        let (aicc, trace_hat, rss) = self.summarize(&fits);
        let k = self.spec.independents.len();
        let mut units = vec![None; self.n_frame];
        let mut local_r2 = vec![None; self.n_frame];
        let mut warnings = Vec::new();
        for (idx, f) in fits.into_iter().enumerate() {
            let unit = self.prep.used[idx];
            match f {
                Some(f) => {
                    let beta = f.coef[..=k].to_vec();
                    let (rho, rest) = if self.spec.include_wy {
                        (Some(f.coef[k + 1]), &f.coef[k + 2..])
                    } else {
                        (None, &f.coef[k + 1..])
                    };
                    units[unit] = Some(LocalCoefficients {
                        beta,
                        rho,
                        gamma: rest.to_vec(),
                    });
                    local_r2[unit] = Some(f.local_r2);
                }
                None => warnings.push(format!("unit {unit}: local design rank deficient")),
            }
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(LocalFit {
            dependent: self.spec.dependent.clone(),
            independents: self.spec.independents.clone(),
            lagged: self.lagged.clone(),
            has_rho: self.spec.include_wy,
            units,
            local_r2,
            bandwidth,
            kernel,
            coords: self.all_coords.clone(),
            aicc,
            trace_hat,
            rss,
            warnings,
        })
    }
}

/// `2n ln σ + n ln 2π + n (n + tr S) / (n - 2 - tr S)` with `σ² = RSS / n`.
fn aicc(n: usize, rss: f64, trace: f64) -> f64 {
    let n = n as f64;
    let denom = n - 2.0 - trace;
    if n == 0.0 || denom <= 0.0 || rss <= 0.0 {
        return f64::INFINITY;
    }
    let sigma = (rss / n).sqrt();
    2.0 * n * sigma.ln() + n * (2.0 * std::f64::consts::PI).ln() + n * (n + trace) / denom
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub bandwidth: usize,
    pub aicc: f64,
    pub bounds: (usize, usize),
}

/// Adaptive bisquare bandwidth minimizing AICc, by integer golden-section
/// search over `[p + 5, n]`.
pub fn select_bandwidth(
    spec: &ModelSpec,
    frame: &SpatialFrame,
    y: &GroupSeries,
    w: &WeightsMatrix,
    criterion: BandwidthCriterion,
) -> Result<BandwidthSelection> {
    let design = LocalDesign::new(spec, frame, y, w)?;
    design.select_bandwidth(criterion)
}

impl LocalDesign {
    pub fn select_bandwidth(&self, criterion: BandwidthCriterion) -> Result<BandwidthSelection> {
        let BandwidthCriterion::Aicc = criterion;
        let (lo, hi) = self.bandwidth_bounds();
        if lo > hi {
            return Err(Error::TooFewUnits {
                needed: lo,
                have: hi,
            });
        }
        let (bandwidth, aicc) =
            golden_section_min_int(|b| self.aicc(b, Kernel::Bisquare), lo, hi);
        if !aicc.is_finite() {
            return Err(Error::NoFiniteBandwidth);
        }
        Ok(BandwidthSelection {
            bandwidth,
            aicc,
            bounds: (lo, hi),
        })
    }
}

/// Local fit with the adaptive bisquare kernel.
pub fn fit_gwr_sdm(
    spec: &ModelSpec,
    frame: &SpatialFrame,
    y: &GroupSeries,
    w: &WeightsMatrix,
    bandwidth: usize,
) -> Result<LocalFit> {
    fit_gwr_sdm_with_kernel(spec, frame, y, w, bandwidth, Kernel::Bisquare)
}

pub fn fit_gwr_sdm_with_kernel(
    spec: &ModelSpec,
    frame: &SpatialFrame,
    y: &GroupSeries,
    w: &WeightsMatrix,
    bandwidth: usize,
    kernel: Kernel,
) -> Result<LocalFit> {
    LocalDesign::new(spec, frame, y, w)?.fit(bandwidth, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_shapes() {
        assert_eq!(Kernel::Bisquare.weight(0.0, 2.0), 1.0);
        assert_eq!(Kernel::Bisquare.weight(2.0, 2.0), 0.0);
        assert!((Kernel::Bisquare.weight(1.0, 2.0) - 0.5625).abs() < 1e-15);
        assert_eq!(Kernel::Uniform.weight(2.0, 2.0), 1.0);
        assert_eq!(Kernel::Uniform.weight(2.1, 2.0), 0.0);
    }

    #[test]
    fn aicc_infinite_when_overfit() {
        assert!(aicc(10, 1.0, 8.5).is_infinite());
        assert!(aicc(100, 1.0, 5.0).is_finite());
    }
}
