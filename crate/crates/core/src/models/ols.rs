use nalgebra::DVector;

use super::{gaussian_loglik, r_squared, rank_error, GlobalFit, ModelKind, ModelSpec, Prepared, INTERCEPT};
use crate::error::{Error, Result};
use crate::geodata::SpatialFrame;
use crate::groups::GroupSeries;
use crate::linalg::least_squares;

/// Ordinary least squares of the dependent on an intercept and the
/// independents. Lag flags in `spec` are ignored.
pub fn fit_ols(spec: &ModelSpec, frame: &SpatialFrame, y: &GroupSeries) -> Result<GlobalFit> {
    let prep = Prepared::new(spec, frame, y)?;
    let design = prep.design(&[]);
    let p = design.ncols();
    if prep.m() < p + 2 {
        return Err(Error::TooFewUnits {
            needed: p + 2,
            have: prep.m(),
        });
    }
    let Some(ls) = least_squares(&design, &prep.y) else {
        let names: Vec<String> = std::iter::once(INTERCEPT.to_string())
            .chain(spec.independents.iter().cloned())
            .collect();
        return Err(rank_error(&design, &names));
    };
    let residuals: DVector<f64> = &prep.y - &design * &ls.coef;
    let m = prep.m();
    let sigma2 = residuals.norm_squared() / m as f64;
    Ok(GlobalFit {
        model_kind: ModelKind::Ols,
        dependent: spec.dependent.clone(),
        independents: spec.independents.clone(),
        beta: ls.coef.iter().copied().collect(),
        rho: None,
        gamma: None,
        lagged: Vec::new(),
        r2: r_squared(&prep.y, &residuals),
        residuals: residuals.iter().copied().collect(),
        used_units: prep.used,
        loglik: Some(gaussian_loglik(m, sigma2)),
        sigma2,
    })
}
