use nalgebra::{Complex, DVector};

use super::{
    gaussian_loglik, lag_name, r_squared, rank_error, GlobalFit, ModelKind, ModelSpec, Prepared,
    INTERCEPT,
};
use crate::error::{Error, Result};
use crate::geodata::SpatialFrame;
use crate::groups::GroupSeries;
use crate::linalg::least_squares;
use crate::optimize::golden_section_max;
use crate::weights::WeightsMatrix;

/// ρ is searched on `(-RHO_BOUND, RHO_BOUND)`.
pub const RHO_BOUND: f64 = 0.999;
/// Bracket width at which the golden-section search stops.
pub const RHO_TOLERANCE: f64 = 1e-6;

/// Concentrated log-likelihood of the spatial Durbin model as a function of
/// ρ alone.
///
/// For fixed ρ the remaining coefficients solve least squares of
/// `y - ρWy` on `Z = [1, X, WX]`. Because that problem is linear in ρ, the
/// residual is `e0 - ρ eL` with `e0`, `eL` the residuals of `y` and `Wy` on
/// `Z`, and the profile costs O(n) per evaluation once the eigenvalues of W
/// are known.
#[derive(Debug, Clone)]
pub struct SdmProfile {
    spec: ModelSpec,
    prep: Prepared,
    lagged: Vec<String>,
    coef_y: DVector<f64>,
    coef_wy: DVector<f64>,
    e_y: DVector<f64>,
    e_wy: DVector<f64>,
    eigenvalues: Vec<Complex<f64>>,
}

impl SdmProfile {
    pub fn new(
        spec: &ModelSpec,
        frame: &SpatialFrame,
        y: &GroupSeries,
        w: &WeightsMatrix,
    ) -> Result<Self> {
        let prep = Prepared::new(spec, frame, y)?;
        let wsub = prep.weights(w, frame.len())?;
        let lagged = spec.lagged();
        let lag_cols: Vec<Vec<f64>> = lagged
            .iter()
            .map(|v| {
                let k = spec.independents.iter().position(|x| x == v).expect("lagged ⊆ X");
                wsub.spatial_lag(&prep.x[k])
            })
            .collect::<Result<_>>()?;
        let extra: Vec<&[f64]> = lag_cols.iter().map(Vec::as_slice).collect();
        let design = prep.design(&extra);
        let p = design.ncols() + usize::from(spec.include_wy);
        if prep.m() < p + 2 {
            return Err(Error::TooFewUnits {
                needed: p + 2,
                have: prep.m(),
            });
        }

        let names: Vec<String> = std::iter::once(INTERCEPT.to_string())
            .chain(spec.independents.iter().cloned())
            .chain(lagged.iter().map(|v| lag_name(v)))
            .collect();
        let wy = DVector::from_vec(wsub.spatial_lag(prep.y.as_slice())?);
        let fit_y = least_squares(&design, &prep.y).ok_or_else(|| rank_error(&design, &names))?;
        let fit_wy = least_squares(&design, &wy).ok_or_else(|| rank_error(&design, &names))?;
        let e_y = &prep.y - &design * &fit_y.coef;
        let e_wy = &wy - &design * &fit_wy.coef;

        if spec.include_wy {
            let mut with_wy = design.clone().insert_column(design.ncols(), 0.0);
            with_wy.set_column(design.ncols(), &wy);
            if least_squares(&with_wy, &prep.y).is_none() {
                let mut all = names.clone();
                all.push(lag_name(&spec.dependent));
                return Err(rank_error(&with_wy, &all));
            }
        }

        let eigenvalues = if spec.include_wy {
            wsub.eigenvalues()?
        } else {
            Vec::new()
        };
        Ok(SdmProfile {
            spec: spec.clone(),
            prep,
            lagged,
            coef_y: fit_y.coef,
            coef_wy: fit_wy.coef,
            e_y,
            e_wy,
            eigenvalues,
        })
    }

    pub fn n(&self) -> usize {
        self.prep.m()
    }

    fn quadratic(&self) -> (f64, f64, f64) {
        (
            self.e_y.norm_squared(),
            self.e_y.dot(&self.e_wy),
            self.e_wy.norm_squared(),
        )
    }

    /// `ln |I - ρW|`.
    pub fn log_det(&self, rho: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| 0.5 * ((1.0 - rho * l.re).powi(2) + (rho * l.im).powi(2)).ln())
            .sum()
    }

    /// Concentrated log-likelihood at ρ.
    pub fn loglik(&self, rho: f64) -> f64 {
        let (a, b, c) = self.quadratic();
        let q = a - 2.0 * rho * b + rho * rho * c;
        gaussian_loglik(self.n(), q / self.n() as f64) + self.log_det(rho)
    }

    /// Analytic first and second derivatives of [`Self::loglik`].
    pub fn derivatives(&self, rho: f64) -> (f64, f64) {
        let n = self.n() as f64;
        let (a, b, c) = self.quadratic();
        let q = a - 2.0 * rho * b + rho * rho * c;
        let dq = -2.0 * b + 2.0 * rho * c;
        let mut d1 = -0.5 * n * dq / q;
        let mut d2 = -0.5 * n * (2.0 * c * q - dq * dq) / (q * q);
        for l in &self.eigenvalues {
            let re = 1.0 - rho * l.re;
            let im = -rho * l.im;
            let g = re * re + im * im;
            let dg = 2.0 * (re * -l.re + im * -l.im);
            let ddg = 2.0 * (l.re * l.re + l.im * l.im);
            d1 += 0.5 * dg / g;
            d2 += 0.5 * (ddg * g - dg * dg) / (g * g);
        }
        (d1, d2)
    }

    /// Maximizes the profile: golden section to [`RHO_TOLERANCE`], then
    /// safeguarded Newton steps on the analytic derivative inside the final
    /// bracket.
    pub fn maximize(&self) -> Result<f64> {
        let (mut rho, mut best) =
            golden_section_max(|r| self.loglik(r), -RHO_BOUND, RHO_BOUND, RHO_TOLERANCE);
        if !best.is_finite() {
            return Err(Error::NonFinite(format!("log-likelihood at rho = {rho}")));
        }
        let lo = (rho - RHO_TOLERANCE).max(-RHO_BOUND);
        let hi = (rho + RHO_TOLERANCE).min(RHO_BOUND);
        for _ in 0..50 {
            let (d1, d2) = self.derivatives(rho);
            if !(d2 < 0.0) || !d1.is_finite() {
                break;
            }
            let next = (rho - d1 / d2).clamp(lo, hi);
            let val = self.loglik(next);
            if !(val >= best) {
                break;
            }
            let step = (next - rho).abs();
            rho = next;
            best = val;
            if step < 1e-15 {
                break;
            }
        }
        Ok(rho)
    }

    /// The fit with ρ held at the given value.
    pub fn fit_at(&self, rho: f64) -> GlobalFit {
        let k = self.spec.independents.len();
        let coef = &self.coef_y - &self.coef_wy * rho;
        let residuals = &self.e_y - &self.e_wy * rho;
        let m = self.n();
        let sigma2 = residuals.norm_squared() / m as f64;
        let (kind, rho_out, loglik) = if self.spec.include_wy {
            (ModelKind::Sdm, Some(rho), self.loglik(rho))
        } else {
            (ModelKind::Slx, None, gaussian_loglik(m, sigma2))
        };
        GlobalFit {
            model_kind: kind,
            dependent: self.spec.dependent.clone(),
            independents: self.spec.independents.clone(),
            beta: coef.rows(0, k + 1).iter().copied().collect(),
            rho: rho_out,
            gamma: Some(coef.rows(k + 1, self.lagged.len()).iter().copied().collect()),
            lagged: self.lagged.clone(),
            r2: r_squared(&self.prep.y, &residuals),
            residuals: residuals.iter().copied().collect(),
            used_units: self.prep.used.clone(),
            loglik: Some(loglik),
            sigma2,
        }
    }

    pub fn design_dims(&self) -> (usize, usize) {
        (self.n(), 1 + self.spec.independents.len() + self.lagged.len())
    }
}

/// Maximum-likelihood spatial Durbin fit.
pub fn fit_sdm(
    spec: &ModelSpec,
    frame: &SpatialFrame,
    y: &GroupSeries,
    w: &WeightsMatrix,
) -> Result<GlobalFit> {
    let profile = SdmProfile::new(spec, frame, y, w)?;
    if !spec.include_wy {
        return Ok(profile.fit_at(0.0));
    }
    let rho = profile.maximize()?;
    let fit = profile.fit_at(rho);
    if !fit.loglik.is_some_and(f64::is_finite) {
        return Err(Error::NonFinite("log-likelihood at optimum".into()));
    }
    Ok(fit)
}
