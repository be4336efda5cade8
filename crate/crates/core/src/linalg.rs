//! Least squares via Householder QR with a singular-value rank test.

use nalgebra::{DMatrix, DVector};

/// A design is rank deficient when its smallest singular value falls below
/// this fraction of the largest.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    /// Upper-triangular factor of the design, `X = Q R`.
    pub r: DMatrix<f64>,
}

impl LeastSquares {
    /// `x_i^T (X^T X)^-1 x_i` for a row of the design.
    pub fn leverage(&self, row: &DVector<f64>) -> f64 {
        match self.r.transpose().solve_lower_triangular(row) {
            Some(z) => z.norm_squared(),
            None => f64::NAN,
        }
    }
}

fn well_conditioned(r: &DMatrix<f64>) -> bool {
    let sv = r.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min.is_finite() && min >= RANK_TOL * max
}

/// Solves `min ||y - X b||`. Returns `None` when X is rank deficient.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<LeastSquares> {
    let (m, p) = x.shape();
    if m < p || p == 0 {
        return None;
    }
    let qr = x.clone().qr();
    let r = qr.r();
    if !well_conditioned(&r) {
        return None;
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let coef = r.solve_upper_triangular(&qty.rows(0, p).into_owned())?;
    Some(LeastSquares { coef, r })
}

/// Columns that are (numerically) linear combinations of earlier columns.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    let mut bad = Vec::new();
    for c in 0..x.ncols() {
        let mut trial = kept.clone();
        trial.push(c);
        let sub = x.select_columns(&trial);
        let ok = sub.nrows() >= sub.ncols() && well_conditioned(&sub.qr().r());
        if ok {
            kept = trial;
        } else {
            bad.push(c);
        }
    }
    bad
}
