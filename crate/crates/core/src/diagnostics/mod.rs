//! Variable screening and residual spatial-autocorrelation diagnostics.

mod moran;
mod scan;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::SpatialFrame;

pub use moran::{
    moran_permutation, morans_i, residual_moran, MoranPermutation, MoranResult,
    DEFAULT_PERMUTATIONS,
};
pub use scan::{scan_groups, GroupScanRow, ScanConfig, ScanReport, DEFAULT_MIN_COVERAGE};

/// Pairs with `|r|` at or above this are flagged as collinear.
pub const COLLINEARITY_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollinearPair {
    pub a: String,
    pub b: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    /// Symmetric; `None` where a variable is constant over the pair's
    /// complete observations.
    pub r: Vec<Vec<Option<f64>>>,
    pub flagged: Vec<CollinearPair>,
    pub warnings: Vec<String>,
}

/// Pearson correlation over pairwise complete, finite observations.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(&a, &b)| (a, b))
        .collect();
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn correlation_matrix(frame: &SpatialFrame, variables: &[String]) -> Result<CorrelationMatrix> {
    let cols = variables
        .iter()
        .map(|v| frame.variable(v))
        .collect::<Result<Vec<_>>>()?;
    let k = cols.len();
    let mut r = vec![vec![None; k]; k];
    let mut flagged = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..k {
        for j in i..k {
            let complete = cols[i]
                .iter()
                .zip(cols[j])
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .count();
            if complete < 3 {
                return Err(Error::TooFewUnits {
                    needed: 3,
                    have: complete,
                });
            }
            let v = pearson(cols[i], cols[j]);
            let v = if i == j { v.map(|_| 1.0) } else { v };
            r[i][j] = v;
            r[j][i] = v;
            if let (Some(c), true) = (v, i != j) {
                if c.abs() >= COLLINEARITY_THRESHOLD {
                    flagged.push(CollinearPair {
                        a: variables[i].clone(),
                        b: variables[j].clone(),
                        r: c,
                    });
                }
            }
        }
        if r[i][i].is_none() {
            warnings.push(format!("variable `{}` is constant; correlations undefined", variables[i]));
        }
    }
    for p in &flagged {
        warnings.push(format!("high correlation between `{}` and `{}` (r = {:.3})", p.a, p.b, p.r));
    }
    Ok(CorrelationMatrix {
        variables: variables.to_vec(),
        r,
        flagged,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_eq!(pearson(&x, &y), Some(1.0));
        assert_eq!(pearson(&x, &[5.0; 4]), None);
    }
}
