use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::weights::WeightsMatrix;

pub const DEFAULT_PERMUTATIONS: usize = 999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    pub i: f64,
    /// `-1 / (n - 1)`.
    pub expected: f64,
    /// Under the normality assumption.
    pub z: f64,
    /// Two-sided.
    pub p: f64,
    pub n_used: usize,
}

/// `I = (n / S0) z'Wz / z'z` with `z = x - mean(x)`.
///
/// Every unit of `w` enters the statistic; islands contribute to `z'z` only.
pub fn morans_i(x: &[f64], w: &WeightsMatrix) -> Result<MoranResult> {
    let n = w.n();
    if x.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Moran input".into()));
    }
    let connected = n - w.islands().len();
    if connected < 3 {
        return Err(Error::TooFewUnits {
            needed: 3,
            have: connected,
        });
    }
    let i = statistic(x, w)?;
    let nf = n as f64;
    let expected = -1.0 / (nf - 1.0);

    let s0 = w.s0();
    // S1 = 1/2 sum_ij (w_ij + w_ji)^2, visiting each unordered pair from
    // both sides
    let mut s1 = 0.0;
    for (a, b, wab) in w.triplets() {
        let wba = w.get(b, a);
        s1 += if wba > 0.0 { 0.5 * (wab + wba).powi(2) } else { (wab).powi(2) };
    }
    let row_sums = w.row_sums();
    let mut col_sums = vec![0.0; n];
    for (_, b, wab) in w.triplets() {
        col_sums[b] += wab;
    }
    let s2: f64 = row_sums
        .iter()
        .zip(&col_sums)
        .map(|(r, c)| (r + c).powi(2))
        .sum();
    let var = (nf * nf * s1 - nf * s2 + 3.0 * s0 * s0) / ((nf * nf - 1.0) * s0 * s0)
        - expected * expected;
    let z = if var > 0.0 { (i - expected) / var.sqrt() } else { f64::NAN };
    let p = if z.is_finite() {
        let normal = Normal::standard();
        2.0 * (1.0 - normal.cdf(z.abs()))
    } else {
        f64::NAN
    };
    Ok(MoranResult {
        i,
        expected,
        z,
        p,
        n_used: n,
    })
}

fn statistic(x: &[f64], w: &WeightsMatrix) -> Result<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if zz <= (1e-12 * scale).powi(2) * n {
        return Err(Error::Undefined("Moran's I of a constant vector".into()));
    }
    let zwz: f64 = w.triplets().map(|(a, b, wab)| z[a] * wab * z[b]).sum();
    Ok(n / w.s0() * zwz / zz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoranPermutation {
    pub i: f64,
    pub permutations: usize,
    pub seed: u64,
    /// Mean and standard deviation of I over the permutations.
    pub mean: f64,
    pub sd: f64,
    pub z: f64,
    /// Two-sided pseudo p-value, `(extreme + 1) / (permutations + 1)`.
    pub p: f64,
}

/// Conditional-randomization reference distribution for I.
pub fn moran_permutation(
    x: &[f64],
    w: &WeightsMatrix,
    permutations: usize,
    seed: u64,
) -> Result<MoranPermutation> {
    let observed = morans_i(x, w)?.i;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm = x.to_vec();
    let mut draws = Vec::with_capacity(permutations);
    for _ in 0..permutations {
        perm.shuffle(&mut rng);
        draws.push(statistic(&perm, w)?);
    }
    let m = permutations.max(1) as f64;
    let mean = draws.iter().sum::<f64>() / m;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
    let dev = (observed - mean).abs();
    let extreme = draws.iter().filter(|d| (*d - mean).abs() >= dev).count();
    Ok(MoranPermutation {
        i: observed,
        permutations,
        seed,
        mean,
        sd,
        z: if sd > 0.0 { (observed - mean) / sd } else { f64::NAN },
        p: (extreme + 1) as f64 / (permutations + 1) as f64,
    })
}

/// Moran's I of model residuals aligned to `used` (frame indices). `w` is
/// restricted to the used units, units left without neighbors are dropped
/// until none remain, and the result is re-standardized.
pub fn residual_moran(residuals: &[f64], used: &[usize], w: &WeightsMatrix) -> Result<MoranResult> {
    if residuals.len() != used.len() {
        return Err(Error::LengthMismatch {
            expected: used.len(),
            got: residuals.len(),
        });
    }
    let mut keep: Vec<usize> = (0..used.len()).collect();
    loop {
        let frame_idx: Vec<usize> = keep.iter().map(|&k| used[k]).collect();
        let sub = w.subset(&frame_idx);
        if sub.islands().is_empty() {
            let x: Vec<f64> = keep.iter().map(|&k| residuals[k]).collect();
            let sub = if w.is_row_standardized() { sub.row_standardize() } else { sub };
            return morans_i(&x, &sub);
        }
        keep = keep
            .iter()
            .enumerate()
            .filter(|(pos, _)| !sub.islands().contains(pos))
            .map(|(_, &k)| k)
            .collect();
        if keep.len() < 3 {
            return Err(Error::TooFewUnits {
                needed: 3,
                have: keep.len(),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightsKind;

    fn rook(rows: usize, cols: usize) -> WeightsMatrix {
        let idx = |r: usize, c: usize| r * cols + c;
        let mut out = vec![Vec::new(); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                if r > 0 {
                    out[idx(r, c)].push((idx(r - 1, c), 1.0));
                }
                if r + 1 < rows {
                    out[idx(r, c)].push((idx(r + 1, c), 1.0));
                }
                if c > 0 {
                    out[idx(r, c)].push((idx(r, c - 1), 1.0));
                }
                if c + 1 < cols {
                    out[idx(r, c)].push((idx(r, c + 1), 1.0));
                }
            }
        }
        WeightsMatrix::from_rows(out, WeightsKind::Rook).unwrap().row_standardize()
    }

    #[test]
    fn checkerboard_is_minus_one() {
        let w = rook(4, 4);
        let x: Vec<f64> = (0..16).map(|k| ((k / 4 + k % 4) % 2) as f64).collect();
        let m = morans_i(&x, &w).unwrap();
        assert!((m.i + 1.0).abs() < 1e-9, "{}", m.i);
        assert!(m.z < 0.0);
    }

    #[test]
    fn affine_invariance() {
        let w = rook(5, 5);
        let x: Vec<f64> = (0..25).map(|k| ((k * 7) % 11) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| -3.0 * v + 40.0).collect();
        let a = morans_i(&x, &w).unwrap().i;
        let b = morans_i(&y, &w).unwrap().i;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn constant_is_undefined() {
        let w = rook(3, 3);
        assert!(matches!(morans_i(&[2.0; 9], &w), Err(Error::Undefined(_))));
    }

    #[test]
    fn permutation_is_reproducible() {
        let w = rook(5, 5);
        let x: Vec<f64> = (0..25).map(|k| (k % 5) as f64).collect();
        let a = moran_permutation(&x, &w, 99, 4).unwrap();
        let b = moran_permutation(&x, &w, 99, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.p <= 0.05);
    }

    #[test]
    fn residual_moran_drops_islands() {
        let w = rook(1, 6);
        let r = [1.0, -1.0, 2.0, 0.5, -0.3, 0.7];
        // drop unit 2: units 0,1 and 3,4,5 remain as two chains
        let m = residual_moran(&[1.0, -1.0, 0.5, -0.3, 0.7], &[0, 1, 3, 4, 5], &w).unwrap();
        assert_eq!(m.n_used, 5);
        let full = residual_moran(&r, &[0, 1, 2, 3, 4, 5], &w).unwrap();
        assert_eq!(full.n_used, 6);
    }
}
