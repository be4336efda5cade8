//! Sparse spatial weight matrices.
//!
//! Rows are stored as sorted `(column, weight)` lists holding only positive
//! weights; the diagonal is always absent. Units without neighbors are kept
//! as empty rows (islands) so indices stay aligned with the frame.

mod contiguity;
mod kernel;

use std::collections::BTreeSet;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use contiguity::{build_contiguity, ContiguityRule};
pub use kernel::{build_gaussian, build_knn_binary, DEFAULT_GAUSSIAN_K};

/// Largest n for which dense eigenvalues of W are computed.
pub const MAX_DENSE_EIGEN_N: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsKind {
    GaussianKnn,
    Queen,
    Rook,
    KnnBinary,
}

impl WeightsKind {
    pub fn is_contiguity(self) -> bool {
        matches!(self, WeightsKind::Queen | WeightsKind::Rook)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    kind: WeightsKind,
    row_standardized: bool,
    islands: BTreeSet<usize>,
    warnings: Vec<String>,
}

impl WeightsMatrix {
    /// Builds from per-row entries. Zero weights are dropped; diagonal,
    /// negative, non-finite or out-of-range entries are rejected.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, kind: WeightsKind) -> Result<Self> {
        let n = rows.len();
        let mut clean = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            let mut r: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, w) in row {
                if j >= n {
                    return Err(Error::InvalidArgument(format!("column {j} out of range")));
                }
                if j == i {
                    return Err(Error::InvalidArgument(format!("diagonal entry at {i}")));
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidArgument(format!("weight ({i},{j}) = {w}")));
                }
                if w > 0.0 {
                    r.push((j, w));
                }
            }
            r.sort_by_key(|&(j, _)| j);
            if r.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidArgument(format!("duplicate entry in row {i}")));
            }
            clean.push(r);
        }
        let islands = clean
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_empty())
            .map(|(i, _)| i)
            .collect();
        Ok(WeightsMatrix {
            n,
            rows: clean,
            kind,
            row_standardized: false,
            islands,
            warnings: Vec::new(),
        })
    }

    pub(crate) fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings = warnings;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> WeightsKind {
        self.kind
    }

    pub fn is_row_standardized(&self) -> bool {
        self.row_standardized
    }

    pub fn islands(&self) -> &BTreeSet<usize> {
        &self.islands
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().map(|&(j, _)| j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Sum of all weights.
    pub fn s0(&self) -> f64 {
        self.rows.iter().flatten().map(|&(_, w)| w).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, w)| w).sum())
            .collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, w)| (i, j, w)))
    }

    pub fn has_symmetric_structure(&self) -> bool {
        self.triplets().all(|(i, j, _)| self.get(j, i) > 0.0)
    }

    /// Divides every non-island row by its sum.
    pub fn row_standardize(&self) -> WeightsMatrix {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let s: f64 = r.iter().map(|&(_, w)| w).sum();
                r.iter().map(|&(j, w)| (j, w / s)).collect()
            })
            .collect();
        WeightsMatrix {
            rows,
            row_standardized: true,
            ..self.clone()
        }
    }

    /// `(W x)_i = sum_j w_ij x_j`; islands get 0.
    pub fn spatial_lag(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|r| r.iter().map(|&(j, w)| w * x[j]).sum())
            .collect())
    }

    /// Restriction to the units in `keep` (strictly increasing), renumbered
    /// 0..keep.len(). The result is not row-standardized.
    pub fn subset(&self, keep: &[usize]) -> WeightsMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let rows: Vec<Vec<(usize, f64)>> = keep
            .iter()
            .map(|&i| {
                self.rows[i]
                    .iter()
                    .filter(|&&(j, _)| map[j] != usize::MAX)
                    .map(|&(j, w)| (map[j], w))
                    .collect()
            })
            .collect();
        let same = keep.len() == self.n;
        let mut out = WeightsMatrix::from_rows(rows, self.kind).expect("subset of a valid matrix");
        out.row_standardized = same && self.row_standardized;
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, w) in self.triplets() {
            m[(i, j)] = w;
        }
        m
    }

    /// Eigenvalues of W, refused above [`MAX_DENSE_EIGEN_N`].
    ///
    /// A row-standardized binary contiguity matrix `D^-1 A` is similar to the
    /// symmetric `D^-1/2 A D^-1/2`, so its spectrum is real and comes from a
    /// symmetric eigensolver; everything else goes through a real Schur
    /// decomposition.
    pub fn eigenvalues(&self) -> Result<Vec<Complex<f64>>> {
        if self.n > MAX_DENSE_EIGEN_N {
            return Err(Error::Capacity {
                n: self.n,
                max: MAX_DENSE_EIGEN_N,
            });
        }
        if self.n == 0 {
            return Ok(Vec::new());
        }
        if let Some(sym) = self.symmetrized_binary() {
            return Ok(sym
                .symmetric_eigenvalues()
                .iter()
                .map(|&v| Complex::new(v, 0.0))
                .collect());
        }
        Ok(self.to_dense().complex_eigenvalues().iter().copied().collect())
    }

    fn symmetrized_binary(&self) -> Option<DMatrix<f64>> {
        if !self.row_standardized || !self.has_symmetric_structure() {
            return None;
        }
        let degrees: Vec<f64> = self.rows.iter().map(|r| r.len() as f64).collect();
        let binary = self.rows.iter().enumerate().all(|(i, r)| {
            r.iter()
                .all(|&(_, w)| (w * degrees[i] - 1.0).abs() < 1e-12)
        });
        if !binary {
            return None;
        }
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, _) in self.triplets() {
            m[(i, j)] = 1.0 / (degrees[i] * degrees[j]).sqrt();
        }
        Some(m)
    }

    pub fn to_json(&self) -> WeightsJson {
        WeightsJson {
            n: self.n,
            triplets: self.triplets().map(|(i, j, w)| (i, j, w)).collect(),
            kind: self.kind,
            row_standardized: self.row_standardized,
        }
    }

    pub fn from_json(json: WeightsJson) -> Result<Self> {
        let mut rows = vec![Vec::new(); json.n];
        for (i, j, w) in json.triplets {
            if i >= json.n {
                return Err(Error::InvalidArgument(format!("row {i} out of range")));
            }
            rows[i].push((j, w));
        }
        let mut m = WeightsMatrix::from_rows(rows, json.kind)?;
        if json.row_standardized {
            let ok = m
                .row_sums()
                .iter()
                .enumerate()
                .all(|(i, s)| m.islands.contains(&i) || (s - 1.0).abs() <= 1e-9);
            if !ok {
                return Err(Error::InvalidArgument(
                    "row_standardized flag set but rows do not sum to 1".into(),
                ));
            }
            m.row_standardized = true;
        }
        Ok(m)
    }
}

/// Sparse triplet form used for persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsJson {
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub kind: WeightsKind,
    pub row_standardized: bool,
}

impl Serialize for WeightsMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightsMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = WeightsJson::deserialize(d)?;
        WeightsMatrix::from_json(json).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> WeightsMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = Vec::new();
                if i > 0 {
                    r.push((i - 1, 1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, 1.0));
                }
                r
            })
            .collect();
        WeightsMatrix::from_rows(rows, WeightsKind::Rook).unwrap()
    }

    #[test]
    fn standardize_row_and_island() {
        let w = WeightsMatrix::from_rows(
            vec![vec![(1, 2.0), (2, 2.0)], vec![(0, 1.0)], vec![], vec![(0, 3.0)]],
            WeightsKind::KnnBinary,
        )
        .unwrap();
        let s = w.row_standardize();
        assert_eq!(s.row(0), &[(1, 0.5), (2, 0.5)]);
        assert!(s.row(2).is_empty());
        assert_eq!(s.islands().iter().copied().collect::<Vec<_>>(), vec![2]);
        assert!(s.is_row_standardized());
    }

    #[test]
    fn lag_examples() {
        let w = chain(3).row_standardize();
        assert_eq!(w.spatial_lag(&[0.0, 7.0, 10.0]).unwrap()[1], 5.0);
        assert_eq!(w.spatial_lag(&[3.0; 3]).unwrap(), vec![3.0; 3]);
        assert!(matches!(
            w.spatial_lag(&[1.0]),
            Err(Error::LengthMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn rejects_diagonal() {
        assert!(WeightsMatrix::from_rows(vec![vec![(0, 1.0)]], WeightsKind::Rook).is_err());
    }

    #[test]
    fn chain_eigenvalues_match_closed_form() {
        // random walk on a path: eigenvalues cos(pi k / (n-1)), k = 0..n-1
        let n = 6;
        let mut ev: Vec<f64> = chain(n)
            .row_standardize()
            .eigenvalues()
            .unwrap()
            .iter()
            .map(|c| c.re)
            .collect();
        ev.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = (0..n)
            .map(|k| (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{ev:?} vs {want:?}");
        }
    }

    #[test]
    fn symmetric_and_general_paths_agree() {
        let w = chain(7).row_standardize();
        let mut fast: Vec<f64> = w.eigenvalues().unwrap().iter().map(|c| c.re).collect();
        let mut slow: Vec<f64> = w.to_dense().complex_eigenvalues().iter().map(|c| c.re).collect();
        fast.sort_by(f64::total_cmp);
        slow.sort_by(f64::total_cmp);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn json_roundtrip() {
        let w = chain(4).row_standardize();
        let text = serde_json::to_string(&w).unwrap();
        assert!(text.contains("\"triplets\""));
        let back: WeightsMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn subset_renumbers() {
        let w = chain(4);
        let s = w.subset(&[0, 1, 3]);
        assert_eq!(s.row(1), &[(0, 1.0)]);
        assert!(s.islands().contains(&2));
    }
}
