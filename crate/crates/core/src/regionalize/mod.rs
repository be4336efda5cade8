//! Spatially constrained regionalization of local-model surfaces.
//!
//! Features are z-scored columns of local coefficients and chosen
//! attributes. Clusters grow by Ward linkage restricted to contiguous
//! neighbors, so every cluster at every cut is connected. The dendrogram's
//! leaf order keeps each cluster in one contiguous run.

mod ward;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geodata::{minmax_normalize, SpatialFrame};
use crate::models::LocalFit;
use crate::weights::WeightsMatrix;

pub use ward::{constrained_ward, Merge, MergeTree};

/// Cluster count used when none is requested.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    /// Frame indices of the rows.
    pub units: Vec<usize>,
    pub names: Vec<String>,
    /// Row per unit, z-scored per column.
    pub values: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Z-scores each column with the population standard deviation. Constant
/// columns become zero.
pub fn standardize_columns(values: &mut [Vec<f64>], names: &[String]) -> Vec<String> {
    let mut warnings = Vec::new();
    let n = values.len() as f64;
    for (c, name) in names.iter().enumerate() {
        let mean = values.iter().map(|r| r[c]).sum::<f64>() / n;
        let sd = (values.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n).sqrt();
        let scale = mean.abs().max(1.0);
        if !(sd > 1e-12 * scale) {
            warnings.push(format!("feature `{name}` is constant; standardized to zero"));
            values.iter_mut().for_each(|r| r[c] = 0.0);
        } else {
            values.iter_mut().for_each(|r| r[c] = (r[c] - mean) / sd);
        }
    }
    warnings
}

/// Slope, `Wy` and `WX` coefficients of the local fit (the intercept is left
/// out), followed by the raw values of `variables`.
pub fn build_features(local: &LocalFit, frame: &SpatialFrame, variables: &[String]) -> Result<FeatureMatrix> {
    if local.units.len() != frame.len() {
        return Err(Error::LengthMismatch {
            expected: frame.len(),
            got: local.units.len(),
        });
    }
    let attrs = variables
        .iter()
        .map(|v| frame.variable(v))
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<String> = local.coefficient_names().into_iter().skip(1).collect();
    names.extend(variables.iter().cloned());

    let mut units = Vec::new();
    let mut values = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..frame.len() {
        let Some(coef) = local.row(i) else {
            warnings.push(format!("unit {} has no local coefficients; excluded", frame.meta.units[i].id));
            continue;
        };
        let mut row: Vec<f64> = coef[1..].to_vec();
        row.extend(attrs.iter().map(|a| a[i]));
        if row.iter().any(|v| !v.is_finite()) {
            warnings.push(format!("unit {} has non-finite features; excluded", frame.meta.units[i].id));
            continue;
        }
        units.push(i);
        values.push(row);
    }
    if units.is_empty() {
        return Err(Error::TooFewUnits { needed: 1, have: 0 });
    }
    warnings.extend(standardize_columns(&mut values, &names));
    Ok(FeatureMatrix {
        units,
        names,
        values,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regionalization {
    /// Requested cluster count.
    pub k: usize,
    /// Emitted clusters; exceeds `k` only when the contiguity graph has more
    /// than `k` components.
    pub n_clusters: usize,
    /// Frame indices of the clustered units.
    pub units: Vec<usize>,
    /// Cluster per clustered unit, numbered by first appearance in
    /// `leaf_order`.
    pub labels: Vec<usize>,
    /// Permutation of positions in `units`.
    pub leaf_order: Vec<usize>,
    pub feature_names: Vec<String>,
    pub feature_matrix: Vec<Vec<f64>>,
}

impl Regionalization {
    /// Cluster per frame unit; `None` for units that were not clustered.
    pub fn frame_labels(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (&u, &l) in self.units.iter().zip(&self.labels) {
            out[u] = Some(l);
        }
        out
    }

    /// Leaf order as frame indices.
    pub fn leaf_order_units(&self) -> Vec<usize> {
        self.leaf_order.iter().map(|&p| self.units[p]).collect()
    }

    /// Positions in `units` of each cluster's members.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (pos, &l) in self.labels.iter().enumerate() {
            out[l].push(pos);
        }
        out
    }

    /// `[start, end)` runs of each cluster along `leaf_order`.
    pub fn segments(&self) -> Vec<(usize, usize, usize)> {
        let mut out: Vec<(usize, usize, usize)> = Vec::new();
        for (pos, &p) in self.leaf_order.iter().enumerate() {
            let l = self.labels[p];
            match out.last_mut() {
                Some(last) if last.0 == l => last.2 = pos + 1,
                _ => out.push((l, pos, pos + 1)),
            }
        }
        out
    }

    /// Total within-cluster sum of squares of the feature matrix.
    pub fn wcss(&self) -> f64 {
        wcss(&self.feature_matrix, &self.labels)
    }

    pub fn to_json(&self, tree: &MergeTree, unit_ids: &[String]) -> serde_json::Value {
        json!({
            "k": self.k,
            "n_clusters": self.n_clusters,
            "units": self.units.iter().map(|&u| &unit_ids[u]).collect::<Vec<_>>(),
            "labels": self.labels,
            "leaf_order": self.leaf_order,
            "feature_names": self.feature_names,
            "merges": tree.merges,
            "inversions": tree.inversions(),
        })
    }
}

pub fn wcss(features: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut groups: BTreeMap<usize, Vec<&Vec<f64>>> = BTreeMap::new();
    for (f, &l) in features.iter().zip(labels) {
        groups.entry(l).or_default().push(f);
    }
    groups
        .values()
        .map(|rows| {
            let m = rows[0].len();
            let k = rows.len() as f64;
            (0..m)
                .map(|c| {
                    let mean = rows.iter().map(|r| r[c]).sum::<f64>() / k;
                    rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>()
                })
                .sum::<f64>()
        })
        .sum()
}

/// Contiguity-constrained Ward clustering cut to `k` clusters.
///
/// `contiguity` is indexed by frame unit; it is restricted to
/// `features.units`.
pub fn constrained_cluster(
    features: &FeatureMatrix,
    contiguity: &WeightsMatrix,
    k: usize,
) -> Result<(MergeTree, Regionalization)> {
    if !contiguity.kind().is_contiguity() {
        return Err(Error::InvalidArgument(
            "regionalization requires contiguity weights".into(),
        ));
    }
    let n = features.units.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    let sub = contiguity.subset(&features.units);
    let tree = constrained_ward(&features.values, &sub)?;
    if tree.inversions() > 0 {
        log::info!("constrained merge tree has {} inversion(s)", tree.inversions());
    }
    let roots = tree.cut(k)?;
    let leaf_order = tree.leaf_order();
    let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
    for &leaf in &leaf_order {
        let next = renumber.len();
        renumber.entry(roots[leaf]).or_insert(next);
    }
    let labels: Vec<usize> = roots.iter().map(|r| renumber[r]).collect();
    let reg = Regionalization {
        k,
        n_clusters: renumber.len(),
        units: features.units.clone(),
        labels,
        leaf_order,
        feature_names: features.names.clone(),
        feature_matrix: features.values.clone(),
    };
    Ok((tree, reg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub variables: Vec<String>,
    /// `[cluster][variable]` raw means.
    pub means: Vec<Vec<f64>>,
    /// `[cluster][variable]` means min-max normalized across clusters.
    pub normalized: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
}

pub fn cluster_stats(reg: &Regionalization, frame: &SpatialFrame, variables: &[String]) -> Result<ClusterStats> {
    let cols = variables
        .iter()
        .map(|v| frame.variable(v))
        .collect::<Result<Vec<_>>>()?;
    let members = reg.members();
    let means: Vec<Vec<f64>> = members
        .iter()
        .map(|m| {
            cols.iter()
                .map(|c| m.iter().map(|&p| c[reg.units[p]]).sum::<f64>() / m.len() as f64)
                .collect()
        })
        .collect();
    let mut normalized = vec![vec![0.0; cols.len()]; members.len()];
    for v in 0..cols.len() {
        let column: Vec<f64> = means.iter().map(|r| r[v]).collect();
        for (c, x) in minmax_normalize(&column).into_iter().enumerate() {
            normalized[c][v] = x;
        }
    }
    Ok(ClusterStats {
        variables: variables.to_vec(),
        means,
        normalized,
        sizes: members.iter().map(Vec::len).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscore_columns() {
        let mut v = vec![vec![1.0, 3.0], vec![2.0, 3.0], vec![6.0, 3.0]];
        let w = standardize_columns(&mut v, &["a".into(), "b".into()]);
        assert_eq!(w.len(), 1);
        let mean: f64 = v.iter().map(|r| r[0]).sum::<f64>() / 3.0;
        let var: f64 = v.iter().map(|r| r[0] * r[0]).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn wcss_of_singletons_is_zero() {
        let f = vec![vec![1.0], vec![5.0]];
        assert_eq!(wcss(&f, &[0, 1]), 0.0);
        assert_eq!(wcss(&f, &[0, 0]), 8.0);
    }
}
