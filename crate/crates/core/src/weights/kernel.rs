use super::{WeightsKind, WeightsMatrix};
use crate::error::{Error, Result};
use crate::geodata::MetaDataset;

pub const DEFAULT_GAUSSIAN_K: usize = 8;

/// The k nearest other units of every unit, by planar centroid distance,
/// with ties broken by unit id. Also returns warnings for coincident
/// centroids.
fn nearest(md: &MetaDataset, k: usize) -> Result<(Vec<Vec<(usize, f64)>>, Vec<String>)> {
    let n = md.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k < n (k = {k}, n = {n})"
        )));
    }
    let c = md.centroids();
    let mut warnings = Vec::new();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (((c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2)).sqrt(), j))
            .collect();
        d.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| md.units[a.1].id.cmp(&md.units[b.1].id))
        });
        d.truncate(k);
        for &(dist, j) in &d {
            if dist == 0.0 && i < j {
                warnings.push(format!(
                    "units {} and {} share a centroid; ties broken by unit id",
                    md.units[i].id, md.units[j].id
                ));
            }
        }
        out.push(d.into_iter().map(|(dist, j)| (j, dist)).collect());
    }
    Ok((out, warnings))
}

/// Adaptive Gaussian kernel: `w_ij = exp(-0.5 (d_ij / d_ik)^2)` over the k
/// nearest j, where `d_ik` is the distance to the k-th nearest.
pub fn build_gaussian(md: &MetaDataset, k: usize) -> Result<WeightsMatrix> {
    let (near, warnings) = nearest(md, k)?;
    let rows = near
        .into_iter()
        .map(|r| {
            let dk = r.last().map(|&(_, d)| d).unwrap_or(0.0);
            r.into_iter()
                .map(|(j, d)| {
                    let w = if dk > 0.0 { (-0.5 * (d / dk).powi(2)).exp() } else { 1.0 };
                    (j, w)
                })
                .collect()
        })
        .collect();
    Ok(WeightsMatrix::from_rows(rows, WeightsKind::GaussianKnn)?.with_warnings(warnings))
}

/// Binary weights over the k nearest neighbors.
pub fn build_knn_binary(md: &MetaDataset, k: usize) -> Result<WeightsMatrix> {
    let (near, warnings) = nearest(md, k)?;
    let rows = near
        .into_iter()
        .map(|r| r.into_iter().map(|(j, _)| (j, 1.0)).collect())
        .collect();
    Ok(WeightsMatrix::from_rows(rows, WeightsKind::KnnBinary)?.with_warnings(warnings))
}
