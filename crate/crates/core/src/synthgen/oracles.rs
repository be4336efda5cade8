//! Brute-force reference computations. Deliberately naive: dense loops and
//! hand-rolled elimination, sharing no code with the pipeline.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use super::rng;
use crate::geodata::MetaDataset;
use crate::models::LocalFit;
use crate::weights::WeightsMatrix;

fn dense(w: &WeightsMatrix) -> Vec<Vec<f64>> {
    let n = w.n();
    let mut m = vec![vec![0.0; n]; n];
    for (i, j, v) in w.triplets() {
        m[i][j] = v;
    }
    m
}

/// Moran's I by the textbook double sum.
pub fn moran_direct(x: &[f64], w: &WeightsMatrix) -> f64 {
    let m = dense(w);
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let (mut num, mut s0, mut den) = (0.0, 0.0, 0.0);
    for i in 0..n {
        den += (x[i] - mean).powi(2);
        for j in 0..n {
            num += m[i][j] * (x[i] - mean) * (x[j] - mean);
            s0 += m[i][j];
        }
    }
    n as f64 / s0 * num / den
}

/// Mean and standard deviation of Moran's I over Fisher-Yates shuffles.
pub fn moran_permutation_moments(x: &[f64], w: &WeightsMatrix, permutations: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let mut v = x.to_vec();
    let mut draws = Vec::with_capacity(permutations);
    for _ in 0..permutations {
        for i in (1..v.len()).rev() {
            let j = r.random_range(0..=i);
            v.swap(i, j);
        }
        draws.push(moran_direct(&v, w));
    }
    let m = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / m;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    (mean, sd)
}

/// Whether `members` induce a connected subgraph of `w`.
pub fn is_connected(members: &[usize], w: &WeightsMatrix) -> bool {
    let Some(&start) = members.first() else {
        return true;
    };
    let inside: std::collections::BTreeSet<usize> = members.iter().copied().collect();
    let mut seen = std::collections::BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for v in w.neighbors(u) {
            if inside.contains(&v) && seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen.len() == inside.len()
}

fn wcss(features: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let m = features[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let rows: Vec<&Vec<f64>> = features.iter().zip(labels).filter(|(_, &l)| l == c).map(|(f, _)| f).collect();
        for d in 0..m {
            let mean = rows.iter().map(|r| r[d]).sum::<f64>() / rows.len() as f64;
            total += rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>();
        }
    }
    total
}

/// Minimum within-cluster sum of squares over every partition of the units
/// into exactly `k` connected blocks, by enumeration of restricted growth
/// strings. Limited to 12 units.
pub fn exhaustive_partition(features: &[Vec<f64>], w: &WeightsMatrix, k: usize) -> Option<(Vec<usize>, f64)> {
    let n = features.len();
    assert!(n <= 12, "exhaustive partition oracle is limited to 12 units");
    if k == 0 || k > n {
        return None;
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut labels = vec![0usize; n];
    fn rec(
        i: usize,
        used: usize,
        k: usize,
        labels: &mut Vec<usize>,
        features: &[Vec<f64>],
        w: &WeightsMatrix,
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        let n = labels.len();
        if used + (n - i) < k {
            return;
        }
        if i == n {
            if used != k {
                return;
            }
            for c in 0..k {
                let members: Vec<usize> = (0..n).filter(|&u| labels[u] == c).collect();
                if !is_connected(&members, w) {
                    return;
                }
            }
            let cost = wcss(features, labels, k);
            if best.as_ref().is_none_or(|b| cost < b.1) {
                *best = Some((labels.clone(), cost));
            }
            return;
        }
        for c in 0..=used.min(k - 1) {
            labels[i] = c;
            rec(i + 1, used.max(c + 1), k, labels, features, w, best);
        }
    }
    rec(0, 0, k, &mut labels, features, w, &mut best);
    best
}

/// `S_ijv = coefficient_jv * w_ij` over a dense copy of W, keyed by `(i, j)`;
/// channels are ρ (when present) then the lag coefficients.
pub fn spillover_products(local: &LocalFit, w: &WeightsMatrix) -> BTreeMap<(usize, usize), Vec<f64>> {
    let m = dense(w);
    let mut out = BTreeMap::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &wij) in row.iter().enumerate() {
            if wij == 0.0 {
                continue;
            }
            if let Some(c) = &local.units[j] {
                let mut v = Vec::new();
                if let Some(r) = c.rho {
                    v.push(r * wij);
                }
                v.extend(c.gamma.iter().map(|g| g * wij));
                out.insert((i, j), v);
            }
        }
    }
    out
}

/// OLS with intercept by solving the normal equations with Gaussian
/// elimination and partial pivoting. `x` holds columns.
pub fn ols_normal_equations(x: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let n = y.len();
    let p = x.len() + 1;
    let col = |c: usize, i: usize| if c == 0 { 1.0 } else { x[c - 1][i] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in 0..p {
        for c in 0..p {
            a[r][c] = (0..n).map(|i| col(r, i) * col(c, i)).sum();
        }
        a[r][p] = (0..n).map(|i| col(r, i) * y[i]).sum();
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    Some((0..p).map(|r| a[r][p] / a[r][r]).collect())
}

/// Rook adjacency by exact equality of polygon edges, all pairs.
pub fn shared_edge_neighbors(md: &MetaDataset) -> Vec<Vec<usize>> {
    let edges: Vec<Vec<([f64; 2], [f64; 2])>> = md.units.iter().map(|u| u.geometry.segments()).collect();
    let same = |a: &([f64; 2], [f64; 2]), b: &([f64; 2], [f64; 2])| (a.0 == b.0 && a.1 == b.1) || (a.0 == b.1 && a.1 == b.0);
    (0..md.len())
        .map(|i| {
            (0..md.len())
                .filter(|&j| j != i && edges[i].iter().any(|e| edges[j].iter().any(|f| same(e, f))))
                .collect()
        })
        .collect()
}

/// Indices of the `k` nearest other centroids by full sort.
pub fn knn(md: &MetaDataset, k: usize) -> Vec<Vec<usize>> {
    let c = md.centroids();
    (0..c.len())
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..c.len())
                .filter(|&j| j != i)
                .map(|j| ((c[i][0] - c[j][0]).hypot(c[i][1] - c[j][1]), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(md.units[a.1].id.cmp(&md.units[b.1].id)));
            let mut out: Vec<usize> = d.into_iter().take(k).map(|(_, j)| j).collect();
            out.sort();
            out
        })
        .collect()
}
