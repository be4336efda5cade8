mod common;

use nbhd::diagnostics::morans_i;
use nbhd::geodata::minmax_normalize;
use nbhd::regionalize::{constrained_cluster, constrained_ward, standardize_columns, wcss};
use nbhd::spillover::{bearing, bin_directions, sector, SpilloverPair, SpilloverPairs, SECTORS};
use nbhd::synthgen::gen_lattice;
use nbhd::synthgen::oracles::is_connected;
use nbhd::weights::{build_contiguity, ContiguityRule, WeightsKind, WeightsMatrix};
use proptest::prelude::*;

use common::features;

fn lattice_w(rows: usize, cols: usize, queen: bool) -> WeightsMatrix {
    let md = gen_lattice(rows, cols, 100.0).unwrap();
    let rule = if queen { ContiguityRule::Queen } else { ContiguityRule::Rook };
    build_contiguity(&md, rule)
}

/// A lattice shape with `n` feature rows of width `d`.
fn lattice_case() -> impl Strategy<Value = (usize, usize, bool, Vec<Vec<f64>>)> {
    (2usize..6, 2usize..6, any::<bool>(), 1usize..4).prop_flat_map(|(r, c, q, d)| {
        let rows = prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), r * c);
        (Just(r), Just(c), Just(q), rows)
    })
}

/// Textbook constrained Ward over explicit member lists: at each step merge
/// the adjacent pair with the smallest size-weighted squared centroid
/// distance, ties broken by the smallest member indices.
fn reference_ward(x: &[Vec<f64>], w: &WeightsMatrix) -> Vec<(Vec<usize>, f64)> {
    let mut clusters: Vec<Vec<usize>> = (0..x.len()).map(|i| vec![i]).collect();
    let centroid = |m: &[usize]| -> Vec<f64> {
        (0..x[0].len()).map(|j| m.iter().map(|&i| x[i][j]).sum::<f64>() / m.len() as f64).collect()
    };
    let edges: std::collections::BTreeSet<(usize, usize)> = w.triplets().flat_map(|(i, j, _)| [(i, j), (j, i)]).collect();
    let adjacent = |a: &[usize], b: &[usize]| a.iter().any(|&i| b.iter().any(|&j| edges.contains(&(i, j))));
    let mut out = Vec::new();
    loop {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                if !adjacent(&clusters[a], &clusters[b]) {
                    continue;
                }
                let (ca, cb) = (centroid(&clusters[a]), centroid(&clusters[b]));
                let d2: f64 = ca.iter().zip(&cb).map(|(p, q)| (p - q).powi(2)).sum();
                let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
                let cost = na * nb / (na + nb) * d2;
                let tie = (clusters[a][0].min(clusters[b][0]), clusters[a][0].max(clusters[b][0]));
                let better = match best {
                    None => true,
                    Some((bc, bt, _, _)) => cost < bc - 1e-12 || ((cost - bc).abs() <= 1e-12 && tie < bt),
                };
                if better {
                    best = Some((cost, tie, a, b));
                }
            }
        }
        let Some((cost, _, a, b)) = best else { break };
        let mut merged = clusters[a].clone();
        merged.extend(&clusters[b]);
        merged.sort();
        clusters.remove(b);
        clusters.remove(a);
        clusters.push(merged.clone());
        out.push((merged, cost));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn moran_is_affine_invariant(
        x in prop::collection::vec(-5.0f64..5.0, 16),
        a in prop_oneof![-4.0f64..-0.25, 0.25f64..4.0],
        b in -10.0f64..10.0,
    ) {
        let w = lattice_w(4, 4, true).row_standardize();
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (ix, iy) = (morans_i(&x, &w).unwrap().i, morans_i(&y, &w).unwrap().i);
        prop_assert!((ix - iy).abs() < 1e-9, "{} vs {}", ix, iy);
    }

    #[test]
    fn row_standardized_rows_sum_to_one(
        rows in prop::collection::vec(prop::collection::vec((0usize..12, 0.01f64..10.0), 0..5), 12),
    ) {
        let rows: Vec<Vec<(usize, f64)>> = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let mut r: Vec<(usize, f64)> = r.into_iter().filter(|e| e.0 != i).collect();
                r.sort_by_key(|e| e.0);
                r.dedup_by_key(|e| e.0);
                r
            })
            .collect();
        let w = WeightsMatrix::from_rows(rows, WeightsKind::KnnBinary).unwrap().row_standardize();
        for (i, s) in w.row_sums().into_iter().enumerate() {
            let has = w.neighbors(i).next().is_some();
            let ok = if has { (s - 1.0).abs() < 1e-12 } else { s == 0.0 };
            prop_assert!(ok, "row {} sums to {}", i, s);
        }
    }

    #[test]
    fn ward_matches_reference_merges((r, c, q, x) in lattice_case()) {
        let w = lattice_w(r, c, q);
        let tree = constrained_ward(&x, &w).unwrap();
        let reference = reference_ward(&x, &w);
        prop_assert_eq!(tree.merges.len(), reference.len());
        for (t, (members, cost)) in reference.iter().enumerate() {
            let mut got: Vec<usize> = tree.roots_after(t + 1).iter().enumerate().filter(|(_, &root)| root == r * c + t).map(|(i, _)| i).collect();
            got.sort();
            prop_assert_eq!(&got, members);
            prop_assert!((tree.merges[t].dissimilarity - cost).abs() < 1e-9);
        }
    }

    #[test]
    fn cuts_are_contiguous_runs_of_connected_clusters((r, c, q, x) in lattice_case(), k in 1usize..8) {
        let n = r * c;
        let k = k.min(n);
        let w = lattice_w(r, c, q);
        let (_, reg) = constrained_cluster(&features(x), &w, k).unwrap();
        prop_assert_eq!(reg.n_clusters, k);
        let mut order = reg.leaf_order.clone();
        order.sort();
        prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(reg.segments().len(), k);
        for members in reg.members() {
            let units: Vec<usize> = members.iter().map(|&p| reg.units[p]).collect();
            prop_assert!(is_connected(&units, &w));
        }
    }

    #[test]
    fn wcss_does_not_increase_with_k((r, c, q, x) in lattice_case()) {
        let n = r * c;
        let w = lattice_w(r, c, q);
        let tree = constrained_ward(&x, &w).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=n {
            let v = wcss(&x, &tree.cut(k).unwrap());
            prop_assert!(v <= last + 1e-9);
            last = v;
        }
        prop_assert!(last.abs() < 1e-12);
    }

    #[test]
    fn bearings_and_sectors_stay_in_range(dx in -1e4f64..1e4, dy in -1e4f64..1e4) {
        let b = bearing([0.0, 0.0], [dx, dy]);
        prop_assert!((0.0..360.0).contains(&b));
        prop_assert!(sector(b) < SECTORS);
    }

    #[test]
    fn binning_conserves_magnitude(
        points in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..8),
        raw in prop::collection::vec((0usize..8, 0usize..8, -3.0f64..3.0, -3.0f64..3.0), 1..20),
    ) {
        let n = points.len();
        let centroids: Vec<[f64; 2]> = points.iter().map(|p| [p.0, p.1]).collect();
        let pairs: Vec<SpilloverPair> = raw
            .iter()
            .filter(|e| e.0 % n != e.1 % n)
            .map(|e| SpilloverPair { i: e.0 % n, j: e.1 % n, values: vec![e.2, e.3] })
            .collect();
        let sp = SpilloverPairs { channels: vec!["W_y".into(), "W_x1".into()], pairs, skipped: 0 };
        let field = bin_directions(&sp, &centroids);
        for i in 0..n {
            let expected: f64 = sp.pairs.iter().filter(|p| p.i == i).map(|p| p.values.iter().map(|v| v.abs()).sum::<f64>()).sum();
            let got: f64 = field.combined[i].iter().sum();
            prop_assert!((got - expected).abs() < 1e-9);
            prop_assert!(field.combined[i].iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn minmax_lies_in_unit_interval(x in prop::collection::vec(-1e6f64..1e6, 1..40)) {
        let y = minmax_normalize(&x);
        prop_assert_eq!(y.len(), x.len());
        prop_assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd(
        x in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2), 3..30),
    ) {
        let spread = |j: usize| {
            let hi = x.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
            let lo = x.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
            hi - lo
        };
        prop_assume!(spread(0) > 1e-3 && spread(1) > 1e-3);
        let mut v = x.clone();
        standardize_columns(&mut v, &["a".into(), "b".into()]);
        let n = v.len() as f64;
        for j in 0..2 {
            let mean = v.iter().map(|r| r[j]).sum::<f64>() / n;
            let sd = (v.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        }
    }
}
