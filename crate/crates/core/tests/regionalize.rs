mod common;

use nbhd::geodata::{join_frame, SpatialFrame};
use nbhd::groups::GroupSeries;
use nbhd::models::{fit_gwr_sdm, select_bandwidth, BandwidthCriterion, LocalFit, ModelSpec};
use nbhd::regionalize::{build_features, cluster_stats, constrained_cluster, Regionalization};
use nbhd::synthgen::{gen_gwr, gen_lattice, unit_coordinates, Axis, Surface};
use nbhd::weights::{build_contiguity, ContiguityRule, WeightsMatrix};

use common::{features, frame_with, normals};

fn plain(k: usize) -> ModelSpec {
    let names = common::independents(k);
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut s = ModelSpec::new("y", &refs);
    s.include_wy = false;
    s.include_wx = false;
    s
}

struct TwoRegimes {
    frame: SpatialFrame,
    contiguity: WeightsMatrix,
    local: LocalFit,
    /// 0 west of the step, 1 east of it.
    regime: Vec<usize>,
}

/// x1's coefficient steps from 0 to 2 halfway across a 16 by 16 lattice; the
/// frame also carries `z`, regime means 1 and 3 with small noise.
fn two_regimes() -> TwoRegimes {
    let md = gen_lattice(16, 16, 100.0).unwrap();
    let contiguity = build_contiguity(&md, ContiguityRule::Queen);
    let w = contiguity.row_standardize();
    let surfaces = [
        Surface::Step { axis: Axis::U, at: 0.5, below: 0.0, above: 2.0 },
        Surface::Constant { value: 1.0 },
    ];
    let g = gen_gwr(&md, &surfaces, 0.1, 31).unwrap();
    let regime: Vec<usize> = unit_coordinates(&md).iter().map(|p| usize::from(p[0] >= 0.5)).collect();
    let noise = normals(32, md.len());
    let z: Vec<f64> = regime.iter().zip(&noise).map(|(&r, e)| 1.0 + 2.0 * r as f64 + 0.1 * e).collect();
    let mut cd = g.data.census.clone();
    cd.variables.push("z".into());
    for (row, v) in cd.rows.iter_mut().zip(&z) {
        row.values.push(Some(*v));
    }
    let (frame, _) = join_frame(&md, &cd, None).unwrap();
    let y = GroupSeries::complete("y", g.data.y);
    let bw = select_bandwidth(&plain(2), &frame, &y, &w, BandwidthCriterion::Aicc).unwrap().bandwidth;
    let local = fit_gwr_sdm(&plain(2), &frame, &y, &w, bw).unwrap();
    TwoRegimes { frame, contiguity, local, regime }
}

fn column_stats(values: &[Vec<f64>], j: usize) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().map(|r| r[j]).sum::<f64>() / n;
    let sd = (values.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, sd)
}

#[test]
fn features_are_z_scored_coefficients_and_attributes() {
    let t = two_regimes();
    let fm = build_features(&t.local, &t.frame, &["z".into()]).unwrap();
    assert_eq!(fm.names, ["x1", "x2", "z"]);
    for j in 0..3 {
        let (mean, sd) = column_stats(&fm.values, j);
        assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, "column {j}: {mean} {sd}");
    }
}

#[test]
fn constant_attribute_standardizes_to_zero() {
    let t = two_regimes();
    let mut frame = t.frame.clone();
    let n = frame.len();
    frame = {
        let cols: Vec<(String, Vec<f64>)> = frame
            .variable_names()
            .into_iter()
            .map(|v| {
                let c = frame.variable(&v).unwrap().to_vec();
                (v, c)
            })
            .chain([("flat".to_string(), vec![4.0; n])])
            .collect();
        let refs: Vec<(&str, Vec<f64>)> = cols.iter().map(|(a, b)| (a.as_str(), b.clone())).collect();
        frame_with(&frame.meta, &refs)
    };
    let fm = build_features(&t.local, &frame, &["flat".into()]).unwrap();
    assert!(fm.values.iter().all(|r| r[2] == 0.0));
    assert!(fm.warnings.iter().any(|w| w.contains("flat")));
}

#[test]
fn features_separate_planted_regimes() {
    let t = two_regimes();
    let fm = build_features(&t.local, &t.frame, &[]).unwrap();
    let mean = |r: usize| {
        let rows: Vec<f64> = fm.units.iter().zip(&fm.values).filter(|(u, _)| t.regime[**u] == r).map(|(_, v)| v[0]).collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    assert!(mean(1) - mean(0) > 1.0, "gap {}", mean(1) - mean(0));
}

#[test]
fn regimes_are_recovered_as_clusters() {
    let t = two_regimes();
    let fm = build_features(&t.local, &t.frame, &["z".into()]).unwrap();
    let (_, reg) = constrained_cluster(&fm, &t.contiguity, 2).unwrap();
    let labels = reg.frame_labels(t.frame.len());
    let agree = labels.iter().zip(&t.regime).filter(|(l, r)| l.unwrap() == **r).count();
    let best = agree.max(t.frame.len() - agree) as f64 / t.frame.len() as f64;
    assert!(best >= 0.9, "label agreement {best}");

    let stats = cluster_stats(&reg, &t.frame, &["z".into()]).unwrap();
    let mut means: Vec<f64> = stats.means.iter().map(|m| m[0]).collect();
    means.sort_by(f64::total_cmp);
    assert!((means[0] - 1.0).abs() <= 0.05 && (means[1] - 3.0).abs() <= 0.05, "{means:?}");
}

fn chain(n: usize) -> WeightsMatrix {
    let md = gen_lattice(1, n, 100.0).unwrap();
    build_contiguity(&md, ContiguityRule::Rook)
}

#[test]
fn chain_example_and_extreme_k() {
    let w = chain(4);
    let fm = features(vec![vec![0.0], vec![0.0], vec![10.0], vec![10.0]]);
    let (_, reg) = constrained_cluster(&fm, &w, 2).unwrap();
    assert_eq!(reg.labels, [0, 0, 1, 1]);
    let runs = reg.segments();
    assert_eq!(runs.len(), 2);

    let fm = features((0..6).map(|i| vec![i as f64 * 1.7 % 4.0]).collect());
    let w = chain(6);
    let (_, all) = constrained_cluster(&fm, &w, 6).unwrap();
    let mut l = all.labels.clone();
    l.sort();
    assert_eq!(l, [0, 1, 2, 3, 4, 5]);
    let (_, one) = constrained_cluster(&fm, &w, 1).unwrap();
    assert!(one.labels.iter().all(|&c| c == 0));
    assert!(constrained_cluster(&fm, &w, 7).is_err());
    assert!(constrained_cluster(&fm, &w, 0).is_err());
    assert!(constrained_cluster(&fm, &w.row_standardize(), 2).is_ok());
}

#[test]
fn distance_weights_are_rejected() {
    let md = gen_lattice(3, 3, 100.0).unwrap();
    let w = nbhd::weights::build_gaussian(&md, 3).unwrap();
    let fm = features((0..9).map(|i| vec![i as f64]).collect());
    assert!(constrained_cluster(&fm, &w, 2).is_err());
}

fn manual(labels: Vec<usize>) -> Regionalization {
    let n = labels.len();
    let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
    Regionalization {
        k: n_clusters,
        n_clusters,
        units: (0..n).collect(),
        labels,
        leaf_order: (0..n).collect(),
        feature_names: Vec::new(),
        feature_matrix: vec![Vec::new(); n],
    }
}

#[test]
fn cluster_stats_normalization() {
    let md = gen_lattice(2, 2, 100.0).unwrap();
    let frame = frame_with(&md, &[("v", vec![0.0, 0.0, 10.0, 10.0]), ("u", vec![1.0, 2.0, 3.0, 4.0])]);
    let two = cluster_stats(&manual(vec![0, 0, 1, 1]), &frame, &["v".into()]).unwrap();
    assert_eq!(two.means, [[0.0], [10.0]]);
    assert_eq!(two.normalized, [[0.0], [1.0]]);
    assert_eq!(two.sizes, [2, 2]);
    let one = cluster_stats(&manual(vec![0; 4]), &frame, &["v".into(), "u".into()]).unwrap();
    assert_eq!(one.normalized, [[0.5, 0.5]]);
}
