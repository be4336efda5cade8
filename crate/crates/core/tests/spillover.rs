use nbhd::geodata::Point;
use nbhd::models::{Kernel, LocalCoefficients, LocalFit};
use nbhd::regionalize::Regionalization;
use nbhd::spillover::{aggregate_clusters, bin_directions, pairwise_spillover, SpilloverField, SpilloverPair, SpilloverPairs, SECTORS};
use nbhd::synthgen::oracles::spillover_products;
use nbhd::synthgen::{gen_lattice, rng};
use nbhd::weights::{build_contiguity, build_gaussian, ContiguityRule, WeightsKind, WeightsMatrix};
use rand::Rng;

/// A local fit carrying only lag coefficients: `gamma[unit][channel]`.
fn local_with(gamma: Vec<Vec<f64>>, rho: Option<Vec<f64>>, coords: Vec<Point>) -> LocalFit {
    let n = gamma.len();
    let k = gamma.first().map_or(0, Vec::len);
    let names: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    LocalFit {
        dependent: "y".into(),
        independents: names.clone(),
        lagged: names,
        has_rho: rho.is_some(),
        units: (0..n)
            .map(|i| {
                Some(LocalCoefficients {
                    beta: vec![0.0; k + 1],
                    rho: rho.as_ref().map(|r| r[i]),
                    gamma: gamma[i].clone(),
                })
            })
            .collect(),
        local_r2: vec![None; n],
        bandwidth: n,
        kernel: Kernel::Bisquare,
        coords,
        aicc: 0.0,
        trace_hat: 0.0,
        rss: 0.0,
        warnings: Vec::new(),
    }
}

#[test]
fn single_pair_product() {
    let w = WeightsMatrix::from_rows(vec![vec![(1, 0.5), (2, 0.5)], vec![(0, 1.0)], vec![(0, 1.0)]], WeightsKind::Queen).unwrap().row_standardize();
    let local = local_with(vec![vec![0.0], vec![1.0], vec![0.0]], None, vec![[0.0; 2]; 3]);
    let pairs = pairwise_spillover(&local, &w).unwrap();
    let s01 = pairs.pairs.iter().find(|p| (p.i, p.j) == (0, 1)).unwrap();
    assert_eq!(s01.values, [0.5]);
    let zero = local_with(vec![vec![0.0]; 3], None, vec![[0.0; 2]; 3]);
    assert!(pairwise_spillover(&zero, &w).unwrap().pairs.iter().all(|p| p.values == [0.0]));
}

#[test]
fn random_fit_matches_product_oracle() {
    let md = gen_lattice(9, 7, 100.0).unwrap();
    let w = build_gaussian(&md, 6).unwrap().row_standardize();
    let mut r = rng(13);
    let n = md.len();
    let gamma: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let rho: Vec<f64> = (0..n).map(|_| r.random_range(-0.9..0.9)).collect();
    let local = local_with(gamma, Some(rho), md.centroids());
    let pairs = pairwise_spillover(&local, &w).unwrap();
    assert_eq!(pairs.channels, ["W_y", "W_x1", "W_x2", "W_x3"]);
    let oracle = spillover_products(&local, &w);
    assert_eq!(pairs.pairs.len(), oracle.len());
    for p in &pairs.pairs {
        for (a, b) in p.values.iter().zip(&oracle[&(p.i, p.j)]) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn unfitted_neighbors_are_skipped() {
    let md = gen_lattice(3, 3, 100.0).unwrap();
    let w = build_contiguity(&md, ContiguityRule::Rook).row_standardize();
    let mut local = local_with(vec![vec![1.0]; 9], None, md.centroids());
    local.units[4] = None;
    let pairs = pairwise_spillover(&local, &w).unwrap();
    assert_eq!(pairs.skipped, 4);
    assert!(pairs.pairs.iter().all(|p| p.j != 4));
}

fn pairs_from(values: &[(usize, usize, f64)]) -> SpilloverPairs {
    SpilloverPairs {
        channels: vec!["W_x1".into()],
        pairs: values.iter().map(|&(i, j, v)| SpilloverPair { i, j, values: vec![v] }).collect(),
        skipped: 0,
    }
}

#[test]
fn due_north_lands_in_sector_zero() {
    let field = bin_directions(&pairs_from(&[(0, 1, 0.3)]), &[[0.0, 0.0], [0.0, 50.0]]);
    assert_eq!(field.combined[0][0], 0.3);
    assert_eq!(field.combined[0].iter().sum::<f64>(), 0.3);
    assert_eq!(field.combined[1], [0.0; SECTORS]);
}

#[test]
fn boundary_bearings() {
    let at = |deg: f64| {
        let b = deg.to_radians();
        [100.0 * b.sin(), 100.0 * b.cos()]
    };
    let field = bin_directions(&pairs_from(&[(0, 1, 1.0), (0, 2, 2.0)]), &[[0.0, 0.0], at(11.24), at(11.26)]);
    assert_eq!(field.combined[0][0], 1.0);
    assert_eq!(field.combined[0][1], 2.0);
}

#[test]
fn sixteen_sector_centers_give_a_uniform_vector() {
    let mut centroids = vec![[0.0, 0.0]];
    let mut values = Vec::new();
    for s in 0..SECTORS {
        let b = (22.5 * s as f64).to_radians();
        centroids.push([10.0 * b.sin(), 10.0 * b.cos()]);
        values.push((0, s + 1, -0.25));
    }
    let field = bin_directions(&pairs_from(&values), &centroids);
    assert_eq!(field.combined[0], [0.25; SECTORS]);
}

fn field_of(vectors: Vec<[f64; SECTORS]>) -> SpilloverField {
    SpilloverField {
        channels: vec!["W_x1".into()],
        per_channel: vectors.iter().map(|v| vec![*v]).collect(),
        combined: vectors,
        warnings: Vec::new(),
    }
}

fn labels(labels: Vec<usize>) -> Regionalization {
    let n = labels.len();
    let c = labels.iter().max().unwrap() + 1;
    Regionalization {
        k: c,
        n_clusters: c,
        units: (0..n).collect(),
        labels,
        leaf_order: (0..n).collect(),
        feature_names: Vec::new(),
        feature_matrix: vec![Vec::new(); n],
    }
}

#[test]
fn cluster_vectors_are_member_means() {
    let mut u = [0.0; SECTORS];
    let mut v = [0.0; SECTORS];
    u[2] = 1.0;
    v[2] = 3.0;
    v[9] = 4.0;
    let agg = aggregate_clusters(&field_of(vec![u, v, v]), &labels(vec![0, 1, 1]));
    assert_eq!(agg.vectors[0], u);
    assert_eq!(agg.vectors[1], v);
    let agg = aggregate_clusters(&field_of(vec![u, v]), &labels(vec![0, 0]));
    assert_eq!(agg.vectors[0][2], 2.0);
    assert_eq!(agg.vectors[0][9], 2.0);
}

#[test]
fn eastward_band_points_cluster_east() {
    // Strong lag coefficients in the two easternmost columns; the cluster
    // just west of them receives most of its spillover from the east.
    let md = gen_lattice(8, 8, 100.0).unwrap();
    let w = build_contiguity(&md, ContiguityRule::Queen).row_standardize();
    let col = |i: usize| i % 8;
    let gamma: Vec<Vec<f64>> = (0..64).map(|i| vec![if col(i) >= 6 { 5.0 } else { 0.1 }]).collect();
    let local = local_with(gamma, None, md.centroids());
    let field = bin_directions(&pairwise_spillover(&local, &w).unwrap(), &md.centroids());
    let reg = labels((0..64).map(|i| usize::from(col(i) == 5)).collect());
    let agg = aggregate_clusters(&field, &reg);
    let v = agg.vectors[1];
    let top = (0..SECTORS).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    assert!((3..=5).contains(&top), "maximum in sector {top}: {v:?}");
}
