mod common;

use nbhd::diagnostics::{correlation_matrix, moran_permutation, morans_i, residual_moran, scan_groups, ScanConfig};
use nbhd::geodata::join_frame;
use nbhd::groups::{aggregate_rate, GroupKey};
use nbhd::models::{fit_ols, ModelSpec};
use nbhd::synthgen::oracles::{moran_direct, moran_permutation_moments};
use nbhd::synthgen::{gen_lattice, gen_subgroups, schema_groups, FixtureSpec};
use nbhd::weights::{build_contiguity, build_gaussian, ContiguityRule};

use common::{frame_with, normals};

#[test]
fn correlation_flags_exact_linear_pair() {
    let md = gen_lattice(5, 5, 100.0).unwrap();
    let x = normals(1, 25);
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let frame = frame_with(&md, &[("x", x), ("y", y)]);
    let c = correlation_matrix(&frame, &["x".into(), "y".into()]).unwrap();
    assert!((c.r[0][1].unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(c.r[0][1], c.r[1][0]);
    assert_eq!(c.flagged.len(), 1);
    assert_eq!((c.flagged[0].a.as_str(), c.flagged[0].b.as_str()), ("x", "y"));
}

#[test]
fn correlation_of_independent_noise_is_small() {
    let md = gen_lattice(25, 40, 100.0).unwrap();
    let a = normals(3, 1000);
    let b = normals(4, 1000);
    let frame = frame_with(&md, &[("a", a.clone()), ("b", b.clone())]);
    let c = correlation_matrix(&frame, &["a".into(), "b".into()]).unwrap();
    let r = c.r[0][1].unwrap();
    assert!(r.abs() < 0.1, "r = {r}");
    assert!((r - common::pearson(&a, &b)).abs() < 1e-12);
    assert!(c.flagged.is_empty());
}

#[test]
fn correlation_with_constant_column_is_undefined() {
    let md = gen_lattice(4, 4, 100.0).unwrap();
    let frame = frame_with(&md, &[("x", normals(2, 16)), ("k", vec![3.0; 16])]);
    let c = correlation_matrix(&frame, &["x".into(), "k".into()]).unwrap();
    assert_eq!(c.r[0][1], None);
    assert_eq!(c.r[1][1], None);
    assert!(c.warnings.iter().any(|w| w.contains('k')));
}

fn parity_pattern(md: &nbhd::geodata::MetaDataset) -> Vec<f64> {
    md.units
        .iter()
        .map(|u| {
            let (r, c) = u.id[1..].split_once('c').unwrap();
            let p = r.parse::<usize>().unwrap() + c.parse::<usize>().unwrap();
            if p % 2 == 0 { 1.0 } else { 0.0 }
        })
        .collect()
}

#[test]
fn checkerboard_on_small_rook_lattice() {
    let md = gen_lattice(4, 4, 100.0).unwrap();
    let w = build_contiguity(&md, ContiguityRule::Rook);
    let x = parity_pattern(&md);
    let i = morans_i(&x, &w).unwrap().i;
    assert!((i + 1.0).abs() < 1e-9);
    assert!((i - moran_direct(&x, &w)).abs() < 1e-12);
}

#[test]
fn noise_is_near_expectation_and_matches_permutation_oracle() {
    let md = gen_lattice(25, 40, 100.0).unwrap();
    let w = build_contiguity(&md, ContiguityRule::Queen).row_standardize();
    let x = normals(5, 1000);
    let m = morans_i(&x, &w).unwrap();
    assert!((m.i - m.expected).abs() < 0.05, "I = {}", m.i);
    assert!((m.expected + 1.0 / 999.0).abs() < 1e-15);
    let perm = moran_permutation(&x, &w, 999, 5).unwrap();
    let (mean, sd) = moran_permutation_moments(&x, &w, 999, 6);
    assert!((perm.mean - mean).abs() < 0.005, "{} vs {mean}", perm.mean);
    assert!((perm.sd / sd - 1.0).abs() < 0.15, "{} vs {sd}", perm.sd);
    // The analytic normality variance agrees with the permutation spread.
    let analytic_sd = (m.i - m.expected) / m.z;
    assert!((analytic_sd / sd - 1.0).abs() < 0.15, "{analytic_sd} vs {sd}");
    assert!(m.p > 0.01);
}

#[test]
fn two_blocks_are_strongly_autocorrelated() {
    let md = gen_lattice(10, 10, 100.0).unwrap();
    let c = md.centroids();
    let lo = c.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = c.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let x: Vec<f64> = c.iter().map(|p| if p[0] < (lo + hi) / 2.0 { 0.0 } else { 1.0 }).collect();
    assert_eq!(x.iter().sum::<f64>(), 50.0);
    for w in [build_contiguity(&md, ContiguityRule::Rook), build_gaussian(&md, 8).unwrap().row_standardize()] {
        let i = morans_i(&x, &w).unwrap().i;
        assert!(i > 0.5, "I = {i}");
    }
}

#[test]
fn single_group_scan_matches_direct_moran() {
    let fx = FixtureSpec::reference();
    let (md, cd, _) = fx.generate().unwrap();
    let schema = vec![("everyone".to_string(), vec!["all".to_string()])];
    let sd = gen_subgroups(&md, &schema, "voted", |_, i| 0.3 + 0.4 * (i % 7) as f64 / 7.0, (50, 100), 9).unwrap();
    let (frame, _) = join_frame(&md, &cd, Some(&sd)).unwrap();
    let w = build_gaussian(&md, 8).unwrap().row_standardize();
    let spec = ModelSpec::new("voted", &["x1", "x2", "x3"]);
    let report = scan_groups(&spec, &frame, &sd, &ScanConfig::new(&["everyone"]), &w).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(row.group, GroupKey::new([("everyone", "all")]));
    let y = aggregate_rate(&sd, &frame.unit_ids(), &row.group, "voted", 10).unwrap();
    let ols = fit_ols(&spec, &frame, &y).unwrap();
    let direct = residual_moran(&ols.residuals, &ols.used_units, &w).unwrap();
    assert!((row.moran_ols.as_ref().unwrap().i - direct.i).abs() < 1e-12);
    assert!((row.r2_ols.unwrap() - ols.r2).abs() < 1e-12);
}

#[test]
fn planted_group_ranks_first() {
    let fx = FixtureSpec::reference();
    let (md, cd, sd) = fx.generate().unwrap();
    let (frame, _) = join_frame(&md, &cd, Some(&sd)).unwrap();
    let w = build_gaussian(&md, 8).unwrap().row_standardize();
    let spec = ModelSpec::new("voted", &["x1", "x2", "x3"]);
    let report = scan_groups(&spec, &frame, &sd, &ScanConfig::new(&["edu", "race"]), &w).unwrap();
    assert_eq!(report.rows.len(), 6);
    let planted = &schema_groups(&fx.schema)[fx.planted_group];
    assert_eq!(&report.top().unwrap().group, planted);
    let is: Vec<f64> = report.rows.iter().map(|r| r.moran_sdm.as_ref().unwrap().i).collect();
    assert!(is.windows(2).all(|p| p[0] >= p[1]));
}

#[test]
fn low_coverage_groups_are_excluded_and_listed() {
    let fx = FixtureSpec::reference();
    let (md, cd, mut sd) = fx.generate().unwrap();
    for row in sd.rows.iter_mut().filter(|r| r.demographic["race"] == "c") {
        row.population = 4;
        for v in row.behavioral.values_mut() {
            *v = (*v).min(4);
        }
    }
    let (frame, _) = join_frame(&md, &cd, Some(&sd)).unwrap();
    let w = build_gaussian(&md, 8).unwrap().row_standardize();
    let spec = ModelSpec::new("voted", &["x1", "x2", "x3"]);
    let report = scan_groups(&spec, &frame, &sd, &ScanConfig::new(&["race"]), &w).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.excluded.len(), 1);
    assert_eq!(report.excluded[0].0, GroupKey::new([("race", "c")]));
    assert_eq!(report.excluded[0].1, 0.0);
}
