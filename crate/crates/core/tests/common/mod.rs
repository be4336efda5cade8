#![allow(dead_code)]

use nbhd::geodata::{join_frame, MetaDataset, SpatialFrame};
use nbhd::groups::GroupSeries;
use nbhd::regionalize::FeatureMatrix;
use nbhd::synthgen::{gen_lattice, gen_sdm, SdmParams, SyntheticData};
use nbhd::weights::{build_contiguity, ContiguityRule, WeightsMatrix};

pub struct Lattice {
    pub md: MetaDataset,
    pub frame: SpatialFrame,
    pub w: WeightsMatrix,
    pub data: SyntheticData,
    pub y: GroupSeries,
}

/// Row-standardized queen weights and an SDM draw on a `rows` by `cols` lattice.
pub fn sdm_lattice(rows: usize, cols: usize, params: &SdmParams, seed: u64) -> Lattice {
    let md = gen_lattice(rows, cols, 100.0).unwrap();
    let w = build_contiguity(&md, ContiguityRule::Queen).row_standardize();
    let data = gen_sdm(&md, &w, params, seed).unwrap();
    let (frame, _) = join_frame(&md, &data.census, None).unwrap();
    let y = GroupSeries::complete("y", data.y.clone());
    Lattice { md, frame, w, data, y }
}

pub fn params(beta: &[f64], rho: f64, gamma: &[f64], noise_sd: f64) -> SdmParams {
    SdmParams {
        beta: beta.to_vec(),
        rho,
        gamma: gamma.to_vec(),
        noise_sd,
    }
}

pub fn independents(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("x{i}")).collect()
}

pub fn features(values: Vec<Vec<f64>>) -> FeatureMatrix {
    let d = values.first().map_or(0, Vec::len);
    FeatureMatrix {
        units: (0..values.len()).collect(),
        names: (0..d).map(|j| format!("f{j}")).collect(),
        values,
        warnings: Vec::new(),
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    nbhd::diagnostics::pearson(a, b).unwrap()
}

/// Frame over `md` holding the given columns.
pub fn frame_with(md: &MetaDataset, columns: &[(&str, Vec<f64>)]) -> SpatialFrame {
    use nbhd::geodata::{CensusDataset, CensusRow};
    let mut cd = CensusDataset::new(columns.iter().map(|c| c.0.to_string()).collect());
    for (i, u) in md.units.iter().enumerate() {
        cd.rows.push(CensusRow {
            unit_id: u.id.clone(),
            values: columns.iter().map(|c| Some(c.1[i])).collect(),
        });
    }
    join_frame(md, &cd, None).unwrap().0
}

pub fn normals(seed: u64, n: usize) -> Vec<f64> {
    use rand::Rng;
    let mut r = nbhd::synthgen::rng(seed);
    (0..n).map(|_| r.sample(rand_distr::StandardNormal)).collect()
}
