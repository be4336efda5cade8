use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{gen_lattice, gen_sdm, gen_subgroups, rng, unit_coordinates, Schema, SdmParams};
use crate::error::{Error, Result};
use crate::geodata::{MetaDataset, SubgroupDataset, DEFAULT_ID_COLUMN};
use crate::weights::{build_contiguity, ContiguityRule};

/// Manifest of a complete synthetic study area: lattice, census variables
/// from a planted spatial Durbin process, and subgroup counts whose rates
/// follow that process. One group additionally carries a smooth spatial
/// pattern no covariate explains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub cell_m: f64,
    pub sdm: SdmParams,
    pub schema: Schema,
    pub behavior: String,
    pub population: (u64, u64),
    /// Index into the enumerated groups.
    pub planted_group: usize,
    pub planted_amplitude: f64,
    /// Per-unit, per-group rate noise.
    pub rate_noise_sd: f64,
}

impl FixtureSpec {
    /// The 12 by 12 fixture used by the reference pipeline configuration.
    pub fn reference() -> Self {
        FixtureSpec {
            seed: 2024,
            rows: 12,
            cols: 12,
            cell_m: 400.0,
            sdm: SdmParams {
                beta: vec![0.0, 0.8, -0.5, 0.3],
                rho: 0.5,
                gamma: vec![0.4, 0.0, -0.3],
                noise_sd: 0.3,
            },
            schema: vec![
                ("edu".into(), vec!["college".into(), "no_college".into()]),
                ("race".into(), vec!["a".into(), "b".into(), "c".into()]),
            ],
            behavior: "voted".into(),
            population: (40, 120),
            planted_group: 0,
            planted_amplitude: 0.15,
            rate_noise_sd: 0.03,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub geometry: PathBuf,
    pub census: PathBuf,
    pub subgroups: PathBuf,
    pub manifest: PathBuf,
    pub meta: MetaDataset,
    pub subgroup_data: SubgroupDataset,
}

impl FixtureSpec {
    /// Generates the study area in memory.
    pub fn generate(&self) -> Result<(MetaDataset, crate::geodata::CensusDataset, SubgroupDataset)> {
        let md = gen_lattice(self.rows, self.cols, self.cell_m)?;
        let w = build_contiguity(&md, ContiguityRule::Queen).row_standardize();
        let data = gen_sdm(&md, &w, &self.sdm, self.seed)?;
        let n = md.len();
        let mean = data.y.iter().sum::<f64>() / n as f64;
        let sd = (data.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let base: Vec<f64> = data.y.iter().map(|v| 0.5 + 0.1 * (v - mean) / sd.max(1e-12)).collect();

        let coords = unit_coordinates(&md);
        let blob: Vec<f64> = coords
            .iter()
            .map(|p| {
                let tau = std::f64::consts::TAU;
                (tau * p[0]).sin() * (tau * p[1]).cos()
            })
            .collect();
        let n_groups = super::schema_groups(&self.schema).len();
        if self.planted_group >= n_groups {
            return Err(Error::InvalidArgument(format!(
                "planted group {} of {n_groups}",
                self.planted_group
            )));
        }
        let mut noise_rng = rng(self.seed.wrapping_add(1));
        let noise: Vec<Vec<f64>> = (0..n_groups)
            .map(|_| {
                (0..n)
                    .map(|_| self.rate_noise_sd * noise_rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let rate = |g: usize, i: usize| {
            let offset = 0.02 * g as f64 - 0.01 * (n_groups - 1) as f64;
            let planted = if g == self.planted_group {
                self.planted_amplitude * blob[i]
            } else {
                0.0
            };
            base[i] + offset + planted + noise[g][i]
        };
        let sd_rows = gen_subgroups(
            &md,
            &self.schema,
            &self.behavior,
            rate,
            self.population,
            self.seed.wrapping_add(2),
        )?;
        Ok((md, data.census, sd_rows))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `geometry.geojson`, `census.csv`, `subgroups.csv` and
/// `manifest.json` into `dir`.
pub fn write_fixture(spec: &FixtureSpec, dir: impl AsRef<Path>) -> Result<FixtureFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (md, cd, sd) = spec.generate()?;
    let files = FixtureFiles {
        geometry: dir.join("geometry.geojson"),
        census: dir.join("census.csv"),
        subgroups: dir.join("subgroups.csv"),
        manifest: dir.join("manifest.json"),
        meta: md,
        subgroup_data: sd,
    };
    let geo = serde_json::to_string(&files.meta.to_geojson(DEFAULT_ID_COLUMN))?;
    write_file(&files.geometry, geo.as_bytes())?;
    let mut buf = Vec::new();
    cd.write(&mut buf, DEFAULT_ID_COLUMN)?;
    write_file(&files.census, &buf)?;
    let mut buf = Vec::new();
    files.subgroup_data.write(&mut buf, DEFAULT_ID_COLUMN)?;
    write_file(&files.subgroups, &buf)?;
    write_file(&files.manifest, serde_json::to_string_pretty(spec)?.as_bytes())?;
    Ok(files)
}
