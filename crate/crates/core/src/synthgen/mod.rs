//! Synthetic lattices and datasets with planted parameters, plus the
//! brute-force oracles the test suite checks the pipeline against.
//!
//! Every generator is a pure function of its arguments and a `u64` seed
//! (ChaCha8 streams), so a [`FixtureSpec`] manifest regenerates its files
//! byte for byte.

mod fixture;
pub mod oracles;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::{CensusDataset, CensusRow, Geometry, MetaDataset, Point, SubgroupDataset, SubgroupRow, EARTH_RADIUS_M};
use crate::groups::GroupKey;
use crate::weights::WeightsMatrix;

pub use fixture::{write_fixture, FixtureFiles, FixtureSpec};

/// South-west corner of generated lattices, lon-lat degrees.
pub const LATTICE_ORIGIN: Point = [-73.95, 40.65];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Square cells with ids `r{i}c{j}`; row 0 is the southernmost, column 0
/// the westernmost. Cells are `cell_m` meters on a side in the projection
/// the resulting [`MetaDataset`] uses.
pub fn gen_lattice(rows: usize, cols: usize, cell_m: f64) -> Result<MetaDataset> {
    if rows * cols < 4 {
        return Err(Error::InvalidArgument(format!("lattice {rows}x{cols} has fewer than 4 cells")));
    }
    if !(cell_m > 0.0) {
        return Err(Error::InvalidArgument(format!("cell size {cell_m}")));
    }
    let dlat = (cell_m / EARTH_RADIUS_M).to_degrees();
    let center_lat = LATTICE_ORIGIN[1] + dlat * rows as f64 / 2.0;
    let dlon = (cell_m / (EARTH_RADIUS_M * center_lat.to_radians().cos())).to_degrees();
    let lon = |j: usize| LATTICE_ORIGIN[0] + dlon * j as f64;
    let lat = |i: usize| LATTICE_ORIGIN[1] + dlat * i as f64;
    let mut features = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let ring = vec![
                [lon(j), lat(i)],
                [lon(j + 1), lat(i)],
                [lon(j + 1), lat(i + 1)],
                [lon(j), lat(i + 1)],
            ];
            features.push((format!("r{i}c{j}"), Geometry::polygon(ring)));
        }
    }
    MetaDataset::from_geometries(features)
}

/// Centroids rescaled to `[0, 1]` along each axis.
pub fn unit_coordinates(md: &MetaDataset) -> Vec<Point> {
    let c = md.centroids();
    let range = |k: usize| {
        let lo = c.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        (lo, (hi - lo).max(f64::MIN_POSITIVE))
    };
    let ((x0, xs), (y0, ys)) = (range(0), range(1));
    c.iter().map(|p| [(p[0] - x0) / xs, (p[1] - y0) / ys]).collect()
}

fn variable_names(k: usize) -> Vec<String> {
    (1..=k).map(|v| format!("x{v}")).collect()
}

fn standard_normal_columns(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

fn census(md: &MetaDataset, names: &[String], cols: &[Vec<f64>]) -> CensusDataset {
    let mut cd = CensusDataset::new(names.to_vec());
    cd.rows = md
        .units
        .iter()
        .enumerate()
        .map(|(i, u)| CensusRow {
            unit_id: u.id.clone(),
            values: cols.iter().map(|c| Some(c[i])).collect(),
        })
        .collect();
    cd
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdmParams {
    /// Intercept followed by one slope per variable.
    pub beta: Vec<f64>,
    pub rho: f64,
    /// One lag coefficient per variable.
    pub gamma: Vec<f64>,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Variables `x1..xk`.
    pub census: CensusDataset,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl SyntheticData {
    pub fn variable_names(&self) -> Vec<String> {
        self.census.variables.clone()
    }
}

/// `y = (I - ρW)^-1 (Xβ + WXγ + ε)` with X and ε standard normal draws
/// (X column by column, then ε).
pub fn gen_sdm(md: &MetaDataset, w: &WeightsMatrix, params: &SdmParams, seed: u64) -> Result<SyntheticData> {
    let n = md.len();
    let k = params.beta.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("empty beta".into()))?;
    if params.gamma.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            got: params.gamma.len(),
        });
    }
    if w.n() != n || !w.is_row_standardized() {
        return Err(Error::InvalidArgument("weights must be row-standardized over the lattice".into()));
    }
    if !(params.rho.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!("rho = {}", params.rho)));
    }
    let mut rng = rng(seed);
    let x = standard_normal_columns(&mut rng, k, n);
    let eps: Vec<f64> = (0..n).map(|_| params.noise_sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let lags = x.iter().map(|c| w.spatial_lag(c)).collect::<Result<Vec<_>>>()?;
    let rhs = DVector::from_fn(n, |i, _| {
        let mut v = params.beta[0] + eps[i];
        for j in 0..k {
            v += params.beta[j + 1] * x[j][i] + params.gamma[j] * lags[j][i];
        }
        v
    });
    let y = if params.rho == 0.0 {
        rhs
    } else {
        let a = DMatrix::identity(n, n) - w.to_dense() * params.rho;
        a.lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("I - rho W".into()))?
    };
    let names = variable_names(k);
    Ok(SyntheticData {
        census: census(md, &names, &x),
        x,
        y: y.iter().copied().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// East-west, `u`.
    U,
    /// North-south, `v`.
    V,
}

/// A coefficient as a function of the normalized coordinates `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Surface {
    Constant { value: f64 },
    /// `from + (to - from) t` along the axis.
    Linear { axis: Axis, from: f64, to: f64 },
    /// `below` where the coordinate is under `at`, `above` otherwise.
    Step { axis: Axis, at: f64, below: f64, above: f64 },
}

impl Surface {
    pub fn eval(&self, p: Point) -> f64 {
        let t = |a: Axis| match a {
            Axis::U => p[0],
            Axis::V => p[1],
        };
        match *self {
            Surface::Constant { value } => value,
            Surface::Linear { axis, from, to } => from + (to - from) * t(axis),
            Surface::Step { axis, at, below, above } => {
                if t(axis) < at {
                    below
                } else {
                    above
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwrData {
    pub data: SyntheticData,
    /// `[variable][unit]` planted coefficients.
    pub planted: Vec<Vec<f64>>,
}

/// `y_i = sum_v β_v(u_i, v_i) x_iv + ε_i` over normalized coordinates.
pub fn gen_gwr(md: &MetaDataset, surfaces: &[Surface], noise_sd: f64, seed: u64) -> Result<GwrData> {
    if surfaces.is_empty() {
        return Err(Error::InvalidArgument("no surfaces".into()));
    }
    let n = md.len();
    let coords = unit_coordinates(md);
    let planted: Vec<Vec<f64>> = surfaces
        .iter()
        .map(|s| coords.iter().map(|&p| s.eval(p)).collect())
        .collect();
    let mut rng = rng(seed);
    let x = standard_normal_columns(&mut rng, surfaces.len(), n);
    let y = (0..n)
        .map(|i| {
            let e: f64 = rng.sample(StandardNormal);
            (0..surfaces.len()).map(|v| planted[v][i] * x[v][i]).sum::<f64>() + noise_sd * e
        })
        .collect();
    let names = variable_names(surfaces.len());
    Ok(GwrData {
        data: SyntheticData {
            census: census(md, &names, &x),
            x,
            y,
        },
        planted,
    })
}

/// Demographic attributes with their levels.
pub type Schema = Vec<(String, Vec<String>)>;

/// Every combination of levels, in the order `enumerate_groups` produces.
pub fn schema_groups(schema: &Schema) -> Vec<GroupKey> {
    let mut keys = vec![GroupKey::all()];
    for (attr, levels) in schema {
        keys = keys
            .into_iter()
            .flat_map(|k| {
                levels.iter().map(move |l| {
                    let mut s = k.selectors.clone();
                    s.insert(attr.clone(), l.clone());
                    GroupKey { selectors: s }
                })
            })
            .collect();
    }
    keys.sort();
    keys
}

/// One row per unit and group with population uniform in `population`
/// (inclusive) and `round(rate * population)` exhibitors of `behavior`.
/// `rate(g, i)` is the planted rate of group index `g` (in
/// [`schema_groups`] order) at unit `i`, clamped to `[0, 1]`.
pub fn gen_subgroups(
    md: &MetaDataset,
    schema: &Schema,
    behavior: &str,
    rate: impl Fn(usize, usize) -> f64,
    population: (u64, u64),
    seed: u64,
) -> Result<SubgroupDataset> {
    if population.0 > population.1 {
        return Err(Error::InvalidArgument("population range reversed".into()));
    }
    let groups = schema_groups(schema);
    let mut rng = rng(seed);
    let mut rows = Vec::with_capacity(md.len() * groups.len());
    for (i, u) in md.units.iter().enumerate() {
        for (g, key) in groups.iter().enumerate() {
            let pop = rng.random_range(population.0..=population.1);
            let r = rate(g, i).clamp(0.0, 1.0);
            let count = (r * pop as f64).round() as u64;
            rows.push(SubgroupRow {
                unit_id: u.id.clone(),
                year: None,
                demographic: key.selectors.clone(),
                socioeconomic: Default::default(),
                population: pop,
                behavioral: [(behavior.to_string(), count.min(pop))].into_iter().collect(),
            });
        }
    }
    let sd = SubgroupDataset { rows };
    sd.validate()?;
    Ok(sd)
}
