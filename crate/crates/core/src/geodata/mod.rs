//! Ingestion and joining of the geometry, census and subgroup datasets.
//!
//! Geometry arrives as a GeoJSON FeatureCollection in lon-lat degrees. Each
//! unit gets a planar centroid in meters from an equirectangular projection
//! about the mean latitude of the dataset, which is accurate at county scale
//! but not for continental extents. Tabular data is CSV (see [`tables`]).

mod geojson;
pub mod geometry;
pub mod tables;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use geometry::{BoundingBox, Geometry, Point, Polygon};
pub use tables::{CensusDataset, CensusRow, SubgroupDataset, SubgroupRow};

pub const DEFAULT_ID_COLUMN: &str = "unit_id";

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureError {
    pub index: usize,
    pub id: Option<String>,
    pub message: String,
}

impl std::fmt::Display for FeatureError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.id {
            Some(id) => write!(f, "feature {} ({id}): {}", self.index, self.message),
            None => write!(f, "feature {}: {}", self.index, self.message),
        }
    }
}

/// Equirectangular projection about a reference latitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub ref_lat_deg: f64,
}

impl Projection {
    pub fn project(&self, lonlat: Point) -> Point {
        let k = self.ref_lat_deg.to_radians().cos();
        [
            EARTH_RADIUS_M * lonlat[0].to_radians() * k,
            EARTH_RADIUS_M * lonlat[1].to_radians(),
        ]
    }

    pub fn unproject(&self, xy: Point) -> Point {
        let k = self.ref_lat_deg.to_radians().cos();
        [
            (xy[0] / (EARTH_RADIUS_M * k)).to_degrees(),
            (xy[1] / EARTH_RADIUS_M).to_degrees(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    /// Lon-lat degrees.
    pub geometry: Geometry,
    /// Planar meters.
    pub centroid: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDataset {
    pub units: Vec<Unit>,
    pub projection: Projection,
}

impl MetaDataset {
    /// Validates geometries, rejects duplicate ids and computes projected
    /// centroids.
    pub fn from_geometries(features: Vec<(String, Geometry)>) -> Result<Self> {
        let mut errors = Vec::new();
        for (index, (id, g)) in features.iter().enumerate() {
            if let Err(message) = g.validate() {
                errors.push(FeatureError {
                    index,
                    id: Some(id.clone()),
                    message,
                });
            }
        }
        if !errors.is_empty() {
            return Err(Error::InvalidFeatures(errors));
        }
        check_duplicates(features.iter().map(|(id, _)| id.as_str()))?;
        if features.is_empty() {
            return Err(Error::InvalidArgument("geometry dataset is empty".into()));
        }

        let ref_lat_deg = features.iter().map(|(_, g)| g.bbox().center()[1]).sum::<f64>()
            / features.len() as f64;
        let projection = Projection { ref_lat_deg };
        let units = features
            .into_iter()
            .map(|(id, geometry)| {
                let centroid = geometry.map_points(|p| projection.project(p)).centroid();
                Unit {
                    id,
                    geometry,
                    centroid,
                }
            })
            .collect();
        Ok(MetaDataset { units, projection })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn centroids(&self) -> Vec<Point> {
        self.units.iter().map(|u| u.centroid).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.units.iter().map(|u| u.id.as_str())
    }

    /// Geometry of unit `i` in projected meters.
    pub fn projected_geometry(&self, i: usize) -> Geometry {
        let p = self.projection;
        self.units[i].geometry.map_points(|q| p.project(q))
    }

    pub fn to_geojson(&self, id_property: &str) -> serde_json::Value {
        geojson::feature_collection(
            self.units
                .iter()
                .map(|u| (u.id.as_str(), &u.geometry, serde_json::Map::new())),
            id_property,
        )
    }

    /// Keeps only the units at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> MetaDataset {
        MetaDataset {
            units: indices.iter().map(|&i| self.units[i].clone()).collect(),
            projection: self.projection,
        }
    }
}

fn check_duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    let mut dups = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            dups.insert(id.to_string());
        }
    }
    if dups.is_empty() {
        Ok(())
    } else {
        Err(Error::DuplicateIds(dups.into_iter().collect()))
    }
}

/// Reads a GeoJSON FeatureCollection whose features carry `id_property`.
pub fn load_geometry(path: impl AsRef<Path>, id_property: &str) -> Result<MetaDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_geometry(&text, id_property)
}

pub fn parse_geometry(text: &str, id_property: &str) -> Result<MetaDataset> {
    let parsed = geojson::parse_feature_collection(text, id_property).map_err(Error::Malformed)?;
    let mut features = Vec::with_capacity(parsed.len());
    let mut errors = Vec::new();
    for f in parsed {
        match f {
            Ok(f) => features.push((f.id, f.geometry)),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(Error::InvalidFeatures(errors));
    }
    MetaDataset::from_geometries(features)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinReport {
    /// Census ids with no geometry.
    pub dropped_from_census: Vec<String>,
    /// Geometry ids with no census row.
    pub dropped_from_geometry: Vec<String>,
    /// Subgroup unit ids that did not survive the join.
    pub dropped_from_subgroups: Vec<String>,
    /// Units removed because census cells were missing, with the variables
    /// that were empty.
    pub missing_values: Vec<(String, Vec<String>)>,
}

impl JoinReport {
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.dropped_from_census.is_empty() {
            out.push(format!("dropped from census: {}", self.dropped_from_census.join(", ")));
        }
        if !self.dropped_from_geometry.is_empty() {
            out.push(format!(
                "dropped from geometry: {}",
                self.dropped_from_geometry.join(", ")
            ));
        }
        if !self.dropped_from_subgroups.is_empty() {
            out.push(format!(
                "dropped from subgroups: {}",
                self.dropped_from_subgroups.join(", ")
            ));
        }
        for (unit, vars) in &self.missing_values {
            out.push(format!("missing values in {unit}: {}", vars.join(", ")));
        }
        out
    }

    pub fn is_clean(&self) -> bool {
        self.lines().is_empty()
    }
}

/// Geometry, census variables and subgroup rows aligned to one unit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFrame {
    pub meta: MetaDataset,
    pub variables: BTreeMap<String, Vec<f64>>,
    pub subgroups: Option<SubgroupDataset>,
}

impl SpatialFrame {
    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn unit_ids(&self) -> Vec<String> {
        self.meta.units.iter().map(|u| u.id.clone()).collect()
    }

    pub fn centroids(&self) -> Vec<Point> {
        self.meta.centroids()
    }

    pub fn variable(&self, name: &str) -> Result<&[f64]> {
        self.variables
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.keys().cloned().collect()
    }

    pub fn index_of(&self, unit_id: &str) -> Option<usize> {
        self.meta.units.iter().position(|u| u.id == unit_id)
    }
}

/// Inner join on unit id, in geometry order.
///
/// Census rows with missing cells are dropped and reported, not imputed.
pub fn join_frame(
    md: &MetaDataset,
    cd: &CensusDataset,
    sd: Option<&SubgroupDataset>,
) -> Result<(SpatialFrame, JoinReport)> {
    if md.is_empty() || cd.rows.is_empty() {
        return Err(Error::InvalidArgument("join inputs must be nonempty".into()));
    }
    cd.validate()?;
    let mut report = JoinReport::default();
    let md_ids: BTreeSet<&str> = md.ids().collect();

    let mut census: HashMap<&str, &CensusRow> = HashMap::new();
    for row in &cd.rows {
        if !md_ids.contains(row.unit_id.as_str()) {
            report.dropped_from_census.push(row.unit_id.clone());
            continue;
        }
        let missing: Vec<String> = row
            .values
            .iter()
            .zip(&cd.variables)
            .filter(|(v, _)| v.is_none())
            .map(|(_, name)| name.clone())
            .collect();
        if missing.is_empty() {
            census.insert(row.unit_id.as_str(), row);
        } else {
            report.missing_values.push((row.unit_id.clone(), missing));
        }
    }
    report.dropped_from_census.sort();
    report.missing_values.sort();

    let mut kept = Vec::new();
    for (i, u) in md.units.iter().enumerate() {
        if census.contains_key(u.id.as_str()) {
            kept.push(i);
        } else if !report.missing_values.iter().any(|(id, _)| id == &u.id) {
            report.dropped_from_geometry.push(u.id.clone());
        }
    }
    report.dropped_from_geometry.sort();
    if kept.is_empty() {
        return Err(Error::EmptyJoin);
    }

    let meta = md.select(&kept);
    let mut variables = BTreeMap::new();
    for (k, name) in cd.variables.iter().enumerate() {
        let column = meta
            .units
            .iter()
            .map(|u| census[u.id.as_str()].values[k].expect("complete rows only"))
            .collect();
        variables.insert(name.clone(), column);
    }

    let subgroups = sd.map(|sd| {
        let position: HashMap<&str, usize> = meta
            .units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.id.as_str(), i))
            .collect();
        let mut dropped = BTreeSet::new();
        let mut rows: Vec<(usize, &SubgroupRow)> = Vec::new();
        for r in &sd.rows {
            match position.get(r.unit_id.as_str()) {
                Some(&i) => rows.push((i, r)),
                None => {
                    dropped.insert(r.unit_id.clone());
                }
            }
        }
        rows.sort_by(|(ia, a), (ib, b)| {
            ia.cmp(ib)
                .then(a.year.cmp(&b.year))
                .then_with(|| a.demographic.cmp(&b.demographic))
        });
        report.dropped_from_subgroups = dropped.into_iter().collect();
        SubgroupDataset {
            rows: rows.into_iter().map(|(_, r)| r.clone()).collect(),
        }
    });

    Ok((
        SpatialFrame {
            meta,
            variables,
            subgroups,
        },
        report,
    ))
}

/// `(v - min) / (max - min)`; a constant vector maps to 0.5. Non-finite
/// entries are ignored for the range and come back as NaN.
pub fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    values
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                f64::NAN
            } else if hi > lo {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: &str = r#"{"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"unit_id":"A"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
      {"type":"Feature","properties":{"unit_id":"B"},"geometry":{"type":"Polygon","coordinates":[[[1,0],[2,0],[2,1],[1,1],[1,0]]]}},
      {"type":"Feature","properties":{"unit_id":"C"},"geometry":{"type":"Polygon","coordinates":[[[0,1],[1,1],[1,2],[0,2],[0,1]]]}},
      {"type":"Feature","properties":{"unit_id":"D"},"geometry":{"type":"Polygon","coordinates":[[[1,1],[2,1],[2,2],[1,2],[1,1]]]}}
    ]}"#;

    #[test]
    fn unit_square_grid_centroids() {
        let md = parse_geometry(GRID, "unit_id").unwrap();
        assert_eq!(md.len(), 4);
        assert_eq!(md.projection.ref_lat_deg, 1.0);
        let p = md.projection;
        let expected = [[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.5, 1.5]];
        for (u, e) in md.units.iter().zip(expected) {
            let want = p.project(e);
            assert!((u.centroid[0] - want[0]).abs() < 1e-6, "{:?} vs {want:?}", u.centroid);
            assert!((u.centroid[1] - want[1]).abs() < 1e-6);
            let bb = md.projected_geometry(0).bbox();
            assert!(bb.width() > 0.0);
        }
        // one degree of latitude is R * pi / 180 meters
        let dy = md.units[2].centroid[1] - md.units[0].centroid[1];
        assert!((dy - EARTH_RADIUS_M.to_radians() * 1.0).abs() < 1e-6);
    }

    #[test]
    fn duplicate_ids_are_named() {
        let text = GRID.replace("\"B\"", "\"A\"");
        match parse_geometry(&text, "unit_id") {
            Err(Error::DuplicateIds(ids)) => assert_eq!(ids, vec!["A"]),
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_features_are_reported_individually() {
        let text = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","properties":{"unit_id":"A"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,1],[1,0],[0,1],[0,0]]]}},
          {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}},
          {"type":"Feature","properties":{"unit_id":"C"},"geometry":{"type":"Point","coordinates":[0,0]}}
        ]}"#;
        match parse_geometry(text, "unit_id") {
            Err(Error::InvalidFeatures(errs)) => {
                assert_eq!(errs.len(), 3);
                assert!(errs[0].message.contains("self-intersection"));
                assert_eq!(errs[1].id, None);
                assert!(errs[2].message.contains("unsupported"));
            }
            other => panic!("expected feature errors, got {other:?}"),
        }
    }

    fn census(ids: &[&str]) -> CensusDataset {
        CensusDataset {
            variables: vec!["v".into()],
            rows: ids
                .iter()
                .enumerate()
                .map(|(i, id)| CensusRow {
                    unit_id: id.to_string(),
                    values: vec![Some(i as f64)],
                })
                .collect(),
        }
    }

    fn two_units() -> MetaDataset {
        let sq = |x: f64| Geometry::polygon(vec![[x, 0.0], [x + 1.0, 0.0], [x + 1.0, 1.0], [x, 1.0]]);
        MetaDataset::from_geometries(vec![("A".into(), sq(0.0)), ("B".into(), sq(1.0))]).unwrap()
    }

    #[test]
    fn join_reports_census_extras() {
        let (frame, report) = join_frame(&two_units(), &census(&["A", "B", "C"]), None).unwrap();
        assert_eq!(frame.unit_ids(), vec!["A", "B"]);
        assert_eq!(report.lines(), vec!["dropped from census: C"]);
        assert_eq!(frame.variable("v").unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn join_with_no_overlap_fails() {
        assert!(matches!(
            join_frame(&two_units(), &census(&["C"]), None),
            Err(Error::EmptyJoin)
        ));
    }

    #[test]
    fn join_drops_rows_with_missing_values() {
        let mut cd = census(&["A", "B"]);
        cd.rows[1].values[0] = None;
        let (frame, report) = join_frame(&two_units(), &cd, None).unwrap();
        assert_eq!(frame.unit_ids(), vec!["A"]);
        assert_eq!(report.missing_values, vec![("B".to_string(), vec!["v".to_string()])]);
        assert!(report.dropped_from_geometry.is_empty());
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_normalize(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[7.0, 7.0, 7.0]), vec![0.5, 0.5, 0.5]);
        assert_eq!(minmax_normalize(&[-2.0, 0.0, 2.0]), vec![0.0, 0.5, 1.0]);
    }
}
