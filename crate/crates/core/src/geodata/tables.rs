//! CSV readers and writers for the census and subgroup tables.
//!
//! Census files are `unit_id,<var>,<var>,...`. Subgroup files use prefixed
//! column names so one header describes the row layout:
//!
//! ```text
//! unit_id,year,population,demo:race,demo:edu,socio:income,behav:voted
//! ```
//!
//! `year` and the `socio:` columns are optional.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEMOGRAPHIC_PREFIX: &str = "demo:";
pub const SOCIOECONOMIC_PREFIX: &str = "socio:";
pub const BEHAVIORAL_PREFIX: &str = "behav:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub unit_id: String,
    /// Aligned to [`CensusDataset::variables`]; `None` marks a missing cell.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusDataset {
    pub variables: Vec<String>,
    pub rows: Vec<CensusRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow {
    pub unit_id: String,
    pub year: Option<i32>,
    pub demographic: BTreeMap<String, String>,
    pub socioeconomic: BTreeMap<String, f64>,
    pub population: u64,
    pub behavioral: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupDataset {
    pub rows: Vec<SubgroupRow>,
}

fn parse_cell(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("null") {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl CensusDataset {
    pub fn new(variables: Vec<String>) -> Self {
        CensusDataset {
            variables,
            rows: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>, id_column: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, id_column)
    }

    pub fn from_reader(reader: impl Read, id_column: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let id_idx = headers
            .iter()
            .position(|h| h == id_column)
            .ok_or_else(|| Error::Malformed(format!("census CSV has no `{id_column}` column")))?;
        let var_cols: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != id_idx)
            .map(|(i, h)| (i, h.to_string()))
            .collect();
        let mut data = CensusDataset::new(var_cols.iter().map(|(_, h)| h.clone()).collect());
        for record in rdr.records() {
            let record = record?;
            let unit_id = record.get(id_idx).unwrap_or("").trim().to_string();
            if unit_id.is_empty() {
                return Err(Error::Malformed("census row with empty unit id".into()));
            }
            let values = var_cols
                .iter()
                .map(|(i, _)| record.get(*i).and_then(parse_cell))
                .collect();
            data.rows.push(CensusRow { unit_id, values });
        }
        data.validate()?;
        Ok(data)
    }

    /// One row per unit id.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        let mut dups = BTreeSet::new();
        for r in &self.rows {
            if r.values.len() != self.variables.len() {
                return Err(Error::LengthMismatch {
                    expected: self.variables.len(),
                    got: r.values.len(),
                });
            }
            if !seen.insert(r.unit_id.as_str()) {
                dups.insert(r.unit_id.clone());
            }
        }
        if dups.is_empty() {
            Ok(())
        } else {
            Err(Error::DuplicateIds(dups.into_iter().collect()))
        }
    }

    pub fn write(&self, writer: impl Write, id_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![id_column.to_string()];
        header.extend(self.variables.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.unit_id.clone()];
            rec.extend(r.values.iter().map(|v| match v {
                Some(x) => format!("{x:?}"),
                None => String::new(),
            }));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

impl SubgroupDataset {
    pub fn load(path: impl AsRef<Path>, id_column: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, id_column)
    }

    pub fn from_reader(reader: impl Read, id_column: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let id_idx = find(id_column)
            .ok_or_else(|| Error::Malformed(format!("subgroup CSV has no `{id_column}` column")))?;
        let pop_idx = find("population")
            .ok_or_else(|| Error::Malformed("subgroup CSV has no `population` column".into()))?;
        let year_idx = find("year");
        let prefixed = |prefix: &str| -> Vec<(usize, String)> {
            headers
                .iter()
                .enumerate()
                .filter_map(|(i, h)| h.strip_prefix(prefix).map(|n| (i, n.to_string())))
                .collect()
        };
        let demo = prefixed(DEMOGRAPHIC_PREFIX);
        let socio = prefixed(SOCIOECONOMIC_PREFIX);
        let behav = prefixed(BEHAVIORAL_PREFIX);
        if behav.is_empty() {
            return Err(Error::Malformed(
                "subgroup CSV has no behavioral (`behav:`) columns".into(),
            ));
        }

        let count = |s: &str, what: &str, line: usize| -> Result<u64> {
            s.trim().parse::<u64>().map_err(|_| {
                Error::Malformed(format!("row {line}: `{what}` is not a non-negative count: `{s}`"))
            })
        };

        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let get = |i: usize| record.get(i).unwrap_or("");
            let year = match year_idx.map(|i| get(i).trim()) {
                None | Some("") => None,
                Some(y) => Some(y.parse::<i32>().map_err(|_| {
                    Error::Malformed(format!("row {line}: bad year `{y}`"))
                })?),
            };
            let mut socioeconomic = BTreeMap::new();
            for (i, name) in &socio {
                if let Some(v) = parse_cell(get(*i)) {
                    socioeconomic.insert(name.clone(), v);
                }
            }
            let mut behavioral = BTreeMap::new();
            for (i, name) in &behav {
                behavioral.insert(name.clone(), count(get(*i), name, line)?);
            }
            rows.push(SubgroupRow {
                unit_id: get(id_idx).trim().to_string(),
                year,
                demographic: demo
                    .iter()
                    .map(|(i, n)| (n.clone(), get(*i).trim().to_string()))
                    .collect(),
                socioeconomic,
                population: count(get(pop_idx), "population", line)?,
                behavioral,
            });
        }
        let data = SubgroupDataset { rows };
        data.validate()?;
        Ok(data)
    }

    /// Behavioral counts never exceed population, and (unit, year,
    /// demographic tuple) is unique.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.rows {
            for (b, &c) in &r.behavioral {
                if c > r.population {
                    return Err(Error::Malformed(format!(
                        "unit {}: behavior `{b}` count {c} exceeds population {}",
                        r.unit_id, r.population
                    )));
                }
            }
            let key = (r.unit_id.as_str(), r.year, &r.demographic);
            if !seen.insert(key) {
                return Err(Error::Malformed(format!(
                    "duplicate subgroup row for unit {} with demographics {:?}",
                    r.unit_id, r.demographic
                )));
            }
        }
        Ok(())
    }

    pub fn demographic_attributes(&self) -> BTreeSet<String> {
        self.rows
            .iter()
            .flat_map(|r| r.demographic.keys().cloned())
            .collect()
    }

    pub fn behaviors(&self) -> BTreeSet<String> {
        self.rows
            .iter()
            .flat_map(|r| r.behavioral.keys().cloned())
            .collect()
    }

    pub fn levels(&self, attribute: &str) -> BTreeSet<String> {
        self.rows
            .iter()
            .filter_map(|r| r.demographic.get(attribute).cloned())
            .collect()
    }

    /// Rows of a single year snapshot.
    pub fn for_year(&self, year: i32) -> SubgroupDataset {
        SubgroupDataset {
            rows: self
                .rows
                .iter()
                .filter(|r| r.year == Some(year))
                .cloned()
                .collect(),
        }
    }

    pub fn write(&self, writer: impl Write, id_column: &str) -> Result<()> {
        let demo: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.demographic.keys()).collect();
        let socio: BTreeSet<&String> =
            self.rows.iter().flat_map(|r| r.socioeconomic.keys()).collect();
        let behav: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.behavioral.keys()).collect();
        let has_year = self.rows.iter().any(|r| r.year.is_some());

        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![id_column.to_string()];
        if has_year {
            header.push("year".into());
        }
        header.push("population".into());
        header.extend(demo.iter().map(|d| format!("{DEMOGRAPHIC_PREFIX}{d}")));
        header.extend(socio.iter().map(|s| format!("{SOCIOECONOMIC_PREFIX}{s}")));
        header.extend(behav.iter().map(|b| format!("{BEHAVIORAL_PREFIX}{b}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.unit_id.clone()];
            if has_year {
                rec.push(r.year.map(|y| y.to_string()).unwrap_or_default());
            }
            rec.push(r.population.to_string());
            rec.extend(demo.iter().map(|d| r.demographic.get(*d).cloned().unwrap_or_default()));
            rec.extend(socio.iter().map(|s| {
                r.socioeconomic
                    .get(*s)
                    .map(|v| format!("{v:?}"))
                    .unwrap_or_default()
            }));
            rec.extend(behav.iter().map(|b| {
                r.behavioral.get(*b).copied().unwrap_or(0).to_string()
            }));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}
