//! Social-group query engine: enumerates groups from demographic attributes
//! and pools subgroup counts into per-unit behavior rates.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::SubgroupDataset;

/// Units whose matched population falls below this are treated as missing.
pub const DEFAULT_MIN_POP: u64 = 10;

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub selectors: BTreeMap<String, String>,
}

impl GroupKey {
    pub fn all() -> Self {
        GroupKey::default()
    }

    pub fn new<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        GroupKey {
            selectors: pairs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    pub fn matches(&self, demographic: &BTreeMap<String, String>) -> bool {
        self.selectors
            .iter()
            .all(|(k, v)| demographic.get(k) == Some(v))
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.selectors.is_empty() {
            return write!(f, "all");
        }
        let parts: Vec<String> = self
            .selectors
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Per-unit dependent variable for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSeries {
    pub group: GroupKey,
    pub behavior: String,
    /// `None` where the matched population is below the threshold.
    pub rate: Vec<Option<f64>>,
    pub population: Vec<u64>,
    pub coverage: f64,
}

impl GroupSeries {
    /// A fully observed series, e.g. a synthetic dependent variable.
    pub fn complete(name: &str, values: Vec<f64>) -> Self {
        let n = values.len();
        GroupSeries {
            group: GroupKey::all(),
            behavior: name.to_string(),
            rate: values.into_iter().map(Some).collect(),
            population: vec![0; n],
            coverage: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate.is_empty()
    }

    pub fn defined_units(&self) -> Vec<usize> {
        self.rate
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_some_and(f64::is_finite))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Cartesian product of the observed levels of each attribute, in
/// lexicographic order.
pub fn enumerate_groups(attrs: &[String], sd: &SubgroupDataset) -> Result<Vec<GroupKey>> {
    if attrs.is_empty() {
        return Err(Error::InvalidArgument("no attributes given".into()));
    }
    let known = sd.demographic_attributes();
    let mut sorted: Vec<&String> = attrs.iter().collect();
    sorted.sort();
    sorted.dedup();
    for a in &sorted {
        if !known.contains(*a) {
            return Err(Error::UnknownAttribute((*a).clone()));
        }
    }
    let mut keys = vec![GroupKey::all()];
    for attr in sorted {
        let levels = sd.levels(attr);
        keys = keys
            .into_iter()
            .flat_map(|k| {
                levels.iter().map(move |lvl| {
                    let mut next = k.clone();
                    next.selectors.insert(attr.clone(), lvl.clone());
                    next
                })
            })
            .collect();
    }
    keys.sort();
    Ok(keys)
}

/// Pooled rate per unit: matched behavior counts over matched population.
pub fn aggregate_rate(
    sd: &SubgroupDataset,
    unit_ids: &[String],
    group: &GroupKey,
    behavior: &str,
    min_pop: u64,
) -> Result<GroupSeries> {
    if !sd.behaviors().contains(behavior) {
        return Err(Error::UnknownBehavior(behavior.to_string()));
    }
    let index: HashMap<&str, usize> = unit_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let n = unit_ids.len();
    let mut population = vec![0u64; n];
    let mut exhibited = vec![0u64; n];
    let mut matched_rows = 0usize;
    for row in &sd.rows {
        if !group.matches(&row.demographic) {
            continue;
        }
        matched_rows += 1;
        if let Some(&i) = index.get(row.unit_id.as_str()) {
            population[i] += row.population;
            exhibited[i] += row.behavioral.get(behavior).copied().unwrap_or(0);
        }
    }
    if matched_rows == 0 {
        return Err(Error::EmptyGroup(group.label()));
    }
    let rate: Vec<Option<f64>> = population
        .iter()
        .zip(&exhibited)
        .map(|(&p, &e)| (p >= min_pop.max(1)).then(|| e as f64 / p as f64))
        .collect();
    let covered = rate.iter().filter(|r| r.is_some()).count();
    Ok(GroupSeries {
        group: group.clone(),
        behavior: behavior.to_string(),
        rate,
        population,
        coverage: if n == 0 { 0.0 } else { covered as f64 / n as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::SubgroupRow;

    fn row(unit: &str, demo: &[(&str, &str)], pop: u64, voted: u64) -> SubgroupRow {
        SubgroupRow {
            unit_id: unit.into(),
            year: None,
            demographic: demo.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            socioeconomic: BTreeMap::new(),
            population: pop,
            behavioral: [("voted".to_string(), voted)].into_iter().collect(),
        }
    }

    fn dataset() -> SubgroupDataset {
        let mut rows = Vec::new();
        for edu in ["college", "no college"] {
            for race in ["Asian", "Black", "Hispanic", "White"] {
                rows.push(row("A", &[("edu", edu), ("race", race)], 20, 10));
            }
        }
        SubgroupDataset { rows }
    }

    #[test]
    fn product_of_levels() {
        let keys = enumerate_groups(&["edu".into(), "race".into()], &dataset()).unwrap();
        assert_eq!(keys.len(), 8);
        let edu = enumerate_groups(&["edu".into()], &dataset()).unwrap();
        assert_eq!(edu[0].selectors["edu"], "college");
        assert_eq!(edu[1].selectors["edu"], "no college");
    }

    #[test]
    fn unknown_attribute_is_named() {
        let err = enumerate_groups(&["age".into()], &dataset()).unwrap_err();
        assert!(matches!(err, Error::UnknownAttribute(a) if a == "age"));
    }

    #[test]
    fn single_row_rate() {
        let sd = SubgroupDataset {
            rows: vec![row("A", &[("race", "x")], 60, 30)],
        };
        let s = aggregate_rate(&sd, &["A".into()], &GroupKey::all(), "voted", 10).unwrap();
        assert_eq!(s.rate, vec![Some(0.5)]);
    }

    #[test]
    fn pooled_not_mean_of_rates() {
        let sd = SubgroupDataset {
            rows: vec![
                row("A", &[("race", "x"), ("edu", "a")], 20, 10),
                row("A", &[("race", "x"), ("edu", "b")], 40, 30),
            ],
        };
        let g = GroupKey::new([("race", "x")]);
        let s = aggregate_rate(&sd, &["A".into()], &g, "voted", 10).unwrap();
        assert!((s.rate[0].unwrap() - 40.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn small_population_is_missing() {
        let sd = SubgroupDataset {
            rows: vec![row("A", &[("race", "x")], 5, 1), row("B", &[("race", "x")], 50, 1)],
        };
        let s = aggregate_rate(&sd, &["A".into(), "B".into()], &GroupKey::all(), "voted", 10)
            .unwrap();
        assert_eq!(s.rate[0], None);
        assert_eq!(s.coverage, 0.5);
    }

    #[test]
    fn empty_group_errors() {
        let g = GroupKey::new([("race", "nobody")]);
        assert!(matches!(
            aggregate_rate(&dataset(), &["A".into()], &g, "voted", 1),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn marginal_consistency() {
        let sd = dataset();
        let ids = vec!["A".to_string()];
        let all = aggregate_rate(&sd, &ids, &GroupKey::all(), "voted", 1).unwrap();
        let keys = enumerate_groups(&["edu".into(), "race".into()], &sd).unwrap();
        let total: u64 = keys
            .iter()
            .map(|k| aggregate_rate(&sd, &ids, k, "voted", 1).unwrap().population[0])
            .sum();
        assert_eq!(total, all.population[0]);
    }
}
