//! JSON payloads served to the frontend. Every payload is computed from
//! session state alone; the client never recomputes statistics.

use std::collections::BTreeMap;

use rand::Rng;
use serde_json::{json, Value};

use super::session::{Loaded, Session};
use crate::error::{Error, Result};
use crate::geodata::minmax_normalize;
use crate::spillover::{aggregate_clusters, SECTOR_LABELS};
use crate::synthgen::rng;

pub fn variables(l: &Loaded) -> Value {
    let attrs: BTreeMap<String, Vec<String>> = l
        .subgroups
        .demographic_attributes()
        .into_iter()
        .map(|a| {
            let levels = l.subgroups.levels(&a).into_iter().collect();
            (a, levels)
        })
        .collect();
    json!({
        "n_units": l.frame.len(),
        "variables": l.frame.variable_names(),
        "demographic_attributes": attrs,
        "behaviors": l.subgroups.behaviors(),
        "join_report": l.report.lines(),
    })
}

/// Frame values of a displayable variable: the selected group's rate under
/// the dependent's name, or a census variable.
fn values(s: &Session, name: &str) -> Result<Vec<f64>> {
    let spec = &s.spec_state()?.request.spec;
    if name == spec.dependent {
        return Ok(s
            .selected()?
            .rate
            .iter()
            .map(|r| r.unwrap_or(f64::NAN))
            .collect());
    }
    Ok(s.loaded()?.frame.variable(name)?.to_vec())
}

fn shown_variables(s: &Session) -> Result<Vec<String>> {
    let mut out = vec![s.spec_state()?.request.spec.dependent.clone()];
    for v in &s.region_state()?.variables {
        if !out.contains(v) {
            out.push(v.clone());
        }
    }
    Ok(out)
}

/// Per variable, clustered units in leaf order with values min-max
/// normalized, plus the cluster runs along that order.
pub fn projection(s: &Session) -> Result<Value> {
    let l = s.loaded()?;
    let r = s.region_state()?;
    let order = r.reg.leaf_order_units();
    let ids = l.frame.unit_ids();
    let mut vars = Vec::new();
    for name in shown_variables(s)? {
        let all = values(s, &name)?;
        let raw: Vec<f64> = order.iter().map(|&u| all[u]).collect();
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vars.push(json!({
            "name": name,
            "values": minmax_normalize(&raw),
            "min": lo,
            "max": hi,
        }));
    }
    let segments: Vec<Value> = r
        .reg
        .segments()
        .into_iter()
        .map(|(cluster, start, end)| json!({"cluster": cluster, "start": start, "end": end}))
        .collect();
    Ok(json!({
        "n": order.len(),
        "k": r.reg.k,
        "n_clusters": r.reg.n_clusters,
        "leaf_order": r.reg.leaf_order,
        "unit_ids": order.iter().map(|&u| &ids[u]).collect::<Vec<_>>(),
        "variables": vars,
        "segments": segments,
    }))
}

pub fn glyphs(s: &Session) -> Result<Value> {
    let r = s.region_state()?;
    let local = s.local_state()?;
    let spill = aggregate_clusters(&local.field, &r.reg);
    let glyphs: Vec<Value> = (0..r.reg.n_clusters)
        .map(|c| {
            Ok(json!({
                "cluster": c,
                "size": r.stats.sizes[c],
                "radar": {
                    "variables": r.stats.variables,
                    "normalized": r.stats.normalized[c],
                    "means": r.stats.means[c],
                },
                "spillover": spill.vectors[c],
                "representative": representative(s, c)?,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(json!({
        "sectors": SECTOR_LABELS,
        "channels": local.field.channels,
        "glyphs": glyphs,
    }))
}

pub fn cluster_histograms(s: &Session, bins: usize) -> Result<Value> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let r = s.region_state()?;
    let members = r.reg.members();
    let mut out = Vec::new();
    for name in shown_variables(s)? {
        let all = values(s, &name)?;
        let lo = r.reg.units.iter().map(|&u| all[u]).fold(f64::INFINITY, f64::min);
        let hi = r.reg.units.iter().map(|&u| all[u]).fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|b| lo + width * b as f64).collect();
        let clusters: Vec<Value> = members
            .iter()
            .enumerate()
            .map(|(c, m)| {
                let mut counts = vec![0usize; bins];
                for &pos in m {
                    let v = all[r.reg.units[pos]];
                    let b = if width > 0.0 {
                        (((v - lo) / width).floor() as usize).min(bins - 1)
                    } else {
                        0
                    };
                    counts[b] += 1;
                }
                let density: Vec<f64> = counts.iter().map(|&k| k as f64 / m.len() as f64).collect();
                json!({"cluster": c, "counts": counts, "density": density})
            })
            .collect();
        out.push(json!({"name": name, "edges": edges, "clusters": clusters}));
    }
    Ok(json!({"bins": bins, "variables": out}))
}

/// The member unit nearest the cluster's mean centroid; its coordinate can
/// be handed to any street-level imagery provider.
pub fn representative(s: &Session, cluster: usize) -> Result<Value> {
    let l = s.loaded()?;
    let r = s.region_state()?;
    let members = r.reg.members();
    let m = members
        .get(cluster)
        .ok_or_else(|| Error::InvalidArgument(format!("no cluster {cluster}")))?;
    let c = l.frame.centroids();
    let units: Vec<usize> = m.iter().map(|&p| r.reg.units[p]).collect();
    let k = units.len() as f64;
    let mean = [
        units.iter().map(|&u| c[u][0]).sum::<f64>() / k,
        units.iter().map(|&u| c[u][1]).sum::<f64>() / k,
    ];
    let best = *units
        .iter()
        .min_by(|&&a, &&b| {
            let d = |u: usize| (c[u][0] - mean[0]).powi(2) + (c[u][1] - mean[1]).powi(2);
            d(a).total_cmp(&d(b)).then(a.cmp(&b))
        })
        .expect("clusters are nonempty");
    let lonlat = l.frame.meta.projection.unproject(c[best]);
    Ok(json!({
        "cluster": cluster,
        "unit_id": l.frame.meta.units[best].id,
        "x": c[best][0],
        "y": c[best][1],
        "lon": lonlat[0],
        "lat": lonlat[1],
    }))
}

/// Draws `min(m, population)` individuals without replacement from the
/// (demographic profile, exhibited or not) categories of the cluster's
/// subgroup rows.
pub fn parallel_sets_sample(s: &Session, cluster: usize, m: usize, seed: u64) -> Result<Value> {
    let l = s.loaded()?;
    let r = s.region_state()?;
    let behavior = &s.spec_state()?.request.spec.dependent;
    let members = r.reg.members();
    let m_units = members
        .get(cluster)
        .ok_or_else(|| Error::InvalidArgument(format!("no cluster {cluster}")))?;
    let ids: std::collections::BTreeSet<&str> = m_units
        .iter()
        .map(|&p| l.frame.meta.units[r.reg.units[p]].id.as_str())
        .collect();

    let mut categories: BTreeMap<(Vec<(String, String)>, bool), u64> = BTreeMap::new();
    for row in l.subgroups.rows.iter().filter(|row| ids.contains(row.unit_id.as_str())) {
        let demo: Vec<(String, String)> = row.demographic.clone().into_iter().collect();
        let yes = row.behavioral.get(behavior).copied().unwrap_or(0);
        *categories.entry((demo.clone(), true)).or_default() += yes;
        *categories.entry((demo, false)).or_default() += row.population - yes;
    }
    let mut cats: Vec<((Vec<(String, String)>, bool), u64)> = categories.into_iter().collect();
    let total: u64 = cats.iter().map(|c| c.1).sum();
    let draws = (m as u64).min(total);
    let mut remaining = total;
    let mut rng = rng(seed);
    let mut drawn = vec![0u64; cats.len()];
    let mut individuals = Vec::with_capacity(draws as usize);
    for _ in 0..draws {
        let mut t = rng.random_range(0..remaining);
        let idx = cats
            .iter()
            .position(|c| {
                if t < c.1 {
                    true
                } else {
                    t -= c.1;
                    false
                }
            })
            .expect("draw falls in a category");
        cats[idx].1 -= 1;
        drawn[idx] += 1;
        remaining -= 1;
        let ((demo, yes), _) = &cats[idx];
        let mut ind: serde_json::Map<String, Value> =
            demo.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        ind.insert(behavior.clone(), json!(if *yes { "yes" } else { "no" }));
        individuals.push(Value::Object(ind));
    }
    let counts: Vec<Value> = cats
        .iter()
        .zip(&drawn)
        .filter(|(_, d)| **d > 0)
        .map(|(((demo, yes), _), &d)| {
            let mut obj: serde_json::Map<String, Value> =
                demo.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
            obj.insert(behavior.clone(), json!(if *yes { "yes" } else { "no" }));
            obj.insert("count".into(), json!(d));
            Value::Object(obj)
        })
        .collect();
    let mut dimensions: Vec<String> = l.subgroups.demographic_attributes().into_iter().collect();
    dimensions.push(behavior.clone());
    Ok(json!({
        "cluster": cluster,
        "m": draws,
        "seed": seed,
        "population": total,
        "dimensions": dimensions,
        "individuals": individuals,
        "counts": counts,
    }))
}
