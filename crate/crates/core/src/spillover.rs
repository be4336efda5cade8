//! Directional spillover fields.
//!
//! Unit `j` spills into its neighbor `i` through each lag coefficient:
//! `S_ijv = γ_jv w_ij`, with the local ρ_j as one more channel. Magnitudes
//! `|S|` are summed per focal unit over the 16 compass sectors in which its
//! neighbors lie, then averaged over cluster members.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::Point;
use crate::models::{lag_name, LocalFit};
use crate::regionalize::Regionalization;
use crate::weights::WeightsMatrix;

pub const SECTORS: usize = 16;
pub const SECTOR_WIDTH_DEG: f64 = 360.0 / SECTORS as f64;

/// Clockwise from North.
pub const SECTOR_LABELS: [&str; SECTORS] = [
    "N", "NNE", "NE", "ENE", "E", "ESE", "SE", "SSE", "S", "SSW", "SW", "WSW", "W", "WNW", "NW",
    "NNW",
];

pub type SectorVector = [f64; SECTORS];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverPair {
    /// Focal unit receiving the effect.
    pub i: usize,
    /// Neighbor emitting it.
    pub j: usize,
    /// Signed `S_ij` per channel.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverPairs {
    pub channels: Vec<String>,
    pub pairs: Vec<SpilloverPair>,
    /// Pairs dropped because the neighbor had no local coefficients.
    pub skipped: usize,
}

/// `S_ijv = γ_jv w_ij` for every `w_ij > 0`. The `Wy` channel, when the
/// local fit has one, comes first.
pub fn pairwise_spillover(local: &LocalFit, w: &WeightsMatrix) -> Result<SpilloverPairs> {
    if w.n() != local.units.len() {
        return Err(Error::LengthMismatch {
            expected: local.units.len(),
            got: w.n(),
        });
    }
    if !w.is_row_standardized() {
        return Err(Error::InvalidArgument(
            "spatial weights must be row-standardized".into(),
        ));
    }
    let mut channels = Vec::new();
    if local.has_rho {
        channels.push(lag_name(&local.dependent));
    }
    channels.extend(local.lagged.iter().map(|v| lag_name(v)));

    let mut pairs = Vec::with_capacity(w.nnz());
    let mut skipped = 0;
    for (i, j, wij) in w.triplets() {
        let Some(c) = &local.units[j] else {
            skipped += 1;
            continue;
        };
        let values = c.rho.iter().chain(&c.gamma).map(|g| g * wij).collect();
        pairs.push(SpilloverPair { i, j, values });
    }
    if skipped > 0 {
        log::warn!("{skipped} spillover pair(s) skipped for missing local coefficients");
    }
    Ok(SpilloverPairs {
        channels,
        pairs,
        skipped,
    })
}

/// Compass bearing from `from` to `to` in degrees, `[0, 360)`, 0 = North,
/// clockwise.
pub fn bearing(from: Point, to: Point) -> f64 {
    let deg = (to[0] - from[0]).atan2(to[1] - from[1]).to_degrees();
    let b = deg.rem_euclid(360.0);
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

/// Sector `floor(((b + 11.25) mod 360) / 22.5)`.
pub fn sector(bearing_deg: f64) -> usize {
    let shifted = (bearing_deg + SECTOR_WIDTH_DEG / 2.0).rem_euclid(360.0);
    ((shifted / SECTOR_WIDTH_DEG).floor() as usize).min(SECTORS - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverField {
    pub channels: Vec<String>,
    /// `[unit][channel]` sector magnitudes.
    pub per_channel: Vec<Vec<SectorVector>>,
    /// `[unit]` sum over channels.
    pub combined: Vec<SectorVector>,
    pub warnings: Vec<String>,
}

/// Sums `|S_ijv|` per focal unit, channel and sector of the bearing from
/// `i` to `j`. Coincident centroids go to sector 0 with a warning.
pub fn bin_directions(pairs: &SpilloverPairs, centroids: &[Point]) -> SpilloverField {
    let n = centroids.len();
    let c = pairs.channels.len();
    let mut per_channel = vec![vec![[0.0; SECTORS]; c]; n];
    let mut warnings = Vec::new();
    for p in &pairs.pairs {
        let (a, b) = (centroids[p.i], centroids[p.j]);
        let s = if a == b {
            warnings.push(format!("units {} and {} share a centroid; assigned to N", p.i, p.j));
            0
        } else {
            sector(bearing(a, b))
        };
        for (ch, v) in p.values.iter().enumerate() {
            per_channel[p.i][ch][s] += v.abs();
        }
    }
    let combined = per_channel
        .par_iter()
        .map(|chans| {
            let mut out = [0.0; SECTORS];
            for v in chans {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += x;
                }
            }
            out
        })
        .collect();
    SpilloverField {
        channels: pairs.channels.clone(),
        per_channel,
        combined,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpillover {
    /// Indexed by cluster label.
    pub vectors: Vec<SectorVector>,
}

/// Mean combined vector over each cluster's members.
pub fn aggregate_clusters(field: &SpilloverField, reg: &Regionalization) -> ClusterSpillover {
    let vectors = reg
        .members()
        .iter()
        .map(|m| {
            let mut out = [0.0; SECTORS];
            for &pos in m {
                for (o, x) in out.iter_mut().zip(&field.combined[reg.units[pos]]) {
                    *o += x;
                }
            }
            out.iter_mut().for_each(|o| *o /= m.len() as f64);
            out
        })
        .collect();
    ClusterSpillover { vectors }
}
