use serde::{Deserialize, Serialize};

use super::{WeightsKind, WeightsMatrix};
use crate::geodata::geometry::{collinear_overlap_length, point_segment_distance, BoundingBox};
use crate::geodata::{MetaDataset, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ContiguityRule {
    /// Shared boundary point (vertex or edge).
    #[default]
    Queen,
    /// Shared boundary of positive length.
    Rook,
}

/// Binary contiguity weights from polygon boundaries.
pub fn build_contiguity(md: &MetaDataset, rule: ContiguityRule) -> WeightsMatrix {
    let n = md.len();
    let boxes: Vec<BoundingBox> = md.units.iter().map(|u| u.geometry.bbox()).collect();
    let segments: Vec<Vec<(Point, Point)>> =
        md.units.iter().map(|u| u.geometry.segments()).collect();

    let mut extent = BoundingBox::empty();
    for b in &boxes {
        extent.extend(b.min);
        extent.extend(b.max);
    }
    let tol = 1e-9 * extent.width().max(extent.height()).max(1e-6);

    // sweep over boxes sorted by their left edge
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| boxes[a].min[0].total_cmp(&boxes[b].min[0]).then(a.cmp(&b)));

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if boxes[j].min[0] > boxes[i].max[0] + tol {
                break;
            }
            if !boxes[i].intersects(&boxes[j], tol) {
                continue;
            }
            let adjacent = match rule {
                ContiguityRule::Rook => shares_edge(&segments[i], &segments[j], tol),
                ContiguityRule::Queen => {
                    shares_edge(&segments[i], &segments[j], tol)
                        || touches(&segments[i], &segments[j], tol)
                        || touches(&segments[j], &segments[i], tol)
                }
            };
            if adjacent {
                rows[i].push((j, 1.0));
                rows[j].push((i, 1.0));
            }
        }
    }
    let kind = match rule {
        ContiguityRule::Queen => WeightsKind::Queen,
        ContiguityRule::Rook => WeightsKind::Rook,
    };
    WeightsMatrix::from_rows(rows, kind).expect("contiguity rows are well formed")
}

fn shares_edge(a: &[(Point, Point)], b: &[(Point, Point)], tol: f64) -> bool {
    a.iter().any(|&(p, q)| {
        b.iter()
            .any(|&(r, s)| collinear_overlap_length(p, q, r, s, tol) > tol)
    })
}

/// Some vertex of `a` lies on the boundary of `b`.
fn touches(a: &[(Point, Point)], b: &[(Point, Point)], tol: f64) -> bool {
    a.iter()
        .any(|&(p, _)| b.iter().any(|&(r, s)| point_segment_distance(p, r, s) <= tol))
}
