//! Planar polygon primitives: validity, area centroids and bounding boxes.
//!
//! Rings are stored open (the closing vertex of a GeoJSON ring is dropped on
//! ingestion) and the same routines serve lon-lat and projected coordinates.

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holes: Vec<Vec<Point>>,
}

/// A polygon or multipolygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub polygons: Vec<Polygon>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn empty() -> Self {
        BoundingBox {
            min: [f64::INFINITY, f64::INFINITY],
            max: [f64::NEG_INFINITY, f64::NEG_INFINITY],
        }
    }

    pub fn extend(&mut self, p: Point) {
        self.min[0] = self.min[0].min(p[0]);
        self.min[1] = self.min[1].min(p[1]);
        self.max[0] = self.max[0].max(p[0]);
        self.max[1] = self.max[1].max(p[1]);
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p[0] >= self.min[0] - tol
            && p[0] <= self.max[0] + tol
            && p[1] >= self.min[1] - tol
            && p[1] <= self.max[1] + tol
    }

    pub fn intersects(&self, other: &BoundingBox, tol: f64) -> bool {
        self.min[0] <= other.max[0] + tol
            && other.min[0] <= self.max[0] + tol
            && self.min[1] <= other.max[1] + tol
            && other.min[1] <= self.max[1] + tol
    }

    pub fn center(&self) -> Point {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

impl Polygon {
    pub fn new(exterior: Vec<Point>) -> Self {
        Polygon {
            exterior,
            holes: Vec::new(),
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Point>> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    fn map(&self, f: &impl Fn(Point) -> Point) -> Polygon {
        Polygon {
            exterior: self.exterior.iter().map(|&p| f(p)).collect(),
            holes: self
                .holes
                .iter()
                .map(|h| h.iter().map(|&p| f(p)).collect())
                .collect(),
        }
    }
}

impl Geometry {
    pub fn polygon(exterior: Vec<Point>) -> Self {
        Geometry {
            polygons: vec![Polygon::new(exterior)],
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Point>> {
        self.polygons.iter().flat_map(Polygon::rings)
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.rings().flat_map(|r| r.iter().copied())
    }

    /// All boundary segments of every ring.
    pub fn segments(&self) -> Vec<(Point, Point)> {
        let mut out = Vec::new();
        for ring in self.rings() {
            let n = ring.len();
            for i in 0..n {
                out.push((ring[i], ring[(i + 1) % n]));
            }
        }
        out
    }

    pub fn bbox(&self) -> BoundingBox {
        let mut bb = BoundingBox::empty();
        for p in self.vertices() {
            bb.extend(p);
        }
        bb
    }

    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Geometry {
        Geometry {
            polygons: self.polygons.iter().map(|p| p.map(&f)).collect(),
        }
    }

    /// Area-weighted centroid. Holes subtract. Falls back to the vertex mean
    /// when the total area vanishes.
    pub fn centroid(&self) -> Point {
        let mut area = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for poly in &self.polygons {
            for (k, ring) in poly.rings().enumerate() {
                let (a, x, y) = ring_moments(ring);
                // exterior counts positive, holes negative, regardless of winding
                let sign = if k == 0 { 1.0 } else { -1.0 };
                let s = sign * a.signum();
                area += s * a;
                cx += s * x;
                cy += s * y;
            }
        }
        if area.abs() > 0.0 {
            [cx / area, cy / area]
        } else {
            let (mut sx, mut sy, mut c) = (0.0, 0.0, 0.0);
            for p in self.vertices() {
                sx += p[0];
                sy += p[1];
                c += 1.0;
            }
            [sx / c, sy / c]
        }
    }

    pub fn area(&self) -> f64 {
        let mut area = 0.0;
        for poly in &self.polygons {
            for (k, ring) in poly.rings().enumerate() {
                let a = ring_moments(ring).0.abs();
                area += if k == 0 { a } else { -a };
            }
        }
        area
    }

    /// Checks every ring for at least three distinct vertices and for
    /// self-intersection. Returns a description of the first problem found.
    pub fn validate(&self) -> Result<(), String> {
        if self.polygons.is_empty() {
            return Err("geometry has no polygons".into());
        }
        for (pi, poly) in self.polygons.iter().enumerate() {
            for (ri, ring) in poly.rings().enumerate() {
                if ring.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                    return Err(format!("polygon {pi} ring {ri}: non-finite coordinate"));
                }
                let mut distinct: Vec<Point> = Vec::new();
                for &p in ring {
                    if !distinct.contains(&p) {
                        distinct.push(p);
                    }
                }
                if distinct.len() < 3 {
                    return Err(format!(
                        "polygon {pi} ring {ri}: fewer than 3 distinct vertices"
                    ));
                }
                if let Some((a, b)) = first_self_intersection(ring) {
                    return Err(format!(
                        "polygon {pi} ring {ri}: self-intersection between edges {a} and {b}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Returns (signed area, signed x moment, signed y moment) of a ring so that
/// centroid = (mx / area, my / area).
fn ring_moments(ring: &[Point]) -> (f64, f64, f64) {
    let n = ring.len();
    if n < 3 {
        return (0.0, 0.0, 0.0);
    }
    // shift to the first vertex to limit cancellation on projected coordinates
    let o = ring[0];
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = [ring[i][0] - o[0], ring[i][1] - o[1]];
        let q = [ring[(i + 1) % n][0] - o[0], ring[(i + 1) % n][1] - o[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    let area = 0.5 * a2;
    if area == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let mx = cx / 6.0 + o[0] * area;
    let my = cy / 6.0 + o[1] * area;
    (area, mx, my)
}

fn first_self_intersection(ring: &[Point]) -> Option<(usize, usize)> {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if a == b {
            continue;
        }
        for j in (i + 1)..n {
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if c == d {
                continue;
            }
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // neighbouring edges share one endpoint; they must not fold back
                let shared = if j == i + 1 { b } else { a };
                let other_ab = if shared == b { a } else { b };
                let other_cd = if shared == c { d } else { c };
                if collinear_overlap(shared, other_ab, shared, other_cd) {
                    return Some((i, j));
                }
            } else if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Two segments from a common start point overlap along a positive length.
fn collinear_overlap(s: Point, a: Point, s2: Point, b: Point) -> bool {
    debug_assert_eq!(s, s2);
    let u = [a[0] - s[0], a[1] - s[1]];
    let v = [b[0] - s[0], b[1] - s[1]];
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross == 0.0 && dot > 0.0
}

/// Distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Length of the collinear overlap of two segments, zero when they are not
/// collinear within `tol`.
pub fn collinear_overlap_length(a: Point, b: Point, c: Point, d: Point, tol: f64) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len = (ab[0] * ab[0] + ab[1] * ab[1]).sqrt();
    if len == 0.0 {
        return 0.0;
    }
    let dir = [ab[0] / len, ab[1] / len];
    // perpendicular offsets of c and d from the line through ab
    let off = |p: Point| ((p[0] - a[0]) * dir[1] - (p[1] - a[1]) * dir[0]).abs();
    if off(c) > tol || off(d) > tol {
        return 0.0;
    }
    let proj = |p: Point| (p[0] - a[0]) * dir[0] + (p[1] - a[1]) * dir[1];
    let (t0, t1) = {
        let (x, y) = (proj(c), proj(d));
        (x.min(y), x.max(y))
    };
    (t1.min(len) - t0.max(0.0)).max(0.0)
}
