use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng;

use super::{ON_EDGE, offset_positions, project_to_segment, uniform_in_disk, BoundaryGroup, Point, Region};
use crate::error::{Error, Result};
use crate::stochastic::uniform;

const ANCHOR_RADIUS: f64 = 0.25;
const MAX_TRIES: usize = 1000;

/// Simple polygon with counterclockwise vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonDomain {
    vertices: Vec<Point>,
}

impl PolygonDomain {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidArgument("polygon needs at least 3 vertices".to_string()));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::NonFinite("polygon vertex".to_string()));
        }
        let poly = Self { vertices };
        if poly.signed_area() <= 0.0 {
            return Err(Error::InvalidArgument("polygon is not counterclockwise".to_string()));
        }
        if !poly.is_simple() {
            return Err(Error::InvalidArgument("polygon is self-intersecting".to_string()));
        }
        Ok(poly)
    }

    /// Vertex `k` at `anchor_k + offsets[k]`, anchors on the unit circle at `2πk/5 + phi`.
    pub fn from_parts(phi: f64, offsets: [Point; 5]) -> Result<Self> {
        let vertices = (0..5)
            .map(|k| Point::polar(1.0, TAU * k as f64 / 5.0 + phi) + offsets[k])
            .collect();
        Self::new(vertices)
    }

    /// Regular pentagon of circumradius 1 with a vertex at angle π/10.
    pub fn regular() -> Self {
        Self::from_parts(PI / 10.0, [Point::ORIGIN; 5]).expect("regular pentagon is valid")
    }

    /// Random pentagon: rotated anchors, each vertex uniform in a 0.25-disk about its anchor.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        for _ in 0..MAX_TRIES {
            let phi = uniform(rng, 0.0, TAU);
            let offsets = core::array::from_fn(|_| uniform_in_disk(rng, ANCHOR_RADIUS));
            if let Ok(p) = Self::from_parts(phi, offsets) {
                return Ok(p);
            }
        }
        Err(Error::RejectionLimit {
            what: "simple polygon",
            tries: MAX_TRIES,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn centroid(&self) -> Point {
        let a = self.signed_area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let c = p.cross(q);
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if !adjacent && segments_intersect(edges[i], edges[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// Arc-length position of boundary point `p`, measured from vertex 0.
    pub fn arc_position(&self, p: Point) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut start = 0.0;
        for (a, b) in self.edges() {
            let (q, t) = project_to_segment(p, a, b);
            let len = a.dist(b);
            let d = p.dist(q);
            if d < best.0 {
                best = (d, start + t * len);
            }
            start += len;
        }
        best.1
    }

    /// Point at arc length `s` (taken modulo the perimeter).
    pub fn point_at(&self, s: f64) -> Point {
        let per = self.perimeter();
        let mut s = super::wrap(s, per);
        for (a, b) in self.edges() {
            let len = a.dist(b);
            if s <= len {
                return a + (b - a) * (s / len);
            }
            s -= len;
        }
        self.vertices[0]
    }

    pub(crate) fn sample_boundary<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> BoundaryGroup {
        let arc: Vec<f64> = offset_positions(self.perimeter(), n, rng).collect();
        let points = arc.iter().map(|&s| self.point_at(s)).collect();
        BoundaryGroup {
            name: "boundary".to_string(),
            points,
            arc,
        }
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect((a, b): (Point, Point), (c, d): (Point, Point)) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

impl Region for PolygonDomain {
    /// Nonzero winding number; points within `ON_EDGE` of an edge count as outside.
    fn contains(&self, p: Point) -> bool {
        if self.boundary_distance(p) <= ON_EDGE {
            return false;
        }
        let mut winding = 0i32;
        for (a, b) in self.edges() {
            let o = orient(a, b, p);
            if a.y <= p.y {
                if b.y > p.y && o > 0.0 {
                    winding += 1;
                }
            } else if b.y <= p.y && o < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }

    fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| p.dist(project_to_segment(p, a, b).0))
            .fold(f64::INFINITY, f64::min)
    }

    fn nearest_boundary_point(&self, p: Point) -> Point {
        let mut best = (f64::INFINITY, p);
        for (a, b) in self.edges() {
            let q = project_to_segment(p, a, b).0;
            let d = p.dist(q);
            if d < best.0 {
                best = (d, q);
            }
        }
        best.1
    }

    fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }
}
