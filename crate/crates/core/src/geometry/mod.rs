//! Variable domains: five-vertex polygons and square plates with four holes.

mod plate;
mod polygon;

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::ops::{Add, Mul, Sub};

use rand::Rng;

use crate::error::{Error, Result};
use crate::stochastic::uniform;

pub use plate::{Hole, PlateDomain, Variation};
pub use polygon::PolygonDomain;

/// `s` reduced into `[0, period)`.
pub(crate) fn wrap(s: f64, period: f64) -> f64 {
    let r = libm::fmod(s, period);
    if r < 0.0 {
        r + period
    } else {
        r
    }
}

/// Points closer than this to a boundary count as outside.
pub(crate) const ON_EDGE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Self::new(r * libm::cos(theta), r * libm::sin(theta))
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Uniform point in the disk of radius `r` about the origin.
pub fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, r: f64) -> Point {
    let rho = r * libm::sqrt(rng.random::<f64>());
    Point::polar(rho, uniform(rng, 0.0, TAU))
}

/// Closest point on segment `[a, b]` to `p`, and its fraction along the segment.
pub fn project_to_segment(p: Point, a: Point, b: Point) -> (Point, f64) {
    let d = b - a;
    let len2 = d.dot(d);
    let t = if len2 > 0.0 { ((p - a).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * t, t)
}

/// Queries shared by every domain the oracle and samplers work with.
pub trait Region {
    /// Strict interior membership.
    fn contains(&self, p: Point) -> bool;

    /// Euclidean distance to the nearest boundary feature.
    fn boundary_distance(&self, p: Point) -> f64;

    fn nearest_boundary_point(&self, p: Point) -> Point;

    /// Lower-left and upper-right corners of an axis-aligned bounding box.
    fn bounds(&self) -> (Point, Point);

    fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.dist(hi)
    }
}

/// Disk of radius `radius` about `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Region for Disk {
    fn contains(&self, p: Point) -> bool {
        p.dist(self.center) < self.radius
    }

    fn boundary_distance(&self, p: Point) -> f64 {
        (p.dist(self.center) - self.radius).abs()
    }

    fn nearest_boundary_point(&self, p: Point) -> Point {
        let d = p - self.center;
        let n = d.norm();
        if n == 0.0 {
            self.center + Point::new(self.radius, 0.0)
        } else {
            self.center + d * (self.radius / n)
        }
    }

    fn bounds(&self) -> (Point, Point) {
        let r = Point::new(self.radius, self.radius);
        (self.center - r, self.center + r)
    }
}

/// Boundary points of one named segment with their arc-length positions.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGroup {
    pub name: String,
    pub points: Vec<Point>,
    pub arc: Vec<f64>,
}

/// Interior collocation points plus the named boundary groups of one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    pub interior: Vec<Point>,
    pub groups: Vec<BoundaryGroup>,
}

impl CollocationSet {
    pub fn group(&self, name: &str) -> Result<&BoundaryGroup> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("missing boundary group {name:?}")))
    }

    pub fn boundary_points(&self) -> Vec<Point> {
        self.groups.iter().flat_map(|g| g.points.iter().copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Polygon(PolygonDomain),
    Plate(PlateDomain),
}

impl Domain {
    pub fn group_names(&self) -> &'static [&'static str] {
        match self {
            Domain::Polygon(_) => &["boundary"],
            Domain::Plate(_) => &["TB", "L", "R", "H"],
        }
    }

    /// Places `counts[k]` points on group `k` of `group_names()`.
    pub fn sample_boundary<R: Rng + ?Sized>(&self, counts: &[usize], rng: &mut R) -> Result<Vec<BoundaryGroup>> {
        let names = self.group_names();
        if counts.len() != names.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "expected {} boundary counts, got {}",
                names.len(),
                counts.len()
            )));
        }
        if counts.contains(&0) {
            return Err(Error::Empty("boundary group point count"));
        }
        match self {
            Domain::Polygon(d) => Ok(alloc::vec![d.sample_boundary(counts[0], rng)]),
            Domain::Plate(d) => d.sample_boundary(counts, rng),
        }
    }

    /// Fixed-length parameter vector: vertex coordinates or hole `(x, y, r)`.
    pub fn parametric(&self) -> Vec<f64> {
        match self {
            Domain::Polygon(d) => d.vertices().iter().flat_map(|v| [v.x, v.y]).collect(),
            Domain::Plate(d) => d.holes.iter().flat_map(|h| [h.center.x, h.center.y, h.radius]).collect(),
        }
    }
}

impl Region for Domain {
    fn contains(&self, p: Point) -> bool {
        match self {
            Domain::Polygon(d) => d.contains(p),
            Domain::Plate(d) => d.contains(p),
        }
    }

    fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            Domain::Polygon(d) => d.boundary_distance(p),
            Domain::Plate(d) => d.boundary_distance(p),
        }
    }

    fn nearest_boundary_point(&self, p: Point) -> Point {
        match self {
            Domain::Polygon(d) => d.nearest_boundary_point(p),
            Domain::Plate(d) => d.nearest_boundary_point(p),
        }
    }

    fn bounds(&self) -> (Point, Point) {
        match self {
            Domain::Polygon(d) => d.bounds(),
            Domain::Plate(d) => d.bounds(),
        }
    }
}

/// `n` interior points by rejection from the bounding box.
pub fn sample_interior<G: Region + ?Sized, R: Rng + ?Sized>(region: &G, n: usize, rng: &mut R) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::Empty("interior point count"));
    }
    let (lo, hi) = region.bounds();
    let limit = 1000 * n + 10_000;
    let mut out = Vec::with_capacity(n);
    for _ in 0..limit {
        let p = Point::new(uniform(rng, lo.x, hi.x), uniform(rng, lo.y, hi.y));
        if region.contains(p) && region.boundary_distance(p) > 0.0 {
            out.push(p);
            if out.len() == n {
                return Ok(out);
            }
        }
    }
    Err(Error::RejectionLimit {
        what: "interior point",
        tries: limit,
    })
}

/// Equispaced positions `(i + u) * length / n` with one shared random offset `u`.
pub(crate) fn offset_positions<R: Rng + ?Sized>(length: f64, n: usize, rng: &mut R) -> impl Iterator<Item = f64> {
    let u: f64 = rng.random();
    let step = length / n as f64;
    (0..n).map(move |i| (i as f64 + u) * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::stream_rng;

    #[test]
    fn disk_queries() {
        let d = Disk {
            center: Point::ORIGIN,
            radius: 1.0,
        };
        assert!(d.contains(Point::new(0.5, 0.5)));
        assert!((d.boundary_distance(Point::new(0.3, 0.4)) - 0.5).abs() < 1e-15);
        assert_eq!(d.nearest_boundary_point(Point::new(0.0, 0.5)), Point::new(0.0, 1.0));
    }

    #[test]
    fn zero_boundary_request_fails() {
        let dom = Domain::Polygon(PolygonDomain::regular());
        assert!(dom.sample_boundary(&[0], &mut stream_rng(0, 0)).is_err());
        assert!(dom.sample_boundary(&[3, 3], &mut stream_rng(0, 0)).is_err());
        assert!(sample_interior(&dom, 0, &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn parametric_lengths() {
        assert_eq!(Domain::Polygon(PolygonDomain::regular()).parametric().len(), 10);
        assert_eq!(Domain::Plate(PlateDomain::nominal(1.5)).parametric().len(), 12);
    }

    #[test]
    fn projection_clamps() {
        let (q, t) = project_to_segment(Point::new(3.0, 1.0), Point::ORIGIN, Point::new(2.0, 0.0));
        assert_eq!(q, Point::new(2.0, 0.0));
        assert_eq!(t, 1.0);
    }
}
