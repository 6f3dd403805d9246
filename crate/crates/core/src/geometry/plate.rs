use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::Rng;

use super::{ON_EDGE, offset_positions, uniform_in_disk, BoundaryGroup, Point, Region};
use crate::error::{Error, Result};
use crate::stochastic::uniform;

pub const HALF_WIDTH: f64 = 10.0;
const NOMINAL_CENTER: f64 = 5.0;
const CENTER_SPREAD: f64 = 1.5;
const LOW_RADIUS: (f64, f64) = (0.8, 1.5);
const HIGH_RADIUS: (f64, f64) = (0.5, 3.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hole {
    pub center: Point,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variation {
    Low,
    High,
}

/// Square plate `[-10, 10]²` with four circular holes.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateDomain {
    pub half_width: f64,
    pub holes: Vec<Hole>,
}

fn quadrant_centers() -> [Point; 4] {
    let c = NOMINAL_CENTER;
    [Point::new(c, c), Point::new(c, -c), Point::new(-c, c), Point::new(-c, -c)]
}

impl PlateDomain {
    pub fn new(holes: Vec<Hole>) -> Result<Self> {
        for h in &holes {
            let inside = h.center.x.abs() + h.radius <= HALF_WIDTH && h.center.y.abs() + h.radius <= HALF_WIDTH;
            if !(h.radius > 0.0) || !inside {
                return Err(Error::InvalidArgument(alloc::format!("hole {h:?} leaves the plate")));
            }
        }
        Ok(Self {
            half_width: HALF_WIDTH,
            holes,
        })
    }

    /// Holes of equal radius at the four nominal centers `(±5, ±5)`.
    pub fn nominal(radius: f64) -> Self {
        let holes = quadrant_centers().map(|center| Hole { center, radius }).to_vec();
        Self::new(holes).expect("nominal plate is valid")
    }

    pub fn sample<R: Rng + ?Sized>(variation: Variation, rng: &mut R) -> Result<Self> {
        let holes = match variation {
            Variation::Low => quadrant_centers()
                .iter()
                .map(|&c| {
                    let center = c + uniform_in_disk(rng, CENTER_SPREAD);
                    let radius = uniform(rng, LOW_RADIUS.0, LOW_RADIUS.1);
                    Hole { center, radius }
                })
                .collect(),
            Variation::High => (0..4)
                .map(|_| {
                    let radius = uniform(rng, HIGH_RADIUS.0, HIGH_RADIUS.1);
                    let m = HALF_WIDTH - radius;
                    let center = Point::new(uniform(rng, -m, m), uniform(rng, -m, m));
                    Hole { center, radius }
                })
                .collect(),
        };
        Self::new(holes)
    }

    fn in_hole(&self, p: Point) -> Option<usize> {
        self.holes.iter().position(|h| p.dist(h.center) <= h.radius)
    }

    fn square_distance(&self, p: Point) -> f64 {
        let w = self.half_width;
        let (ax, ay) = (p.x.abs(), p.y.abs());
        if ax <= w && ay <= w {
            (w - ax).min(w - ay)
        } else {
            libm::hypot((ax - w).max(0.0), (ay - w).max(0.0))
        }
    }

    fn square_nearest(&self, p: Point) -> Point {
        let w = self.half_width;
        let c = Point::new(p.x.clamp(-w, w), p.y.clamp(-w, w));
        if c != p {
            return c;
        }
        let (dx, dy) = (w - p.x.abs(), w - p.y.abs());
        if dx <= dy {
            Point::new(w.copysign(p.x), p.y)
        } else {
            Point::new(p.x, w.copysign(p.y))
        }
    }

    pub(crate) fn sample_boundary<R: Rng + ?Sized>(&self, counts: &[usize], rng: &mut R) -> Result<Vec<BoundaryGroup>> {
        let w = self.half_width;
        let side = 2.0 * w;

        let tb_arc: Vec<f64> = offset_positions(2.0 * side, counts[0], rng).collect();
        let tb = tb_arc
            .iter()
            .map(|&s| if s < side { Point::new(-w + s, -w) } else { Point::new(-w + s - side, w) })
            .collect();

        let mut edge = |name: &str, x: f64, n: usize| {
            let arc: Vec<f64> = offset_positions(side, n, rng).collect();
            let points = arc.iter().map(|&s| Point::new(x, -w + s)).collect();
            BoundaryGroup {
                name: name.to_string(),
                points,
                arc,
            }
        };
        let left = edge("L", -w, counts[1]);
        let right = edge("R", w, counts[2]);

        let total: f64 = self.holes.iter().map(|h| TAU * h.radius).sum();
        let mut hole_points = Vec::new();
        let mut hole_arc = Vec::new();
        for s in offset_positions(total, counts[3], rng) {
            let mut rest = s;
            for (k, h) in self.holes.iter().enumerate() {
                let len = TAU * h.radius;
                if rest < len || k + 1 == self.holes.len() {
                    let p = h.center + Point::polar(h.radius, rest / h.radius);
                    let covered = self
                        .holes
                        .iter()
                        .enumerate()
                        .any(|(j, o)| j != k && p.dist(o.center) < o.radius);
                    if !covered {
                        hole_points.push(p);
                        hole_arc.push(s);
                    }
                    break;
                }
                rest -= len;
            }
        }
        if hole_points.is_empty() {
            return Err(Error::Empty("hole boundary after overlap removal"));
        }

        Ok(alloc::vec![
            BoundaryGroup {
                name: "TB".to_string(),
                points: tb,
                arc: tb_arc,
            },
            left,
            right,
            BoundaryGroup {
                name: "H".to_string(),
                points: hole_points,
                arc: hole_arc,
            },
        ])
    }
}

impl Region for PlateDomain {
    fn contains(&self, p: Point) -> bool {
        let w = self.half_width;
        p.x.abs() < w && p.y.abs() < w && self.in_hole(p).is_none() && self.boundary_distance(p) > ON_EDGE
    }

    /// Distance to the square edges and to each full hole circle. Where holes
    /// overlap this can undercut the true distance.
    fn boundary_distance(&self, p: Point) -> f64 {
        self.holes
            .iter()
            .map(|h| (p.dist(h.center) - h.radius).abs())
            .fold(self.square_distance(p), f64::min)
    }

    fn nearest_boundary_point(&self, p: Point) -> Point {
        let mut best = (self.square_distance(p), self.square_nearest(p));
        for h in &self.holes {
            let d = (p.dist(h.center) - h.radius).abs();
            if d < best.0 {
                let dir = p - h.center;
                let n = dir.norm();
                let q = if n == 0.0 {
                    h.center + Point::new(h.radius, 0.0)
                } else {
                    h.center + dir * (h.radius / n)
                };
                best = (d, q);
            }
        }
        best.1
    }

    fn bounds(&self) -> (Point, Point) {
        let w = self.half_width;
        (Point::new(-w, -w), Point::new(w, w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::stream_rng;

    #[test]
    fn nominal_plate_distance_at_origin() {
        let p = PlateDomain::nominal(1.0);
        let expected = libm::sqrt(50.0) - 1.0;
        assert!((p.boundary_distance(Point::ORIGIN) - expected).abs() < 1e-12);
        assert!(!p.contains(Point::new(5.0, -5.0)));
        assert!(p.contains(Point::ORIGIN));
    }

    #[test]
    fn maximal_holes_fit() {
        let p = PlateDomain::nominal(1.5);
        assert_eq!(p.holes.len(), 4);
        assert!(p.holes.iter().all(|h| h.radius == 1.5));
    }

    #[test]
    fn low_variation_ranges() {
        let mut rng = stream_rng(9, 0);
        for _ in 0..200 {
            let p = PlateDomain::sample(Variation::Low, &mut rng).unwrap();
            for (h, c) in p.holes.iter().zip(quadrant_centers()) {
                assert!((0.8..=1.5).contains(&h.radius));
                assert!(h.center.dist(c) <= 1.5);
            }
        }
    }

    #[test]
    fn high_variation_holes_stay_inside() {
        let mut rng = stream_rng(9, 1);
        for _ in 0..200 {
            let p = PlateDomain::sample(Variation::High, &mut rng).unwrap();
            for h in &p.holes {
                for edge in [10.0 - h.center.x, 10.0 + h.center.x, 10.0 - h.center.y, 10.0 + h.center.y] {
                    assert!(edge >= h.radius);
                }
            }
        }
    }

    #[test]
    fn groups_lie_on_their_segments() {
        let p = PlateDomain::sample(Variation::High, &mut stream_rng(2, 0)).unwrap();
        let groups = p.sample_boundary(&[40, 20, 20, 80], &mut stream_rng(2, 1)).unwrap();
        assert!(groups[1].points.iter().all(|q| q.x == -10.0));
        assert!(groups[2].points.iter().all(|q| q.x == 10.0));
        assert!(groups[0].points.iter().all(|q| q.y.abs() == 10.0));
        for q in &groups[3].points {
            let on = p.holes.iter().any(|h| (q.dist(h.center) - h.radius).abs() < 1e-9);
            assert!(on);
        }
        for g in &groups {
            for q in &g.points {
                assert!(p.boundary_distance(*q) < 1e-9);
            }
        }
    }

    #[test]
    fn nearest_point_from_inside_square() {
        let p = PlateDomain::nominal(1.0);
        assert_eq!(p.nearest_boundary_point(Point::new(9.5, 0.0)), Point::new(10.0, 0.0));
        let q = p.nearest_boundary_point(Point::new(5.0, 3.0));
        assert!((q.dist(Point::new(5.0, 4.0))) < 1e-12);
    }
}
