use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::rng::standard_normal;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Coordinate the squared-exponential kernel measures distance along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelAxis {
    X,
    Y,
}

impl KernelAxis {
    pub fn coord(self, p: Point) -> f64 {
        match self {
            KernelAxis::X => p.x,
            KernelAxis::Y => p.y,
        }
    }
}

/// Gaussian process with constant mean and kernel
/// `K(a, b) = exp(-(a - b)² / (2 l²))` along one coordinate axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpSpec {
    pub mean: f64,
    pub lengthscale: f64,
    pub axis: KernelAxis,
}

impl GpSpec {
    /// Prescribed pressure on the polygon boundary.
    pub const DARCY: GpSpec = GpSpec {
        mean: 0.0,
        lengthscale: 1.0,
        axis: KernelAxis::X,
    };

    /// Prescribed displacements on the left and right plate edges.
    pub const PLATE: GpSpec = GpSpec {
        mean: 1.0,
        lengthscale: 5.0,
        axis: KernelAxis::Y,
    };

    pub fn kernel(&self, a: f64, b: f64) -> f64 {
        let d = a - b;
        libm::exp(-d * d / (2.0 * self.lengthscale * self.lengthscale))
    }

    fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0) || !self.mean.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("invalid GP spec {self:?}")));
        }
        Ok(())
    }
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Factorised GP prior over a fixed point set; draws are `mean + L z`.
///
/// Points sharing a kernel coordinate are collapsed before factorisation, so
/// they always receive identical values.
#[derive(Clone, Debug)]
pub struct GpSampler {
    mean: f64,
    chol: DMatrix<f64>,
    /// Index into the unique coordinates for every input point.
    slot: Vec<usize>,
    pub jitter: f64,
}

impl GpSampler {
    pub fn new(points: &[Point], spec: GpSpec) -> Result<Self> {
        spec.validate()?;
        if points.is_empty() {
            return Err(Error::Empty("GP sample needs at least one point"));
        }
        let coords: Vec<f64> = points.iter().map(|&p| spec.axis.coord(p)).collect();
        let mut unique = coords.clone();
        unique.sort_by(f64::total_cmp);
        unique.dedup();
        let slot = coords
            .iter()
            .map(|c| unique.binary_search_by(|u| u.total_cmp(c)).unwrap_or(0))
            .collect();

        let m = unique.len();
        let k = DMatrix::from_fn(m, m, |i, j| spec.kernel(unique[i], unique[j]));
        let scale = k.trace() / m as f64;
        let mut jitter = JITTER_START;
        loop {
            let mut kj = k.clone();
            for i in 0..m {
                kj[(i, i)] += jitter * scale;
            }
            if let Some(c) = kj.cholesky() {
                return Ok(Self {
                    mean: spec.mean,
                    chol: c.l(),
                    slot,
                    jitter: jitter * scale,
                });
            }
            jitter *= 10.0;
            if jitter > JITTER_MAX * (1.0 + 1e-9) {
                return Err(Error::Cholesky { jitter: jitter / 10.0 * scale });
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.chol.nrows();
        let z = DVector::from_fn(m, |_, _| standard_normal(rng));
        let f = &self.chol * z;
        self.slot.iter().map(|&s| self.mean + f[s]).collect()
    }
}

/// One GP draw at `points`.
pub fn sample_gp<R: Rng + ?Sized>(points: &[Point], spec: GpSpec, rng: &mut R) -> Result<Vec<f64>> {
    Ok(GpSampler::new(points, spec)?.draw(rng))
}

/// A single GP realisation stored on a uniform grid along the kernel axis and
/// linearly interpolated elsewhere; used when one boundary function is shared
/// across many geometries.
#[derive(Clone, Debug, PartialEq)]
pub struct GpFunction {
    pub axis: KernelAxis,
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl GpFunction {
    pub fn sample<R: Rng + ?Sized>(spec: GpSpec, lo: f64, hi: f64, nodes: usize, rng: &mut R) -> Result<Self> {
        if nodes < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument(alloc::format!(
                "GP grid needs >= 2 nodes on a non-empty interval, got {nodes} on [{lo}, {hi}]"
            )));
        }
        let step = (hi - lo) / (nodes - 1) as f64;
        let grid: Vec<Point> = (0..nodes)
            .map(|i| {
                let c = lo + step * i as f64;
                match spec.axis {
                    KernelAxis::X => Point::new(c, 0.0),
                    KernelAxis::Y => Point::new(0.0, c),
                }
            })
            .collect();
        let values = sample_gp(&grid, spec, rng)?;
        Ok(Self {
            axis: spec.axis,
            lo,
            hi,
            values,
        })
    }

    pub fn eval(&self, p: Point) -> f64 {
        let n = self.values.len();
        let t = ((self.axis.coord(p) - self.lo) / (self.hi - self.lo) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (t as usize).min(n - 2);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::stream_rng;

    #[test]
    fn shared_kernel_coordinate_gives_identical_values() {
        let pts = [Point::new(0.3, -1.0), Point::new(0.3, 2.0), Point::new(-0.5, 0.0)];
        let v = sample_gp(&pts, GpSpec::DARCY, &mut stream_rng(3, 0)).unwrap();
        assert_eq!(v[0], v[1]);
        assert_ne!(v[0], v[2]);
    }

    #[test]
    fn single_point_has_unit_variance() {
        let s = GpSampler::new(&[Point::new(0.1, 0.2)], GpSpec::DARCY).unwrap();
        let mut rng = stream_rng(11, 0);
        let draws: Vec<f64> = (0..10_000).map(|_| s.draw(&mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn plate_spec_mean_is_one() {
        let s = GpSampler::new(&[Point::new(-10.0, 3.0)], GpSpec::PLATE).unwrap();
        let mut rng = stream_rng(12, 0);
        let mean = (0..10_000).map(|_| s.draw(&mut rng)[0]).sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn dense_points_need_jitter_but_factorise() {
        let pts: Vec<Point> = (0..200).map(|i| Point::new(-10.0, -10.0 + 0.1 * i as f64)).collect();
        let s = GpSampler::new(&pts, GpSpec::PLATE).unwrap();
        assert!(s.jitter > 0.0);
        assert!(s.draw(&mut stream_rng(1, 1)).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_points_rejected() {
        assert!(GpSampler::new(&[], GpSpec::DARCY).is_err());
    }

    #[test]
    fn gp_function_interpolates_grid() {
        let f = GpFunction::sample(GpSpec::DARCY, -1.0, 1.0, 11, &mut stream_rng(2, 0)).unwrap();
        assert_eq!(f.eval(Point::new(-1.0, 5.0)), f.values[0]);
        assert_eq!(f.eval(Point::new(1.0, 0.0)), f.values[10]);
        let mid = f.eval(Point::new(-0.9, 0.0));
        assert!((mid - 0.5 * (f.values[0] + f.values[1])).abs() < 1e-12);
    }
}
