use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{wrap, Point, Region};
use crate::stochastic::stream_rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WosConfig {
    pub walks: usize,
    /// Stopping-shell width; `None` means `1e-3` times the domain diameter.
    pub epsilon: Option<f64>,
    pub max_steps: usize,
}

impl Default for WosConfig {
    fn default() -> Self {
        Self {
            walks: 4000,
            epsilon: None,
            max_steps: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WosEstimate {
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Walks that hit the step limit and were restarted.
    pub restarts: usize,
}

const MAX_RESTARTS_PER_WALK: usize = 100;

/// Walk-on-Spheres estimate of `p` solving `-Δp = f` in `region` with `p = g`
/// on the boundary.
///
/// Query point `k` draws its walks from stream `k` of `seed`.
pub fn wos_solve<G, B>(region: &G, g: B, f: f64, queries: &[Point], cfg: &WosConfig, seed: u64) -> Result<WosEstimate>
where
    G: Region + ?Sized,
    B: Fn(Point) -> f64,
{
    if cfg.walks == 0 || cfg.max_steps == 0 {
        return Err(Error::InvalidArgument("WoS needs at least one walk and one step".into()));
    }
    let eps = cfg.epsilon.unwrap_or(1e-3 * region.diameter());
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("WoS shell width {eps} must be positive")));
    }
    let mut out = WosEstimate {
        values: Vec::with_capacity(queries.len()),
        std_err: Vec::with_capacity(queries.len()),
        restarts: 0,
    };
    for (k, &q) in queries.iter().enumerate() {
        if !region.contains(q) {
            return Err(Error::InvalidArgument(alloc::format!("WoS query {q:?} is not interior")));
        }
        let mut rng = stream_rng(seed, k as u64);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..cfg.walks {
            let (v, restarts) = walk(region, &g, f, q, eps, cfg.max_steps, &mut rng)?;
            out.restarts += restarts;
            sum += v;
            sum_sq += v * v;
        }
        let n = cfg.walks as f64;
        let mean = sum / n;
        let var = if cfg.walks > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        out.values.push(mean);
        out.std_err.push(libm::sqrt(var / n));
    }
    Ok(out)
}

fn walk<G, B, R>(region: &G, g: &B, f: f64, start: Point, eps: f64, max_steps: usize, rng: &mut R) -> Result<(f64, usize)>
where
    G: Region + ?Sized,
    B: Fn(Point) -> f64,
    R: Rng + ?Sized,
{
    for restart in 0..MAX_RESTARTS_PER_WALK {
        let mut x = start;
        let mut acc = 0.0;
        for _ in 0..max_steps {
            let r = region.boundary_distance(x);
            if r < eps {
                return Ok((acc + g(region.nearest_boundary_point(x)), restart));
            }
            acc += f * r * r / 4.0;
            x = x + Point::polar(r, TAU * rng.random::<f64>());
        }
    }
    Err(Error::RejectionLimit {
        what: "walk reaching the boundary shell",
        tries: MAX_RESTARTS_PER_WALK,
    })
}

/// Piecewise-linear interpolation of samples `(s_i, v_i)` along a closed
/// curve of length `period`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopInterpolant {
    period: f64,
    s: Vec<f64>,
    v: Vec<f64>,
}

impl LoopInterpolant {
    pub fn new(period: f64, s: &[f64], v: &[f64]) -> Result<Self> {
        if s.is_empty() || s.len() != v.len() || !(period > 0.0) {
            return Err(Error::InvalidArgument("loop interpolant needs matching non-empty samples".into()));
        }
        let mut pairs: Vec<(f64, f64)> = s.iter().map(|x| wrap(*x, period)).zip(v.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            period,
            s: pairs.iter().map(|p| p.0).collect(),
            v: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        let n = self.s.len();
        if n == 1 {
            return self.v[0];
        }
        let s = wrap(s, self.period);
        let hi = self.s.partition_point(|&x| x <= s);
        let (i, j) = if hi == 0 || hi == n { (n - 1, 0) } else { (hi - 1, hi) };
        let mut gap = self.s[j] - self.s[i];
        let mut offset = s - self.s[i];
        if gap <= 0.0 {
            gap += self.period;
        }
        if offset < 0.0 {
            offset += self.period;
        }
        let w = if gap > 0.0 { offset / gap } else { 0.0 };
        self.v[i] * (1.0 - w) + self.v[j] * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Disk;

    const UNIT: Disk = Disk {
        center: Point::ORIGIN,
        radius: 1.0,
    };

    #[test]
    fn constant_boundary_is_exact() {
        let cfg = WosConfig {
            walks: 200,
            ..Default::default()
        };
        let est = wos_solve(&UNIT, |_| 3.5, 0.0, &[Point::new(0.2, -0.3)], &cfg, 1).unwrap();
        assert_eq!(est.values[0], 3.5);
        assert_eq!(est.std_err[0], 0.0);
    }

    #[test]
    fn harmonic_mean_value() {
        let cfg = WosConfig {
            walks: 20_000,
            ..Default::default()
        };
        let est = wos_solve(&UNIT, |p| p.x, 0.0, &[Point::ORIGIN], &cfg, 2).unwrap();
        assert!(est.values[0].abs() < 3.0 * est.std_err[0]);
    }

    #[test]
    fn exterior_query_rejected() {
        assert!(wos_solve(&UNIT, |_| 0.0, 0.0, &[Point::new(2.0, 0.0)], &WosConfig::default(), 0).is_err());
    }

    #[test]
    fn loop_interpolant_wraps() {
        let li = LoopInterpolant::new(4.0, &[0.5, 1.5, 3.5], &[1.0, 3.0, 5.0]).unwrap();
        assert_eq!(li.eval(1.0), 2.0);
        assert_eq!(li.eval(0.5), 1.0);
        // Wrap-around segment from 3.5 to 4.5 (= 0.5).
        assert!((li.eval(0.0) - 3.0).abs() < 1e-12);
        assert!((li.eval(4.0) - 3.0).abs() < 1e-12);
        assert!((li.eval(3.75) - 4.0).abs() < 1e-12);
    }
}
