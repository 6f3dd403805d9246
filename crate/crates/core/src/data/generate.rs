use alloc::vec::Vec;

use super::{Problem, Reference, Sample};
use crate::error::{Error, Result};
use crate::geometry::{sample_interior, Domain, PlateDomain, Point, PolygonDomain, Variation};
use crate::oracle::{wos_solve, LoopInterpolant, WosConfig};
use crate::physics::DARCY_SOURCE;
use crate::stochastic::{child_seed, sample_gp, stream_rng, GpFunction, GpSpec};

/// Which part of a dataset a sample belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown split {s:?}"))),
        }
    }
}

/// Train/val/test counts for 70/10/20 with at least one sample in each part.
pub fn split_sizes(n: usize) -> Result<(usize, usize, usize)> {
    if n < 3 {
        return Err(Error::InvalidArgument(alloc::format!("need at least 3 samples to split, got {n}")));
    }
    let round = |f: f64| libm::round(f * n as f64) as usize;
    let test = round(0.2).max(1);
    let val = round(0.1).max(1);
    Ok((n - test - val, val, test))
}

/// Settings that fully determine a generated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub problem: Problem,
    pub variation: Variation,
    pub samples: usize,
    pub seed: u64,
    pub interior: usize,
    /// Points per boundary group, in the domain's group order.
    pub boundary: Vec<usize>,
    /// Share one boundary-value function across all samples so only the geometry varies.
    pub fixed_bc: bool,
    /// Held-out reference points per test sample (Darcy only).
    pub eval_points: usize,
    pub wos: WosConfig,
}

impl GenConfig {
    pub fn new(problem: Problem, samples: usize, seed: u64) -> Self {
        let (interior, boundary) = match problem {
            Problem::Darcy => (300, alloc::vec![100]),
            Problem::Plate => (300, alloc::vec![40, 20, 20, 80]),
        };
        Self {
            problem,
            variation: Variation::Low,
            samples,
            seed,
            interior,
            boundary,
            fixed_bc: false,
            eval_points: 200,
            wos: WosConfig::default(),
        }
    }

    pub fn split_of(&self, index: usize) -> Result<Split> {
        let (train, val, _) = split_sizes(self.samples)?;
        Ok(if index < train {
            Split::Train
        } else if index < train + val {
            Split::Val
        } else {
            Split::Test
        })
    }

    pub fn gp_spec(&self) -> GpSpec {
        match self.problem {
            Problem::Darcy => GpSpec::DARCY,
            Problem::Plate => GpSpec::PLATE,
        }
    }

    /// The shared boundary function of a fixed-BC dataset, one per channel.
    fn shared_bc(&self) -> Result<Vec<GpFunction>> {
        let spec = self.gp_spec();
        let mut rng = stream_rng(self.seed, u64::MAX);
        let (lo, hi) = match self.problem {
            Problem::Darcy => (-1.5, 1.5),
            Problem::Plate => (-10.0, 10.0),
        };
        (0..2 * self.problem.bc_channels())
            .map(|_| GpFunction::sample(spec, lo, hi, 301, &mut rng))
            .collect()
    }
}

/// Generates sample `index`; every random choice comes from streams of a
/// seed derived from `(config.seed, index)`.
pub fn generate_sample(cfg: &GenConfig, index: usize) -> Result<Sample> {
    let seed = child_seed(cfg.seed, index as u64);
    let domain = match cfg.problem {
        Problem::Darcy => Domain::Polygon(PolygonDomain::sample(&mut stream_rng(seed, 0))?),
        Problem::Plate => Domain::Plate(PlateDomain::sample(cfg.variation, &mut stream_rng(seed, 0))?),
    };
    let groups = domain.sample_boundary(&cfg.boundary, &mut stream_rng(seed, 1))?;
    let interior = sample_interior(&domain, cfg.interior, &mut stream_rng(seed, 2))?;

    let shared = if cfg.fixed_bc { Some(cfg.shared_bc()?) } else { None };
    let mut gp_rng = stream_rng(seed, 3);
    let spec = cfg.gp_spec();
    let channels = cfg.problem.bc_channels();
    let mut bc = Vec::with_capacity(groups.len());
    let mut loaded = 0;
    for g in &groups {
        if !cfg.problem.loaded_groups().contains(&g.name.as_str()) {
            bc.push(Vec::new());
            continue;
        }
        let mut cols = Vec::with_capacity(channels);
        for c in 0..channels {
            cols.push(match &shared {
                Some(fs) => g.points.iter().map(|p| fs[loaded * channels + c].eval(*p)).collect(),
                None => sample_gp(&g.points, spec, &mut gp_rng)?,
            });
        }
        loaded += 1;
        bc.push((0..g.points.len()).flat_map(|k| cols.iter().map(move |col| col[k])).collect());
    }

    let mut sample = Sample {
        id: index,
        problem: cfg.problem,
        domain,
        interior,
        groups,
        bc,
        reference: None,
    };
    if cfg.problem == Problem::Darcy && cfg.eval_points > 0 && cfg.split_of(index)? == Split::Test {
        sample.reference = Some(darcy_reference(&sample, cfg, seed)?);
    }
    Ok(sample)
}

/// Walk-on-Spheres values at fresh interior points, with the boundary data
/// interpolated linearly in arc length.
fn darcy_reference(sample: &Sample, cfg: &GenConfig, seed: u64) -> Result<Reference> {
    let Domain::Polygon(poly) = &sample.domain else {
        return Err(Error::InvalidArgument("Darcy sample without a polygon".into()));
    };
    let g = sample.group("boundary")?;
    let interp = LoopInterpolant::new(poly.perimeter(), &g.arc, sample.bc_of("boundary")?)?;
    let points: Vec<Point> = sample_interior(poly, cfg.eval_points, &mut stream_rng(seed, 4))?;
    let est = wos_solve(
        poly,
        |p| interp.eval(poly.arc_position(p)),
        DARCY_SOURCE,
        &points,
        &cfg.wos,
        child_seed(seed, 5),
    )?;
    Ok(Reference {
        points,
        values: est.values,
        std_err: est.std_err,
    })
}

/// All samples of a dataset, generated sequentially.
pub fn generate(cfg: &GenConfig) -> Result<Vec<Sample>> {
    split_sizes(cfg.samples)?;
    (0..cfg.samples).map(|i| generate_sample(cfg, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_counts() {
        assert_eq!(split_sizes(100).unwrap(), (70, 10, 20));
        assert_eq!(split_sizes(50).unwrap(), (35, 5, 10));
        assert_eq!(split_sizes(5).unwrap(), (3, 1, 1));
        assert!(split_sizes(2).is_err());
    }

    #[test]
    fn darcy_sample_is_valid_and_reproducible() {
        let mut cfg = GenConfig::new(Problem::Darcy, 5, 7);
        cfg.interior = 40;
        cfg.boundary = alloc::vec![30];
        cfg.eval_points = 5;
        cfg.wos.walks = 50;
        let a = generate_sample(&cfg, 4).unwrap();
        a.validate().unwrap();
        assert!(a.reference.is_some());
        assert_eq!(a, generate_sample(&cfg, 4).unwrap());
        assert!(generate_sample(&cfg, 0).unwrap().reference.is_none());
    }

    #[test]
    fn plate_sample_groups() {
        let mut cfg = GenConfig::new(Problem::Plate, 5, 1);
        cfg.interior = 30;
        let s = generate_sample(&cfg, 0).unwrap();
        s.validate().unwrap();
        assert_eq!(s.bc_of("L").unwrap().len(), 40);
        assert!(s.bc_of("H").unwrap().is_empty());
    }

    #[test]
    fn fixed_bc_shares_the_function() {
        let mut cfg = GenConfig::new(Problem::Darcy, 5, 3);
        cfg.fixed_bc = true;
        cfg.eval_points = 0;
        let a = generate_sample(&cfg, 0).unwrap();
        let b = generate_sample(&cfg, 1).unwrap();
        assert_ne!(a.domain, b.domain);
        let fs = cfg.shared_bc().unwrap();
        let g = a.group("boundary").unwrap();
        assert_eq!(a.bc_of("boundary").unwrap()[3], fs[0].eval(g.points[3]));
    }
}
