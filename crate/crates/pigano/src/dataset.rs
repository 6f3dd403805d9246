//! Dataset directories: `manifest.toml` plus one binary record per sample.

use std::fs;
use std::path::{Path, PathBuf};

use pigano_core::data::{generate_sample, split_sizes, GenConfig, Problem, Reference, Sample, Split};
use pigano_core::geometry::{BoundaryGroup, Domain, Hole, Point, PlateDomain, PolygonDomain, Variation};
use pigano_core::oracle::WosConfig;
use pigano_core::stochastic::KernelAxis;
use pigano_core::training::Executor;
use serde::{Deserialize, Serialize};

use crate::codec::{self, Kind, Reader, Writer, FORMAT_VERSION};
use crate::error::{format_err, io_err, Error, Result};

pub const MANIFEST: &str = "manifest.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub problem: String,
    pub samples: usize,
    pub seed: u64,
    pub generator: GeneratorSettings,
    #[serde(rename = "sample")]
    pub entries: Vec<SampleEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSettings {
    pub variation: String,
    pub interior: usize,
    pub boundary: Vec<usize>,
    pub fixed_bc: bool,
    pub eval_points: usize,
    pub wos_walks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wos_epsilon: Option<f64>,
    pub wos_max_steps: usize,
    pub gp_mean: f64,
    pub gp_lengthscale: f64,
    pub gp_axis: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: usize,
    pub file: String,
    pub split: String,
}

pub fn variation_name(v: Variation) -> &'static str {
    match v {
        Variation::Low => "low",
        Variation::High => "high",
    }
}

pub fn parse_variation(s: &str) -> Result<Variation> {
    match s {
        "low" => Ok(Variation::Low),
        "high" => Ok(Variation::High),
        _ => Err(Error::Invalid(format!("unknown variation {s:?}"))),
    }
}

fn axis_name(a: KernelAxis) -> &'static str {
    match a {
        KernelAxis::X => "x",
        KernelAxis::Y => "y",
    }
}

pub fn record_name(id: usize) -> String {
    format!("sample_{id:05}.bin")
}

impl Manifest {
    pub fn new(cfg: &GenConfig) -> Result<Self> {
        if cfg.seed > i64::MAX as u64 {
            return Err(Error::Invalid(format!("seed {} exceeds {}", cfg.seed, i64::MAX)));
        }
        let gp = cfg.gp_spec();
        let entries = (0..cfg.samples)
            .map(|id| {
                Ok(SampleEntry {
                    id,
                    file: record_name(id),
                    split: cfg.split_of(id)?.name().to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            problem: cfg.problem.name().to_string(),
            samples: cfg.samples,
            seed: cfg.seed,
            generator: GeneratorSettings {
                variation: variation_name(cfg.variation).to_string(),
                interior: cfg.interior,
                boundary: cfg.boundary.clone(),
                fixed_bc: cfg.fixed_bc,
                eval_points: cfg.eval_points,
                wos_walks: cfg.wos.walks,
                wos_epsilon: cfg.wos.epsilon,
                wos_max_steps: cfg.wos.max_steps,
                gp_mean: gp.mean,
                gp_lengthscale: gp.lengthscale,
                gp_axis: axis_name(gp.axis).to_string(),
            },
            entries,
        })
    }

    /// The generator configuration the manifest records.
    pub fn config(&self, path: &Path) -> Result<GenConfig> {
        let problem: Problem = self.problem.parse()?;
        let g = &self.generator;
        let cfg = GenConfig {
            problem,
            variation: parse_variation(&g.variation)?,
            samples: self.samples,
            seed: self.seed,
            interior: g.interior,
            boundary: g.boundary.clone(),
            fixed_bc: g.fixed_bc,
            eval_points: g.eval_points,
            wos: WosConfig {
                walks: g.wos_walks,
                epsilon: g.wos_epsilon,
                max_steps: g.wos_max_steps,
            },
        };
        let gp = cfg.gp_spec();
        if (gp.mean, gp.lengthscale, axis_name(gp.axis)) != (g.gp_mean, g.gp_lengthscale, g.gp_axis.as_str()) {
            return Err(format_err(path, "GP settings differ from the problem's prior"));
        }
        if self.entries.len() != self.samples {
            return Err(format_err(path, "sample list length differs from the sample count"));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.id != i || Split::parse(&e.split)? != cfg.split_of(i)? {
                return Err(format_err(path, format!("sample entry {i} is out of order or in the wrong split")));
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub config: GenConfig,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Samples of one split; splits are contiguous in index order.
    pub fn split(&self, split: Split) -> &[Sample] {
        let (train, val, _) = split_sizes(self.samples.len()).expect("validated on load");
        match split {
            Split::Train => &self.samples[..train],
            Split::Val => &self.samples[train..train + val],
            Split::Test => &self.samples[train + val..],
        }
    }

    pub fn problem(&self) -> Problem {
        self.config.problem
    }
}

fn points_flat(points: &[Point]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

fn points_of(v: Vec<f64>, path: &Path) -> Result<Vec<Point>> {
    if v.len() % 2 != 0 {
        return Err(format_err(path, "odd coordinate count"));
    }
    Ok(v.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect())
}

pub fn encode_sample(s: &Sample) -> Vec<u8> {
    let mut w = Writer::new(Kind::Record);
    w.u64(s.id as u64);
    w.str(s.problem.name());
    match &s.domain {
        Domain::Polygon(p) => {
            w.u8(0);
            w.f64s(&points_flat(p.vertices()));
        }
        Domain::Plate(p) => {
            w.u8(1);
            let mut v = vec![p.half_width];
            v.extend(p.holes.iter().flat_map(|h| [h.center.x, h.center.y, h.radius]));
            w.f64s(&v);
        }
    }
    w.f64s(&points_flat(&s.interior));
    w.u64(s.groups.len() as u64);
    for (g, bc) in s.groups.iter().zip(&s.bc) {
        w.str(&g.name);
        w.f64s(&points_flat(&g.points));
        w.f64s(&g.arc);
        w.f64s(bc);
    }
    match &s.reference {
        None => w.u8(0),
        Some(r) => {
            w.u8(1);
            w.f64s(&points_flat(&r.points));
            w.f64s(&r.values);
            w.f64s(&r.std_err);
        }
    }
    w.finish()
}

pub fn decode_sample(bytes: &[u8], path: &Path, expected_id: usize) -> Result<Sample> {
    let mut r = codec::open(bytes, path, Kind::Record, || Error::Checksum {
        sample: expected_id,
        path: path.to_path_buf(),
    })?;
    let s = read_sample(&mut r, path)?;
    r.finish()?;
    if s.id != expected_id {
        return Err(format_err(path, format!("record holds sample {}, expected {expected_id}", s.id)));
    }
    s.validate()?;
    Ok(s)
}

fn read_sample(r: &mut Reader<'_>, path: &Path) -> Result<Sample> {
    let id = r.count()?;
    let problem: Problem = r.str()?.parse()?;
    let domain = match r.u8()? {
        0 => Domain::Polygon(PolygonDomain::new(points_of(r.f64s()?, path)?)?),
        1 => {
            let v = r.f64s()?;
            if v.is_empty() || (v.len() - 1) % 3 != 0 {
                return Err(format_err(path, "malformed plate description"));
            }
            let holes = v[1..]
                .chunks_exact(3)
                .map(|c| Hole {
                    center: Point::new(c[0], c[1]),
                    radius: c[2],
                })
                .collect();
            let plate = PlateDomain::new(holes)?;
            if plate.half_width != v[0] {
                return Err(format_err(path, format!("plate half width {} is not supported", v[0])));
            }
            Domain::Plate(plate)
        }
        t => return Err(format_err(path, format!("unknown domain tag {t}"))),
    };
    let interior = points_of(r.f64s()?, path)?;
    let n_groups = r.count()?;
    let mut groups = Vec::new();
    let mut bc = Vec::new();
    for _ in 0..n_groups {
        let name = r.str()?;
        let points = points_of(r.f64s()?, path)?;
        let arc = r.f64s()?;
        groups.push(BoundaryGroup { name, points, arc });
        bc.push(r.f64s()?);
    }
    let reference = match r.u8()? {
        0 => None,
        1 => Some(Reference {
            points: points_of(r.f64s()?, path)?,
            values: r.f64s()?,
            std_err: r.f64s()?,
        }),
        t => return Err(format_err(path, format!("unknown reference tag {t}"))),
    };
    Ok(Sample {
        id,
        problem,
        domain,
        interior,
        groups,
        bc,
        reference,
    })
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let text = toml::to_string(m).map_err(|e| format_err(dir.join(MANIFEST), e.to_string()))?;
    codec::write_atomic(&dir.join(MANIFEST), text.as_bytes())
}

/// Writes already generated samples under `dir`.
pub fn save_dataset(dir: &Path, cfg: &GenConfig, samples: &[Sample]) -> Result<()> {
    let manifest = Manifest::new(cfg)?;
    if samples.len() != cfg.samples {
        return Err(Error::Invalid(format!("{} samples for a dataset of {}", samples.len(), cfg.samples)));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (s, e) in samples.iter().zip(&manifest.entries) {
        codec::write_atomic(&dir.join(&e.file), &encode_sample(s))?;
    }
    write_manifest(dir, &manifest)
}

/// Generates every sample in parallel and writes each record as soon as it
/// is ready; the manifest is written last.
pub fn generate_dataset<E: Executor>(dir: &Path, cfg: &GenConfig, exec: &E) -> Result<Dataset> {
    let manifest = Manifest::new(cfg)?;
    split_sizes(cfg.samples)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let results = exec.map(cfg.samples, |i| -> Result<Sample> {
        let s = generate_sample(cfg, i)?;
        codec::write_atomic(&dir.join(record_name(i)), &encode_sample(&s))?;
        Ok(s)
    });
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_manifest(dir, &manifest)?;
    Ok(Dataset {
        manifest,
        config: cfg.clone(),
        samples,
    })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| format_err(&path, e.to_string()))?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Version {
            path,
            found: m.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(m)
}

pub fn load_dataset<E: Executor>(dir: &Path, exec: &E) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let config = manifest.config(&dir.join(MANIFEST))?;
    let files: Vec<PathBuf> = manifest.entries.iter().map(|e| dir.join(&e.file)).collect();
    let missing: Vec<usize> = manifest
        .entries
        .iter()
        .zip(&files)
        .filter(|(_, f)| !f.is_file())
        .map(|(e, _)| e.id)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSamples(missing));
    }
    let results = exec.map(files.len(), |i| -> Result<Sample> {
        let bytes = codec::read_file(&files[i])?;
        let s = decode_sample(&bytes, &files[i], manifest.entries[i].id)?;
        if s.problem != config.problem {
            return Err(format_err(&files[i], "sample problem differs from the manifest"));
        }
        Ok(s)
    });
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        manifest,
        config,
        samples,
    })
}
