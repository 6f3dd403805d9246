//! Problem instances: one domain, its collocation points, boundary data and
//! optional reference values.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryGroup, Domain, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Problem {
    Darcy,
    Plate,
}

impl Problem {
    /// Number of solution fields.
    pub fn out_dim(self) -> usize {
        match self {
            Problem::Darcy => 1,
            Problem::Plate => 2,
        }
    }

    /// Boundary-condition channels carried by a loaded boundary group.
    pub fn bc_channels(self) -> usize {
        self.out_dim()
    }

    /// Boundary groups whose values are model inputs.
    pub fn loaded_groups(self) -> &'static [&'static str] {
        match self {
            Problem::Darcy => &["boundary"],
            Problem::Plate => &["L", "R"],
        }
    }

    /// Boundary groups whose shape varies between samples.
    pub fn variable_groups(self) -> &'static [&'static str] {
        match self {
            Problem::Darcy => &["boundary"],
            Problem::Plate => &["H"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Problem::Darcy => "darcy",
            Problem::Plate => "plate",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "darcy" => Ok(Problem::Darcy),
            "plate" => Ok(Problem::Plate),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown problem {s:?}"))),
        }
    }
}

/// Reference solution values at held-out points.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub problem: Problem,
    pub domain: Domain,
    pub interior: Vec<Point>,
    pub groups: Vec<BoundaryGroup>,
    /// Per group, row-major `[points, bc_channels]`; empty for unloaded groups.
    pub bc: Vec<Vec<f64>>,
    pub reference: Option<Reference>,
}

impl Sample {
    pub fn group_index(&self, name: &str) -> Result<usize> {
        self.groups
            .iter()
            .position(|g| g.name == name)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("sample {} has no boundary group {name:?}", self.id)))
    }

    pub fn group(&self, name: &str) -> Result<&BoundaryGroup> {
        Ok(&self.groups[self.group_index(name)?])
    }

    /// Boundary values of group `name`, `bc_channels` per point.
    pub fn bc_of(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.bc[self.group_index(name)?])
    }

    pub fn boundary_points(&self) -> impl Iterator<Item = Point> + '_ {
        self.groups.iter().flat_map(|g| g.points.iter().copied())
    }

    pub fn boundary_len(&self) -> usize {
        self.groups.iter().map(|g| g.points.len()).sum()
    }

    /// Structural checks run after loading or generating.
    pub fn validate(&self) -> Result<()> {
        use crate::geometry::Region;
        let bad = |what: &str| Err(Error::InvalidArgument(alloc::format!("sample {}: {what}", self.id)));
        if self.interior.is_empty() {
            return bad("no interior points");
        }
        if self.groups.len() != self.bc.len() {
            return bad("boundary values do not match groups");
        }
        let names = self.domain.group_names();
        if self.groups.len() != names.len() || self.groups.iter().zip(names).any(|(g, n)| g.name != *n) {
            return bad("unexpected boundary groups");
        }
        let c = self.problem.bc_channels();
        for (g, v) in self.groups.iter().zip(&self.bc) {
            if g.points.len() != g.arc.len() {
                return bad("arc positions do not match points");
            }
            let loaded = self.problem.loaded_groups().contains(&g.name.as_str());
            let expected = if loaded { g.points.len() * c } else { 0 };
            if v.len() != expected {
                return bad("boundary value count");
            }
            if g.points.iter().any(|p| self.domain.boundary_distance(*p) > 1e-9) {
                return bad("boundary point off the boundary");
            }
        }
        if self.interior.iter().any(|p| !self.domain.contains(*p)) {
            return bad("interior point outside the domain");
        }
        if let Some(r) = &self.reference {
            if r.points.len() != r.values.len() || r.values.len() != r.std_err.len() {
                return bad("reference arrays misaligned");
            }
        }
        Ok(())
    }
}

mod generate;

pub use generate::{generate, generate_sample, split_sizes, GenConfig, Split};
