use alloc::vec::Vec;

use super::{Architecture, GeoInput, ModelKind};
use crate::autodiff::Tensor;
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Per-sample network inputs that do not depend on the query coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    /// Parameter-encoder rows `[M, branch_dim]`, or `[1, M * branch_dim]` for DeepONet.
    pub branch: Tensor,
    /// Geometry-encoder rows (GANO only).
    pub geometry: Option<Tensor>,
    /// Boundary-value channels for every cloud row (PointNet* only).
    pub channels: Option<Tensor>,
}

fn scaled_rows(points: impl Iterator<Item = Point>, s: f64) -> Vec<f64> {
    points.flat_map(|p| [p.x * s, p.y * s]).collect()
}

fn to_matrix(cols: usize, data: Vec<f64>) -> Result<Tensor> {
    if data.is_empty() {
        return Err(Error::Empty("model input rows"));
    }
    Tensor::matrix(data.len() / cols, cols, data)
}

impl ModelInput {
    pub fn build(arch: &Architecture, sample: &Sample) -> Result<Self> {
        if sample.problem != arch.problem {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} model given a {} sample",
                arch.problem,
                sample.problem
            )));
        }
        let s = arch.coord_scale;
        let c = arch.problem.bc_channels();
        let bdim = arch.branch_dim();

        let mut rows = Vec::new();
        for name in arch.problem.loaded_groups() {
            let g = sample.group(name)?;
            let v = sample.bc_of(name)?;
            for (k, p) in g.points.iter().enumerate() {
                rows.extend_from_slice(&[p.x * s, p.y * s]);
                rows.extend_from_slice(&v[k * c..(k + 1) * c]);
            }
        }
        let branch = if arch.kind == ModelKind::DeepONet {
            let m = rows.len() / bdim;
            if m != arch.branch_rows {
                return Err(Error::ShapeMismatch {
                    op: "deeponet branch",
                    lhs: alloc::vec![arch.branch_rows, bdim],
                    rhs: alloc::vec![m, bdim],
                });
            }
            to_matrix(rows.len(), rows)?
        } else {
            to_matrix(bdim, rows)?
        };

        let geometry = if arch.kind == ModelKind::Gano {
            Some(geometry_rows(arch, sample)?)
        } else {
            None
        };

        let channels = if arch.kind == ModelKind::PointNetStar {
            let mut data = alloc::vec![0.0; sample.interior.len() * c];
            for (g, v) in sample.groups.iter().zip(&sample.bc) {
                if v.is_empty() {
                    data.extend(core::iter::repeat(0.0).take(g.points.len() * c));
                } else {
                    data.extend_from_slice(v);
                }
            }
            Some(to_matrix(c, data)?)
        } else {
            None
        };

        Ok(Self {
            branch,
            geometry,
            channels,
        })
    }
}

/// Rows for the geometry encoder under the architecture's input choice.
pub fn geometry_rows(arch: &Architecture, sample: &Sample) -> Result<Tensor> {
    let s = arch.coord_scale;
    match arch.geo_input {
        GeoInput::VarBoundary => {
            let mut pts = Vec::new();
            for name in arch.problem.variable_groups() {
                pts.extend(sample.group(name)?.points.iter().copied());
            }
            to_matrix(2, scaled_rows(pts.into_iter(), s))
        }
        GeoInput::AllBoundary => to_matrix(2, scaled_rows(sample.boundary_points(), s)),
        GeoInput::Interior => to_matrix(
            2,
            scaled_rows(sample.interior.iter().copied().chain(sample.boundary_points()), s),
        ),
        GeoInput::Parametric => {
            let mut p = sample.domain.parametric();
            p.iter_mut().for_each(|v| *v *= s);
            to_matrix(p.len(), p)
        }
    }
}

/// Cloud order used by PointNet models: interior points, then each boundary group.
pub fn cloud_points(sample: &Sample) -> Vec<Point> {
    sample.interior.iter().copied().chain(sample.boundary_points()).collect()
}
