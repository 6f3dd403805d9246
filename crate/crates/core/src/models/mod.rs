//! Model zoo: GANO, DCON, PointNet, PointNet* and DeepONet.
//!
//! Every model is a fixed list of named parameter tensors plus an
//! [`Architecture`] that determines their shapes. Forward passes are recorded
//! on a [`Tape`](crate::autodiff::Tape) through [`Bound`].

mod forward;
mod inputs;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::autodiff::{Pool, Tensor};
use crate::data::Problem;
use crate::error::{Error, Result};
use crate::stochastic::{stream_rng, uniform};

pub use forward::{Bound, Encoded};
pub use inputs::{cloud_points, geometry_rows, ModelInput};

macro_rules! named_enum {
    ($ty:ident, $what:literal, { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(Error::InvalidArgument(format!(concat!("unknown ", $what, " {:?}"), s))),
                }
            }
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Gano,
    Dcon,
    PointNet,
    PointNetStar,
    DeepONet,
}

named_enum!(ModelKind, "model", {
    Gano => "gano",
    Dcon => "dcon",
    PointNet => "pointnet",
    PointNetStar => "pointnet-star",
    DeepONet => "deeponet",
});

impl ModelKind {
    /// PointNet variants see the whole point cloud at once; the others
    /// predict each coordinate independently.
    pub fn is_pointwise(self) -> bool {
        !matches!(self, ModelKind::PointNet | ModelKind::PointNetStar)
    }
}

/// How the local coordinate embedding and the global geometry feature combine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fusion {
    Concat,
    Add,
    Mul,
}

named_enum!(Fusion, "fusion", {
    Concat => "concat",
    Add => "add",
    Mul => "mul",
});

/// Point set fed to the geometry encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeoInput {
    VarBoundary,
    AllBoundary,
    Interior,
    Parametric,
}

named_enum!(GeoInput, "geometry input", {
    VarBoundary => "var-boundary",
    AllBoundary => "all-boundary",
    Interior => "interior",
    Parametric => "parametric",
});

pub fn pool_name(p: Pool) -> &'static str {
    match p {
        Pool::Avg => "avg",
        Pool::Max => "max",
        Pool::Min => "min",
    }
}

pub fn parse_pool(s: &str) -> Result<Pool> {
    match s {
        "avg" => Ok(Pool::Avg),
        "max" => Ok(Pool::Max),
        "min" => Ok(Pool::Min),
        _ => Err(Error::InvalidArgument(format!("unknown pooling {s:?}"))),
    }
}

pub const ALL_POOLS: [Pool; 3] = [Pool::Avg, Pool::Max, Pool::Min];

/// Shape-determining description of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub kind: ModelKind,
    pub problem: Problem,
    /// Width `q` of every hidden layer and embedding.
    pub width: usize,
    pub operator_layers: usize,
    /// Hidden layers of the parameter, geometry and PointNet MLPs.
    pub encoder_layers: usize,
    pub fusion: Fusion,
    /// Pooling of the geometry encoder.
    pub pooling: Pool,
    pub geo_input: GeoInput,
    /// Loaded boundary rows seen by DeepONet's flattened branch.
    pub branch_rows: usize,
    /// Factor applied to physical coordinates before they enter a network.
    pub coord_scale: f64,
}

impl Architecture {
    pub fn new(kind: ModelKind, problem: Problem) -> Self {
        Self {
            kind,
            problem,
            width: 64,
            operator_layers: 3,
            encoder_layers: 3,
            fusion: Fusion::Concat,
            pooling: Pool::Avg,
            geo_input: GeoInput::VarBoundary,
            branch_rows: 0,
            coord_scale: match problem {
                Problem::Darcy => 1.0,
                Problem::Plate => 0.1,
            },
        }
    }

    pub fn out_dim(&self) -> usize {
        self.problem.out_dim()
    }

    /// Columns of one branch row: coordinates plus boundary values.
    pub fn branch_dim(&self) -> usize {
        2 + self.problem.bc_channels()
    }

    pub fn geo_dim(&self) -> usize {
        match (self.geo_input, self.problem) {
            (GeoInput::Parametric, Problem::Darcy) => 10,
            (GeoInput::Parametric, Problem::Plate) => 12,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("architecture: {m}")));
        if self.width == 0 || self.operator_layers == 0 || self.encoder_layers == 0 {
            return bad("widths and layer counts must be positive");
        }
        if !(self.coord_scale > 0.0) || !self.coord_scale.is_finite() {
            return bad("coordinate scale must be positive");
        }
        if self.kind == ModelKind::DeepONet && self.branch_rows == 0 {
            return bad("DeepONet needs a fixed branch size");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Dense {
    pub w: usize,
    pub b: usize,
    pub act: bool,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Layout {
    pub branch: Vec<Dense>,
    pub geo: Vec<Dense>,
    pub trunk: Vec<Dense>,
    pub ops: Vec<Dense>,
    pub u1: Vec<Dense>,
    pub u2: Vec<Dense>,
}

struct Spec {
    name: String,
    rows: usize,
    cols: usize,
    weight: bool,
}

#[derive(Default)]
struct Builder {
    specs: Vec<Spec>,
}

impl Builder {
    fn dense(&mut self, name: &str, fan_in: usize, fan_out: usize, act: bool) -> Dense {
        let w = self.specs.len();
        self.specs.push(Spec {
            name: format!("{name}.w"),
            rows: fan_in,
            cols: fan_out,
            weight: true,
        });
        self.specs.push(Spec {
            name: format!("{name}.b"),
            rows: 1,
            cols: fan_out,
            weight: false,
        });
        Dense { w, b: w + 1, act }
    }

    /// Dense layers through `dims`; tanh after each layer except possibly the last.
    fn mlp(&mut self, prefix: &str, dims: &[usize], last_act: bool) -> Vec<Dense> {
        let n = dims.len() - 1;
        (0..n)
            .map(|i| self.dense(&format!("{prefix}.{i}"), dims[i], dims[i + 1], i + 1 < n || last_act))
            .collect()
    }
}

fn layout(arch: &Architecture) -> (Layout, Vec<Spec>) {
    let q = arch.width;
    let out = arch.out_dim();
    let hidden = |first: usize, extra: usize, last: usize| {
        let mut d = alloc::vec![first];
        d.extend(core::iter::repeat(q).take(extra));
        d.push(last);
        d
    };
    let mut b = Builder::default();
    let mut l = Layout::default();
    match arch.kind {
        ModelKind::Gano | ModelKind::Dcon => {
            l.branch = b.mlp("branch", &hidden(arch.branch_dim(), arch.encoder_layers - 1, q), false);
            let mut first_in = q;
            if arch.kind == ModelKind::Gano {
                l.geo = b.mlp("geo", &hidden(arch.geo_dim(), arch.encoder_layers, q), false);
                if arch.fusion == Fusion::Concat {
                    first_in = 2 * q;
                }
            }
            l.trunk = alloc::vec![b.dense("trunk", 2, q, true)];
            let n = arch.operator_layers;
            l.ops = (0..n)
                .map(|i| {
                    let fan_in = if i == 0 { first_in } else { q };
                    let fan_out = if i + 1 == n { q * out } else { q };
                    b.dense(&format!("op.{i}"), fan_in, fan_out, i + 1 < n)
                })
                .collect();
        }
        ModelKind::PointNet | ModelKind::PointNetStar => {
            let input = if arch.kind == ModelKind::PointNetStar { arch.branch_dim() } else { 2 };
            l.u1 = b.mlp("u1", &hidden(input, arch.encoder_layers - 1, q), true);
            l.u2 = b.mlp("u2", &hidden(2 * q, arch.encoder_layers - 1, out), false);
        }
        ModelKind::DeepONet => {
            let flat = arch.branch_rows * arch.branch_dim();
            l.branch = b.mlp("branch", &hidden(flat, arch.encoder_layers - 1, q * out), false);
            l.trunk = b.mlp("trunk", &hidden(2, arch.encoder_layers - 1, q * out), true);
        }
    }
    (l, b.specs)
}

/// Named parameters of one model plus its architecture.
#[derive(Clone, Debug)]
pub struct ModelState {
    arch: Architecture,
    names: Vec<String>,
    params: Vec<Tensor>,
    layout: Layout,
}

impl ModelState {
    /// Glorot-uniform weights and zero biases drawn from `(seed, stream 0)`.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let (layout, specs) = layout(&arch);
        let mut rng = stream_rng(seed, 0);
        let params = specs.iter().map(|s| glorot(s, &mut rng)).collect();
        Ok(Self {
            arch,
            names: specs.into_iter().map(|s| s.name).collect(),
            params,
            layout,
        })
    }

    /// Rebuilds a model from stored tensors, checking names and shapes.
    pub fn from_named(arch: Architecture, named: Vec<(String, Tensor)>) -> Result<Self> {
        arch.validate()?;
        if named.is_empty() {
            return Err(Error::ParameterMismatch("empty parameter set".into()));
        }
        let (layout, specs) = layout(&arch);
        if specs.len() != named.len() {
            return Err(Error::ParameterMismatch(format!(
                "architecture has {} tensors, got {}",
                specs.len(),
                named.len()
            )));
        }
        let mut params = Vec::with_capacity(named.len());
        for (spec, (name, t)) in specs.iter().zip(named) {
            if spec.name != name {
                return Err(Error::ParameterMismatch(format!("expected {}, got {name}", spec.name)));
            }
            if t.shape() != [spec.rows, spec.cols] {
                return Err(Error::ShapeMismatch {
                    op: "load parameter",
                    lhs: alloc::vec![spec.rows, spec.cols],
                    rhs: t.shape().to_vec(),
                });
            }
            t.ensure_finite(&name)?;
            params.push(t);
        }
        Ok(Self {
            arch,
            names: specs.into_iter().map(|s| s.name).collect(),
            params,
            layout,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Sets every parameter to zero.
    pub fn zeroed(mut self) -> Self {
        for p in &mut self.params {
            p.data_mut().fill(0.0);
        }
        self
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }
}

fn glorot<R: Rng + ?Sized>(s: &Spec, rng: &mut R) -> Tensor {
    if !s.weight {
        return Tensor::zeros(s.rows, s.cols);
    }
    let a = libm::sqrt(6.0 / (s.rows + s.cols) as f64);
    let data = (0..s.rows * s.cols).map(|_| uniform(rng, -a, a)).collect();
    Tensor::matrix(s.rows, s.cols, data).expect("shape from spec")
}
