//! PDE residuals and physics-informed losses for the Darcy and plate problems.

use alloc::vec::Vec;

use crate::autodiff::{Tape, Tensor, Var};
use crate::data::{Problem, Sample};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::models::{cloud_points, Bound, Encoded, ModelInput, ModelState};

/// Constant source term of the Darcy problem.
pub const DARCY_SOURCE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    /// Young's modulus.
    pub e: f64,
    /// Poisson's ratio.
    pub mu: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self { e: 1.0, mu: 0.3 }
    }
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0) || !(0.0..0.5).contains(&self.mu) {
            return Err(Error::InvalidArgument(alloc::format!("invalid material {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Boundary weight of the Darcy loss.
    pub darcy: f64,
    /// Plate weights for the PDE, TB, L, R and H terms.
    pub plate: [f64; 5],
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            darcy: 500.0,
            plate: [1e-5, 1.0, 1.0, 1.0, 1.0],
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.darcy > 0.0) || self.plate.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument(alloc::format!("loss weights must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Physics {
    pub weights: LossWeights,
    pub material: Material,
}

pub fn points_tensor(points: &[Point]) -> Tensor {
    let data = points.iter().flat_map(|p| [p.x, p.y]).collect();
    Tensor::matrix(points.len(), 2, data).expect("two columns per point")
}

/// Spatial gradient `[n, 2]` of column `u` with respect to `x`; `rows` picks
/// the query rows when `x` is a whole point cloud.
fn grad_rows(tape: &mut Tape, u: Var, x: Var, rows: Option<&[usize]>) -> Result<Var> {
    let g = tape.gradient(u, x)?;
    match rows {
        Some(r) => tape.select_rows(g, r),
        None => Ok(g),
    }
}

/// `[∂u/∂x, ∂u/∂y]` plus, when `second` is set, `[u_xx, u_xy, u_yy]`.
struct Derivs {
    ux: Var,
    uy: Var,
    second: Option<(Var, Var, Var)>,
}

fn derivs(tape: &mut Tape, u: Var, x: Var, rows: Option<&[usize]>, second: bool) -> Result<Derivs> {
    let g = grad_rows(tape, u, x, rows)?;
    let ux = tape.column(g, 0)?;
    let uy = tape.column(g, 1)?;
    let second = if second {
        let gx = grad_rows(tape, ux, x, rows)?;
        let gy = grad_rows(tape, uy, x, rows)?;
        Some((tape.column(gx, 0)?, tape.column(gx, 1)?, tape.column(gy, 1)?))
    } else {
        None
    };
    Ok(Derivs { ux, uy, second })
}

fn laplacian_rows(tape: &mut Tape, p: Var, x: Var, rows: Option<&[usize]>) -> Result<Var> {
    let g = grad_rows(tape, p, x, rows)?;
    let px = tape.column(g, 0)?;
    let py = tape.column(g, 1)?;
    let gx = grad_rows(tape, px, x, rows)?;
    let gy = grad_rows(tape, py, x, rows)?;
    let pxx = tape.column(gx, 0)?;
    let pyy = tape.column(gy, 1)?;
    tape.add(pxx, pyy)
}

/// `p_xx + p_yy + 10` for a pointwise field `p` of shape `[n, 1]` over input `x`.
pub fn darcy_residual(tape: &mut Tape, p: Var, x: Var) -> Result<Var> {
    darcy_residual_rows(tape, p, x, None)
}

fn darcy_residual_rows(tape: &mut Tape, p: Var, x: Var, rows: Option<&[usize]>) -> Result<Var> {
    let lap = laplacian_rows(tape, p, x, rows)?;
    tape.affine(lap, 1.0, DARCY_SOURCE)
}

/// Plane-stress Navier residuals `(r_u, r_v)` for displacement columns `[u, v]`.
pub fn plate_residuals(tape: &mut Tape, uv: Var, x: Var, m: Material) -> Result<(Var, Var)> {
    plate_residuals_rows(tape, uv, x, None, m)
}

fn plate_residuals_rows(tape: &mut Tape, uv: Var, x: Var, rows: Option<&[usize]>, m: Material) -> Result<(Var, Var)> {
    m.validate()?;
    let u = tape.column(uv, 0)?;
    let v = tape.column(uv, 1)?;
    let du = derivs(tape, u, x, rows, true)?;
    let dv = derivs(tape, v, x, rows, true)?;
    let (uxx, uxy, uyy) = du.second.expect("requested");
    let (vxx, vxy, vyy) = dv.second.expect("requested");
    let k = m.e / (1.0 - m.mu * m.mu);
    let half_minus = (1.0 - m.mu) / 2.0;
    let half_plus = (1.0 + m.mu) / 2.0;
    let combine = |tape: &mut Tape, main: Var, soft: Var, mixed: Var| -> Result<Var> {
        let a = tape.scale(soft, half_minus)?;
        let b = tape.scale(mixed, half_plus)?;
        let s = tape.add(main, a)?;
        let s = tape.add(s, b)?;
        tape.scale(s, k)
    };
    let ru = combine(tape, uxx, uyy, vxy)?;
    let rv = combine(tape, vyy, vxx, uxy)?;
    Ok((ru, rv))
}

/// Weighted total and its named components (all `[1, 1]` nodes).
pub struct LossParts {
    pub total: Var,
    pub terms: Vec<(&'static str, Var)>,
}

impl LossParts {
    pub fn term(&self, name: &str) -> Option<Var> {
        self.terms.iter().find(|(n, _)| *n == name).map(|t| t.1)
    }
}

pub const DARCY_TERMS: [&str; 2] = ["pde", "bc"];
pub const PLATE_TERMS: [&str; 5] = ["pde", "tb", "l", "r", "h"];

/// Model predictions at one point set, with the input node and cloud rows.
struct Field {
    x: Var,
    u: Var,
    rows: Option<Vec<usize>>,
}

/// Evaluates one sample's model outputs at interior rows `interior` and at all
/// boundary groups.
struct Evaluator<'a, 'b> {
    bound: &'a Bound<'b>,
    enc: Encoded,
    cloud: Option<(Var, Var)>,
    sample: &'a Sample,
}

impl<'a, 'b> Evaluator<'a, 'b> {
    fn new(tape: &mut Tape, bound: &'a Bound<'b>, sample: &'a Sample) -> Result<Self> {
        let input = ModelInput::build(bound.state().arch(), sample)?;
        let enc = bound.encode(tape, &input)?;
        let cloud = if bound.state().arch().kind.is_pointwise() {
            None
        } else {
            let x = tape.input(points_tensor(&cloud_points(sample)));
            let u = bound.predict(tape, &enc, x)?;
            Some((x, u))
        };
        Ok(Self {
            bound,
            enc,
            cloud,
            sample,
        })
    }

    /// Model outputs at `rows` of the cloud order, or at `points` directly for pointwise models.
    fn field(&self, tape: &mut Tape, points: &[Point], cloud_rows: Vec<usize>, differentiable: bool) -> Result<Field> {
        match self.cloud {
            Some((x, u_all)) => {
                let u = tape.select_rows(u_all, &cloud_rows)?;
                Ok(Field {
                    x,
                    u,
                    rows: Some(cloud_rows),
                })
            }
            None => {
                let t = points_tensor(points);
                let x = if differentiable { tape.input(t) } else { tape.constant(t) };
                let u = self.bound.predict(tape, &self.enc, x)?;
                Ok(Field { x, u, rows: None })
            }
        }
    }

    fn interior(&self, tape: &mut Tape, idx: &[usize]) -> Result<Field> {
        if idx.is_empty() {
            return Err(Error::Empty("interior subsample"));
        }
        let pts: Vec<Point> = idx.iter().map(|&i| self.sample.interior[i]).collect();
        self.field(tape, &pts, idx.to_vec(), true)
    }

    fn group(&self, tape: &mut Tape, name: &str, differentiable: bool) -> Result<Field> {
        let gi = self.sample.group_index(name)?;
        let offset = self.sample.interior.len() + self.sample.groups[..gi].iter().map(|g| g.points.len()).sum::<usize>();
        let pts = &self.sample.groups[gi].points;
        if pts.is_empty() {
            return Err(Error::Empty("boundary group"));
        }
        self.field(tape, pts, (offset..offset + pts.len()).collect(), differentiable)
    }
}

/// Mean over rows of `Σ_c (u_c - target_c)²`.
fn mse_rows(tape: &mut Tape, u: Var, target: Option<&[f64]>) -> Result<Var> {
    let diff = match target {
        Some(t) => {
            let (n, c) = tape.value(u).dims()?;
            let t = tape.constant(Tensor::matrix(n, c, t.to_vec())?);
            tape.sub(u, t)?
        }
        None => u,
    };
    let sq = tape.square(diff)?;
    let s = tape.sum(sq)?;
    let n = tape.value(u).rows();
    tape.scale(s, 1.0 / n as f64)
}

fn weighted_total(tape: &mut Tape, terms: &[(&'static str, Var)], weights: &[f64]) -> Result<Var> {
    let mut total: Option<Var> = None;
    for ((_, t), w) in terms.iter().zip(weights) {
        let s = tape.scale(*t, *w)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, s)?,
            None => s,
        });
    }
    total.ok_or(Error::Empty("loss terms"))
}

/// Physics-informed loss of one sample, residuals taken at interior rows `interior`.
pub fn sample_loss(tape: &mut Tape, bound: &Bound<'_>, sample: &Sample, interior: &[usize], physics: &Physics) -> Result<LossParts> {
    if bound.state().arch().problem != sample.problem {
        return Err(Error::InvalidArgument("model and sample problems differ".into()));
    }
    let ev = Evaluator::new(tape, bound, sample)?;
    let f = ev.interior(tape, interior)?;
    match sample.problem {
        Problem::Darcy => {
            let r = darcy_residual_rows(tape, f.u, f.x, f.rows.as_deref())?;
            let pde = mse_rows(tape, r, None)?;
            let b = ev.group(tape, "boundary", false)?;
            let bc = mse_rows(tape, b.u, Some(sample.bc_of("boundary")?))?;
            let terms = alloc::vec![("pde", pde), ("bc", bc)];
            let total = weighted_total(tape, &terms, &[1.0, physics.weights.darcy])?;
            Ok(LossParts { total, terms })
        }
        Problem::Plate => {
            let (ru, rv) = plate_residuals_rows(tape, f.u, f.x, f.rows.as_deref(), physics.material)?;
            let r = tape.concat(ru, rv, 1)?;
            let pde = mse_rows(tape, r, None)?;

            let tb = ev.group(tape, "TB", true)?;
            let u = tape.column(tb.u, 0)?;
            let v = tape.column(tb.u, 1)?;
            let du = derivs(tape, u, tb.x, tb.rows.as_deref(), false)?;
            let dv = derivs(tape, v, tb.x, tb.rows.as_deref(), false)?;
            let shear = tape.add(du.uy, dv.ux)?;
            let shear = tape.scale(shear, 0.5)?;
            let strains = tape.concat(dv.uy, shear, 1)?;
            let tb_loss = mse_rows(tape, strains, None)?;

            let l = ev.group(tape, "L", false)?;
            let l_loss = mse_rows(tape, l.u, Some(sample.bc_of("L")?))?;
            let r = ev.group(tape, "R", false)?;
            let r_loss = mse_rows(tape, r.u, Some(sample.bc_of("R")?))?;
            let h = ev.group(tape, "H", false)?;
            let h_loss = mse_rows(tape, h.u, None)?;

            let terms = alloc::vec![("pde", pde), ("tb", tb_loss), ("l", l_loss), ("r", r_loss), ("h", h_loss)];
            let total = weighted_total(tape, &terms, &physics.weights.plate)?;
            Ok(LossParts { total, terms })
        }
    }
}

/// Model predictions `[n, out_dim]` at arbitrary points of a sample's domain.
pub fn predict_points(state: &ModelState, sample: &Sample, points: &[Point]) -> Result<Tensor> {
    let mut tape = Tape::new();
    let bound = state.bind(&mut tape);
    let bound = &bound;
    let input = ModelInput::build(bound.state().arch(), sample)?;
    let enc = bound.encode(&mut tape, &input)?;
    if bound.state().arch().kind.is_pointwise() {
        let x = tape.constant(points_tensor(points));
        let u = bound.predict(&mut tape, &enc, x)?;
        return Ok(tape.value(u).clone());
    }
    let cloud = tape.constant(points_tensor(&cloud_points(sample)));
    let query = tape.constant(points_tensor(points));
    let u = bound.pointnet_at(&mut tape, cloud, enc.channels, query)?;
    Ok(tape.value(u).clone())
}
