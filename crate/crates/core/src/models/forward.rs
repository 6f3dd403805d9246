use alloc::vec::Vec;

use super::{Dense, Fusion, ModelInput, ModelKind, ModelState};
use crate::autodiff::{Pool, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// A model's parameters placed on a tape as leaves, in parameter order.
pub struct Bound<'s> {
    state: &'s ModelState,
    vars: Vec<Var>,
}

/// Query-independent embeddings of one sample.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    /// Parameter embedding `b`.
    pub b: Option<Var>,
    /// Geometry embedding `G`.
    pub g: Option<Var>,
    /// PointNet* boundary-value channels.
    pub channels: Option<Var>,
}

impl ModelState {
    pub fn bind(&self, tape: &mut Tape) -> Bound<'_> {
        let vars = self
            .params()
            .iter()
            .enumerate()
            .map(|(i, p)| tape.param(i, p.clone()))
            .collect();
        Bound { state: self, vars }
    }
}

impl Bound<'_> {
    pub fn state(&self) -> &ModelState {
        self.state
    }

    pub fn param_vars(&self) -> &[Var] {
        &self.vars
    }

    fn dense(&self, tape: &mut Tape, x: Var, d: Dense) -> Result<Var> {
        let z = tape.matmul(x, self.vars[d.w])?;
        let z = tape.add_row(z, self.vars[d.b])?;
        if d.act {
            tape.tanh(z)
        } else {
            Ok(z)
        }
    }

    fn mlp(&self, tape: &mut Tape, mut x: Var, layers: &[Dense]) -> Result<Var> {
        for d in layers {
            x = self.dense(tape, x, *d)?;
        }
        Ok(x)
    }

    fn scaled(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let s = self.state.arch().coord_scale;
        if s == 1.0 {
            Ok(x)
        } else {
            tape.scale(x, s)
        }
    }

    /// Row-wise MLP over the branch rows, max-pooled into `b` of shape `[1, q]`.
    pub fn encode_parameters(&self, tape: &mut Tape, branch: &Tensor) -> Result<Var> {
        if branch.rows() == 0 {
            return Err(Error::Empty("parameter encoder rows"));
        }
        let x = tape.constant(branch.clone());
        let e = self.mlp(tape, x, &self.state.layout().branch)?;
        if self.state.arch().kind == ModelKind::DeepONet {
            return Ok(e);
        }
        tape.max_pool(e, 0)
    }

    /// Per-point MLP over the geometry rows, pooled into `G` of shape `[1, q]`.
    pub fn encode_geometry(&self, tape: &mut Tape, points: &Tensor) -> Result<Var> {
        if points.rows() == 0 {
            return Err(Error::Empty("geometry encoder rows"));
        }
        let layers = &self.state.layout().geo;
        if layers.is_empty() {
            return Err(Error::InvalidArgument("model has no geometry encoder".into()));
        }
        let x = tape.constant(points.clone());
        let e = self.mlp(tape, x, layers)?;
        tape.pool(e, 0, self.state.arch().pooling)
    }

    pub fn encode(&self, tape: &mut Tape, input: &ModelInput) -> Result<Encoded> {
        let kind = self.state.arch().kind;
        let b = match kind {
            ModelKind::PointNet | ModelKind::PointNetStar => None,
            _ => Some(self.encode_parameters(tape, &input.branch)?),
        };
        let g = match (kind, &input.geometry) {
            (ModelKind::Gano, Some(geo)) => Some(self.encode_geometry(tape, geo)?),
            (ModelKind::Gano, None) => return Err(Error::Empty("geometry input for GANO")),
            _ => None,
        };
        let channels = match (kind, &input.channels) {
            (ModelKind::PointNetStar, Some(c)) => Some(tape.constant(c.clone())),
            (ModelKind::PointNetStar, None) => return Err(Error::Empty("boundary channels for PointNet*")),
            _ => None,
        };
        Ok(Encoded { b, g, channels })
    }

    /// Predictions `[n, out_dim]` at coordinates `x` of shape `[n, 2]`.
    ///
    /// For PointNet models `x` must be the sample's whole cloud in
    /// [`cloud_points`](super::cloud_points) order.
    pub fn predict(&self, tape: &mut Tape, enc: &Encoded, x: Var) -> Result<Var> {
        let need_b = || enc.b.ok_or(Error::Empty("parameter embedding"));
        match self.state.arch().kind {
            ModelKind::Dcon => self.dcon_forward(tape, x, need_b()?, None),
            ModelKind::Gano => {
                let g = enc.g.ok_or(Error::Empty("geometry embedding"))?;
                self.dcon_forward(tape, x, need_b()?, Some(g))
            }
            ModelKind::PointNet | ModelKind::PointNetStar => self.pointnet_forward(tape, x, enc.channels),
            ModelKind::DeepONet => self.deeponet_forward(tape, x, need_b()?),
        }
    }

    /// Compositional operator layers modulated by `b`; with `g` the first layer
    /// consumes the fused coordinate-geometry embedding.
    pub fn dcon_forward(&self, tape: &mut Tape, x: Var, b: Var, g: Option<Var>) -> Result<Var> {
        let arch = self.state.arch();
        let layout = self.state.layout();
        let (q, out) = (arch.width, arch.out_dim());
        let xs = self.scaled(tape, x)?;
        let mut a = self.mlp(tape, xs, &layout.trunk)?;
        if let Some(g) = g {
            a = match arch.fusion {
                Fusion::Concat => {
                    let n = tape.value(a).rows();
                    let ge = tape.expand(g, n, q)?;
                    tape.concat(a, ge, 1)?
                }
                Fusion::Add => tape.add_row(a, g)?,
                Fusion::Mul => tape.mul_row(a, g)?,
            };
        }
        let n_ops = layout.ops.len();
        for (i, d) in layout.ops.iter().enumerate() {
            let z = tape.matmul(a, self.vars[d.w])?;
            let z = tape.add_row(z, self.vars[d.b])?;
            if i + 1 < n_ops {
                let m = tape.mul_row(z, b)?;
                a = tape.tanh(m)?;
            } else {
                return self.modulated_sum(tape, z, b, q, out);
            }
        }
        unreachable!("architecture has at least one operator layer")
    }

    /// `Σ_i b_i z_i` per output block of width `q`.
    fn modulated_sum(&self, tape: &mut Tape, z: Var, b: Var, q: usize, out: usize) -> Result<Var> {
        if out == 1 {
            let m = tape.mul_row(z, b)?;
            return tape.sum_axis(m, 1);
        }
        let mut cols = Vec::with_capacity(out);
        for k in 0..out {
            let zk = tape.slice(z, 1, k * q, q)?;
            let bk = if tape.value(b).cols() == q { b } else { tape.slice(b, 1, k * q, q)? };
            let m = tape.mul_row(zk, bk)?;
            cols.push(tape.sum_axis(m, 1)?);
        }
        let mut u = cols[0];
        for c in &cols[1..] {
            u = tape.concat(u, *c, 1)?;
        }
        Ok(u)
    }

    /// `h = U₁(x)`, `G = maxpool(h)`, `u = U₂([h ‖ G])` over the whole cloud.
    pub fn pointnet_forward(&self, tape: &mut Tape, x: Var, channels: Option<Var>) -> Result<Var> {
        let layout = self.state.layout();
        let q = self.state.arch().width;
        let n = tape.value(x).rows();
        if n == 0 {
            return Err(Error::Empty("point cloud"));
        }
        let mut inp = self.scaled(tape, x)?;
        if let Some(c) = channels {
            inp = tape.concat(inp, c, 1)?;
        }
        let h = self.mlp(tape, inp, &layout.u1)?;
        let g = tape.pool(h, 0, Pool::Max)?;
        let ge = tape.expand(g, n, q)?;
        let hg = tape.concat(h, ge, 1)?;
        self.mlp(tape, hg, &layout.u2)
    }

    /// PointNet decoding of `query` rows (interior, zero boundary channels)
    /// against the global feature of `cloud`.
    pub fn pointnet_at(&self, tape: &mut Tape, cloud: Var, channels: Option<Var>, query: Var) -> Result<Var> {
        let layout = self.state.layout();
        let q = self.state.arch().width;
        let mut inp = self.scaled(tape, cloud)?;
        let mut qin = self.scaled(tape, query)?;
        if let Some(c) = channels {
            inp = tape.concat(inp, c, 1)?;
            let n = tape.value(query).rows();
            let zeros = tape.constant(Tensor::zeros(n, tape.value(c).cols()));
            qin = tape.concat(qin, zeros, 1)?;
        }
        let h = self.mlp(tape, inp, &layout.u1)?;
        let g = tape.pool(h, 0, Pool::Max)?;
        let hq = self.mlp(tape, qin, &layout.u1)?;
        let n = tape.value(hq).rows();
        let ge = tape.expand(g, n, q)?;
        let hg = tape.concat(hq, ge, 1)?;
        self.mlp(tape, hg, &layout.u2)
    }

    /// `Σ_i b_i t_i(x)` with a flattened fixed-size branch.
    pub fn deeponet_forward(&self, tape: &mut Tape, x: Var, b: Var) -> Result<Var> {
        let arch = self.state.arch();
        let xs = self.scaled(tape, x)?;
        let t = self.mlp(tape, xs, &self.state.layout().trunk)?;
        self.modulated_sum(tape, t, b, arch.width, arch.out_dim())
    }
}
