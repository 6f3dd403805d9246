use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::geometry::Point;
use crate::physics::Material;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// `u = a + b x + c y`, `v = d + e x + f y`.
    Linear,
    /// `u = a x² + b xy + c y²`, `v = d x² + e xy + f y²`.
    Quadratic,
}

/// Analytic displacement field with known plane-stress residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedField {
    pub kind: FieldKind,
    pub coef: [f64; 6],
    pub material: Material,
}

impl ManufacturedField {
    pub fn new(kind: FieldKind, coef: [f64; 6], material: Material) -> Self {
        Self { kind, coef, material }
    }

    pub fn eval(&self, p: Point) -> (f64, f64) {
        let [a, b, c, d, e, f] = self.coef;
        let (x, y) = (p.x, p.y);
        match self.kind {
            FieldKind::Linear => (a + b * x + c * y, d + e * x + f * y),
            FieldKind::Quadratic => (a * x * x + b * x * y + c * y * y, d * x * x + e * x * y + f * y * y),
        }
    }

    /// Constant residuals `(r_u, r_v)` of the field.
    pub fn residual(&self) -> (f64, f64) {
        match self.kind {
            FieldKind::Linear => (0.0, 0.0),
            FieldKind::Quadratic => {
                let [a, b, c, d, e, f] = self.coef;
                let mu = self.material.mu;
                let k = self.material.e / (1.0 - mu * mu);
                (
                    k * (2.0 * a + (1.0 - mu) * c + (1.0 + mu) / 2.0 * e),
                    k * (2.0 * f + (1.0 - mu) * d + (1.0 + mu) / 2.0 * b),
                )
            }
        }
    }

    /// Field values `[u, v]` per point.
    pub fn trace(&self, points: &[Point]) -> alloc::vec::Vec<f64> {
        points
            .iter()
            .flat_map(|p| {
                let (u, v) = self.eval(*p);
                [u, v]
            })
            .collect()
    }

    /// The field recorded on `tape` as an `[n, 2]` node over input `x`.
    pub fn on_tape(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let [a, b, c, d, e, f] = self.coef;
        let xs = tape.column(x, 0)?;
        let ys = tape.column(x, 1)?;
        let (u, v) = match self.kind {
            FieldKind::Linear => {
                let lin = |tape: &mut Tape, k0: f64, kx: f64, ky: f64| -> Result<Var> {
                    let px = tape.affine(xs, kx, k0)?;
                    let py = tape.scale(ys, ky)?;
                    tape.add(px, py)
                };
                (lin(tape, a, b, c)?, lin(tape, d, e, f)?)
            }
            FieldKind::Quadratic => {
                let xx = tape.mul(xs, xs)?;
                let xy = tape.mul(xs, ys)?;
                let yy = tape.mul(ys, ys)?;
                let quad = |tape: &mut Tape, kxx: f64, kxy: f64, kyy: f64| -> Result<Var> {
                    let t1 = tape.scale(xx, kxx)?;
                    let t2 = tape.scale(xy, kxy)?;
                    let t3 = tape.scale(yy, kyy)?;
                    let s = tape.add(t1, t2)?;
                    tape.add(s, t3)
                };
                (quad(tape, a, b, c)?, quad(tape, d, e, f)?)
            }
        };
        tape.concat(u, v, 1)
    }
}
