//! Reference solutions: Walk-on-Spheres for the Poisson problem and
//! manufactured displacement fields for the plate.

mod manufactured;
mod wos;

pub use manufactured::{FieldKind, ManufacturedField};
pub use wos::{wos_solve, LoopInterpolant, WosConfig, WosEstimate};

use crate::error::{Error, Result};

/// `‖pred - reference‖₂ / ‖reference‖₂`.
pub fn relative_l2(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            op: "relative_l2",
            lhs: alloc::vec![pred.len()],
            rhs: alloc::vec![reference.len()],
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (p, r) in pred.iter().zip(reference) {
        num += (p - r) * (p - r);
        den += r * r;
    }
    if !(den > 0.0) {
        return Err(Error::InvalidArgument("reference has zero norm".into()));
    }
    Ok(libm::sqrt(num / den))
}
