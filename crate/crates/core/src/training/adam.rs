use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of `params` from `grads`; `names` label a non-finite gradient.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], names: &[String]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ParameterMismatch(alloc::format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.is_finite() {
                let name = names.get(i).map(String::as_str).unwrap_or("?");
                return Err(Error::NonFinite(alloc::format!("gradient of {name}")));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| alloc::vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= self.lr * mhat / (libm::sqrt(vhat) + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("p{i}")).collect()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![Tensor::row(&[1.0, -2.0])];
        let mut adam = Adam::new(0.1);
        for _ in 0..5 {
            adam.step(&mut p, &[Tensor::zeros(1, 2)], &names(1)).unwrap();
        }
        assert_eq!(p[0].data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_by_hand() {
        let mut p = vec![Tensor::row(&[0.5])];
        let mut adam = Adam::new(0.01);
        adam.step(&mut p, &[Tensor::row(&[0.2])], &names(1)).unwrap();
        // m̂ = 0.2, v̂ = 0.04, step = lr * 0.2 / (0.2 + 1e-8)
        let expected = 0.5 - 0.01 * 0.2 / (0.2 + 1e-8);
        assert!((p[0].data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let mut p = vec![Tensor::row(&[0.0, 0.0])];
        let mut adam = Adam::new(1e-3);
        let g = Tensor::row(&[3.0, -0.01]);
        let mut prev = p[0].clone();
        for _ in 0..2000 {
            adam.step(&mut p, std::slice::from_ref(&g), &names(1)).unwrap();
            let cur = p[0].clone();
            let d = cur.sub(&prev).unwrap();
            prev = cur;
            if adam.steps() == 2000 {
                assert!((d.data()[0] + 1e-3).abs() < 1e-9);
                assert!((d.data()[1] - 1e-3).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut p = vec![Tensor::row(&[0.0]), Tensor::row(&[0.0])];
        let err = Adam::new(0.1)
            .step(&mut p, &[Tensor::row(&[0.0]), Tensor::row(&[f64::NAN])], &names(2))
            .unwrap_err();
        assert!(alloc::format!("{err}").contains("p1"));
    }
}
