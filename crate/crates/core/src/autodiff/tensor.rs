use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{shape_err, Error, Result};

/// Dense row-major `f64` array.
///
/// The differentiation engine works on rank-2 tensors; vectors are `[1, q]`
/// rows and scalars are `[1, 1]`.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidTensor(format!(
                "shape {shape:?} needs {expected} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            shape: vec![rows, cols],
            data: vec![0.0; rows * cols],
        }
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            shape: vec![rows, cols],
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1, 1],
            data: vec![value],
        }
    }

    pub fn row(values: &[f64]) -> Self {
        Self {
            shape: vec![1, values.len()],
            data: values.to_vec(),
        }
    }

    /// Builds an `[n, k]` matrix from fixed-width rows.
    pub fn from_rows<const K: usize>(rows: &[[f64; K]]) -> Self {
        Self {
            shape: vec![rows.len(), K],
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::InvalidTensor(format!(
                "expected a matrix, got shape {other:?}"
            ))),
        }
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    /// The single entry of a `[1, 1]` tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::NonScalar(self.shape.clone()))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.into()))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return shape_err(op, &self.shape, &other.shape);
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "mul", |a, b| a * b)
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return shape_err("add_assign", &self.shape, &other.shape);
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn affine(&self, scale: f64, shift: f64) -> Tensor {
        self.map(|v| scale * v + shift)
    }

    pub fn tanh(&self) -> Tensor {
        self.map(tanh)
    }

    pub fn square(&self) -> Tensor {
        self.map(|v| v * v)
    }

    /// `[n, q] op [1, q]`, the row broadcast across all rows.
    fn row_broadcast(&self, row: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (n, q) = self.dims()?;
        if row.shape() != [1, q] {
            return shape_err(op, &self.shape, &row.shape);
        }
        let mut data = Vec::with_capacity(n * q);
        for r in 0..n {
            data.extend(self.row_slice(r).iter().zip(&row.data).map(|(&a, &b)| f(a, b)));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add_row(&self, row: &Tensor) -> Result<Tensor> {
        self.row_broadcast(row, "add_row", |a, b| a + b)
    }

    pub fn mul_row(&self, row: &Tensor) -> Result<Tensor> {
        self.row_broadcast(row, "mul_row", |a, b| a * b)
    }

    /// `op(a) · op(b)` where `op` optionally transposes.
    pub fn matmul_t(&self, other: &Tensor, ta: bool, tb: bool) -> Result<Tensor> {
        let (ar, ac) = self.dims()?;
        let (br, bc) = other.dims()?;
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        if k != k2 {
            let lhs = if ta { vec![ac, ar] } else { vec![ar, ac] };
            let rhs = if tb { vec![bc, br] } else { vec![br, bc] };
            return shape_err("matmul", &lhs, &rhs);
        }
        if m == 0 || n == 0 || k == 0 {
            return Ok(Tensor::zeros(m, n));
        }
        let mut out: Vec<f64> = Vec::with_capacity(m * n);
        {
            // Row-major strides; a transpose is a stride swap.
            let (rsa, csa) = if ta { (1, ac as isize) } else { (ac as isize, 1) };
            let (rsb, csb) = if tb { (1, bc as isize) } else { (bc as isize, 1) };
            // SAFETY: strides and extents describe exactly the buffers above; with
            // beta = 0 dgemm writes every entry of `out` without reading it.
            unsafe {
                matrixmultiply::dgemm(
                    m,
                    k,
                    n,
                    1.0,
                    self.data.as_ptr(),
                    rsa,
                    csa,
                    other.data.as_ptr(),
                    rsb,
                    csb,
                    0.0,
                    out.as_mut_ptr(),
                    n as isize,
                    1,
                );
                out.set_len(m * n);
            }
        }
        Tensor::matrix(m, n, out)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        self.matmul_t(other, false, false)
    }

    pub fn concat(&self, other: &Tensor, axis: usize) -> Result<Tensor> {
        let (ar, ac) = self.dims()?;
        let (br, bc) = other.dims()?;
        match axis {
            0 => {
                if ac != bc {
                    return shape_err("concat(axis 0)", &self.shape, &other.shape);
                }
                let mut data = self.data.clone();
                data.extend_from_slice(&other.data);
                Tensor::matrix(ar + br, ac, data)
            }
            1 => {
                if ar != br {
                    return shape_err("concat(axis 1)", &self.shape, &other.shape);
                }
                let mut data = Vec::with_capacity(ar * (ac + bc));
                for r in 0..ar {
                    data.extend_from_slice(self.row_slice(r));
                    data.extend_from_slice(other.row_slice(r));
                }
                Tensor::matrix(ar, ac + bc, data)
            }
            _ => Err(Error::InvalidArgument(format!("concat axis {axis}"))),
        }
    }

    /// `len` consecutive slices starting at `start` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        match axis {
            0 if start + len <= r => Tensor::matrix(len, c, self.data[start * c..(start + len) * c].to_vec()),
            1 if start + len <= c => {
                let mut data = Vec::with_capacity(r * len);
                for row in 0..r {
                    data.extend_from_slice(&self.row_slice(row)[start..start + len]);
                }
                Tensor::matrix(r, len, data)
            }
            _ => Err(Error::InvalidArgument(format!(
                "slice axis {axis} [{start}, {}) out of bounds for {:?}",
                start + len,
                self.shape
            ))),
        }
    }

    /// Embeds `self` in zeros of extent `total` along `axis`, starting at `start`.
    pub fn pad(&self, axis: usize, start: usize, total: usize) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        match axis {
            0 if start + r <= total => {
                let mut data = vec![0.0; total * c];
                data[start * c..(start + r) * c].copy_from_slice(&self.data);
                Tensor::matrix(total, c, data)
            }
            1 if start + c <= total => {
                let mut data = vec![0.0; r * total];
                for row in 0..r {
                    data[row * total + start..row * total + start + c].copy_from_slice(self.row_slice(row));
                }
                Tensor::matrix(r, total, data)
            }
            _ => Err(Error::InvalidArgument(format!(
                "pad axis {axis} start {start} total {total} for {:?}",
                self.shape
            ))),
        }
    }

    pub fn sum(&self) -> Tensor {
        Tensor::scalar(self.data.iter().sum())
    }

    /// Sums out `axis`, keeping it with extent 1.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        match axis {
            0 => {
                let mut out = vec![0.0; c];
                for row in 0..r {
                    for (o, v) in out.iter_mut().zip(self.row_slice(row)) {
                        *o += v;
                    }
                }
                Tensor::matrix(1, c, out)
            }
            1 => Tensor::matrix(r, 1, (0..r).map(|row| self.row_slice(row).iter().sum()).collect()),
            _ => Err(Error::InvalidArgument(format!("sum axis {axis}"))),
        }
    }

    /// Mean along `axis`, keeping it with extent 1.
    ///
    /// Each lane is summed in sorted order as deviations from its minimum, so
    /// the result does not depend on entry order and `n` identical entries
    /// average to exactly that entry.
    pub fn mean_axis(&self, axis: usize) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        let n = match axis {
            0 => r,
            1 => c,
            _ => return Err(Error::InvalidArgument(format!("mean axis {axis}"))),
        };
        if n == 0 {
            return Err(Error::Empty("pooling over an empty axis"));
        }
        let inv = 1.0 / n as f64;
        let mut lane = vec![0.0; n];
        let mean_of = |lane: &mut [f64]| {
            lane.sort_unstable_by(f64::total_cmp);
            let base = lane[0];
            base + lane[1..].iter().map(|v| v - base).sum::<f64>() * inv
        };
        if axis == 0 {
            let means = (0..c)
                .map(|col| {
                    for (row, slot) in lane.iter_mut().enumerate() {
                        *slot = self.data[row * c + col];
                    }
                    mean_of(&mut lane)
                })
                .collect();
            Tensor::matrix(1, c, means)
        } else {
            let means = (0..r)
                .map(|row| {
                    lane.copy_from_slice(self.row_slice(row));
                    mean_of(&mut lane)
                })
                .collect();
            Tensor::matrix(r, 1, means)
        }
    }

    /// Broadcasts a `[1,1]`, `[1,c]` or `[r,1]` tensor to `[rows, cols]`.
    pub fn expand(&self, rows: usize, cols: usize) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        if !((r == rows || r == 1) && (c == cols || c == 1)) {
            return shape_err("expand", &self.shape, &[rows, cols]);
        }
        let mut data = Vec::with_capacity(rows * cols);
        for row in 0..rows {
            let sr = if r == 1 { 0 } else { row };
            for col in 0..cols {
                let sc = if c == 1 { 0 } else { col };
                data.push(self.data[sr * c + sc]);
            }
        }
        Tensor::matrix(rows, cols, data)
    }

    /// Index of the extreme entry along `axis` for every lane; ties go to the lowest index.
    pub fn arg_extreme(&self, axis: usize, max: bool) -> Result<Vec<usize>> {
        let (r, c) = self.dims()?;
        let better = |cand: f64, best: f64| if max { cand > best } else { cand < best };
        match axis {
            0 if r > 0 => Ok((0..c)
                .map(|col| {
                    let mut best = 0;
                    for row in 1..r {
                        if better(self.data[row * c + col], self.data[best * c + col]) {
                            best = row;
                        }
                    }
                    best
                })
                .collect()),
            1 if c > 0 => Ok((0..r)
                .map(|row| {
                    let lane = self.row_slice(row);
                    let mut best = 0;
                    for (i, &v) in lane.iter().enumerate().skip(1) {
                        if better(v, lane[best]) {
                            best = i;
                        }
                    }
                    best
                })
                .collect()),
            0 | 1 => Err(Error::Empty("pooling over an empty axis")),
            _ => Err(Error::InvalidArgument(format!("pool axis {axis}"))),
        }
    }

    /// Picks one entry per lane: `out[j] = self[idx[j], j]` for axis 0.
    pub fn gather_lanes(&self, axis: usize, idx: &[usize]) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        match axis {
            0 if idx.len() == c => Tensor::matrix(1, c, idx.iter().enumerate().map(|(j, &i)| self.data[i * c + j]).collect()),
            1 if idx.len() == r => Tensor::matrix(r, 1, idx.iter().enumerate().map(|(row, &j)| self.data[row * c + j]).collect()),
            _ => shape_err("gather_lanes", &self.shape, &[idx.len()]),
        }
    }

    /// Transpose of [`Tensor::gather_lanes`]: scatters lane values into zeros of extent `len`.
    pub fn scatter_lanes(&self, axis: usize, idx: &[usize], len: usize) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        match axis {
            0 if r == 1 && idx.len() == c => {
                let mut out = vec![0.0; len * c];
                for (j, &i) in idx.iter().enumerate() {
                    out[i * c + j] += self.data[j];
                }
                Tensor::matrix(len, c, out)
            }
            1 if c == 1 && idx.len() == r => {
                let mut out = vec![0.0; r * len];
                for (row, &j) in idx.iter().enumerate() {
                    out[row * len + j] += self.data[row];
                }
                Tensor::matrix(r, len, out)
            }
            _ => shape_err("scatter_lanes", &self.shape, &[idx.len()]),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        let mut data = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            if i >= r {
                return Err(Error::InvalidArgument(format!("row {i} out of bounds for {r} rows")));
            }
            data.extend_from_slice(self.row_slice(i));
        }
        Tensor::matrix(rows.len(), c, data)
    }

    /// Transpose of [`Tensor::select_rows`]; duplicate indices accumulate.
    pub fn scatter_rows(&self, rows: &[usize], total: usize) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        if r != rows.len() {
            return shape_err("scatter_rows", &self.shape, &[rows.len()]);
        }
        let mut out = vec![0.0; total * c];
        for (src, &dst) in rows.iter().enumerate() {
            if dst >= total {
                return Err(Error::InvalidArgument(format!("row {dst} out of bounds for {total} rows")));
            }
            for (o, v) in out[dst * c..(dst + 1) * c].iter_mut().zip(self.row_slice(src)) {
                *o += v;
            }
        }
        Tensor::matrix(total, c, out)
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.dims()?;
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::matrix(c, r, data)
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }
}

/// `tanh` through a branch-free `expm1(-2|x|)` so the elementwise loop
/// vectorises; odd by construction and exact at zero.
#[inline(always)]
pub(crate) fn tanh(x: f64) -> f64 {
    const LOG2E: f64 = core::f64::consts::LOG2_E;
    const LN2_HI: f64 = 0.693_147_180_369_123_8;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const ROUND: f64 = 6_755_399_441_055_744.0;
    let y = -2.0 * x.abs();
    let y = if y < -80.0 { -80.0 } else { y };
    let kr = y * LOG2E + ROUND;
    let k = kr - ROUND;
    let r = (y - k * LN2_HI) - k * LN2_LO;
    // expm1(r) by Taylor series; |r| <= ln2/2 keeps the truncation below 1e-17.
    const INV_FACT: [f64; 12] = [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
    ];
    let mut q = 1.0 / 6_227_020_800.0;
    for c in INV_FACT {
        q = q * r + c;
    }
    let q = q * r;
    // The low mantissa bits of `kr` hold `k`; shift `k + 1023` into the exponent.
    let two_k = f64::from_bits(kr.to_bits().wrapping_add(1023) << 52);
    let em = two_k * q + (two_k - 1.0);
    (-em / (em + 2.0)).copysign(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_matches_libm() {
        assert_eq!(tanh(0.0), 0.0);
        assert_eq!(tanh(1e3), 1.0);
        let mut worst: f64 = 0.0;
        for i in 0..20_000 {
            let x = libm::pow(10.0, -12.0 + 13.5 * i as f64 / 20_000.0);
            for x in [x, -x] {
                let rel = ((tanh(x) - libm::tanh(x)) / libm::tanh(x)).abs();
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-15, "worst relative error {worst:e}");
    }

    #[test]
    fn rejects_bad_length() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn matmul_with_transposes() {
        let a = Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::matrix(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.data(), &[58., 64., 139., 154.]);
        let at = a.transpose().unwrap();
        let bt = b.transpose().unwrap();
        assert_eq!(at.matmul_t(&b, true, false).unwrap(), ab);
        assert_eq!(a.matmul_t(&bt, false, true).unwrap(), ab);
        assert_eq!(at.matmul_t(&bt, true, true).unwrap(), ab);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::zeros(2, 3);
        let err = a.matmul(&a).unwrap_err();
        assert_eq!(
            err,
            Error::ShapeMismatch {
                op: "matmul",
                lhs: vec![2, 3],
                rhs: vec![2, 3]
            }
        );
    }

    #[test]
    fn max_pool_lanes() {
        let t = Tensor::matrix(2, 2, vec![1., 5., 3., 2.]).unwrap();
        let idx = t.arg_extreme(0, true).unwrap();
        assert_eq!(t.gather_lanes(0, &idx).unwrap().data(), &[3., 5.]);
    }

    #[test]
    fn arg_extreme_ties_pick_lowest_index() {
        let t = Tensor::matrix(3, 1, vec![2., 2., 1.]).unwrap();
        assert_eq!(t.arg_extreme(0, true).unwrap(), vec![0]);
        let t = Tensor::matrix(3, 1, vec![1., 2., 1.]).unwrap();
        assert_eq!(t.arg_extreme(0, false).unwrap(), vec![0]);
    }

    #[test]
    fn slice_pad_are_adjoint() {
        let t = Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let s = t.slice(1, 1, 2).unwrap();
        assert_eq!(s.data(), &[2., 3., 5., 6.]);
        assert_eq!(s.pad(1, 1, 3).unwrap().data(), &[0., 2., 3., 0., 5., 6.]);
        let r = t.slice(0, 1, 1).unwrap();
        assert_eq!(r.pad(0, 1, 2).unwrap().data(), &[0., 0., 0., 4., 5., 6.]);
    }

    #[test]
    fn expand_and_sum_axis() {
        let r = Tensor::row(&[1., 2.]);
        let e = r.expand(3, 2).unwrap();
        assert_eq!(e.sum_axis(0).unwrap().data(), &[3., 6.]);
        assert_eq!(e.sum_axis(1).unwrap().data(), &[3., 3., 3.]);
        assert!(r.expand(3, 3).is_err());
    }
}
