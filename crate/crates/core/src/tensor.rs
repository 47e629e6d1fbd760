//! Dense third-order tensors and their multilinear maps.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{MmsbError, Result};

/// Tolerance on `||v|| = 1` for the checked maps.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// A dense `d1 x d2 x d3` tensor; entry `(p, q, r)` lives at
/// `(p * d2 + q) * d3 + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn cube(k: usize) -> Self {
        Self::zeros([k, k, k])
    }

    pub fn from_fn<F: FnMut(usize, usize, usize) -> f64>(dims: [usize; 3], mut f: F) -> Self {
        let mut t = Self::zeros(dims);
        for p in 0..dims[0] {
            for q in 0..dims[1] {
                for r in 0..dims[2] {
                    let i = t.index(p, q, r);
                    t.data[i] = f(p, q, r);
                }
            }
        }
        t
    }

    /// `sum_i weights[i] * a_i (x) b_i (x) c_i` over the columns of `a`, `b`, `c`.
    pub fn from_factors(weights: &[f64], a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Self {
        let mut t = Self::zeros([a.nrows(), b.nrows(), c.nrows()]);
        for (i, &w) in weights.iter().enumerate() {
            t.add_rank1(w, a.column(i).as_slice(), b.column(i).as_slice(), c.column(i).as_slice());
        }
        t
    }

    #[inline]
    fn index(&self, p: usize, q: usize, r: usize) -> usize {
        (p * self.dims[1] + q) * self.dims[2] + r
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn is_cubic(&self) -> bool {
        self.dims[0] == self.dims[1] && self.dims[1] == self.dims[2]
    }

    /// Side length of a cubic tensor.
    pub fn k(&self) -> usize {
        self.dims[0]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize) -> f64 {
        self.data[self.index(p, q, r)]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, value: f64) {
        let i = self.index(p, q, r);
        self.data[i] = value;
    }

    pub fn add_rank1(&mut self, weight: f64, a: &[f64], b: &[f64], c: &[f64]) {
        let d3 = self.dims[2];
        for (p, &ap) in a.iter().enumerate() {
            let wa = weight * ap;
            for (q, &bq) in b.iter().enumerate() {
                let wab = wa * bq;
                let base = (p * self.dims[1] + q) * d3;
                for (slot, &cr) in self.data[base..base + d3].iter_mut().zip(c) {
                    *slot += wab * cr;
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn axpy(&mut self, s: f64, other: &Tensor3) {
        assert_eq!(self.dims, other.dims, "tensor shapes differ");
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += s * y;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `T(I, v, v)`; `v` must be a unit vector.
    pub fn apply_ivv(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_cubic(v)?;
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(MmsbError::NotUnitVector { norm });
        }
        Ok(self.ivv(v.as_slice()))
    }

    /// `T(v, v, v)`.
    pub fn apply_vvv(&self, v: &DVector<f64>) -> Result<f64> {
        self.check_cubic(v)?;
        Ok(self.vvv(v.as_slice()))
    }

    fn check_cubic(&self, v: &DVector<f64>) -> Result<()> {
        if !self.is_cubic() || v.len() != self.dims[0] {
            return Err(MmsbError::DimensionMismatch("vector length must match cubic tensor"));
        }
        Ok(())
    }

    pub(crate) fn ivv(&self, v: &[f64]) -> DVector<f64> {
        let k = self.dims[0];
        let mut out = DVector::zeros(k);
        for p in 0..k {
            let mut acc = 0.0;
            for q in 0..k {
                let row = &self.data[(p * k + q) * k..(p * k + q + 1) * k];
                let inner: f64 = row.iter().zip(v).map(|(t, x)| t * x).sum();
                acc += v[q] * inner;
            }
            out[p] = acc;
        }
        out
    }

    pub(crate) fn vvv(&self, v: &[f64]) -> f64 {
        self.ivv(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// `T(M1, M2, M3)`: entry `(i, j, l)` is
    /// `sum_{p,q,r} T[p,q,r] M1[p,i] M2[q,j] M3[r,l]`.
    pub fn multilinear(&self, m1: &DMatrix<f64>, m2: &DMatrix<f64>, m3: &DMatrix<f64>) -> Result<Tensor3> {
        let [d1, d2, d3] = self.dims;
        if m1.nrows() != d1 || m2.nrows() != d2 || m3.nrows() != d3 {
            return Err(MmsbError::DimensionMismatch("multilinear map rows must match tensor dims"));
        }
        let (e1, e2, e3) = (m1.ncols(), m2.ncols(), m3.ncols());
        // Contract the last mode first: (d1*d2) x d3 times d3 x e3.
        let flat = DMatrix::from_row_slice(d1 * d2, d3, &self.data);
        let s3 = flat * m3; // (p, q) x l
        let mut s2 = vec![0.0; d1 * e2 * e3]; // p x j x l
        for p in 0..d1 {
            for q in 0..d2 {
                for j in 0..e2 {
                    let w = m2[(q, j)];
                    if w == 0.0 {
                        continue;
                    }
                    for l in 0..e3 {
                        s2[(p * e2 + j) * e3 + l] += w * s3[(p * d2 + q, l)];
                    }
                }
            }
        }
        let mut out = Tensor3::zeros([e1, e2, e3]);
        for p in 0..d1 {
            for i in 0..e1 {
                let w = m1[(p, i)];
                if w == 0.0 {
                    continue;
                }
                let src = &s2[p * e2 * e3..(p + 1) * e2 * e3];
                let dst = &mut out.data[i * e2 * e3..(i + 1) * e2 * e3];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        Ok(out)
    }

    /// Average over all six index permutations.
    pub fn symmetrize(&self) -> Result<Tensor3> {
        if !self.is_cubic() {
            return Err(MmsbError::DimensionMismatch("only cubic tensors can be symmetrized"));
        }
        let k = self.dims[0];
        let mut out = Tensor3::cube(k);
        for p in 0..k {
            for q in 0..k {
                for r in 0..k {
                    // Summing the six values in a fixed order of the sorted
                    // index triple makes every permutation bit-identical.
                    let mut idx = [p, q, r];
                    idx.sort_unstable();
                    let [a, b, c] = idx;
                    let s = self.get(a, b, c)
                        + self.get(a, c, b)
                        + self.get(b, a, c)
                        + self.get(b, c, a)
                        + self.get(c, a, b)
                        + self.get(c, b, a);
                    out.set(p, q, r, s / 6.0);
                }
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_cubic() {
            return false;
        }
        let k = self.dims[0];
        for p in 0..k {
            for q in 0..k {
                for r in 0..k {
                    let t = self.get(p, q, r);
                    for s in [self.get(q, p, r), self.get(r, q, p), self.get(p, r, q)] {
                        if (t - s).abs() > tol {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}
