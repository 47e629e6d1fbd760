//! Truncated singular value decomposition.
//!
//! Small problems go straight to a dense SVD. Larger ones only need products
//! with the operator and its transpose, so they are solved by block subspace
//! iteration with a Rayleigh-Ritz step, run until the leading `k` residuals are
//! at round-off level.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MmsbError, Result};

/// Matrices with at most this many rows or columns use the dense path.
pub const DENSE_SVD_LIMIT: usize = 64;

/// Smallest admissible `sigma_k / sigma_1`.
pub const RANK_TOLERANCE: f64 = 1e-10;

const MAX_SUBSPACE_ITERATIONS: usize = 3000;
const MAX_JACOBI_SWEEPS: usize = 80;
const RESIDUAL_TOLERANCE: f64 = 1e-11;
const START_SEED: u64 = 0x5eed_5eed;

/// A linear map known only through products.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `M * x`
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// `M^T * y`
    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64>;

    fn to_dense(&self) -> DMatrix<f64> {
        self.apply(&DMatrix::identity(self.ncols(), self.ncols()))
    }
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }

    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(y)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// The transpose of another operator.
pub struct Transposed<'a, M: LinearOperator + ?Sized>(pub &'a M);

impl<M: LinearOperator + ?Sized> LinearOperator for Transposed<'_, M> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }

    fn ncols(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.apply_t(x)
    }

    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.apply(y)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.0.to_dense().transpose()
    }
}

/// A scalar multiple of another operator.
pub struct Scaled<'a, M: LinearOperator + ?Sized>(pub f64, pub &'a M);

impl<M: LinearOperator + ?Sized> LinearOperator for Scaled<'_, M> {
    fn nrows(&self) -> usize {
        self.1.nrows()
    }

    fn ncols(&self) -> usize {
        self.1.ncols()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.1.apply(x) * self.0
    }

    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.1.apply_t(y) * self.0
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.1.to_dense() * self.0
    }
}

/// Leading `k` singular triplets, `M ~ U diag(d) V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub d: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.d) * self.v.transpose()
    }
}

/// Top-`k` SVD of `m`, with singular values in nonincreasing order and each
/// left singular vector signed so its largest-magnitude entry is positive.
pub fn k_rank_svd<M: LinearOperator + ?Sized>(m: &M, k: usize) -> Result<TruncatedSvd> {
    let (rows, cols) = (m.nrows(), m.ncols());
    if k == 0 || rows.min(cols) < k {
        return Err(MmsbError::DimensionMismatch("k-rank SVD needs min(rows, cols) >= k >= 1"));
    }
    let mut svd = if rows.min(cols) <= DENSE_SVD_LIMIT {
        dense_svd(m.to_dense(), k)?
    } else {
        subspace_svd(m, k)?
    };
    fix_signs(&mut svd);
    let ratio = if svd.d[0] > 0.0 { svd.d[k - 1] / svd.d[0] } else { 0.0 };
    if !(ratio >= RANK_TOLERANCE) {
        return Err(MmsbError::RankDeficient { ratio });
    }
    Ok(svd)
}

fn dense_svd(m: DMatrix<f64>, k: usize) -> Result<TruncatedSvd> {
    let (u, d, v) = sorted_svd(m)?;
    Ok(TruncatedSvd {
        u: u.columns(0, k).into_owned(),
        d: d.rows(0, k).into_owned(),
        v: v.columns(0, k).into_owned(),
    })
}

/// Full thin SVD with singular values sorted in decreasing order.
///
/// One-sided Jacobi on the taller orientation. Left vectors belonging to
/// (numerically) zero singular values are completed to an orthonormal set.
fn sorted_svd(m: DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    if m.nrows() < m.ncols() {
        let (u, d, v) = sorted_svd(m.transpose())?;
        return Ok((v, d, u));
    }
    let (rows, cols) = m.shape();
    let mut b = m;
    let mut v = DMatrix::<f64>::identity(cols, cols);
    // Columns below this squared norm are numerically zero and left alone.
    let floor = {
        let scale = rows as f64 * f64::EPSILON * b.norm();
        scale * scale
    };
    // Rounding in a length-`rows` dot product grows like sqrt(rows) eps.
    let tol = libm::sqrt(rows as f64) * f64::EPSILON;
    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = b.column(p).norm_squared();
                let beta = b.column(q).norm_squared();
                let gamma = b.column(p).dot(&b.column(q));
                if alpha.min(beta) <= floor || gamma.abs() <= tol * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut b, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MmsbError::SvdNotConverged {
            iterations: MAX_JACOBI_SWEEPS,
        });
    }
    let norms: alloc::vec::Vec<f64> = (0..cols).map(|j| b.column(j).norm()).collect();
    let mut order: alloc::vec::Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let top = norms.iter().copied().fold(0.0, f64::max);
    let tiny = top * rows as f64 * f64::EPSILON;
    let mut u = DMatrix::zeros(rows, cols);
    let mut d = DVector::zeros(cols);
    let mut filled = 0;
    for (j, &src) in order.iter().enumerate() {
        d[j] = norms[src];
        if norms[src] > tiny {
            u.set_column(j, &(b.column(src) / norms[src]));
            filled = j + 1;
        }
    }
    complete_basis(&mut u, filled);
    Ok((u, d, v.select_columns(&order)))
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Fills columns `filled..` of `u` with unit vectors orthogonal to the
/// earlier ones, choosing coordinate directions by largest residual.
fn complete_basis(u: &mut DMatrix<f64>, filled: usize) {
    let rows = u.nrows();
    for j in filled..u.ncols() {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for e in 0..rows {
            let mut cand = DVector::zeros(rows);
            cand[e] = 1.0;
            for _ in 0..2 {
                for prev in 0..j {
                    let dot = u.column(prev).dot(&cand);
                    cand.axpy(-dot, &u.column(prev), 1.0);
                }
            }
            let norm = cand.norm();
            if norm > best_norm {
                best_norm = norm;
                best = Some(cand);
            }
            if best_norm > 0.7 {
                break;
            }
        }
        let cand = best.expect("rows exceed filled columns");
        u.set_column(j, &(cand / best_norm));
    }
}

fn orthonormalize(x: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = x.qr();
    (qr.q(), qr.r())
}

fn subspace_svd<M: LinearOperator + ?Sized>(m: &M, k: usize) -> Result<TruncatedSvd> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let b = (k + 8).min(rows.min(cols));
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let start = DMatrix::from_fn(cols, b, |_, _| rng.random::<f64>() - 0.5);
    let (mut q, _) = orthonormalize(start);
    let mut ritz: Option<(DMatrix<f64>, DVector<f64>)> = None;

    for _ in 0..MAX_SUBSPACE_ITERATIONS {
        // q holds the right Ritz vectors of the previous step, so M q doubles
        // as the residual check for that step.
        let mq = m.apply(&q);
        if let Some((left, s)) = &ritz {
            let sigma1 = s[0].max(f64::MIN_POSITIVE);
            let worst = (0..k)
                .map(|j| (mq.column(j) - left.column(j) * s[j]).norm() / sigma1)
                .fold(0.0, f64::max);
            if worst < RESIDUAL_TOLERANCE {
                return Ok(TruncatedSvd {
                    u: left.columns(0, k).into_owned(),
                    d: s.rows(0, k).into_owned(),
                    v: q.columns(0, k).into_owned(),
                });
            }
        }
        let (p, _) = orthonormalize(mq);
        let (qn, r) = orthonormalize(m.apply_t(&p));
        // M^T P = Qn R = Qn U_r S V_r^T, so M ~ (P V_r) S (Qn U_r)^T.
        let (ur, s, vr) = sorted_svd(r)?;
        q = qn * ur;
        ritz = Some((p * vr, s));
    }
    Err(MmsbError::SvdNotConverged {
        iterations: MAX_SUBSPACE_ITERATIONS,
    })
}

fn fix_signs(svd: &mut TruncatedSvd) {
    for j in 0..svd.u.ncols() {
        let col = svd.u.column(j);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            svd.u.column_mut(j).neg_mut();
            svd.v.column_mut(j).neg_mut();
        }
    }
}
