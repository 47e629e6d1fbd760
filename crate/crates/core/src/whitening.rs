//! Whitening matrices and the symmetrizers that align whitened modes.

use nalgebra::{DMatrix, DVector};

use crate::error::{MmsbError, Result};
use crate::linalg::{k_rank_svd, LinearOperator, Scaled, Transposed};
use crate::moments::ModifiedAdjacency;

/// `W = U diag(D)^{-1}` from the rank-`k` SVD
/// `(|X|^{-1/2} G^{alpha0}[X, A])^T ~ U diag(D) V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitener {
    pub w: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub d: DVector<f64>,
    /// Right singular vectors, one row per node of the source set `X`.
    pub v: DMatrix<f64>,
    /// `|X|^{-1/2}`
    pub source_scale: f64,
}

impl Whitener {
    pub fn k(&self) -> usize {
        self.d.len()
    }
}

/// Whitener for the target set of `gmod` (its columns), using its rows as
/// the source set.
pub fn compute_whitener(gmod: &ModifiedAdjacency, k: usize) -> Result<Whitener> {
    let rows = gmod.nrows();
    if rows < k || gmod.ncols() < k {
        return Err(MmsbError::TooFewNodes {
            required: k,
            available: rows.min(gmod.ncols()),
        });
    }
    let source_scale = 1.0 / libm::sqrt(rows as f64);
    let transposed = Transposed(gmod);
    let op = Scaled(source_scale, &transposed);
    let svd = k_rank_svd(&op, k)?;
    let mut w = svd.u.clone();
    for (j, mut col) in w.column_iter_mut().enumerate() {
        col /= svd.d[j];
    }
    Ok(Whitener {
        w,
        u: svd.u,
        d: svd.d,
        v: svd.v,
        source_scale,
    })
}

/// `R_{A,B} = |X|^{-1} W_B^T (G[X, B])_k^T (G[X, A])_k W_A`.
///
/// With both truncated SVDs taken over the same source set this collapses to
/// `V_B^T V_A`, which is what is evaluated.
pub fn compute_symmetrizer(w_b: &Whitener, w_a: &Whitener) -> Result<DMatrix<f64>> {
    if w_b.k() != w_a.k() {
        return Err(MmsbError::DimensionMismatch("whiteners must have the same rank"));
    }
    if w_b.v.nrows() != w_a.v.nrows() || w_b.source_scale != w_a.source_scale {
        return Err(MmsbError::DimensionMismatch("whiteners must share their source set"));
    }
    Ok(w_b.v.tr_mul(&w_a.v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rows: usize, cols: usize, rank: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = DMatrix::from_fn(rows, rank, |_, _| rng.random::<f64>());
        let r = DMatrix::from_fn(rank, cols, |_, _| rng.random::<f64>());
        l * r
    }

    fn whitening_error(gmod: &ModifiedAdjacency, wh: &Whitener, k: usize) -> f64 {
        let m = gmod.to_dense().transpose() * wh.source_scale;
        let svd = k_rank_svd(&m, k).unwrap();
        let mk = svd.reconstruct();
        let prod = wh.w.transpose() * &mk * mk.transpose() * &wh.w;
        (prod - DMatrix::identity(k, k)).amax()
    }

    #[test]
    fn orthogonal_rows_give_unit_singular_values() {
        // Rows e_i * sqrt(|X|) for |X| = |A| = 4.
        let m = DMatrix::<f64>::identity(4, 4) * 2.0;
        let gmod = ModifiedAdjacency::from_dense(&m, 0.0);
        let wh = compute_whitener(&gmod, 3).unwrap();
        for j in 0..3 {
            assert!((wh.d[j] - 1.0).abs() < 1e-14);
        }
        assert!((wh.u.tr_mul(&wh.u) - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn whitens_random_full_rank_input() {
        let m = random_dense(40, 25, 25, 3);
        let gmod = ModifiedAdjacency::from_dense(&m, 0.0);
        let wh = compute_whitener(&gmod, 4).unwrap();
        assert!(whitening_error(&gmod, &wh, 4) < 1e-8);
        assert!(wh.d.as_slice().windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn whitens_sparse_graph_blocks_on_the_iterative_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 700;
        let mut g = Graph::empty(n, true);
        for u in 0..n {
            for v in 0..n {
                let same = (u % 3) == (v % 3);
                if u != v && rng.random::<f64>() < if same { 0.5 } else { 0.1 } {
                    g.add_edge(u, v).unwrap();
                }
            }
        }
        let x: alloc::vec::Vec<usize> = (0..350).collect();
        let a: alloc::vec::Vec<usize> = (350..700).collect();
        let gmod = ModifiedAdjacency::new(&g, &x, &a, 1.0).unwrap();
        let wh = compute_whitener(&gmod, 3).unwrap();
        assert!(whitening_error(&gmod, &wh, 3) < 1e-8);
    }

    #[test]
    fn self_symmetrizer_is_identity() {
        let m = random_dense(30, 20, 20, 5);
        let gmod = ModifiedAdjacency::from_dense(&m, 0.0);
        let wh = compute_whitener(&gmod, 3).unwrap();
        let r = compute_symmetrizer(&wh, &wh).unwrap();
        assert!((r - DMatrix::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn symmetrizer_of_rank_k_inputs_is_orthogonal() {
        // Both blocks share the same rank-3 row space over X.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = DMatrix::from_fn(50, 3, |_, _| rng.random::<f64>());
        let fa = DMatrix::from_fn(3, 20, |_, _| rng.random::<f64>());
        let fb = DMatrix::from_fn(3, 22, |_, _| rng.random::<f64>());
        let ga = ModifiedAdjacency::from_dense(&(&psi * fa), 0.0);
        let gb = ModifiedAdjacency::from_dense(&(&psi * fb), 0.0);
        let wa = compute_whitener(&ga, 3).unwrap();
        let wb = compute_whitener(&gb, 3).unwrap();
        let r = compute_symmetrizer(&wb, &wa).unwrap();
        assert!((r.tr_mul(&r) - DMatrix::identity(3, 3)).amax() < 1e-6);
        // (W_B R)^T G_B^T = W_A^T G_A^T on noiseless input.
        let lhs = (&wb.w * &r).transpose() * gb.to_dense().transpose();
        let rhs = wa.w.transpose() * ga.to_dense().transpose();
        assert!((lhs - rhs).amax() < 1e-6);
    }

    #[test]
    fn symmetrizer_checks_shapes() {
        let a = compute_whitener(&ModifiedAdjacency::from_dense(&random_dense(10, 8, 8, 1), 0.0), 2).unwrap();
        let b = compute_whitener(&ModifiedAdjacency::from_dense(&random_dense(12, 8, 8, 1), 0.0), 2).unwrap();
        assert!(matches!(compute_symmetrizer(&a, &b), Err(MmsbError::DimensionMismatch(_))));
    }
}
