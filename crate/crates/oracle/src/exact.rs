use mmsb_core::{DenseAdjacency, Partition5, Tensor3};
use nalgebra::{DMatrix, DVector};

use crate::OracleError;

/// `Pi[:, set]^T P^T`, one row per node of `set`.
pub fn exact_f(pi: &DMatrix<f64>, p: &DMatrix<f64>, set: &[usize]) -> DMatrix<f64> {
    let k = p.nrows();
    let mut f = DMatrix::zeros(set.len(), k);
    for (row, &a) in set.iter().enumerate() {
        for i in 0..k {
            let mut s = 0.0;
            for j in 0..k {
                s += pi[(j, a)] * p[(i, j)];
            }
            f[(row, i)] = s;
        }
    }
    f
}

/// `sum_i alpha_hat_i F_A[:, i] (x) F_B[:, i] (x) F_C[:, i]`.
pub fn exact_block_tensor(
    fa: &DMatrix<f64>,
    fb: &DMatrix<f64>,
    fc: &DMatrix<f64>,
    alpha_hat: &DVector<f64>,
    cap: usize,
) -> Result<Tensor3, OracleError> {
    let dims = [fa.nrows(), fb.nrows(), fc.nrows()];
    let requested = dims[0] * dims[1] * dims[2];
    if requested > cap {
        return Err(OracleError::CapExceeded { requested, cap });
    }
    let mut t = Tensor3::zeros(dims);
    for a in 0..dims[0] {
        for b in 0..dims[1] {
            for c in 0..dims[2] {
                let mut s = 0.0;
                for i in 0..alpha_hat.len() {
                    s += alpha_hat[i] * fa[(a, i)] * fb[(b, i)] * fc[(c, i)];
                }
                t.set(a, b, c, s);
            }
        }
    }
    Ok(t)
}

/// `sum_i alpha_hat_i (W_A^T F_A e_i) (x) (W_B^T F_B e_i) (x) (W_C^T F_C e_i)`,
/// the whitened form of [`exact_block_tensor`] built from its factors.
pub fn whitened_factor_tensor(
    alpha_hat: &DVector<f64>,
    fa: &DMatrix<f64>,
    wa: &DMatrix<f64>,
    fb: &DMatrix<f64>,
    wb: &DMatrix<f64>,
    fc: &DMatrix<f64>,
    wc: &DMatrix<f64>,
) -> Tensor3 {
    let (ma, mb, mc) = (wa.transpose() * fa, wb.transpose() * fb, wc.transpose() * fc);
    let k = ma.nrows();
    let mut t = Tensor3::cube(k);
    for p in 0..k {
        for q in 0..k {
            for r in 0..k {
                let mut s = 0.0;
                for i in 0..alpha_hat.len() {
                    s += alpha_hat[i] * ma[(p, i)] * mb[(q, i)] * mc[(r, i)];
                }
                t.set(p, q, r, s);
            }
        }
    }
    t
}

/// `Diag(alpha_hat)^{-1/2} (sqrt(alpha0 + 1) Pi_X - (sqrt(alpha0 + 1) - 1) alpha_hat 1^T)`.
pub fn psi_matrix(pi_x: &DMatrix<f64>, alpha_hat: &DVector<f64>, alpha0: f64) -> DMatrix<f64> {
    let c = (alpha0 + 1.0).sqrt();
    DMatrix::from_fn(pi_x.nrows(), pi_x.ncols(), |i, x| {
        (c * pi_x[(i, x)] - (c - 1.0) * alpha_hat[i]) / alpha_hat[i].sqrt()
    })
}

/// `sqrt(m) (Psi Psi^T)^{-1/2} Psi`: a copy of `Psi` (`k x m`) for which
/// `m^{-1} Psi Psi^T = I` holds exactly rather than in expectation.
pub fn whitened_psi(psi: &DMatrix<f64>) -> DMatrix<f64> {
    let m = psi.ncols() as f64;
    let eig = (psi * psi.transpose()).symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let root = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    root * psi * m.sqrt()
}

/// `E[pi pi^T] = (Diag(alpha_hat) + alpha0 alpha_hat alpha_hat^T) / (alpha0 + 1)`.
pub fn dirichlet_moment_matrix(alpha: &[f64]) -> DMatrix<f64> {
    let alpha0: f64 = alpha.iter().sum();
    let k = alpha.len();
    DMatrix::from_fn(k, k, |i, j| {
        let (ai, aj) = (alpha[i] / alpha0, alpha[j] / alpha0);
        let diag = if i == j { ai } else { 0.0 };
        (diag + alpha0 * ai * aj) / (alpha0 + 1.0)
    })
}

/// `E[G | Pi] = Pi^T P Pi` with a zero diagonal.
pub fn expected_graph(pi: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, n) = pi.shape();
    let mut g = DMatrix::zeros(n, n);
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let mut s = 0.0;
            for i in 0..k {
                for j in 0..k {
                    s += pi[(i, u)] * p[(i, j)] * pi[(j, v)];
                }
            }
            g[(u, v)] = s;
        }
    }
    g
}

pub fn expected_adjacency(pi: &DMatrix<f64>, p: &DMatrix<f64>) -> DenseAdjacency {
    DenseAdjacency::from_matrix(&expected_graph(pi, p)).expect("square by construction")
}

/// Population-level moments over a fixed partition.
///
/// The modified adjacency blocks are `(F_S Diag(alpha_hat)^{1/2} Psi_X)^T`
/// with `Psi_X` replaced by [`whitened_psi`], so the whitening identities hold
/// exactly and every downstream quantity is noiseless.
#[derive(Debug, Clone)]
pub struct ExactMoments {
    pub fa: DMatrix<f64>,
    pub fb: DMatrix<f64>,
    pub fc: DMatrix<f64>,
    pub fy: DMatrix<f64>,
    /// `|X| x |S|` for `S = A, B, C, Y`.
    pub gmod_a: DMatrix<f64>,
    pub gmod_b: DMatrix<f64>,
    pub gmod_c: DMatrix<f64>,
    pub gmod_y: DMatrix<f64>,
    pub psi_x: DMatrix<f64>,
    pub alpha_hat: DVector<f64>,
}

impl ExactMoments {
    pub fn new(pi: &DMatrix<f64>, p: &DMatrix<f64>, alpha_hat: &DVector<f64>, alpha0: f64, part: &Partition5) -> Self {
        let psi_x = whitened_psi(&psi_matrix(&pi.select_columns(&part.x), alpha_hat, alpha0));
        let root = DMatrix::from_diagonal(&alpha_hat.map(f64::sqrt));
        let gmod = |f: &DMatrix<f64>| (f * &root * &psi_x).transpose();
        let fa = exact_f(pi, p, &part.a);
        let fb = exact_f(pi, p, &part.b);
        let fc = exact_f(pi, p, &part.c);
        let fy = exact_f(pi, p, &part.y);
        Self {
            gmod_a: gmod(&fa),
            gmod_b: gmod(&fb),
            gmod_c: gmod(&fc),
            gmod_y: gmod(&fy),
            fa,
            fb,
            fc,
            fy,
            psi_x,
            alpha_hat: alpha_hat.clone(),
        }
    }
}

/// One-hot memberships whose community counts inside every set of `part`
/// are `alpha_hat |S|`, rounded by largest remainder.
///
/// With exact counts the empirical moments of the expected graph equal their
/// population values.
pub fn balanced_block_memberships(n: usize, part: &Partition5, alpha_hat: &[f64]) -> DMatrix<f64> {
    let k = alpha_hat.len();
    let mut pi = DMatrix::zeros(k, n);
    for set in [&part.a, &part.b, &part.c, &part.x, &part.y, &part.rest] {
        let m = set.len() as f64;
        let mut counts: Vec<usize> = alpha_hat.iter().map(|a| (a * m).floor() as usize).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| {
            let ri = alpha_hat[i] * m - counts[i] as f64;
            let rj = alpha_hat[j] * m - counts[j] as f64;
            rj.total_cmp(&ri).then(i.cmp(&j))
        });
        let missing = set.len() - counts.iter().sum::<usize>();
        for &i in order.iter().take(missing) {
            counts[i] += 1;
        }
        let mut nodes = set.iter();
        for (i, &c) in counts.iter().enumerate() {
            for &u in nodes.by_ref().take(c) {
                pi[(i, u)] = 1.0;
            }
        }
    }
    pi
}
