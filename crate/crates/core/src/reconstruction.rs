//! From eigen-pairs to memberships, community sizes, and connectivity.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{MmsbError, Result};
use crate::graph::{project_rows, Adjacency, SetIndex};
use crate::model::argmax;
use crate::moments::Partition5;
use crate::power::EigenPairs;

/// Eigenvalues below this are treated as a failed decomposition.
pub const LAMBDA_FLOOR: f64 = 1e-8;

/// Alignment scores closer than this count as a tie.
pub const ALIGNMENT_TIE: f64 = 1e-9;

/// Membership estimates for `targets` before and after thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberEstimate {
    /// `diag(lambda)^{-1} Phi^T W_A^T G[targets, A]^T`
    pub raw: DMatrix<f64>,
    /// `raw` with entries below `tau` set to zero.
    pub thresholded: DMatrix<f64>,
    /// `lambda_i^{-2}`
    pub alpha_hat: DVector<f64>,
}

/// Reconstructs memberships of `targets` from their edges into `a`.
pub fn estimate_members<G: Adjacency>(
    pairs: &EigenPairs,
    w_a: &DMatrix<f64>,
    g: &G,
    a: &[usize],
    targets: &[usize],
    tau: f64,
) -> Result<MemberEstimate> {
    for (index, &value) in pairs.lambda.iter().enumerate() {
        if !(value >= LAMBDA_FLOOR) {
            return Err(MmsbError::NonPositiveEigenvalue { index, value });
        }
    }
    if !(tau >= 0.0) {
        return Err(MmsbError::InvalidConfig("tau must be nonnegative"));
    }
    if w_a.nrows() != a.len() || w_a.ncols() != pairs.k() || pairs.phi.nrows() != pairs.k() {
        return Err(MmsbError::DimensionMismatch("whitener does not match eigen-pairs or set A"));
    }
    let index = SetIndex::new(g.node_count(), a)?;
    for &t in targets {
        if t >= g.node_count() {
            return Err(MmsbError::NodeOutOfRange { node: t, n: g.node_count() });
        }
        if index.position(t).is_some() {
            return Err(MmsbError::OverlappingSets);
        }
    }
    // G[targets, A] W_A is |targets| x k.
    let projected = project_rows(g, targets, &index, w_a);
    let mut raw = pairs.phi.tr_mul(&projected.transpose());
    for (i, mut row) in raw.row_iter_mut().enumerate() {
        row /= pairs.lambda[i];
    }
    let thresholded = threshold(&raw, tau);
    let alpha_hat = pairs.lambda.map(|l| 1.0 / (l * l));
    Ok(MemberEstimate {
        raw,
        thresholded,
        alpha_hat,
    })
}

/// Entries below `tau` become zero.
pub fn threshold(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    m.map(|v| if v < tau { 0.0 } else { v })
}

/// `0.5` for block models, else `c_tau * k sqrt(alpha0 / n) * sqrt(p) / (p - q)`.
pub fn default_tau(k: usize, alpha0: f64, n: usize, p: f64, q: f64, c_tau: f64) -> Result<f64> {
    if alpha0 == 0.0 {
        return Ok(0.5);
    }
    if n == 0 {
        return Err(MmsbError::InvalidConfig("n must be positive"));
    }
    if !(p > q) {
        return Err(MmsbError::DegenerateSeparation { p, q });
    }
    Ok(c_tau * k as f64 * libm::sqrt(alpha0) / libm::sqrt(n as f64) * libm::sqrt(p) / (p - q))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// Row `perm[i]` of the second estimate corresponds to row `i` of the first.
    pub perm: Vec<usize>,
    /// Set when some greedy choice was a tie within [`ALIGNMENT_TIE`].
    pub ambiguous: bool,
}

impl Alignment {
    pub fn identity(k: usize) -> Self {
        Self {
            perm: (0..k).collect(),
            ambiguous: false,
        }
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / libm::sqrt(saa * sbb)
}

/// Greedy max-correlation matching between the rows of two `k x m`
/// estimates over the same nodes.
///
/// The correlation is signed: with two communities the rows are mirror images
/// of each other, so the wrong match has the same absolute correlation.
pub fn align_estimates(first: &DMatrix<f64>, second: &DMatrix<f64>) -> Result<Alignment> {
    if first.shape() != second.shape() {
        return Err(MmsbError::DimensionMismatch("estimates must cover the same nodes"));
    }
    let k = first.nrows();
    if first.ncols() < k {
        return Err(MmsbError::TooFewNodes {
            required: k,
            available: first.ncols(),
        });
    }
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
    let (ra, rb) = (rows(first), rows(second));
    let mut score = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            score[i * k + j] = pearson(&ra[i], &rb[j]);
        }
    }
    let mut perm = vec![usize::MAX; k];
    let mut used_a = vec![false; k];
    let mut used_b = vec![false; k];
    let mut ambiguous = false;
    for _ in 0..k {
        let mut best: Option<(usize, usize)> = None;
        for i in (0..k).filter(|&i| !used_a[i]) {
            for j in (0..k).filter(|&j| !used_b[j]) {
                if best.is_none_or(|(bi, bj)| score[i * k + j] > score[bi * k + bj]) {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("an unmatched pair remains");
        // Only choices competing for the same row or column make it a tie.
        let rival = (0..k)
            .filter(|&jj| jj != j && !used_b[jj])
            .map(|jj| score[i * k + jj])
            .chain((0..k).filter(|&ii| ii != i && !used_a[ii]).map(|ii| score[ii * k + j]))
            .fold(f64::NEG_INFINITY, f64::max);
        if score[i * k + j] - rival <= ALIGNMENT_TIE {
            ambiguous = true;
        }
        perm[i] = j;
        used_a[i] = true;
        used_b[j] = true;
    }
    Ok(Alignment { perm, ambiguous })
}

/// Rows `(alpha0 + 1) Pi^i / |Pi^i|_1 - alpha0 / m`, with `m` the number of
/// columns (nodes) of `pi_hat`.
pub fn build_q(pi_hat: &DMatrix<f64>, alpha0: f64) -> Result<DMatrix<f64>> {
    let m = pi_hat.ncols() as f64;
    let mut q = pi_hat.clone();
    for (i, mut row) in q.row_iter_mut().enumerate() {
        let l1: f64 = row.iter().map(|v| v.abs()).sum();
        if !(l1 > 0.0) {
            return Err(MmsbError::EmptyCommunity { community: i });
        }
        row.apply(|v| *v = (alpha0 + 1.0) * *v / l1 - alpha0 / m);
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PEstimate {
    /// `Q G Q^T` as computed.
    pub raw: DMatrix<f64>,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: DMatrix<f64>,
}

/// `P = Q G Q^T` with `Q` covering every node in order.
pub fn estimate_p<G: Adjacency>(q: &DMatrix<f64>, g: &G) -> Result<PEstimate> {
    let n = g.node_count();
    if q.ncols() != n {
        return Err(MmsbError::DimensionMismatch("Q must have one column per node"));
    }
    let all: Vec<usize> = (0..n).collect();
    Ok(p_from_blocks(q, g, &all, q, &all))
}

/// `Q_rows G[rows, cols] Q_cols^T`.
pub(crate) fn p_from_blocks<G: Adjacency>(
    q_rows: &DMatrix<f64>,
    g: &G,
    rows: &[usize],
    q_cols: &DMatrix<f64>,
    cols: &[usize],
) -> PEstimate {
    let index = SetIndex::new(g.node_count(), cols).expect("column set is valid");
    let f = project_rows(g, rows, &index, &q_cols.transpose());
    let raw = q_rows * f;
    let clamped = raw.map(|v| v.clamp(0.0, 1.0));
    PEstimate { raw, clamped }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    /// `k x n`, entries in `{0, 1}`.
    pub s: DMatrix<f64>,
    /// Mean diagonal of the per-rotation `P` estimates.
    pub high: f64,
    /// Mean off-diagonal.
    pub low: f64,
    /// `high <= low` in some rotation.
    pub not_homophilic: bool,
}

/// Role rotations `(scored set, reference set)` covering every node once.
fn rotations(part: &Partition5) -> [(&[usize], &[usize]); 6] {
    [
        (&part.c, &part.b),
        (&part.a, &part.c),
        (&part.b, &part.a),
        (&part.x, &part.y),
        (&part.y, &part.x),
        (&part.rest, &part.b),
    ]
}

/// Marks the communities each node belongs to.
///
/// For every rotation, the degrees of the scored set into the reference set
/// are averaged per community through `Q` (`F = G[C, B] Q_B^T`). Block
/// models take the argmax of each row of `F`; mixed models keep community `i`
/// when `F(x, i) >= L + (H - L) 3 xi / 4`, with `H` and `L` the mean diagonal
/// and off-diagonal of `P = Q_C F`.
pub fn support_recovery<G: Adjacency>(
    g: &G,
    pi_hat: &DMatrix<f64>,
    alpha0: f64,
    xi: f64,
    part: &Partition5,
) -> Result<SupportEstimate> {
    let (k, n) = pi_hat.shape();
    if n != g.node_count() {
        return Err(MmsbError::DimensionMismatch("pi_hat must have one column per node"));
    }
    if alpha0 > 0.0 && !(xi > 0.0) {
        return Err(MmsbError::InvalidConfig("xi must be positive"));
    }
    let mut s = DMatrix::zeros(k, n);
    let (mut high_sum, mut low_sum, mut used) = (0.0, 0.0, 0usize);
    let mut not_homophilic = false;
    for (scored, reference) in rotations(part) {
        if scored.is_empty() {
            continue;
        }
        let q_ref = build_q(&pi_hat.select_columns(reference), alpha0)?;
        let q_scored = build_q(&pi_hat.select_columns(scored), alpha0)?;
        let index = SetIndex::new(n, reference)?;
        let f = project_rows(g, scored, &index, &q_ref.transpose());
        let p = &q_scored * &f;
        let (high, low) = diag_offdiag_means(&p);
        high_sum += high;
        low_sum += low;
        used += 1;
        if high <= low {
            not_homophilic = true;
        }
        for (r, &node) in scored.iter().enumerate() {
            if alpha0 == 0.0 {
                let best = argmax(f.row(r).iter().copied());
                s[(best, node)] = 1.0;
            } else {
                let cut = low + (high - low) * 3.0 * xi / 4.0;
                for i in 0..k {
                    if f[(r, i)] >= cut {
                        s[(i, node)] = 1.0;
                    }
                }
            }
        }
    }
    Ok(SupportEstimate {
        s,
        high: high_sum / used.max(1) as f64,
        low: low_sum / used.max(1) as f64,
        not_homophilic,
    })
}

/// Mean of the diagonal and of the off-diagonal (zero when `k = 1`).
pub fn diag_offdiag_means(p: &DMatrix<f64>) -> (f64, f64) {
    let k = p.nrows();
    let diag: f64 = (0..k).map(|i| p[(i, i)]).sum::<f64>() / k as f64;
    if k == 1 {
        return (diag, 0.0);
    }
    let total: f64 = p.iter().sum();
    let off = (total - diag * k as f64) / (k * (k - 1)) as f64;
    (diag, off)
}
