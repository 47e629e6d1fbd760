//! Node partitions, edge means, the modified adjacency matrix, and 3-star
//! moment tensors.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{MmsbError, Result};
use crate::graph::{project_cols, project_rows, Adjacency, SetIndex};
use crate::linalg::LinearOperator;
use crate::tensor::Tensor3;

/// Default cap on the number of entries of a materialized 3-star tensor.
pub const RAW_THREESTAR_CAP: usize = 1_000_000;

/// Five disjoint node sets. Nodes covered by none of them are `rest`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition5 {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub rest: Vec<usize>,
}

impl Partition5 {
    pub fn sets(&self) -> [&[usize]; 5] {
        [&self.a, &self.b, &self.c, &self.x, &self.y]
    }

    /// All nodes outside `excluded`, in increasing order.
    pub fn complement(n: usize, excluded: &[usize]) -> Vec<usize> {
        let mut mask = vec![false; n];
        for &i in excluded {
            mask[i] = true;
        }
        (0..n).filter(|&i| !mask[i]).collect()
    }
}

/// Shuffles `[n]` and cuts it into sets of `floor(fraction * n)` nodes.
pub fn partition_nodes<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    fractions: [f64; 5],
    rng: &mut R,
) -> Result<Partition5> {
    let total: f64 = fractions.iter().sum();
    if fractions.iter().any(|&f| !(f > 0.0)) || total > 1.0 + 1e-12 {
        return Err(MmsbError::InvalidConfig("partition fractions must be positive and sum to at most 1"));
    }
    let sizes: Vec<usize> = fractions
        .iter()
        .map(|&f| libm::floor(f * n as f64 + 1e-9) as usize)
        .collect();
    let smallest = sizes.iter().copied().min().unwrap_or(0);
    if smallest < k.max(1) {
        let need = fractions
            .iter()
            .map(|&f| libm::ceil(k.max(1) as f64 / f) as usize)
            .max()
            .unwrap_or(n);
        return Err(MmsbError::TooFewNodes {
            required: need,
            available: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut start = 0;
    let mut take = |len: usize| {
        let mut set = order[start..start + len].to_vec();
        set.sort_unstable();
        start += len;
        set
    };
    let a = take(sizes[0]);
    let b = take(sizes[1]);
    let c = take(sizes[2]);
    let x = take(sizes[3]);
    let y = take(sizes[4]);
    let mut rest = order[start..].to_vec();
    rest.sort_unstable();
    Ok(Partition5 { a, b, c, x, y, rest })
}

fn check_disjoint(n: usize, first: &[usize], second: &[usize]) -> Result<()> {
    let index = SetIndex::new(n, first)?;
    for &v in second {
        if v >= n {
            return Err(MmsbError::NodeOutOfRange { node: v, n });
        }
        if index.position(v).is_some() {
            return Err(MmsbError::OverlappingSets);
        }
    }
    Ok(())
}

/// `|X|^{-1} sum_{i in X} G[i, A]^T`.
pub fn edge_mean<G: Adjacency>(g: &G, from: &[usize], to: &[usize]) -> Result<DVector<f64>> {
    if from.is_empty() || to.is_empty() {
        return Err(MmsbError::EmptyPartition);
    }
    check_disjoint(g.node_count(), from, to)?;
    let index = SetIndex::new(g.node_count(), to)?;
    Ok(mean_row(g, from, &index))
}

fn mean_row<G: Adjacency>(g: &G, from: &[usize], to: &SetIndex) -> DVector<f64> {
    let w = DMatrix::from_element(from.len(), 1, 1.0 / from.len() as f64);
    project_cols(g, from, to, &w).column(0).into_owned()
}

/// `G^{alpha0}[X, A] = s G[X, A] - (s - 1) 1 mu^T` with `s = sqrt(alpha0 + 1)`
/// and `mu` the mean row of `G[X, A]`.
///
/// The 0/1 block is kept in compressed-row form; products apply the rank-one
/// correction on the fly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedAdjacency {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    /// `None` for a 0/1 block.
    values: Option<Vec<f64>>,
    scale: f64,
    mu: DVector<f64>,
    alpha0: f64,
}

impl ModifiedAdjacency {
    pub fn new<G: Adjacency>(g: &G, x: &[usize], a: &[usize], alpha0: f64) -> Result<Self> {
        if !(alpha0 >= 0.0) {
            return Err(MmsbError::InvalidConfig("alpha0 must be nonnegative"));
        }
        if x.is_empty() || a.is_empty() {
            return Err(MmsbError::EmptyPartition);
        }
        check_disjoint(g.node_count(), x, a)?;
        let index = SetIndex::new(g.node_count(), a)?;
        let mut row_ptr = Vec::with_capacity(x.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut binary = true;
        row_ptr.push(0);
        for &node in x {
            let start = col_idx.len();
            g.for_each_in_row(node, |col, w| {
                if let Some(p) = index.position(col) {
                    col_idx.push(p as u32);
                    values.push(w);
                    binary &= w == 1.0;
                }
            });
            // Row entries must be sorted by local position for deterministic
            // summation regardless of the global labelling.
            sort_row(&mut col_idx[start..], &mut values[start..]);
            row_ptr.push(col_idx.len());
        }
        let mut m = Self {
            rows: x.len(),
            cols: a.len(),
            row_ptr,
            col_idx,
            values: if binary { None } else { Some(values) },
            scale: libm::sqrt(alpha0 + 1.0),
            mu: DVector::zeros(a.len()),
            alpha0,
        };
        let ones = DMatrix::from_element(x.len(), 1, 1.0 / x.len() as f64);
        m.mu = m.raw_apply_t(&ones).column(0).into_owned();
        Ok(m)
    }

    /// Wraps a precomputed modified matrix (used for population surrogates).
    pub fn from_dense(m: &DMatrix<f64>, alpha0: f64) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    col_idx.push(j as u32);
                    values.push(m[(i, j)]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            row_ptr,
            col_idx,
            values: Some(values),
            scale: 1.0,
            mu: DVector::zeros(m.ncols()),
            alpha0,
        }
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// Mean row of the unmodified block.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mu
    }

    fn value(&self, e: usize) -> f64 {
        self.values.as_ref().map_or(1.0, |v| v[e])
    }

    /// `G[X, A] * m` without the modification.
    fn raw_apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let b = m.ncols();
        let mt = m.transpose();
        let src = mt.as_slice();
        let mut out = DMatrix::<f64>::zeros(b, self.rows);
        let dst = out.as_mut_slice();
        for r in 0..self.rows {
            let acc = &mut dst[r * b..(r + 1) * b];
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                let p = self.col_idx[e] as usize;
                let w = self.value(e);
                for (a, &x) in acc.iter_mut().zip(&src[p * b..(p + 1) * b]) {
                    *a += w * x;
                }
            }
        }
        out.transpose()
    }

    /// `G[X, A]^T * u` without the modification.
    fn raw_apply_t(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let b = u.ncols();
        let ut = u.transpose();
        let src = ut.as_slice();
        let mut out = DMatrix::<f64>::zeros(b, self.cols);
        let dst = out.as_mut_slice();
        for r in 0..self.rows {
            let s = &src[r * b..(r + 1) * b];
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                let p = self.col_idx[e] as usize;
                let w = self.value(e);
                for (a, &x) in dst[p * b..(p + 1) * b].iter_mut().zip(s) {
                    *a += w * x;
                }
            }
        }
        out.transpose()
    }
}

fn sort_row(cols: &mut [u32], vals: &mut [f64]) {
    if cols.windows(2).all(|w| w[0] < w[1]) {
        return;
    }
    let mut pairs: Vec<(u32, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
    pairs.sort_unstable_by_key(|p| p.0);
    for (i, (c, v)) in pairs.into_iter().enumerate() {
        cols[i] = c;
        vals[i] = v;
    }
}

impl LinearOperator for ModifiedAdjacency {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.raw_apply(m) * self.scale;
        let shift = self.scale - 1.0;
        if shift != 0.0 {
            let mu_m = self.mu.tr_mul(m) * shift;
            for mut row in out.row_iter_mut() {
                row -= &mu_m;
            }
        }
        out
    }

    fn apply_t(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.raw_apply_t(u) * self.scale;
        let shift = self.scale - 1.0;
        if shift != 0.0 {
            let col_sums = u.row_sum();
            out -= &self.mu * col_sums * shift;
        }
        out
    }
}

/// Whitened modified 3-star tensor with heads `y` and leaves `a`, `b`, `c`.
///
/// Each head's neighborhoods in `a`, `b`, `c` are projected through `wa`,
/// `wb`, `wc` (`|set| x k`) and the centered third-order statistic is
/// accumulated in `k` dimensions:
///
/// `(a0+1)(a0+2) E[a (x) b (x) c] + 2 a0^2 ma (x) mb (x) mc
///  - a0(a0+1) (E[a (x) b] (x) mc + E[a (x) mb (x) c] + ma (x) E[b (x) c])`
///
/// where `E` averages over heads and `m*` are the projected head means.
/// The result is not symmetrized.
#[allow(clippy::too_many_arguments)]
pub fn whitened_threestar<G: Adjacency>(
    g: &G,
    y: &[usize],
    a: &[usize],
    b: &[usize],
    c: &[usize],
    alpha0: f64,
    wa: &DMatrix<f64>,
    wb: &DMatrix<f64>,
    wc: &DMatrix<f64>,
) -> Result<Tensor3> {
    if y.is_empty() || a.is_empty() || b.is_empty() || c.is_empty() {
        return Err(MmsbError::EmptyPartition);
    }
    let k = wa.ncols();
    if wb.ncols() != k || wc.ncols() != k {
        return Err(MmsbError::DimensionMismatch("whiteners must share a column count"));
    }
    if wa.nrows() != a.len() || wb.nrows() != b.len() || wc.nrows() != c.len() {
        return Err(MmsbError::DimensionMismatch("whitener rows must match their node sets"));
    }
    if !(alpha0 >= 0.0) {
        return Err(MmsbError::InvalidConfig("alpha0 must be nonnegative"));
    }
    let n = g.node_count();
    for leaves in [a, b, c] {
        check_disjoint(n, y, leaves)?;
    }
    let pa = project_rows(g, y, &SetIndex::new(n, a)?, wa);
    let pb = project_rows(g, y, &SetIndex::new(n, b)?, wb);
    let pc = project_rows(g, y, &SetIndex::new(n, c)?, wc);
    Ok(combine_threestar(&pa, &pb, &pc, alpha0))
}

/// The centered statistic from per-head projected rows (`|Y| x k` each).
pub fn combine_threestar(pa: &DMatrix<f64>, pb: &DMatrix<f64>, pc: &DMatrix<f64>, alpha0: f64) -> Tensor3 {
    let k = pa.ncols();
    let heads = pa.nrows();
    let inv = 1.0 / heads as f64;
    let mut t = Tensor3::cube(k);
    let mut ra = vec![0.0; k];
    let mut rb = vec![0.0; k];
    let mut rc = vec![0.0; k];
    for i in 0..heads {
        for j in 0..k {
            ra[j] = pa[(i, j)];
            rb[j] = pb[(i, j)];
            rc[j] = pc[(i, j)];
        }
        t.add_rank1(1.0, &ra, &rb, &rc);
    }
    t.scale((alpha0 + 1.0) * (alpha0 + 2.0) * inv);
    if alpha0 == 0.0 {
        return t;
    }
    let ma: Vec<f64> = pa.row_mean().iter().copied().collect();
    let mb: Vec<f64> = pb.row_mean().iter().copied().collect();
    let mc: Vec<f64> = pc.row_mean().iter().copied().collect();
    let sab = pa.tr_mul(pb) * inv;
    let sac = pa.tr_mul(pc) * inv;
    let sbc = pb.tr_mul(pc) * inv;
    let cross = alpha0 * (alpha0 + 1.0);
    for p in 0..k {
        for q in 0..k {
            for r in 0..k {
                let mixed = sab[(p, q)] * mc[r] + sac[(p, r)] * mb[q] + ma[p] * sbc[(q, r)];
                let value = t.get(p, q, r) + 2.0 * alpha0 * alpha0 * ma[p] * mb[q] * mc[r] - cross * mixed;
                t.set(p, q, r, value);
            }
        }
    }
    t
}

/// `|X|^{-1} sum_{x in X} G(x, a) G(x, b) G(x, c)` over `a x b x c`.
pub fn raw_threestar<G: Adjacency>(
    g: &G,
    x: &[usize],
    a: &[usize],
    b: &[usize],
    c: &[usize],
    cap: usize,
) -> Result<Tensor3> {
    let requested = a.len().saturating_mul(b.len()).saturating_mul(c.len());
    if requested > cap {
        return Err(MmsbError::CapExceeded { requested, cap });
    }
    if x.is_empty() {
        return Err(MmsbError::EmptyPartition);
    }
    let mut t = Tensor3::zeros([a.len(), b.len(), c.len()]);
    let row = |node: usize, set: &[usize]| -> Vec<f64> { set.iter().map(|&j| g.weight(node, j)).collect() };
    for &node in x {
        t.add_rank1(1.0, &row(node, a), &row(node, b), &row(node, c));
    }
    t.scale(1.0 / x.len() as f64);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DenseAdjacency, Graph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, density: f64, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Graph::empty(n, true);
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random::<f64>() < density {
                    g.add_edge(u, v).unwrap();
                }
            }
        }
        g
    }

    fn complete(n: usize) -> Graph {
        Graph::from_edges(n, true, (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))).unwrap()
    }

    #[test]
    fn partition_of_ten() {
        let p = partition_nodes(10, 2, [0.2; 5], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut all: Vec<usize> = p.sets().iter().flat_map(|s| s.iter().copied()).collect();
        assert!(p.sets().iter().all(|s| s.len() == 2));
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(p.rest.is_empty());
    }

    #[test]
    fn partitions_depend_on_seed() {
        let p1 = partition_nodes(1000, 3, [0.2; 5], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let p2 = partition_nodes(1000, 3, [0.2; 5], &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_ne!(p1, p2);
        let covered: usize = p1.sets().iter().map(|s| s.len()).sum();
        assert_eq!(covered, 1000);
    }

    #[test]
    fn partition_too_small() {
        assert!(matches!(
            partition_nodes(12, 3, [0.2; 5], &mut ChaCha8Rng::seed_from_u64(1)),
            Err(MmsbError::TooFewNodes { .. })
        ));
    }

    #[test]
    fn edge_means() {
        assert_eq!(edge_mean(&complete(5), &[0, 1], &[2, 3, 4]).unwrap().as_slice(), &[1.0; 3]);
        assert_eq!(edge_mean(&Graph::empty(5, true), &[0], &[2, 3]).unwrap().as_slice(), &[0.0; 2]);
        let g = Graph::from_edges(3, true, [(0, 1)]).unwrap();
        assert_eq!(edge_mean(&g, &[0], &[1, 2]).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(edge_mean(&g, &[0, 1], &[1, 2]), Err(MmsbError::OverlappingSets));
    }

    #[test]
    fn modified_adjacency_special_cases() {
        let g = random_graph(12, 0.4, 3);
        let x = [0, 1, 2, 3, 4, 5];
        let a = [6, 7, 8, 9, 10, 11];
        let raw = DMatrix::from_fn(6, 6, |i, j| g.weight(x[i], a[j]));
        let m0 = ModifiedAdjacency::new(&g, &x, &a, 0.0).unwrap();
        assert_eq!(m0.to_dense(), raw);

        let all = complete(8);
        let m3 = ModifiedAdjacency::new(&all, &[0, 1, 2], &[3, 4, 5, 6], 3.0).unwrap();
        assert!(m3.to_dense().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let m1 = ModifiedAdjacency::new(&g, &x, &a, 1.0).unwrap();
        let s = libm::sqrt(2.0);
        let dense = m1.to_dense();
        for i in 0..6 {
            for j in 0..6 {
                let mu: f64 = x.iter().map(|&r| g.weight(r, a[j])).sum::<f64>() / 6.0;
                let want = s * raw[(i, j)] - (s - 1.0) * mu;
                assert!((dense[(i, j)] - want).abs() < 1e-15);
            }
        }
        // The mean row of the modified block is the raw mean for every alpha0.
        let mean = dense.row_mean();
        for j in 0..6 {
            assert!((mean[j] - m1.mean()[j]).abs() < 1e-15);
        }
        assert!(matches!(
            ModifiedAdjacency::new(&g, &[0, 1], &[1, 2], 1.0),
            Err(MmsbError::OverlappingSets)
        ));
    }

    #[test]
    fn modified_adjacency_transpose_product() {
        let g = random_graph(20, 0.3, 8);
        let x: Vec<usize> = (0..9).collect();
        let a: Vec<usize> = (9..20).collect();
        let m = ModifiedAdjacency::new(&g, &x, &a, 2.5).unwrap();
        let dense = m.to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = DMatrix::from_fn(9, 3, |_, _| rng.random::<f64>());
        assert!((m.apply_t(&u) - dense.transpose() * &u).amax() < 1e-13);
    }

    #[test]
    fn raw_threestar_cases() {
        let all = complete(7);
        let t = raw_threestar(&all, &[0, 1], &[2, 3], &[4, 5], &[6], RAW_THREESTAR_CAP).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.0));

        let star = Graph::from_edges(4, true, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let t = raw_threestar(&star, &[0], &[1], &[2], &[3], RAW_THREESTAR_CAP).unwrap();
        assert_eq!(t.data(), &[1.0]);

        assert!(matches!(
            raw_threestar(&all, &[0], &[1, 2], &[3, 4], &[5, 6], 7),
            Err(MmsbError::CapExceeded { requested: 8, cap: 7 })
        ));
    }

    #[test]
    fn zero_graph_gives_zero_tensor() {
        let g = Graph::empty(10, true);
        let w = DMatrix::from_element(2, 2, 0.5);
        for alpha0 in [0.0, 1.3] {
            let t = whitened_threestar(&g, &[0, 1], &[2, 3], &[4, 5], &[6, 7], alpha0, &w, &w, &w).unwrap();
            assert!(t.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn block_limit_is_twice_the_whitened_raw_tensor() {
        let g = random_graph(30, 0.35, 11);
        let (y, a, b, c): (Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>) =
            ((0..8).collect(), (8..15).collect(), (15..22).collect(), (22..30).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let wa = DMatrix::from_fn(7, 3, |_, _| rng.random::<f64>() - 0.5);
        let wb = DMatrix::from_fn(7, 3, |_, _| rng.random::<f64>() - 0.5);
        let wc = DMatrix::from_fn(8, 3, |_, _| rng.random::<f64>() - 0.5);
        let fast = whitened_threestar(&g, &y, &a, &b, &c, 0.0, &wa, &wb, &wc).unwrap();
        let raw = raw_threestar(&g, &y, &a, &b, &c, RAW_THREESTAR_CAP).unwrap();
        let slow = raw.multilinear(&wa, &wb, &wc).unwrap();
        for (f, s) in fast.data().iter().zip(slow.data()) {
            assert!((f - 2.0 * s).abs() < 1e-12);
        }
    }

    #[test]
    fn head_order_does_not_matter() {
        let g = DenseAdjacency::from(&random_graph(24, 0.5, 4));
        let y: Vec<usize> = (0..6).collect();
        let mut y_rev = y.clone();
        y_rev.reverse();
        let (a, b, c): (Vec<usize>, Vec<usize>, Vec<usize>) = ((6..12).collect(), (12..18).collect(), (18..24).collect());
        let w = DMatrix::from_fn(6, 2, |i, j| (i + 2 * j) as f64 * 0.1);
        let t1 = whitened_threestar(&g, &y, &a, &b, &c, 0.7, &w, &w, &w).unwrap();
        let t2 = whitened_threestar(&g, &y_rev, &a, &b, &c, 0.7, &w, &w, &w).unwrap();
        for (p, q) in t1.data().iter().zip(t2.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
