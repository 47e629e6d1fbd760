//! Adjacency storage and the sparse projection kernels every estimator stage
//! is built on.
//!
//! [`Graph`] packs each adjacency row into 64-bit words, which keeps a
//! 32k-node dense random graph at 128 MiB. [`DenseAdjacency`] carries real
//! weights and exists so expected adjacency matrices can be pushed through the
//! same code paths as sampled graphs.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{MmsbError, Result};

/// Row access to a (possibly weighted) adjacency matrix.
pub trait Adjacency {
    fn node_count(&self) -> usize;

    /// Calls `f(col, weight)` for every nonzero entry of `row`, in increasing
    /// column order.
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, row: usize, f: F);

    fn weight(&self, row: usize, col: usize) -> f64;
}

/// A `{0,1}` adjacency matrix without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    directed: bool,
    words: usize,
    bits: Vec<u64>,
}

impl Graph {
    pub fn empty(n: usize, directed: bool) -> Self {
        let words = n.div_ceil(64);
        Self {
            n,
            directed,
            words,
            bits: vec![0; words * n],
        }
    }

    pub fn from_edges<I>(n: usize, directed: bool, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::empty(n, directed);
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Inserts `u -> v` (and `v -> u` when undirected).
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        for node in [u, v] {
            if node >= self.n {
                return Err(MmsbError::NodeOutOfRange { node, n: self.n });
            }
        }
        if u == v {
            return Err(MmsbError::SelfLoop { node: u });
        }
        self.set_bit(u, v);
        if !self.directed {
            self.set_bit(v, u);
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn set_bit(&mut self, u: usize, v: usize) {
        self.bits[u * self.words + v / 64] |= 1u64 << (v % 64);
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        (self.bits[u * self.words + v / 64] >> (v % 64)) & 1 == 1
    }

    pub fn row_words(&self, u: usize) -> &[u64] {
        &self.bits[u * self.words..(u + 1) * self.words]
    }

    pub(crate) fn row_words_mut(&mut self, u: usize) -> &mut [u64] {
        let w = self.words;
        &mut self.bits[u * w..(u + 1) * w]
    }

    pub fn out_neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(u)
            .iter()
            .enumerate()
            .flat_map(|(wi, &word)| BitIter { word }.map(move |b| wi * 64 + b))
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.row_words(u).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of stored ordered pairs `(u, v)` with `G(u, v) = 1`.
    pub fn arc_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Edges as listed in an edge-list file: every arc for directed graphs,
    /// `u < v` pairs for undirected ones.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.out_neighbors(u)
                .filter(move |&v| self.directed || u < v)
                .map(move |v| (u, v))
        })
    }

    /// Fraction of ordered off-diagonal pairs that carry an edge.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.arc_count() as f64 / (self.n * (self.n - 1)) as f64
    }
}

struct BitIter {
    word: u64,
}

impl Iterator for BitIter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.word == 0 {
            return None;
        }
        let tz = self.word.trailing_zeros() as usize;
        self.word &= self.word - 1;
        Some(tz)
    }
}

impl Adjacency for Graph {
    fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, row: usize, mut f: F) {
        for (wi, &word) in self.row_words(row).iter().enumerate() {
            for b in (BitIter { word }) {
                f(wi * 64 + b, 1.0);
            }
        }
    }

    fn weight(&self, row: usize, col: usize) -> f64 {
        if self.has_edge(row, col) {
            1.0
        } else {
            0.0
        }
    }
}

/// Dense real-valued adjacency, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseAdjacency {
    n: usize,
    data: Vec<f64>,
}

impl DenseAdjacency {
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(MmsbError::DimensionMismatch("adjacency must be square"));
        }
        let n = m.nrows();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = m[(i, j)];
            }
        }
        Ok(Self { n, data })
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl From<&Graph> for DenseAdjacency {
    fn from(g: &Graph) -> Self {
        let n = g.n();
        let mut data = vec![0.0; n * n];
        for u in 0..n {
            for v in g.out_neighbors(u) {
                data[u * n + v] = 1.0;
            }
        }
        Self { n, data }
    }
}

impl Adjacency for DenseAdjacency {
    fn node_count(&self) -> usize {
        self.n
    }

    fn for_each_in_row<F: FnMut(usize, f64)>(&self, row: usize, mut f: F) {
        for (j, &w) in self.data[row * self.n..(row + 1) * self.n].iter().enumerate() {
            if w != 0.0 {
                f(j, w);
            }
        }
    }

    fn weight(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }
}

const ABSENT: u32 = u32::MAX;

/// Maps global node ids to positions inside an ordered node list.
#[derive(Debug, Clone)]
pub struct SetIndex {
    local: Vec<u32>,
    len: usize,
}

impl SetIndex {
    pub fn new(n: usize, nodes: &[usize]) -> Result<Self> {
        let mut local = vec![ABSENT; n];
        for (pos, &node) in nodes.iter().enumerate() {
            if node >= n {
                return Err(MmsbError::NodeOutOfRange { node, n });
            }
            if local[node] != ABSENT {
                return Err(MmsbError::OverlappingSets);
            }
            local[node] = pos as u32;
        }
        Ok(Self {
            local,
            len: nodes.len(),
        })
    }

    #[inline]
    pub fn position(&self, node: usize) -> Option<usize> {
        match self.local[node] {
            ABSENT => None,
            p => Some(p as usize),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Returns `G[rows, cols] * m`, where `m` has one row per member of `cols`.
pub fn project_rows<G: Adjacency>(
    g: &G,
    rows: &[usize],
    cols: &SetIndex,
    m: &DMatrix<f64>,
) -> DMatrix<f64> {
    assert_eq!(m.nrows(), cols.len(), "projection matrix rows must match column set");
    let b = m.ncols();
    // Row-major copy so every neighbor touches one contiguous stripe.
    let mt = m.transpose();
    let src = mt.as_slice();
    let mut out = DMatrix::<f64>::zeros(b, rows.len());
    {
        let dst = out.as_mut_slice();
        for (r, &node) in rows.iter().enumerate() {
            let acc = &mut dst[r * b..(r + 1) * b];
            g.for_each_in_row(node, |col, w| {
                if let Some(p) = cols.position(col) {
                    let s = &src[p * b..(p + 1) * b];
                    for (a, &x) in acc.iter_mut().zip(s) {
                        *a += w * x;
                    }
                }
            });
        }
    }
    out.transpose()
}

/// Returns `G[rows, cols]^T * u`, where `u` has one row per member of `rows`.
pub fn project_cols<G: Adjacency>(
    g: &G,
    rows: &[usize],
    cols: &SetIndex,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    assert_eq!(u.nrows(), rows.len(), "projection matrix rows must match row set");
    let b = u.ncols();
    let ut = u.transpose();
    let src = ut.as_slice();
    let mut out = DMatrix::<f64>::zeros(b, cols.len());
    {
        let dst = out.as_mut_slice();
        for (r, &node) in rows.iter().enumerate() {
            let s = &src[r * b..(r + 1) * b];
            g.for_each_in_row(node, |col, w| {
                if let Some(p) = cols.position(col) {
                    for (a, &x) in dst[p * b..(p + 1) * b].iter_mut().zip(s) {
                        *a += w * x;
                    }
                }
            });
        }
    }
    out.transpose()
}
