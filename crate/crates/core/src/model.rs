//! Ground-truth model types and synthetic data generation.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{MmsbError, Result};
use crate::graph::Graph;

/// Parameters of a mixed membership (or, with `alpha0 == 0`, single
/// membership) stochastic block model.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsbModel {
    k: usize,
    n: usize,
    /// Dirichlet concentration when `alpha0 > 0`, community prior otherwise.
    alpha: Vec<f64>,
    alpha0: f64,
    p: DMatrix<f64>,
    directed: bool,
}

impl MmsbModel {
    /// Mixed membership model with memberships drawn from `Dir(alpha)`.
    pub fn dirichlet(alpha: Vec<f64>, p: DMatrix<f64>, n: usize, directed: bool) -> Result<Self> {
        check_alpha(&alpha)?;
        let alpha0 = alpha.iter().sum();
        Self::validated(alpha, alpha0, p, n, directed)
    }

    /// Stochastic block model: every node picks community `j` with
    /// probability `alpha_hat[j]`.
    pub fn block(alpha_hat: Vec<f64>, p: DMatrix<f64>, n: usize, directed: bool) -> Result<Self> {
        check_prior(&alpha_hat)?;
        Self::validated(alpha_hat, 0.0, p, n, directed)
    }

    fn validated(alpha: Vec<f64>, alpha0: f64, p: DMatrix<f64>, n: usize, directed: bool) -> Result<Self> {
        let k = alpha.len();
        if k == 0 || n == 0 {
            return Err(MmsbError::InvalidConfig("k and n must be positive"));
        }
        if p.nrows() != k || p.ncols() != k {
            return Err(MmsbError::DimensionMismatch("P must be k x k"));
        }
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(MmsbError::InvalidProbability("P entries must lie in [0, 1]"));
        }
        if !directed && (&p - p.transpose()).amax() > 1e-12 {
            return Err(MmsbError::InvalidConfig("undirected models need a symmetric P"));
        }
        Ok(Self {
            k,
            n,
            alpha,
            alpha0,
            p,
            directed,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn is_block_model(&self) -> bool {
        self.alpha0 == 0.0
    }

    /// Normalized concentration `alpha / alpha0` (the prior itself for block models).
    pub fn alpha_hat(&self) -> DVector<f64> {
        if self.is_block_model() {
            DVector::from_column_slice(&self.alpha)
        } else {
            DVector::from_iterator(self.k, self.alpha.iter().map(|a| a / self.alpha0))
        }
    }

    /// Expected fraction of ordered pairs carrying an edge.
    pub fn expected_density(&self) -> f64 {
        let a = self.alpha_hat();
        (a.transpose() * &self.p * &a)[(0, 0)]
    }

    pub fn sample_memberships<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MembershipMatrix> {
        if self.is_block_model() {
            sample_block_labels(&self.alpha, self.n, rng)
        } else {
            sample_dirichlet(&self.alpha, self.n, rng)
        }
    }
}

fn check_alpha(alpha: &[f64]) -> Result<()> {
    for (index, &value) in alpha.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(MmsbError::NonPositiveAlpha { index, value });
        }
    }
    Ok(())
}

fn check_prior(alpha_hat: &[f64]) -> Result<()> {
    let sum: f64 = alpha_hat.iter().sum();
    if alpha_hat.iter().any(|&a| !(a >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(MmsbError::InvalidPrior { sum });
    }
    Ok(())
}

/// Community memberships, one probability vector per node (`k x n`).
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    pi: DMatrix<f64>,
}

impl MembershipMatrix {
    pub fn new(pi: DMatrix<f64>) -> Result<Self> {
        for col in pi.column_iter() {
            let s: f64 = col.iter().sum();
            if col.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > 1e-12 {
                return Err(MmsbError::InvalidProbability(
                    "membership columns must be probability vectors",
                ));
            }
        }
        Ok(Self { pi })
    }

    /// One-hot memberships from community labels.
    pub fn from_labels(k: usize, labels: &[usize]) -> Result<Self> {
        let mut pi = DMatrix::zeros(k, labels.len());
        for (node, &c) in labels.iter().enumerate() {
            if c >= k {
                return Err(MmsbError::DimensionMismatch("label exceeds community count"));
            }
            pi[(c, node)] = 1.0;
        }
        Ok(Self { pi })
    }

    pub fn k(&self) -> usize {
        self.pi.nrows()
    }

    pub fn n(&self) -> usize {
        self.pi.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.pi
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.pi
    }

    /// Columns for `nodes`, in the given order.
    pub fn select(&self, nodes: &[usize]) -> DMatrix<f64> {
        self.pi.select_columns(nodes)
    }

    /// Index of the largest entry of each column (lowest index on ties).
    pub fn labels(&self) -> Vec<usize> {
        self.pi.column_iter().map(|c| argmax(c.iter().copied())).collect()
    }

    pub fn is_one_hot(&self) -> bool {
        self.pi
            .column_iter()
            .all(|c| c.iter().filter(|&&x| x == 1.0).count() == 1)
    }
}

pub(crate) fn argmax<I: IntoIterator<Item = f64>>(it: I) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in it.into_iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Draws `n` i.i.d. `Dir(alpha)` columns by normalizing independent
/// `Gamma(alpha_i, 1)` variables.
///
/// Small shapes underflow to zero in double precision, so each Gamma draw is
/// taken in log space through `Gamma(a) = Gamma(a + 1) * U^(1/a)` and the
/// column is normalized with a log-sum-exp.
pub fn sample_dirichlet<R: Rng + ?Sized>(
    alpha: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<MembershipMatrix> {
    check_alpha(alpha)?;
    let k = alpha.len();
    if k == 0 {
        return Err(MmsbError::InvalidConfig("empty concentration vector"));
    }
    let boosted: Vec<Gamma<f64>> = alpha
        .iter()
        .map(|&a| Gamma::new(a + 1.0, 1.0).map_err(|_| MmsbError::NonPositiveAlpha { index: 0, value: a }))
        .collect::<Result<_>>()?;
    let mut pi = DMatrix::zeros(k, n);
    let mut logs = vec![0.0; k];
    for node in 0..n {
        if k == 1 {
            pi[(0, node)] = 1.0;
            continue;
        }
        for i in 0..k {
            let g = boosted[i].sample(rng);
            let u: f64 = 1.0 - rng.random::<f64>();
            logs[i] = libm::log(g) + libm::log(u) / alpha[i];
        }
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for i in 0..k {
            let e = libm::exp(logs[i] - m);
            pi[(i, node)] = e;
            total += e;
        }
        for i in 0..k {
            pi[(i, node)] /= total;
        }
    }
    Ok(MembershipMatrix { pi })
}

/// Draws `n` one-hot columns, community `j` with probability `alpha_hat[j]`.
pub fn sample_block_labels<R: Rng + ?Sized>(
    alpha_hat: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<MembershipMatrix> {
    check_prior(alpha_hat)?;
    let k = alpha_hat.len();
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = k - 1;
        for (j, &a) in alpha_hat.iter().enumerate() {
            acc += a;
            if u < acc && a > 0.0 {
                chosen = j;
                break;
            }
        }
        // Guard against rounding leaving the mass on a zero-probability tail.
        while alpha_hat[chosen] == 0.0 && chosen > 0 {
            chosen -= 1;
        }
        labels.push(chosen);
    }
    MembershipMatrix::from_labels(k, &labels)
}

/// Samples each off-diagonal entry `(u, v)` as `Bernoulli(pi_u^T P pi_v)`.
///
/// One `u64` seed is drawn from `rng`; row `u` then uses its own ChaCha
/// stream, so the result does not depend on how rows are scheduled.
/// Undirected models sample `u < v` and mirror.
pub fn sample_graph<R: Rng + ?Sized>(
    model: &MmsbModel,
    pi: &MembershipMatrix,
    rng: &mut R,
) -> Result<Graph> {
    let (k, n) = (model.k(), model.n());
    if pi.k() != k || pi.n() != n {
        return Err(MmsbError::DimensionMismatch("membership matrix does not match model"));
    }
    let seed: [u8; 32] = rng.random();
    let pim = pi.matrix();
    // (P^T pi_u)^T pi_v = pi_u^T P pi_v
    let reach = model.p().transpose() * pim;
    let mut g = Graph::empty(n, model.is_directed());
    let scale = 4_294_967_296.0_f64;
    for u in 0..n {
        let mut row_rng = ChaCha8Rng::from_seed(seed);
        row_rng.set_stream(u as u64);
        let ru = reach.column(u);
        let start = if model.is_directed() { 0 } else { u + 1 };
        let mut word = 0u64;
        let mut word_idx = start / 64;
        let mut pending: Vec<usize> = Vec::new();
        for v in start..n {
            if v / 64 != word_idx {
                if word != 0 {
                    g.row_words_mut(u)[word_idx] |= word;
                }
                word = 0;
                word_idx = v / 64;
            }
            if v == u {
                continue;
            }
            let pv = pim.column(v);
            let mut prob = 0.0;
            for i in 0..k {
                prob += ru[i] * pv[i];
            }
            let threshold = (prob.clamp(0.0, 1.0) * scale) as u64;
            if (row_rng.next_u32() as u64) < threshold {
                word |= 1u64 << (v % 64);
                if !model.is_directed() {
                    pending.push(v);
                }
            }
        }
        if word != 0 {
            g.row_words_mut(u)[word_idx] |= word;
        }
        for v in pending {
            g.set_bit(v, u);
        }
    }
    Ok(g)
}

/// Homogeneous connectivity `p` on the diagonal, `q` elsewhere, with equal
/// community sizes.
pub fn make_homogeneous(k: usize, p: f64, q: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if k == 0 {
        return Err(MmsbError::InvalidConfig("k must be positive"));
    }
    if !(0.0..=1.0).contains(&p) || (k > 1 && !(0.0 <= q && q <= p)) {
        return Err(MmsbError::InvalidProbability("need 0 <= q <= p <= 1"));
    }
    let pm = DMatrix::from_fn(k, k, |i, j| if i == j { p } else { q });
    Ok((pm, DVector::from_element(k, 1.0 / k as f64)))
}
