//! Robust tensor power method with adaptive deflation.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MmsbError, Result};
use crate::tensor::{Tensor3, UNIT_TOLERANCE};

/// Iterates closer than this to their predecessor stop early.
pub const CONVERGENCE_STEP: f64 = 1e-13;

/// Floor on the iteration count from [`default_iteration_count`].
pub const MIN_ITERATIONS: usize = 30;

const RESIDUAL_RESTARTS: usize = 20;
const RESIDUAL_ITERATIONS: usize = 100;
const RESIDUAL_SEED: u64 = 0x7e50_0001;

/// How one eigen-pair was found.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTrace {
    /// Index of the winning initializer.
    pub best_init: usize,
    /// Deflated `T(theta, theta, theta)` of the winner before refinement.
    pub score: f64,
    /// Iterations spent refining the winner.
    pub refine_iterations: usize,
    /// Last step size `||theta_t - theta_{t-1}||` during refinement.
    pub final_step: f64,
    /// Number of earlier pairs deflated at the final iterate.
    pub deflated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub lambda: DVector<f64>,
    /// Unit eigenvectors as columns.
    pub phi: DMatrix<f64>,
    /// Spectral-norm estimate of the residual tensor, once computed.
    pub residual_norm: Option<f64>,
    pub trace: Vec<PairTrace>,
}

impl EigenPairs {
    pub fn k(&self) -> usize {
        self.lambda.len()
    }

    /// `sum_i lambda_i phi_i^(x3)`
    pub fn reconstruct(&self) -> Tensor3 {
        Tensor3::from_factors(self.lambda.as_slice(), &self.phi, &self.phi, &self.phi)
    }

    /// Reorders pairs so that new pair `i` is old pair `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> EigenPairs {
        EigenPairs {
            lambda: DVector::from_iterator(perm.len(), perm.iter().map(|&i| self.lambda[i])),
            phi: self.phi.select_columns(perm),
            residual_norm: self.residual_norm,
            trace: perm.iter().map(|&i| self.trace[i].clone()).collect(),
        }
    }
}

/// Deflation view over the pairs found so far.
struct Deflated<'a> {
    t: &'a Tensor3,
    lambda: &'a [f64],
    phi: &'a [DVector<f64>],
    xi: f64,
}

impl Deflated<'_> {
    /// Pairs whose weighted overlap with `theta` exceeds the threshold.
    fn active(&self, theta: &DVector<f64>) -> impl Iterator<Item = (f64, &DVector<f64>, f64)> + '_ {
        let dots: Vec<f64> = self.phi.iter().map(|p| p.dot(theta)).collect();
        self.lambda
            .iter()
            .zip(self.phi)
            .zip(dots)
            .filter(move |((l, _), d)| (*l * d).abs() > self.xi)
            .map(|((l, p), d)| (*l, p, d))
    }

    fn ivv(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut out = self.t.ivv(theta.as_slice());
        for (l, p, d) in self.active(theta) {
            out.axpy(-l * d * d, p, 1.0);
        }
        out
    }

    fn vvv(&self, theta: &DVector<f64>) -> (f64, usize) {
        let mut value = self.t.vvv(theta.as_slice());
        let mut count = 0;
        for (l, _, d) in self.active(theta) {
            value -= l * d * d * d;
            count += 1;
        }
        (value, count)
    }

    /// Runs up to `n` normalized power steps from `theta`. Returns the last
    /// iterate, the steps taken and the last step length, or `None` if the
    /// map hit a zero or non-finite vector.
    fn iterate(&self, mut theta: DVector<f64>, n: usize) -> Option<(DVector<f64>, usize, f64)> {
        let mut step = f64::INFINITY;
        let mut taken = 0;
        while taken < n {
            let next = self.ivv(&theta);
            let norm = next.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return None;
            }
            let next = next / norm;
            step = (&next - &theta).norm();
            theta = next;
            taken += 1;
            if step < CONVERGENCE_STEP {
                break;
            }
        }
        Some((theta, taken, step))
    }
}

/// Extracts `k` eigen-pairs of the symmetric tensor `t`.
///
/// For each pair, every initializer is run for `n_iter` power steps under the
/// adaptively deflated map, the one with the largest deflated `T(v, v, v)` is
/// refined for another `n_iter` steps, and its eigenvalue is read off the
/// deflated tensor. Eigenvalues are made positive by flipping the vector.
pub fn tensor_eigen(t: &Tensor3, inits: &[DVector<f64>], n_iter: usize, xi: f64) -> Result<EigenPairs> {
    if !t.is_cubic() {
        return Err(MmsbError::DimensionMismatch("tensor must be cubic"));
    }
    if inits.is_empty() {
        return Err(MmsbError::NoInitializers);
    }
    if n_iter == 0 {
        return Err(MmsbError::InvalidConfig("iteration count must be positive"));
    }
    if !(xi > 0.0) {
        return Err(MmsbError::InvalidConfig("deflation threshold must be positive"));
    }
    let k = t.k();
    for v in inits {
        if v.len() != k {
            return Err(MmsbError::DimensionMismatch("initializer length must match tensor"));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(MmsbError::NotUnitVector { norm });
        }
    }

    let mut lambda: Vec<f64> = Vec::with_capacity(k);
    let mut phi: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k);
    for _ in 0..k {
        let view = Deflated {
            t,
            lambda: &lambda,
            phi: &phi,
            xi,
        };
        let mut best: Option<(usize, f64, DVector<f64>)> = None;
        for (idx, init) in inits.iter().enumerate() {
            let Some((theta, _, _)) = view.iterate(init.clone(), n_iter) else {
                continue;
            };
            let (score, _) = view.vvv(&theta);
            // Strict comparison keeps the lowest index on ties.
            if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
                best = Some((idx, score, theta));
            }
        }
        let (best_init, score, theta) = best.ok_or(MmsbError::NonFiniteIterate)?;
        let (mut v, refine_iterations, final_step) =
            view.iterate(theta, n_iter).ok_or(MmsbError::NonFiniteIterate)?;
        let (mut value, deflated) = view.vvv(&v);
        if value < 0.0 {
            v.neg_mut();
            value = -value;
        }
        if !value.is_finite() {
            return Err(MmsbError::NonFiniteIterate);
        }
        lambda.push(value);
        phi.push(v);
        trace.push(PairTrace {
            best_init,
            score,
            refine_iterations,
            final_step,
            deflated,
        });
    }
    Ok(EigenPairs {
        lambda: DVector::from_vec(lambda),
        phi: DMatrix::from_columns(&phi),
        residual_norm: None,
        trace,
    })
}

/// Default deflation threshold: 1% of the leading eigenvalue, estimated by a
/// single undeflated pass over the initializers.
pub fn pilot_xi(t: &Tensor3, inits: &[DVector<f64>], n_iter: usize) -> Result<f64> {
    let top = leading_value(t, inits, n_iter)?;
    Ok(0.01 * top.abs().max(f64::MIN_POSITIVE))
}

fn leading_value(t: &Tensor3, inits: &[DVector<f64>], n_iter: usize) -> Result<f64> {
    let view = Deflated {
        t,
        lambda: &[],
        phi: &[],
        xi: f64::INFINITY,
    };
    let mut best = f64::NEG_INFINITY;
    for init in inits {
        if let Some((theta, _, _)) = view.iterate(init.clone(), n_iter) {
            best = best.max(t.vvv(theta.as_slice()).abs());
        }
    }
    if best.is_finite() {
        Ok(best)
    } else if inits.is_empty() {
        Err(MmsbError::NoInitializers)
    } else {
        Err(MmsbError::NonFiniteIterate)
    }
}

/// Lower estimate of `|| T - sum_j lambda_j phi_j^(x3) ||` (spectral norm),
/// from power iterations on the residual started at each `phi_j` and at 20
/// fixed pseudo-random unit vectors.
pub fn residual_norm(t: &Tensor3, pairs: &EigenPairs) -> f64 {
    let mut residual = t.clone();
    residual.axpy(-1.0, &pairs.reconstruct());
    spectral_norm_estimate(&residual, pairs.phi.column_iter().map(|c| c.into_owned()))
}

/// Lower estimate of `max_{||u|| = 1} |T(u, u, u)|` for a symmetric tensor.
pub fn spectral_norm_estimate<I: IntoIterator<Item = DVector<f64>>>(t: &Tensor3, extra_starts: I) -> f64 {
    let k = t.k();
    if k == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RESIDUAL_SEED);
    let mut starts: Vec<DVector<f64>> = extra_starts.into_iter().collect();
    for _ in 0..RESIDUAL_RESTARTS {
        let v = DVector::from_fn(k, |_, _| rng.random::<f64>() - 0.5);
        let n = v.norm();
        if n > 0.0 {
            starts.push(v / n);
        }
    }
    let mut best: f64 = 0.0;
    for mut u in starts {
        best = best.max(t.vvv(u.as_slice()).abs());
        for _ in 0..RESIDUAL_ITERATIONS {
            let next = t.ivv(u.as_slice());
            let n = next.norm();
            if !(n > 0.0) || !n.is_finite() {
                break;
            }
            u = next / n;
            best = best.max(t.vvv(u.as_slice()).abs());
        }
    }
    best
}

/// `max(30, ceil(c2 * (ln k + ln ln(1 / gap_ratio))))`, falling back to the
/// floor when the logarithms are undefined.
pub fn default_iteration_count(k: usize, gap_ratio: f64, c2: f64) -> usize {
    let raw = c2 * (libm::log(k as f64) + libm::log(libm::log(1.0 / gap_ratio)));
    if raw.is_finite() && raw > MIN_ITERATIONS as f64 {
        libm::ceil(raw) as usize
    } else {
        MIN_ITERATIONS
    }
}
