//! The full estimator: partition, whiten, decompose, reconstruct.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{check_assumptions, AssumptionInputs, TheoryDiagnostics};
use crate::error::{MmsbError, Result};
use crate::graph::{project_rows, Adjacency, SetIndex};
use crate::moments::{partition_nodes, whitened_threestar, ModifiedAdjacency, Partition5};
use crate::power::{default_iteration_count, pilot_xi, residual_norm, tensor_eigen, EigenPairs};
use crate::reconstruction::{
    align_estimates, build_q, default_tau, diag_offdiag_means, estimate_members, estimate_p, support_recovery,
    threshold, Alignment, MemberEstimate, SupportEstimate,
};
use crate::tensor::Tensor3;
use crate::whitening::{compute_symmetrizer, compute_whitener, Whitener};

/// A threshold that is either fixed or derived from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    pub alpha0: f64,
    pub seed: u64,
    /// Sizes of `A, B, C, X, Y` as fractions of `n`.
    pub fractions: [f64; 5],
    /// Power iterations per initializer; derived from `gap_ratio` when unset.
    pub iterations: Option<usize>,
    pub gap_ratio: f64,
    /// Cap on the number of initializers.
    pub max_inits: Option<usize>,
    pub tau: Threshold,
    /// Support-recovery threshold.
    pub xi: Threshold,
    /// Adaptive-deflation threshold of the power method.
    pub deflation_xi: Threshold,
    pub c_tau: f64,
    pub c2: f64,
    pub undirected: bool,
    pub support: bool,
}

impl FitConfig {
    pub fn new(k: usize, alpha0: f64) -> Self {
        Self {
            k,
            alpha0,
            seed: 0,
            fractions: [0.2; 5],
            iterations: None,
            gap_ratio: 0.5,
            max_inits: None,
            tau: Threshold::Auto,
            xi: Threshold::Auto,
            deflation_xi: Threshold::Auto,
            c_tau: 1.0,
            c2: 10.0,
            undirected: false,
            support: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(MmsbError::InvalidConfig("k must be at least 1"));
        }
        if !(self.alpha0 >= 0.0) || !self.alpha0.is_finite() {
            return Err(MmsbError::InvalidConfig("alpha0 must be finite and nonnegative"));
        }
        let total: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|&f| !(f > 0.0)) || total > 1.0 + 1e-12 {
            return Err(MmsbError::InvalidConfig("partition fractions must be positive and sum to at most 1"));
        }
        if !(self.gap_ratio > 0.0 && self.gap_ratio <= 1.0) {
            return Err(MmsbError::InvalidConfig("gap ratio must lie in (0, 1]"));
        }
        if !(self.c_tau > 0.0) || !(self.c2 > 0.0) {
            return Err(MmsbError::InvalidConfig("constants must be positive"));
        }
        if self.iterations == Some(0) || self.max_inits == Some(0) {
            return Err(MmsbError::InvalidConfig("iteration and initializer counts must be positive"));
        }
        for t in [self.tau, self.xi, self.deflation_xi] {
            if let Threshold::Fixed(v) = t {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(MmsbError::InvalidConfig("fixed thresholds must be finite and nonnegative"));
                }
            }
        }
        if let Threshold::Fixed(v) = self.deflation_xi {
            if v == 0.0 {
                return Err(MmsbError::InvalidConfig("deflation threshold must be positive"));
            }
        }
        Ok(())
    }

    pub fn resolved_iterations(&self) -> usize {
        self.iterations
            .unwrap_or_else(|| default_iteration_count(self.k, self.gap_ratio, self.c2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Partition,
    Whitening,
    Moments,
    TensorPower,
    Reconstruction,
    Support,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Partition => "partition",
            Stage::Whitening => "whitening",
            Stage::Moments => "moments",
            Stage::TensorPower => "tensor_power",
            Stage::Reconstruction => "reconstruction",
            Stage::Support => "support",
        }
    }
}

/// Receives stage boundaries, e.g. for timing.
pub trait StageObserver {
    fn enter(&mut self, _stage: Stage) {}
    fn exit(&mut self, _stage: Stage) {}
}

pub struct NoObserver;

impl StageObserver for NoObserver {}

/// One decomposition with its leaf sets: heads are the node set whose
/// 3-stars are counted, `a` is the set memberships are read through.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleFit {
    pub heads: Vec<usize>,
    pub a: Vec<usize>,
    pub tensor: Tensor3,
    pub eigen: EigenPairs,
    pub whitener: DMatrix<f64>,
    pub initializers: usize,
    pub deflation_xi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEstimate {
    /// Thresholded memberships, `k x n`.
    pub pi_hat: DMatrix<f64>,
    /// Memberships before thresholding.
    pub pi_raw: DMatrix<f64>,
    /// `Q G Q^T` clamped to `[0, 1]`.
    pub p_hat: DMatrix<f64>,
    pub p_hat_raw: DMatrix<f64>,
    /// `lambda_i^{-2}` from the first decomposition.
    pub alpha_hat: DVector<f64>,
    pub eigen: EigenPairs,
    pub tau: f64,
    pub deflation_xi: f64,
    pub iterations: usize,
    pub support_xi: Option<f64>,
    pub support: Option<SupportEstimate>,
    pub partition: Partition5,
    /// Matches the second decomposition's labels to the first.
    pub alignment: Alignment,
    /// Decomposition with heads `Y` (reads memberships of every node outside `A`).
    pub primary: RoleFit,
    /// Decomposition with heads `A` (reads memberships of `A` through `Y`).
    pub swapped: RoleFit,
    pub diagnostics: TheoryDiagnostics,
}

/// The node partition `fit` uses for `n` nodes under `cfg`.
pub fn partition_for(n: usize, cfg: &FitConfig) -> Result<Partition5> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    partition_nodes(n, cfg.k, cfg.fractions, &mut rng)
}

pub fn fit<G: Adjacency>(g: &G, cfg: &FitConfig) -> Result<ModelEstimate> {
    fit_with_observer(g, cfg, &mut NoObserver)
}

pub fn fit_with_observer<G: Adjacency, O: StageObserver>(
    g: &G,
    cfg: &FitConfig,
    obs: &mut O,
) -> Result<ModelEstimate> {
    cfg.validate()?;
    let n = g.node_count();
    let k = cfg.k;
    if n < 5 * k {
        return Err(MmsbError::TooFewNodes {
            required: 5 * k,
            available: n,
        });
    }
    let iterations = cfg.resolved_iterations();

    obs.enter(Stage::Partition);
    let part = partition_for(n, cfg)?;
    obs.exit(Stage::Partition);

    obs.enter(Stage::Whitening);
    let whiten = |set: &[usize]| -> Result<Whitener> {
        compute_whitener(&ModifiedAdjacency::new(g, &part.x, set, cfg.alpha0)?, k)
    };
    let w_a = whiten(&part.a)?;
    let w_b = whiten(&part.b)?;
    let w_c = whiten(&part.c)?;
    let w_y = whiten(&part.y)?;
    obs.exit(Stage::Whitening);

    let mut run = |heads: &[usize], a: &[usize], wa: &Whitener| -> Result<RoleFit> {
        obs.enter(Stage::Moments);
        let wb = &w_b.w * compute_symmetrizer(&w_b, wa)?;
        let wc = &w_c.w * compute_symmetrizer(&w_c, wa)?;
        let raw = whitened_threestar(g, heads, a, &part.b, &part.c, cfg.alpha0, &wa.w, &wb, &wc)?;
        // The centered statistic is twice the weighted component sum; halving
        // puts the eigenvalues at alpha_hat^{-1/2}.
        let mut tensor = raw.symmetrize()?;
        tensor.scale(0.5);
        obs.exit(Stage::Moments);

        obs.enter(Stage::TensorPower);
        let inits = initializers(g, heads, a, &wa.w, cfg.max_inits.unwrap_or(10 * k + 100))?;
        let xi = match cfg.deflation_xi {
            Threshold::Fixed(v) => v,
            Threshold::Auto => pilot_xi(&tensor, &inits, iterations)?,
        };
        let mut eigen = tensor_eigen(&tensor, &inits, iterations, xi)?;
        eigen.residual_norm = Some(residual_norm(&tensor, &eigen));
        obs.exit(Stage::TensorPower);
        Ok(RoleFit {
            heads: heads.to_vec(),
            a: a.to_vec(),
            tensor,
            eigen,
            whitener: wa.w.clone(),
            initializers: inits.len(),
            deflation_xi: xi,
        })
    };
    let primary = run(&part.y, &part.a, &w_a)?;
    let swapped = run(&part.a, &part.y, &w_y)?;

    obs.enter(Stage::Reconstruction);
    let targets_primary = Partition5::complement(n, &part.a);
    let targets_swapped = Partition5::complement(n, &part.y);
    let est_primary = members(g, &primary, &targets_primary)?;
    let est_swapped = members(g, &swapped, &targets_swapped)?;
    let mut in_a = alloc::vec![false; n];
    let mut in_y = alloc::vec![false; n];
    part.a.iter().for_each(|&i| in_a[i] = true);
    part.y.iter().for_each(|&i| in_y[i] = true);
    let common: Vec<usize> = (0..n).filter(|&i| !in_a[i] && !in_y[i]).collect();
    let pick = |est: &MemberEstimate, targets: &[usize]| -> DMatrix<f64> {
        let cols: Vec<usize> = common.iter().map(|c| targets.binary_search(c).expect("common node is a target")).collect();
        est.raw.select_columns(&cols)
    };
    let alignment = if k == 1 {
        Alignment::identity(1)
    } else {
        align_estimates(&pick(&est_primary, &targets_primary), &pick(&est_swapped, &targets_swapped))?
    };
    let swapped_raw = est_swapped.raw.select_rows(&alignment.perm);
    let swapped = RoleFit {
        eigen: swapped.eigen.permuted(&alignment.perm),
        ..swapped
    };

    let mut pi_raw = DMatrix::zeros(k, n);
    for (col, &node) in targets_primary.iter().enumerate() {
        pi_raw.set_column(node, &est_primary.raw.column(col));
    }
    for &node in &part.a {
        let col = targets_swapped.binary_search(&node).expect("A lies outside Y");
        pi_raw.set_column(node, &swapped_raw.column(col));
    }

    let tau = match cfg.tau {
        Threshold::Fixed(v) => v,
        Threshold::Auto if cfg.alpha0 == 0.0 => 0.5,
        Threshold::Auto => {
            let pilot = estimate_p(&build_q(&threshold(&pi_raw, 0.0), cfg.alpha0)?, g)?;
            let (p_hat, q_hat) = diag_offdiag_means(&pilot.clamped);
            default_tau(k, cfg.alpha0, n, p_hat, q_hat, cfg.c_tau)?
        }
    };
    let pi_hat = threshold(&pi_raw, tau);
    let q = build_q(&pi_hat, cfg.alpha0)?;
    let p_est = estimate_p(&q, g)?;
    obs.exit(Stage::Reconstruction);

    let (support_xi, support) = if cfg.support {
        obs.enter(Stage::Support);
        let xi = match cfg.xi {
            Threshold::Fixed(v) => v,
            Threshold::Auto => auto_support_xi(&pi_hat, cfg.alpha0, &part, &p_est.clamped)?,
        };
        let s = support_recovery(g, &pi_hat, cfg.alpha0, xi, &part)?;
        obs.exit(Stage::Support);
        (Some(xi), Some(s))
    } else {
        (None, None)
    };

    let alpha_hat = est_primary.alpha_hat.clone();
    let normalized = &alpha_hat / alpha_hat.sum();
    let diagnostics = check_assumptions(AssumptionInputs {
        p: &p_est.clamped,
        alpha_hat: &normalized,
        alpha0: cfg.alpha0,
        n,
        iterations,
        c2: cfg.c2,
        tau,
    });

    Ok(ModelEstimate {
        pi_hat,
        pi_raw,
        p_hat: p_est.clamped,
        p_hat_raw: p_est.raw,
        alpha_hat,
        eigen: primary.eigen.clone(),
        tau,
        deflation_xi: primary.deflation_xi,
        iterations,
        support_xi,
        support,
        partition: part,
        alignment,
        primary,
        swapped,
        diagnostics,
    })
}

fn members<G: Adjacency>(g: &G, role: &RoleFit, targets: &[usize]) -> Result<MemberEstimate> {
    estimate_members(&role.eigen, &role.whitener, g, &role.a, targets, 0.0)
}

/// Normalized whitened neighborhoods `W_A^T G[i, A]^T` of the first heads.
fn initializers<G: Adjacency>(
    g: &G,
    heads: &[usize],
    a: &[usize],
    wa: &DMatrix<f64>,
    cap: usize,
) -> Result<Vec<DVector<f64>>> {
    let used = &heads[..heads.len().min(cap)];
    let projected = project_rows(g, used, &SetIndex::new(g.node_count(), a)?, wa);
    let inits: Vec<DVector<f64>> = projected
        .row_iter()
        .filter_map(|r| {
            let v = r.transpose();
            let norm = v.norm();
            (norm > 0.0 && norm.is_finite()).then(|| v / norm)
        })
        .collect();
    if inits.is_empty() {
        return Err(MmsbError::NoInitializers);
    }
    Ok(inits)
}

/// Support threshold `xi = 4 eps`, where `eps` is 2.5 plug-in standard
/// deviations of a community-averaged degree, in membership units.
fn auto_support_xi(
    pi_hat: &DMatrix<f64>,
    alpha0: f64,
    part: &Partition5,
    p_hat: &DMatrix<f64>,
) -> Result<f64> {
    let q_b = build_q(&pi_hat.select_columns(&part.b), alpha0)?;
    let (high, low) = diag_offdiag_means(p_hat);
    let top = p_hat.max();
    let var = top * (1.0 - top);
    let spread = (high - low).max(f64::MIN_POSITIVE);
    let sd = q_b
        .row_iter()
        .map(|r| libm::sqrt(var * r.norm_squared()) / spread)
        .fold(0.0, f64::max);
    Ok((4.0 * 2.5 * sd).min(1.0))
}
