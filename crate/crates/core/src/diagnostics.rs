//! Checks of the sample-size, conditioning, iteration and threshold
//! requirements behind the recovery guarantees.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::power::default_iteration_count;

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub passed: bool,
    /// Ratio of allowed to actual (or actual to required); `>= 1` passes.
    pub margin: f64,
    pub requirement: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryDiagnostics {
    /// `(alpha0 + 1) / alpha_hat_min`
    pub rho: f64,
    /// `sqrt(alpha_hat_max / alpha_hat_min) sqrt(max_i (P alpha_hat)_i) / sigma_min(P)`
    pub zeta: f64,
    pub alpha_hat_min: f64,
    pub alpha_hat_max: f64,
    pub sigma_min_p: f64,
    pub max_p_alpha: f64,
    /// `sqrt(n) / rho`, the bound on `zeta` when `alpha0 < 1`.
    pub zeta_bound_sparse: f64,
    /// `sqrt(n) / (rho k alpha_hat_max)`, the bound when `alpha0 >= 1`.
    pub zeta_bound_dense: f64,
    /// `C2 (ln k + ln ln(sigma_min(P) / max_i (P alpha_hat)_i))`, if defined.
    pub required_iterations: Option<f64>,
    /// `(p - q) / sqrt(p)` when `P` is homogeneous.
    pub separation: Option<f64>,
    pub conditions: Vec<Condition>,
}

impl TheoryDiagnostics {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }
}

/// Inputs to [`check_assumptions`]; `p` and `alpha_hat` may be true or estimated.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionInputs<'a> {
    pub p: &'a DMatrix<f64>,
    /// Normalized community weights (summing to one).
    pub alpha_hat: &'a DVector<f64>,
    pub alpha0: f64,
    pub n: usize,
    pub iterations: usize,
    pub c2: f64,
    pub tau: f64,
}

pub fn check_assumptions(inp: AssumptionInputs<'_>) -> TheoryDiagnostics {
    let k = inp.alpha_hat.len();
    let n = inp.n as f64;
    let alpha_hat_min = inp.alpha_hat.min();
    let alpha_hat_max = inp.alpha_hat.max();
    let rho = (inp.alpha0 + 1.0) / alpha_hat_min;
    let sigma_min_p = inp.p.singular_values().min();
    let max_p_alpha = (inp.p * inp.alpha_hat).max();
    let zeta = libm::sqrt(alpha_hat_max / alpha_hat_min) * libm::sqrt(max_p_alpha) / sigma_min_p;
    let zeta_bound_sparse = libm::sqrt(n) / rho;
    let zeta_bound_dense = libm::sqrt(n) / (rho * k as f64 * alpha_hat_max);
    let ln_k = libm::log(k as f64);
    let required = inp.c2 * (ln_k + libm::log(libm::log(sigma_min_p / max_p_alpha)));
    let required_iterations = required.is_finite().then_some(required);

    let mut conditions = Vec::with_capacity(5);
    let max_alpha = alpha_hat_max * inp.alpha0;
    conditions.push(Condition {
        name: "B1",
        passed: inp.alpha0 == 0.0 || max_alpha < 1.0,
        margin: if inp.alpha0 == 0.0 { f64::INFINITY } else { 1.0 / max_alpha },
        requirement: "alpha_i < 1",
    });
    let b2_need = rho * rho * ln_k * ln_k;
    let b2 = if b2_need > 0.0 { n / b2_need } else { f64::INFINITY };
    conditions.push(Condition {
        name: "B2",
        passed: b2 >= 1.0,
        margin: b2,
        requirement: "n >= rho^2 ln^2 k",
    });
    let bound = if inp.alpha0 < 1.0 { zeta_bound_sparse } else { zeta_bound_dense };
    let b3 = bound / zeta;
    conditions.push(Condition {
        name: "B3",
        passed: b3 >= 1.0,
        margin: b3,
        requirement: "zeta <= sqrt(n) / rho (alpha0 < 1) or sqrt(n) / (rho k alpha_hat_max)",
    });
    let b4 = match required_iterations {
        Some(r) if r > 0.0 => inp.iterations as f64 / r,
        _ => f64::INFINITY,
    };
    conditions.push(Condition {
        name: "B4",
        passed: b4 >= 1.0,
        margin: b4,
        requirement: "N >= C2 (ln k + ln ln(sigma_min(P) / max (P alpha_hat)))",
    });
    let tau_scale = if inp.alpha0 == 0.0 {
        0.5
    } else {
        libm::sqrt(rho) * zeta * libm::sqrt(alpha_hat_max) / (libm::sqrt(n) * alpha_hat_min)
    };
    conditions.push(Condition {
        name: "B5",
        passed: inp.tau > 0.0 && inp.tau < 1.0,
        margin: inp.tau / tau_scale,
        requirement: "0 < tau < 1, tau of order rho^{1/2} zeta alpha_hat_max^{1/2} / (n^{1/2} alpha_hat_min)",
    });

    TheoryDiagnostics {
        rho,
        zeta,
        alpha_hat_min,
        alpha_hat_max,
        sigma_min_p,
        max_p_alpha,
        zeta_bound_sparse,
        zeta_bound_dense,
        required_iterations,
        separation: homogeneous_separation(inp.p),
        conditions,
    }
}

/// `(p - q) / sqrt(p)` if `P` has a constant diagonal `p` and constant
/// off-diagonal `q`.
pub fn homogeneous_separation(p: &DMatrix<f64>) -> Option<f64> {
    let k = p.nrows();
    let d = p[(0, 0)];
    let o = if k > 1 { p[(0, 1)] } else { 0.0 };
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { d } else { o };
            if (p[(i, j)] - want).abs() > 1e-12 {
                return None;
            }
        }
    }
    (d > 0.0).then(|| (d - o) / libm::sqrt(d))
}

/// Iteration count implied by the true or estimated parameters, using the
/// ratio `max_i (P alpha_hat)_i / sigma_min(P)` as the gap.
pub fn iterations_for(p: &DMatrix<f64>, alpha_hat: &DVector<f64>, c2: f64) -> usize {
    let gap = (p * alpha_hat).max() / p.singular_values().min();
    default_iteration_count(alpha_hat.len(), gap, c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_homogeneous;

    #[test]
    fn homogeneous_zeta() {
        let (p, a) = make_homogeneous(2, 0.6, 0.1).unwrap();
        let d = check_assumptions(AssumptionInputs {
            p: &p,
            alpha_hat: &a,
            alpha0: 0.0,
            n: 1000,
            iterations: 30,
            c2: 10.0,
            tau: 0.5,
        });
        assert!((d.sigma_min_p - 0.5).abs() < 1e-12);
        assert!((d.max_p_alpha - 0.35).abs() < 1e-12);
        assert!((d.zeta - libm::sqrt(0.35) / 0.5).abs() < 1e-12);
        assert!((d.separation.unwrap() - 0.5 / libm::sqrt(0.6)).abs() < 1e-12);
    }

    #[test]
    fn planted_clique_rho() {
        let n = 10_000;
        let s = 1_000;
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.5]);
        let a = DVector::from_vec(alloc::vec![s as f64 / n as f64, 1.0 - s as f64 / n as f64]);
        let d = check_assumptions(AssumptionInputs {
            p: &p,
            alpha_hat: &a,
            alpha0: 0.0,
            n,
            iterations: 30,
            c2: 10.0,
            tau: 0.5,
        });
        assert!((d.rho - 10.0).abs() < 1e-9);
        assert!(d.separation.is_none());
    }

    #[test]
    fn single_community_passes() {
        let p = DMatrix::from_element(1, 1, 0.4);
        let a = DVector::from_element(1, 1.0);
        let d = check_assumptions(AssumptionInputs {
            p: &p,
            alpha_hat: &a,
            alpha0: 0.0,
            n: 100,
            iterations: 30,
            c2: 10.0,
            tau: 0.5,
        });
        assert!(d.zeta.is_finite());
        assert!(d.all_passed(), "{:?}", d.conditions);
    }

    #[test]
    fn dense_branch_and_b1_failure() {
        let (p, a) = make_homogeneous(3, 0.6, 0.1).unwrap();
        let d = check_assumptions(AssumptionInputs {
            p: &p,
            alpha_hat: &a,
            alpha0: 6.0,
            n: 500,
            iterations: 30,
            c2: 10.0,
            tau: 0.1,
        });
        // alpha_i = 2 violates the sparse regime, and rho = 21 is too large.
        assert!(!d.conditions[0].passed);
        assert!(!d.conditions[1].passed);
        let want = libm::sqrt(500.0) / (21.0 * 3.0 / 3.0);
        assert!((d.zeta_bound_dense - want).abs() < 1e-9);
    }
}
