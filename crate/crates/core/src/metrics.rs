//! Error measures of an estimate against known memberships and connectivity.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{MmsbError, Result};
use crate::pipeline::ModelEstimate;
use crate::reconstruction::{align_estimates, Alignment};

#[derive(Debug, Clone, PartialEq)]
pub struct SupportMetrics {
    pub xi: f64,
    /// Entries with `Pi >= xi`.
    pub high_entries: usize,
    /// Entries with `Pi <= xi / 2`.
    pub low_entries: usize,
    /// Fraction of the high band marked.
    pub recall: f64,
    /// Fraction of the low band left unmarked.
    pub rejection: f64,
    /// Fraction of marked entries lying outside the low band.
    pub precision: f64,
    /// Fraction of nodes whose marked set equals `{i : Pi(i, u) > xi / 2}`.
    pub exact_nodes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `max_i |Pi_hat^i - Pi^i|_1` over community rows.
    pub err_pi_l1: f64,
    pub err_pi_l1_per_node: f64,
    /// `max_{i,j} |P_hat(i, j) - P(i, j)|`
    pub err_p: f64,
    /// Fraction of nodes whose largest estimated membership is their largest true one.
    pub accuracy: f64,
    pub support: Option<SupportMetrics>,
    /// Estimate rows reordered to truth: row `i` of the aligned estimate is row `perm[i]`.
    pub alignment: Alignment,
}

/// Aligns the rows of the estimate to `pi_true` and measures the errors.
///
/// `support` is a `{0, 1}` matrix shaped like `pi_hat` with the `xi` it was
/// computed for.
pub fn evaluate(
    pi_hat: &DMatrix<f64>,
    p_hat: &DMatrix<f64>,
    support: Option<(&DMatrix<f64>, f64)>,
    pi_true: &DMatrix<f64>,
    p_true: &DMatrix<f64>,
) -> Result<Metrics> {
    let (k, n) = pi_true.shape();
    if pi_hat.shape() != (k, n) {
        return Err(MmsbError::DimensionMismatch("estimated and true memberships differ in shape"));
    }
    if p_hat.shape() != (k, k) || p_true.shape() != (k, k) {
        return Err(MmsbError::DimensionMismatch("connectivity matrices must be k x k"));
    }
    if n == 0 {
        return Err(MmsbError::TooFewNodes { required: 1, available: 0 });
    }
    let alignment = if k == 1 {
        Alignment::identity(1)
    } else {
        align_estimates(pi_true, pi_hat)?
    };
    let perm = &alignment.perm;
    let pi = pi_hat.select_rows(perm);
    let p = p_hat.select_rows(perm).select_columns(perm);

    let err_pi_l1 = (0..k)
        .map(|i| (pi.row(i) - pi_true.row(i)).abs().sum())
        .fold(0.0, f64::max);
    let err_p = (p - p_true).abs().max();
    let hits = (0..n)
        .filter(|&u| argmax_col(&pi, u) == argmax_col(pi_true, u))
        .count();

    let support = match support {
        Some((s, xi)) => {
            if s.shape() != (k, n) {
                return Err(MmsbError::DimensionMismatch("support must match the memberships"));
            }
            Some(support_metrics(&s.select_rows(perm), xi, pi_true))
        }
        None => None,
    };

    Ok(Metrics {
        err_pi_l1,
        err_pi_l1_per_node: err_pi_l1 / n as f64,
        err_p,
        accuracy: hits as f64 / n as f64,
        support,
        alignment,
    })
}

/// [`evaluate`] on the outputs of a fit.
pub fn evaluate_estimate(est: &ModelEstimate, pi_true: &DMatrix<f64>, p_true: &DMatrix<f64>) -> Result<Metrics> {
    let support = match (&est.support, est.support_xi) {
        (Some(s), Some(xi)) => Some((&s.s, xi)),
        _ => None,
    };
    evaluate(&est.pi_hat, &est.p_hat, support, pi_true, p_true)
}

fn argmax_col(m: &DMatrix<f64>, col: usize) -> usize {
    crate::model::argmax(m.column(col).iter().copied())
}

fn support_metrics(s: &DMatrix<f64>, xi: f64, pi: &DMatrix<f64>) -> SupportMetrics {
    let (k, n) = pi.shape();
    let (mut high, mut high_hit, mut low, mut low_hit, mut marked, mut marked_ok) = (0, 0, 0, 0, 0, 0);
    let mut exact = 0;
    for u in 0..n {
        let mut node_ok = true;
        for i in 0..k {
            let t = pi[(i, u)];
            let on = s[(i, u)] != 0.0;
            if t >= xi {
                high += 1;
                high_hit += on as usize;
            }
            if t <= xi / 2.0 {
                low += 1;
                low_hit += !on as usize;
            }
            if on {
                marked += 1;
                marked_ok += (t > xi / 2.0) as usize;
            }
            node_ok &= on == (t > xi / 2.0);
        }
        exact += node_ok as usize;
    }
    let frac = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    SupportMetrics {
        xi,
        high_entries: high,
        low_entries: low,
        recall: frac(high_hit, high),
        rejection: frac(low_hit, low),
        precision: frac(marked_ok, marked),
        exact_nodes: frac(exact, n),
    }
}

/// Median of a non-empty list; `NaN` entries sort last.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}
