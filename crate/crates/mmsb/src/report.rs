//! JSON documents written by the command-line tool.
//!
//! Non-finite numbers (e.g. an infinite margin) are stored as `null`.

use mmsb_core::{FitConfig, Metrics, MmsbModel, ModelEstimate, SupportMetrics, TheoryDiagnostics};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timing::StageTimer;

pub const SCHEMA_VERSION: u32 = 1;

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let k = rows.len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::Invalid("expected a square matrix".into()));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

/// True model parameters, as written by `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub k: usize,
    pub n: usize,
    pub alpha0: f64,
    /// Dirichlet parameter, or the community proportions of a block model.
    pub alpha: Vec<f64>,
    pub block: bool,
    pub directed: bool,
    pub p: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(model: &MmsbModel) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            k: model.k(),
            n: model.n(),
            alpha0: model.alpha0(),
            alpha: if model.is_block_model() {
                model.alpha_hat().iter().copied().collect()
            } else {
                model.alpha().to_vec()
            },
            block: model.is_block_model(),
            directed: model.is_directed(),
            p: rows(model.p()),
        }
    }

    pub fn to_model(&self) -> Result<MmsbModel> {
        let p = matrix(&self.p)?;
        Ok(if self.block {
            MmsbModel::block(self.alpha.clone(), p, self.n, self.directed)?
        } else {
            MmsbModel::dirichlet(self.alpha.clone(), p, self.n, self.directed)?
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub passed: bool,
    pub margin: Option<f64>,
    pub requirement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rho: Option<f64>,
    pub zeta: Option<f64>,
    pub alpha_hat_min: f64,
    pub alpha_hat_max: f64,
    pub sigma_min_p: f64,
    pub max_p_alpha: f64,
    pub zeta_bound_sparse: Option<f64>,
    pub zeta_bound_dense: Option<f64>,
    pub required_iterations: Option<f64>,
    pub separation: Option<f64>,
    pub all_passed: bool,
    pub conditions: Vec<ConditionReport>,
}

impl From<&TheoryDiagnostics> for DiagnosticsReport {
    fn from(d: &TheoryDiagnostics) -> Self {
        Self {
            rho: finite(d.rho),
            zeta: finite(d.zeta),
            alpha_hat_min: d.alpha_hat_min,
            alpha_hat_max: d.alpha_hat_max,
            sigma_min_p: d.sigma_min_p,
            max_p_alpha: d.max_p_alpha,
            zeta_bound_sparse: finite(d.zeta_bound_sparse),
            zeta_bound_dense: finite(d.zeta_bound_dense),
            required_iterations: d.required_iterations,
            separation: d.separation,
            all_passed: d.all_passed(),
            conditions: d
                .conditions
                .iter()
                .map(|c| ConditionReport {
                    name: c.name.to_string(),
                    passed: c.passed,
                    margin: finite(c.margin),
                    requirement: c.requirement.to_string(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

pub fn stage_times(timer: &StageTimer) -> Vec<StageTime> {
    timer
        .totals()
        .iter()
        .map(|(s, d)| StageTime {
            stage: s.name().to_string(),
            seconds: d.as_secs_f64(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub xi: f64,
    pub high: f64,
    pub low: f64,
    pub not_homophilic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportMetricsReport {
    pub xi: f64,
    pub high_entries: usize,
    pub low_entries: usize,
    pub recall: f64,
    pub rejection: f64,
    pub precision: f64,
    pub exact_nodes: f64,
}

impl From<&SupportMetrics> for SupportMetricsReport {
    fn from(s: &SupportMetrics) -> Self {
        Self {
            xi: s.xi,
            high_entries: s.high_entries,
            low_entries: s.low_entries,
            recall: s.recall,
            rejection: s.rejection,
            precision: s.precision,
            exact_nodes: s.exact_nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub err_pi_l1: f64,
    pub err_pi_l1_per_node: f64,
    pub err_p: f64,
    pub accuracy: f64,
    pub tensor_residual: Option<f64>,
    /// Row `i` of the truth matched row `perm[i]` of the estimate.
    pub perm: Vec<usize>,
    pub support: Option<SupportMetricsReport>,
}

impl MetricsReport {
    pub fn new(m: &Metrics, tensor_residual: Option<f64>) -> Self {
        Self {
            err_pi_l1: m.err_pi_l1,
            err_pi_l1_per_node: m.err_pi_l1_per_node,
            err_p: m.err_p,
            accuracy: m.accuracy,
            tensor_residual,
            perm: m.alignment.perm.clone(),
            support: m.support.as_ref().map(SupportMetricsReport::from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub n: usize,
    pub k: usize,
    pub alpha0: f64,
    pub seed: u64,
    pub iterations: usize,
    pub initializers: usize,
    pub tau: f64,
    pub deflation_xi: f64,
    pub alpha_hat: Vec<f64>,
    pub lambda: Vec<f64>,
    pub p_hat: Vec<Vec<f64>>,
    pub p_hat_raw: Vec<Vec<f64>>,
    pub tensor_residual: Option<f64>,
    pub alignment_perm: Vec<usize>,
    pub alignment_ambiguous: bool,
    pub support: Option<SupportReport>,
    pub diagnostics: DiagnosticsReport,
    pub timings: Vec<StageTime>,
    pub metrics: Option<MetricsReport>,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn new(est: &ModelEstimate, cfg: &FitConfig, timer: &StageTimer) -> Self {
        let mut warnings = Vec::new();
        if est.alignment.ambiguous {
            warnings.push("role-swap alignment was ambiguous".to_string());
        }
        if est.support.as_ref().is_some_and(|s| s.not_homophilic) {
            warnings.push("estimated connectivity is not homophilic".to_string());
        }
        for c in est.diagnostics.conditions.iter().filter(|c| !c.passed) {
            warnings.push(format!("assumption {} not met: {}", c.name, c.requirement));
        }
        Self {
            schema_version: SCHEMA_VERSION,
            n: est.pi_hat.ncols(),
            k: est.pi_hat.nrows(),
            alpha0: cfg.alpha0,
            seed: cfg.seed,
            iterations: est.iterations,
            initializers: est.primary.initializers,
            tau: est.tau,
            deflation_xi: est.deflation_xi,
            alpha_hat: est.alpha_hat.iter().copied().collect(),
            lambda: est.eigen.lambda.iter().copied().collect(),
            p_hat: rows(&est.p_hat),
            p_hat_raw: rows(&est.p_hat_raw),
            tensor_residual: est.eigen.residual_norm,
            alignment_perm: est.alignment.perm.clone(),
            alignment_ambiguous: est.alignment.ambiguous,
            support: est.support.as_ref().zip(est.support_xi).map(|(s, xi)| SupportReport {
                xi,
                high: s.high,
                low: s.low,
                not_homophilic: s.not_homophilic,
            }),
            diagnostics: DiagnosticsReport::from(&est.diagnostics),
            timings: stage_times(timer),
            metrics: None,
            warnings,
        }
    }

    pub fn p_hat(&self) -> Result<DMatrix<f64>> {
        matrix(&self.p_hat)
    }

    pub fn alpha_hat(&self) -> DVector<f64> {
        DVector::from_vec(self.alpha_hat.clone())
    }
}
