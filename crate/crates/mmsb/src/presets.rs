//! Synthetic experiments: homogeneous block and mixed models, a planted
//! clique, and an error-versus-`n` sweep.

use std::str::FromStr;

use mmsb_core::metrics::median;
use mmsb_core::{
    evaluate_estimate, fit_with_observer, make_homogeneous, sample_graph, Graph, MembershipMatrix, MmsbModel,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::FileConfig;
use crate::error::{Error, Result};
use crate::report::{stage_times, MetricsReport, StageTime, SCHEMA_VERSION};
use crate::timing::StageTimer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    HomogeneousBlock,
    HomogeneousMmsb,
    PlantedClique,
    ScalingSweep,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::HomogeneousBlock,
        Preset::HomogeneousMmsb,
        Preset::PlantedClique,
        Preset::ScalingSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::HomogeneousBlock => "homogeneous-block",
            Preset::HomogeneousMmsb => "homogeneous-mmsb",
            Preset::PlantedClique => "planted-clique",
            Preset::ScalingSweep => "scaling-sweep",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Changes to a preset's defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub alpha0: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    /// Planted clique size.
    pub clique: Option<usize>,
    pub seeds: Option<usize>,
    /// Node counts of the scaling sweep.
    pub grid: Option<Vec<usize>>,
    pub directed: Option<bool>,
}

/// A preset with its defaults resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub preset: String,
    pub k: usize,
    pub alpha0: f64,
    pub p: f64,
    pub q: f64,
    pub clique: Option<usize>,
    pub seeds: usize,
    pub grid: Vec<usize>,
    pub directed: bool,
}

impl Setting {
    pub fn new(preset: Preset, o: &Overrides) -> Result<Self> {
        let (k, alpha0, p, q, n, directed) = match preset {
            Preset::HomogeneousBlock => (3, 0.0, 0.6, 0.1, 1500, true),
            Preset::HomogeneousMmsb => (3, 1.0, 0.6, 0.1, 4000, true),
            Preset::PlantedClique => (2, 0.0, 1.0, 0.5, 2000, false),
            Preset::ScalingSweep => (3, 1.0, 0.6, 0.1, 0, true),
        };
        let k = o.k.unwrap_or(k);
        if preset == Preset::PlantedClique && k != 2 {
            return Err(Error::Invalid("the planted clique has k = 2".into()));
        }
        let grid = match (preset, &o.grid) {
            (Preset::ScalingSweep, Some(g)) => g.clone(),
            (Preset::ScalingSweep, None) => [4, 16, 64, 256].iter().map(|c| 10 * c * k * k).collect(),
            _ => vec![o.n.unwrap_or(n)],
        };
        if grid.is_empty() {
            return Err(Error::Invalid("empty node-count grid".into()));
        }
        let clique = (preset == Preset::PlantedClique).then(|| {
            o.clique
                .unwrap_or_else(|| (2.0 * (grid[0] as f64).powf(2.0 / 3.0)).round() as usize)
        });
        Ok(Self {
            preset: preset.name().to_string(),
            k,
            alpha0: o.alpha0.unwrap_or(alpha0),
            p: o.p.unwrap_or(p),
            q: o.q.unwrap_or(q),
            clique,
            seeds: o.seeds.unwrap_or(if preset == Preset::ScalingSweep { 5 } else { 1 }),
            grid,
            directed: o.directed.unwrap_or(directed),
        })
    }

    pub fn model(&self, n: usize) -> Result<MmsbModel> {
        if let Some(s) = self.clique {
            if s == 0 || s >= n {
                return Err(Error::Invalid(format!("clique size {s} must lie in 1..{n}")));
            }
            let p = DMatrix::from_row_slice(2, 2, &[self.p, self.q, self.q, self.q]);
            let w = s as f64 / n as f64;
            return Ok(MmsbModel::block(vec![w, 1.0 - w], p, n, self.directed)?);
        }
        let (p, a) = make_homogeneous(self.k, self.p, self.q)?;
        Ok(if self.alpha0 == 0.0 {
            MmsbModel::block(a.iter().copied().collect(), p, n, self.directed)?
        } else {
            MmsbModel::dirichlet(a.iter().map(|v| v * self.alpha0).collect(), p, n, self.directed)?
        })
    }

    /// Samples memberships and a graph. A clique occupies nodes `0..s`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Instance> {
        let model = self.model(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = match self.clique {
            Some(s) => {
                let labels: Vec<usize> = (0..n).map(|u| usize::from(u >= s)).collect();
                MembershipMatrix::from_labels(2, &labels)?
            }
            None => model.sample_memberships(&mut rng)?,
        };
        let graph = sample_graph(&model, &pi, &mut rng)?;
        Ok(Instance { model, pi, graph })
    }
}

pub struct Instance {
    pub model: MmsbModel,
    pub pi: MembershipMatrix,
    pub graph: Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub metrics: Option<MetricsReport>,
    /// Fraction of clique nodes assigned to the clique community.
    pub clique_recall: Option<f64>,
    /// Fraction of nodes assigned to the clique community that are in it.
    pub clique_precision: Option<f64>,
    pub tau: Option<f64>,
    pub support_xi: Option<f64>,
    pub diagnostics_passed: Option<bool>,
    pub timings: Vec<StageTime>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub completed: usize,
    pub median_err_pi_l1_per_node: Option<f64>,
    pub median_err_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub setting: Setting,
    pub runs: Vec<RunRecord>,
    pub points: Vec<SweepPoint>,
    /// Consecutive grid pairs over which the median error per node decreased.
    pub decreasing_pairs: usize,
}

impl ExperimentReport {
    pub fn all_diagnostics_passed(&self) -> bool {
        self.runs.iter().all(|r| r.diagnostics_passed == Some(true))
    }

    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Fits and scores one sampled instance.
pub fn run_once(setting: &Setting, fit_cfg: &FileConfig, n: usize, seed: u64) -> Result<RunRecord> {
    let inst = setting.sample(n, seed)?;
    let mut cfg = FileConfig {
        k: Some(setting.k),
        alpha0: Some(setting.alpha0),
        undirected: Some(!setting.directed),
        ..FileConfig::default()
    }
    .overlay(fit_cfg.clone())
    .to_fit_config()?;
    cfg.seed = seed;
    let mut timer = StageTimer::new();
    let started = std::time::Instant::now();
    let est = match fit_with_observer(&inst.graph, &cfg, &mut timer) {
        Ok(est) => est,
        Err(e) => {
            return Ok(RunRecord {
                n,
                seed,
                error: Some(e.to_string()),
                metrics: None,
                clique_recall: None,
                clique_precision: None,
                tau: None,
                support_xi: None,
                diagnostics_passed: None,
                timings: stage_times(&timer),
                seconds: started.elapsed().as_secs_f64(),
            })
        }
    };
    let seconds = started.elapsed().as_secs_f64();
    let metrics = evaluate_estimate(&est, inst.pi.matrix(), inst.model.p())?;
    let (clique_recall, clique_precision) = match setting.clique {
        Some(s) => {
            // Truth row 0 is the clique; perm maps it to its estimate row.
            let row = metrics.alignment.perm[0];
            let called: Vec<bool> = (0..n)
                .map(|u| {
                    let col = est.pi_hat.column(u);
                    col[row] > 0.0 && col[row] >= col[1 - row]
                })
                .collect();
            let hits = called[..s].iter().filter(|&&c| c).count();
            let total = called.iter().filter(|&&c| c).count();
            (
                Some(hits as f64 / s as f64),
                Some(if total == 0 { 0.0 } else { hits as f64 / total as f64 }),
            )
        }
        None => (None, None),
    };
    Ok(RunRecord {
        n,
        seed,
        error: None,
        metrics: Some(MetricsReport::new(&metrics, est.eigen.residual_norm)),
        clique_recall,
        clique_precision,
        tau: Some(est.tau),
        support_xi: est.support_xi,
        diagnostics_passed: Some(est.diagnostics.all_passed()),
        timings: stage_times(&timer),
        seconds,
    })
}

/// Runs every grid point for `setting.seeds` seeds starting at `seed`.
pub fn run_experiment(preset: Preset, overrides: &Overrides, fit_cfg: &FileConfig, seed: u64) -> Result<ExperimentReport> {
    let setting = Setting::new(preset, overrides)?;
    let mut runs = Vec::new();
    let mut points = Vec::new();
    for &n in &setting.grid {
        let mut errs = Vec::new();
        let mut errs_p = Vec::new();
        for s in 0..setting.seeds {
            let run = run_once(&setting, fit_cfg, n, seed.wrapping_add(s as u64))?;
            if let Some(m) = &run.metrics {
                errs.push(m.err_pi_l1_per_node);
                errs_p.push(m.err_p);
            }
            runs.push(run);
        }
        points.push(SweepPoint {
            n,
            completed: errs.len(),
            median_err_pi_l1_per_node: (!errs.is_empty()).then(|| median(&errs)),
            median_err_p: (!errs_p.is_empty()).then(|| median(&errs_p)),
        });
    }
    let decreasing_pairs = points
        .windows(2)
        .filter(|w| match (w[0].median_err_pi_l1_per_node, w[1].median_err_pi_l1_per_node) {
            (Some(a), Some(b)) => b < a,
            _ => false,
        })
        .count();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        setting,
        runs,
        points,
        decreasing_pairs,
    })
}
