use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmsb::config::{parse_threshold, FileConfig};
use mmsb::error::{Error, Result};
use mmsb::io::{create, open, read_graph_file, read_json, read_memberships, write_edge_list, write_json, write_memberships};
use mmsb::presets::{run_experiment, Overrides, Preset, Setting};
use mmsb::report::{matrix, DiagnosticsReport, FitReport, MetricsReport, ModelFile};
use mmsb::timing::StageTimer;
use mmsb_core::reconstruction::support_recovery;
use mmsb_core::{
    check_assumptions, evaluate, evaluate_estimate, fit_with_observer, partition_for, AssumptionInputs, Threshold,
};
use nalgebra::DVector;
use serde::Deserialize;

const THREADS_VAR: &str = "MMSB_THREADS";

#[derive(Parser)]
#[command(name = "mmsb", version, about = "Community detection in mixed membership block models by tensor decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Random seed for sampling and partitioning.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with `[fit]` and `[experiment]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct FitArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha0: Option<f64>,
    /// Treat edge lists without a header as undirected.
    #[arg(long)]
    undirected: bool,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args, Clone, Default)]
struct Tuning {
    /// Membership threshold: `auto` or a number.
    #[arg(long, value_parser = parse_threshold)]
    tau: Option<Threshold>,
    /// Support threshold: `auto` or a number.
    #[arg(long, value_parser = parse_threshold)]
    xi: Option<Threshold>,
    /// Power iterations per initializer.
    #[arg(long)]
    iterations: Option<usize>,
    /// Cap on the number of power-method initializers.
    #[arg(long)]
    initializers: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct PresetArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha0: Option<f64>,
    /// Within-community edge probability.
    #[arg(long)]
    p: Option<f64>,
    /// Across-community edge probability.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    clique: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    /// Comma-separated node counts for the scaling sweep.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long, conflicts_with = "undirected")]
    directed: bool,
    #[arg(long)]
    undirected: bool,
}

impl PresetArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            k: self.k,
            alpha0: self.alpha0,
            p: self.p,
            q: self.q,
            clique: self.clique,
            seeds: self.seeds,
            grid: self.grid.clone(),
            directed: if self.directed {
                Some(true)
            } else if self.undirected {
                Some(false)
            } else {
                None
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph and its true memberships from a preset.
    Generate {
        #[arg(long, default_value = "homogeneous-block")]
        preset: String,
        #[command(flatten)]
        model: PresetArgs,
        #[arg(long)]
        out_graph: PathBuf,
        #[arg(long)]
        out_truth: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate memberships and connectivity from an edge list.
    Fit {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        /// Skip support recovery.
        #[arg(long)]
        no_support: bool,
        #[arg(long)]
        out_pi: PathBuf,
        #[arg(long)]
        out_report: PathBuf,
        #[arg(long)]
        out_support: Option<PathBuf>,
        /// True memberships; adds metrics to the report (needs --model).
        #[arg(long, requires = "model")]
        truth: Option<PathBuf>,
        #[arg(long, requires = "truth")]
        model: Option<PathBuf>,
        /// Exit with status 2 when an assumption check fails.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Score saved estimates against the truth.
    Eval {
        #[arg(long)]
        pi: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        support: Option<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Mark community supports from saved memberships.
    Support {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        pi: PathBuf,
        #[arg(long)]
        alpha0: Option<f64>,
        /// Required when alpha0 > 0.
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long)]
        undirected: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the sample-size and conditioning requirements.
    Check {
        /// True model (from `generate`).
        #[arg(long, conflicts_with = "report", required_unless_present = "report")]
        model: Option<PathBuf>,
        /// Fit report; uses the estimated P and alpha.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run a preset end to end and write a report.
    Experiment {
        preset: String,
        #[command(flatten)]
        model: PresetArgs,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    fit: FileConfig,
    #[serde(default)]
    experiment: Overrides,
}

fn load_config(common: &Common) -> Result<ConfigFile> {
    match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
            Ok(toml::from_str(&text)?)
        }
        None => Ok(ConfigFile::default()),
    }
}

fn tuning_overrides(t: &Tuning, seed: Option<u64>) -> FileConfig {
    FileConfig {
        seed,
        iterations: t.iterations,
        initializers: t.initializers,
        tau: t.tau,
        xi: t.xi,
        ..FileConfig::default()
    }
}

fn fit_overrides(args: &FitArgs, seed: Option<u64>) -> FileConfig {
    FileConfig {
        k: args.k,
        alpha0: args.alpha0,
        undirected: args.undirected.then_some(true),
        ..tuning_overrides(&args.tuning, seed)
    }
}

fn merge_overrides(file: Overrides, cli: Overrides) -> Overrides {
    Overrides {
        n: cli.n.or(file.n),
        k: cli.k.or(file.k),
        alpha0: cli.alpha0.or(file.alpha0),
        p: cli.p.or(file.p),
        q: cli.q.or(file.q),
        clique: cli.clique.or(file.clique),
        seeds: cli.seeds.or(file.seeds),
        grid: cli.grid.or(file.grid),
        directed: cli.directed.or(file.directed),
    }
}

fn emit_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
            Ok(())
        }
    }
}

enum Outcome {
    Ok,
    AssumptionsFailed,
}

fn strict_outcome(strict: bool, passed: bool) -> Outcome {
    if strict && !passed {
        Outcome::AssumptionsFailed
    } else {
        Outcome::Ok
    }
}

fn check_threads() -> Result<()> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(()),
            _ => Err(Error::Invalid(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(()),
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    check_threads()?;
    match cli.command {
        Command::Generate {
            preset,
            model,
            out_graph,
            out_truth,
            out_model,
            common,
        } => {
            let file = load_config(&common)?;
            let preset: Preset = preset.parse()?;
            let setting = Setting::new(preset, &merge_overrides(file.experiment, model.overrides()))?;
            let seed = common.seed.or(file.fit.seed).unwrap_or(0);
            let inst = setting.sample(setting.grid[0], seed)?;
            write_edge_list(create(&out_graph)?, &inst.graph)?;
            write_memberships(create(&out_truth)?, inst.pi.matrix())?;
            write_json(&out_model, &ModelFile::from_model(&inst.model))?;
            Ok(Outcome::Ok)
        }
        Command::Fit {
            graph,
            fit,
            no_support,
            out_pi,
            out_report,
            out_support,
            truth,
            model,
            strict,
            common,
        } => {
            let file = load_config(&common)?;
            let mut merged = file.fit.overlay(fit_overrides(&fit, common.seed));
            if no_support {
                merged.support = Some(false);
            }
            let cfg = merged.to_fit_config()?;
            let g = read_graph_file(&graph, !cfg.undirected)?;
            let mut timer = StageTimer::new();
            let est = fit_with_observer(&g, &cfg, &mut timer)?;
            let mut report = FitReport::new(&est, &cfg, &timer);
            if let (Some(truth), Some(model)) = (truth, model) {
                let pi = read_memberships(open(&truth)?)?;
                let m: ModelFile = read_json(&model)?;
                let metrics = evaluate_estimate(&est, &pi, &matrix(&m.p)?)?;
                report.metrics = Some(MetricsReport::new(&metrics, est.eigen.residual_norm));
            }
            write_memberships(create(&out_pi)?, &est.pi_hat)?;
            if let (Some(path), Some(s)) = (out_support, &est.support) {
                write_memberships(create(&path)?, &s.s)?;
            }
            write_json(&out_report, &report)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(strict_outcome(strict, est.diagnostics.all_passed()))
        }
        Command::Eval {
            pi,
            report,
            support,
            truth,
            model,
            out,
            common: _,
        } => {
            let pi_hat = read_memberships(open(&pi)?)?;
            let fit_report: FitReport = read_json(&report)?;
            let pi_true = read_memberships(open(&truth)?)?;
            let m: ModelFile = read_json(&model)?;
            let s = support.map(|p| read_memberships(open(&p)?)).transpose()?;
            let xi = fit_report.support.as_ref().map(|s| s.xi);
            let band = match (&s, xi) {
                (Some(s), Some(xi)) => Some((s, xi)),
                (Some(_), None) => return Err(Error::Invalid("the report records no support threshold".into())),
                _ => None,
            };
            let metrics = evaluate(&pi_hat, &fit_report.p_hat()?, band, &pi_true, &matrix(&m.p)?)?;
            emit_json(out.as_deref(), &MetricsReport::new(&metrics, fit_report.tensor_residual))?;
            Ok(Outcome::Ok)
        }
        Command::Support {
            graph,
            pi,
            alpha0,
            xi,
            undirected,
            out,
            common,
        } => {
            let file = load_config(&common)?;
            let pi_hat = read_memberships(open(&pi)?)?;
            let mut cfg = file.fit.clone();
            cfg.k = Some(pi_hat.nrows());
            cfg.alpha0 = alpha0.or(cfg.alpha0);
            cfg.seed = common.seed.or(cfg.seed);
            let cfg = cfg.to_fit_config()?;
            let xi = match (xi, file.fit.xi) {
                (Some(v), _) | (None, Some(Threshold::Fixed(v))) => v,
                _ if cfg.alpha0 == 0.0 => 0.5,
                _ => return Err(Error::Invalid("--xi is required when alpha0 > 0".into())),
            };
            let g = read_graph_file(&graph, !(undirected || cfg.undirected))?;
            if g.n() != pi_hat.ncols() {
                return Err(Error::Invalid(format!(
                    "graph has {} nodes but memberships cover {}",
                    g.n(),
                    pi_hat.ncols()
                )));
            }
            let part = partition_for(g.n(), &cfg)?;
            let s = support_recovery(&g, &pi_hat, cfg.alpha0, xi, &part)?;
            if s.not_homophilic {
                eprintln!("warning: estimated connectivity is not homophilic");
            }
            write_memberships(create(&out)?, &s.s)?;
            Ok(Outcome::Ok)
        }
        Command::Check {
            model,
            report,
            n,
            tau,
            iterations,
            out,
            strict,
            common,
        } => {
            let file = load_config(&common)?;
            let c2 = file.fit.c2.unwrap_or(10.0);
            let (p, alpha_hat, alpha0, n_default, tau_default, iter_default) = match (model, report) {
                (Some(path), _) => {
                    let m: ModelFile = read_json(&path)?;
                    let model = m.to_model()?;
                    let cfg = mmsb_core::FitConfig::new(m.k, m.alpha0);
                    (model.p().clone(), model.alpha_hat(), m.alpha0, Some(m.n), None, cfg.resolved_iterations())
                }
                (None, Some(path)) => {
                    let r: FitReport = read_json(&path)?;
                    let a = r.alpha_hat();
                    (r.p_hat()?, &a / a.sum(), r.alpha0, Some(r.n), Some(r.tau), r.iterations)
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            let n = n.or(n_default).ok_or_else(|| Error::Invalid("--n is required".into()))?;
            let tau = tau.or(tau_default).unwrap_or(if alpha0 == 0.0 { 0.5 } else { 0.1 });
            let alpha_hat: DVector<f64> = alpha_hat;
            let d = check_assumptions(AssumptionInputs {
                p: &p,
                alpha_hat: &alpha_hat,
                alpha0,
                n,
                iterations: iterations.unwrap_or(iter_default),
                c2,
                tau,
            });
            emit_json(out.as_deref(), &DiagnosticsReport::from(&d))?;
            Ok(strict_outcome(strict, d.all_passed()))
        }
        Command::Experiment {
            preset,
            model,
            tuning,
            out,
            strict,
            common,
        } => {
            let file = load_config(&common)?;
            let preset: Preset = preset.parse()?;
            let overrides = merge_overrides(file.experiment, model.overrides());
            let fit_cfg = file.fit.overlay(tuning_overrides(&tuning, None));
            let seed = common.seed.or(fit_cfg.seed).unwrap_or(0);
            let report = run_experiment(preset, &overrides, &fit_cfg, seed)?;
            emit_json(out.as_deref(), &report)?;
            if report.failed_runs() > 0 {
                eprintln!("warning: {} of {} runs failed", report.failed_runs(), report.runs.len());
            }
            Ok(strict_outcome(strict, report.all_diagnostics_passed()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AssumptionsFailed) => {
            eprintln!("assumption checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
