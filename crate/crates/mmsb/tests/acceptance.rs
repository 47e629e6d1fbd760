//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use mmsb::config::FileConfig;
use mmsb::presets::{Overrides, Preset, Setting};
use mmsb::timing::StageTimer;
use mmsb_core::metrics::median;
use mmsb_core::moments::RAW_THREESTAR_CAP;
use mmsb_core::power::pilot_xi;
use mmsb_core::{
    evaluate_estimate, fit, fit_with_observer, partition_nodes, raw_threestar, sample_dirichlet, tensor_eigen,
    whitened_threestar, FitConfig, Graph, Partition5, Stage, Tensor3,
};
use mmsb_oracle as oracle;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_unit(k: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize()
}

fn max_abs_diff(a: &Tensor3, b: &Tensor3) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn exact_identifiability() -> Outcome {
    let start = Instant::now();
    let n = 2000;
    let (mut worst_pair, mut worst_pi) = (0.0f64, 0.0f64);
    for k in [2, 3, 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let p = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                0.5 + 0.4 * rng.random::<f64>()
            } else {
                0.2 * rng.random::<f64>()
            }
        });
        // Weights on the 1/|A| grid so every set realizes them exactly.
        let set = n / 5;
        let mut counts: Vec<usize> = vec![set / (2 * k); k];
        for _ in 0..set - counts.iter().sum::<usize>() {
            counts[rng.random_range(0..k)] += 1;
        }
        let alpha_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / set as f64).collect();
        let mut cfg = FitConfig::new(k, 0.0);
        cfg.seed = 7 + k as u64;
        let part = partition_nodes(n, k, cfg.fractions, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        let pi = oracle::balanced_block_memberships(n, &part, &alpha_hat);
        let g = oracle::expected_adjacency(&pi, &p);
        let est = match fit(&g, &cfg) {
            Ok(e) => e,
            Err(e) => return outcome(false, format!("k={k}: {e}")),
        };

        let a = DVector::from_vec(alpha_hat.clone());
        let mut phi = est.primary.whitener.transpose() * oracle::exact_f(&pi, &p, &part.a);
        for (i, mut col) in phi.column_iter_mut().enumerate() {
            col *= a[i].sqrt();
        }
        let mut perm = Vec::with_capacity(k);
        for j in 0..k {
            let (i, dot) = (0..k)
                .map(|i| (i, phi.column(i).dot(&est.eigen.phi.column(j))))
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .unwrap();
            perm.push(i);
            worst_pair = worst_pair
                .max((est.eigen.lambda[j] - 1.0 / a[i].sqrt()).abs())
                .max((est.eigen.phi.column(j) * dot.signum() - phi.column(i)).amax());
        }
        worst_pi = worst_pi.max((&est.pi_raw - pi.select_rows(&perm)).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_pair <= 1e-5 && worst_pi <= 1e-4 && secs < 30.0,
        format!("max pair error {worst_pair:.1e} (<= 1e-5), max Pi error {worst_pi:.1e} (<= 1e-4), {secs:.1}s (< 30s)"),
    )
}

fn power_perturbation() -> Outcome {
    let start = Instant::now();
    let k = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut runs, mut ok) = (0, 0);
    let (mut worst_v, mut worst_l, mut worst_r) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let v = gaussian_matrix(k, k, &mut rng).qr().q();
        let lambda: Vec<f64> = (0..k).map(|_| 1.0 + 9.0 * rng.random::<f64>()).collect();
        let lambda_min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
        let clean = Tensor3::from_factors(&lambda, &v, &v, &v);
        let noise = Tensor3::from_fn([k; 3], |_, _, _| rng.sample(StandardNormal)).symmetrize().unwrap();
        for rel in [1e-4, 1e-3] {
            // Frobenius norm bounds the spectral norm, so this noise is at most eps.
            let eps = rel * lambda_min;
            let mut t = clean.clone();
            t.axpy(eps / noise.frobenius_norm(), &noise);
            let inits: Vec<DVector<f64>> = (0..10 * k + 100).map(|_| random_unit(k, &mut rng)).collect();
            let iters = 30;
            let pairs = pilot_xi(&t, &inits, iters).and_then(|xi| tensor_eigen(&t, &inits, iters, xi)).unwrap();
            runs += 1;
            let mut good = true;
            let mut used = vec![false; k];
            for j in 0..k {
                let vh = pairs.phi.column(j);
                let i = (0..k)
                    .filter(|&i| !used[i])
                    .max_by(|&a, &b| v.column(a).dot(&vh).abs().total_cmp(&v.column(b).dot(&vh).abs()))
                    .unwrap();
                used[i] = true;
                let s = v.column(i).dot(&vh).signum();
                let dv = (vh * s - v.column(i)).norm();
                let dl = (pairs.lambda[j] - lambda[i]).abs();
                worst_v = worst_v.max(dv / (eps / lambda[i]));
                worst_l = worst_l.max(dl / eps);
                good &= dv <= 8.0 * eps / lambda[i] && dl <= 5.0 * eps;
            }
            let mut residual = t.clone();
            residual.axpy(-1.0, &pairs.reconstruct());
            let r = residual.frobenius_norm() / eps;
            worst_r = worst_r.max(r);
            good &= r <= 55.0;
            ok += usize::from(good);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ok == runs && secs < 60.0,
        format!(
            "{ok}/{runs} runs within bounds; worst |v-v^|/(eps/lambda) {worst_v:.2} (<= 8), |l-l^|/eps {worst_l:.2} (<= 5), residual/eps {worst_r:.2} (<= 55), {secs:.1}s (< 60s)"
        ),
    )
}

fn block_recovery() -> Outcome {
    let start = Instant::now();
    let setting = Setting::new(Preset::HomogeneousBlock, &Overrides::default()).unwrap();
    let n = 1500;
    let seeds = 10;
    let mut wrong_count = vec![0usize; n];
    let mut perfect = 0;
    for seed in 0..seeds {
        let inst = setting.sample(n, seed).unwrap();
        let cfg = FileConfig {
            k: Some(setting.k),
            alpha0: Some(0.0),
            seed: Some(seed),
            ..FileConfig::default()
        };
        let est = fit(&inst.graph, &cfg.to_fit_config().unwrap()).unwrap();
        let m = evaluate_estimate(&est, inst.pi.matrix(), inst.model.p()).unwrap();
        let s = est.support.as_ref().unwrap().s.select_rows(&m.alignment.perm);
        let mut all = true;
        for (u, &label) in inst.pi.labels().iter().enumerate() {
            let right = (0..setting.k).all(|i| (s[(i, u)] == 1.0) == (i == label));
            if !right {
                wrong_count[u] += 1;
                all = false;
            }
        }
        perfect += usize::from(all);
    }
    let worst_node = wrong_count.iter().copied().max().unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        seeds - worst_node as u64 >= 9 && perfect >= 8 && secs < 120.0,
        format!(
            "every node correct in >= {}/{seeds} seeds (>= 9), {perfect}/{seeds} seeds fully correct (>= 8), {secs:.1}s (< 120s)",
            seeds - worst_node as u64
        ),
    )
}

fn mmsb_fit(setting: &Setting, n: usize, seed: u64) -> mmsb_core::Metrics {
    let inst = setting.sample(n, seed).unwrap();
    let mut cfg = FitConfig::new(setting.k, setting.alpha0);
    cfg.seed = seed;
    let est = fit(&inst.graph, &cfg).unwrap();
    evaluate_estimate(&est, inst.pi.matrix(), inst.model.p()).unwrap()
}

fn error_scaling() -> Outcome {
    let start = Instant::now();
    let setting = Setting::new(Preset::HomogeneousMmsb, &Overrides::default()).unwrap();
    let mut pi_med = Vec::new();
    let mut p_med = Vec::new();
    for n in [8000, 32000] {
        let runs: Vec<_> = (0..5).map(|seed| mmsb_fit(&setting, n, 40 + seed)).collect();
        pi_med.push(median(&runs.iter().map(|m| m.err_pi_l1_per_node).collect::<Vec<_>>()));
        p_med.push(median(&runs.iter().map(|m| m.err_p).collect::<Vec<_>>()));
    }
    let ratio = pi_med[1] / pi_med[0];
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ratio <= 0.65 && p_med[1] < p_med[0] && secs < 900.0,
        format!(
            "median err_pi/n {:.4} -> {:.4} (ratio {ratio:.3} <= 0.65), median err_P {:.4} -> {:.4} (decreasing), {secs:.0}s (< 900s)",
            pi_med[0], pi_med[1], p_med[0], p_med[1]
        ),
    )
}

fn support_band() -> Outcome {
    let setting = Setting::new(
        Preset::HomogeneousMmsb,
        &Overrides {
            alpha0: Some(0.5),
            ..Overrides::default()
        },
    )
    .unwrap();
    let (mut recall, mut rejection) = (1.0f64, 1.0f64);
    let mut xis = Vec::new();
    for seed in 0..5 {
        let m = mmsb_fit(&setting, 10_000, 70 + seed);
        let s = m.support.expect("support is computed");
        recall = recall.min(s.recall);
        rejection = rejection.min(s.rejection);
        xis.push(s.xi);
    }
    outcome(
        recall >= 0.99 && rejection >= 0.99,
        format!(
            "worst seed: {:.2}% of Pi >= xi marked, {:.2}% of Pi <= xi/2 unmarked (both >= 99%); xi in [{:.3}, {:.3}]",
            100.0 * recall,
            100.0 * rejection,
            xis.iter().copied().fold(f64::INFINITY, f64::min),
            xis.iter().copied().fold(0.0, f64::max)
        ),
    )
}

fn dirichlet_machinery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_moment = 0.0f64;
    let mut worst_psi = 0.0f64;
    for _ in 0..3 {
        let k = rng.random_range(2..=5);
        let alpha: Vec<f64> = (0..k).map(|_| 0.1 + 1.9 * rng.random::<f64>()).collect();
        let draws = 1_000_000;
        let pi = sample_dirichlet(&alpha, draws, &mut rng).unwrap().into_matrix();
        let second = &pi * pi.transpose() / draws as f64;
        worst_moment = worst_moment.max((second - oracle::dirichlet_moment_matrix(&alpha)).amax());

        let alpha0: f64 = alpha.iter().sum();
        let alpha_hat = DVector::from_iterator(k, alpha.iter().map(|a| a / alpha0));
        let m = 100_000;
        let psi = oracle::psi_matrix(&pi.columns(0, m).into_owned(), &alpha_hat, alpha0);
        worst_psi = worst_psi.max((&psi * psi.transpose() / m as f64 - DMatrix::identity(k, k)).norm());
    }
    outcome(
        worst_moment <= 0.005 && worst_psi <= 0.05,
        format!("max |E[pi pi^T] error| {worst_moment:.4} (<= 0.005), max Psi identity error {worst_psi:.4} (<= 0.05)"),
    )
}

fn random_graph(n: usize, density: f64, rng: &mut ChaCha8Rng) -> (Graph, DMatrix<f64>) {
    let mut g = Graph::empty(n, true);
    let mut m = DMatrix::zeros(n, n);
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random::<f64>() < density {
                g.add_edge(u, v).unwrap();
                m[(u, v)] = 1.0;
            }
        }
    }
    (g, m)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let (mut worst, mut exact) = (0.0f64, true);
    for _ in 0..20 {
        let density = 0.2 + 0.4 * rng.random::<f64>();
        let (g, m) = random_graph(30, density, &mut rng);
        let part: Partition5 = partition_nodes(30, 3, [0.2; 5], &mut rng).unwrap();
        let raw = raw_threestar(&g, &part.y, &part.a, &part.b, &part.c, RAW_THREESTAR_CAP).unwrap();
        let loops = oracle::raw_threestar(&m, &part.y, &part.a, &part.b, &part.c);
        exact &= raw == loops;
        let wa = gaussian_matrix(6, 3, &mut rng);
        let wb = gaussian_matrix(6, 3, &mut rng);
        let wc = gaussian_matrix(6, 3, &mut rng);
        let got = whitened_threestar(&g, &part.y, &part.a, &part.b, &part.c, 0.0, &wa, &wb, &wc).unwrap();
        // The centered statistic at alpha0 = 0 carries the factor (alpha0 + 1)(alpha0 + 2) = 2.
        let mut want = raw.multilinear(&wa, &wb, &wc).unwrap();
        want.scale(2.0);
        worst = worst.max(max_abs_diff(&got, &want));
    }
    outcome(
        worst <= 1e-10 && exact,
        format!("max whitened difference {worst:.1e} (<= 1e-10), raw equals quadruple loop: {exact}"),
    )
}

fn complexity() -> Outcome {
    let setting = Setting::new(Preset::HomogeneousBlock, &Overrides::default()).unwrap();
    let sizes = [1000, 2000, 4000];
    let stages = [Stage::Whitening, Stage::Moments, Stage::TensorPower, Stage::Reconstruction, Stage::Support];
    let mut times: Vec<Vec<f64>> = Vec::new();
    for &n in &sizes {
        let inst = setting.sample(n, 1).unwrap();
        let cfg = FitConfig::new(setting.k, 0.0);
        // Best of three per stage damps scheduler noise.
        let mut best = vec![f64::INFINITY; stages.len() + 1];
        for _ in 0..3 {
            let mut timer = StageTimer::new();
            fit_with_observer(&inst.graph, &cfg, &mut timer).unwrap();
            for (b, &s) in best.iter_mut().zip(&stages) {
                *b = b.min(timer.seconds(s));
            }
            best[stages.len()] = best[stages.len()].min(timer.total_seconds());
        }
        times.push(best);
    }
    let allowed = 2.0 * 4f64.powf(2.3);
    // Stages under a millisecond at the smallest size are too noisy to time.
    let floor = 1e-3;
    let mut passed = true;
    let mut parts = Vec::new();
    for (j, name) in stages.iter().map(|s| s.name()).chain(["total"]).enumerate() {
        let (t0, t2) = (times[0][j], times[2][j]);
        let exponent = (t2 / t0).ln() / 4f64.ln();
        let checked = t0 >= floor || j == stages.len();
        if checked {
            passed &= t2 / t0 <= allowed;
        }
        parts.push(format!("{name} n^{exponent:.2}{}", if checked { "" } else { " (unchecked)" }));
    }
    outcome(
        passed,
        format!(
            "{} (ratio <= 2*4^2.3 = {allowed:.1}); total {:.3}s/{:.3}s/{:.3}s",
            parts.join(", "),
            times[0][stages.len()],
            times[1][stages.len()],
            times[2][stages.len()]
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("exact-moment identifiability", exact_identifiability),
        ("tensor power perturbation bounds", power_perturbation),
        ("zero-error block-model recovery", block_recovery),
        ("error scaling", error_scaling),
        ("support recovery band", support_band),
        ("dirichlet machinery", dirichlet_machinery),
        ("oracle equivalence", oracle_equivalence),
        ("complexity sanity", complexity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.passed);
        println!("[{}] {}. {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
