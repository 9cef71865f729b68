//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! The trend criteria run the experiments at their full default sizes, so this
//! target takes several minutes on a single core. `BKERNN_JOBS` sets the worker count.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use bkernn::complexity::{dimension_dependent_bound, estimate_gn, ProbeConfig, Sphere};
use bkernn::estimators::{bkrr_fit_predict, fit_fixed_particles};
use bkernn::experiments::{resolve_jobs, ExperimentName, ExperimentOutput, ExperimentParams, Table};
use bkernn::kernels::{averaged_kernel_matrix, KernelMatrix, ScalarKernel};
use bkernn::ridge::{objective_full, solve_inner, RidgeSolution};
use bkernn::rng::seeded;
use bkernn::trainer::{grad_g, reduced_objective};
use common::*;

type Verdict = (bool, String);

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Values of `value` in rows where every `(column, code)` filter matches.
fn select(t: &Table, value: &str, filters: &[(&str, f64)]) -> Vec<f64> {
    let v = t.column(value).expect("value column");
    let cols: Vec<(usize, f64)> = filters.iter().map(|(c, x)| (t.column(c).expect("filter column"), *x)).collect();
    t.rows
        .iter()
        .filter(|r| cols.iter().all(|&(c, x)| r[c] == x))
        .map(|r| r[v])
        .collect()
}

fn timed(limit_s: f64, start: Instant, mut v: Verdict) -> Verdict {
    let secs = start.elapsed().as_secs_f64();
    if secs > limit_s {
        v.0 = false;
        v.1.push_str(&format!("; took {secs:.1}s, limit {limit_s}s"));
    } else {
        v.1.push_str(&format!("; {secs:.1}s"));
    }
    v
}

// 1. Gradient oracle.
fn gradient_oracle() -> Verdict {
    let start = Instant::now();
    let (n, d, m) = (10, 4, 3);
    let lambda = 0.1;
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    let mut seed = 0u64;
    while instances < 20 {
        seed += 1;
        let x = normal_matrix(n, d, 3 * seed);
        let w = normal_matrix(d, m, 3 * seed + 1);
        let y = normal_matrix(n, 1, 3 * seed + 2).column(0).into_owned();
        // Skip instances with a projection or projected difference near a kink.
        let p = &x * &w;
        let mut margin = f64::INFINITY;
        for j in 0..m {
            for i in 0..n {
                margin = margin.min(p[(i, j)].abs());
                for i2 in 0..i {
                    margin = margin.min((p[(i, j)] - p[(i2, j)]).abs());
                }
            }
        }
        if margin < 1e-3 {
            continue;
        }
        instances += 1;
        let k = averaged_kernel_matrix(&x, &w, ScalarKernel::Brownian).unwrap();
        let sol = solve_inner(&k, &y, lambda).unwrap();
        let g = grad_g(&x, &w, &sol.alpha, lambda, ScalarKernel::Brownian).unwrap();
        let h = 1e-6;
        let mut fd = DMatrix::zeros(d, m);
        for a in 0..d {
            for j in 0..m {
                let mut wp = w.clone();
                wp[(a, j)] += h;
                let mut wm = w.clone();
                wm[(a, j)] -= h;
                let gp = reduced_objective(&x, &y, &wp, lambda, ScalarKernel::Brownian).unwrap();
                let gm = reduced_objective(&x, &y, &wm, lambda, ScalarKernel::Brownian).unwrap();
                fd[(a, j)] = (gp - gm) / (2.0 * h);
            }
        }
        worst = worst.max((&g - &fd).norm() / fd.norm());
    }
    timed(5.0, start, (worst <= 1e-4, format!("max relative error {worst:.2e} over 20 instances")))
}

// 2. Prox oracle.
fn prox_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = seeded(2024);
    let (mut dom, mut kkt, mut gold): (f64, f64, f64) = (f64::NEG_INFINITY, 0.0, 0.0);
    for kind_index in 0..5 {
        for i in 0..50 {
            let d = rng.random_range(1..=6);
            let m = rng.random_range(1..=6);
            let t = 10f64.powf(rng.random_range(-3.0..1.0));
            let s = 10f64.powf(rng.random_range(-1.0..0.7));
            let kind = all_kinds(s)[kind_index];
            let scale = rng.random_range(0.1..3.0);
            let seed = 100 * kind_index as u64 + i;
            let w = normal_matrix(d, m, seed) * scale;
            dom = dom.max(dominance_violation(&kind, &w, t, 64, seed) / (1.0 + w.norm_squared()));
            kkt = kkt.max(kkt_violation(&kind, &w, t));
            if !kind.is_convex() {
                gold = gold.max(concave_oracle_violation(&kind, &w, t));
            }
        }
    }
    let pass = dom <= 1e-10 && kkt <= 1e-7 && gold <= 1e-6;
    timed(
        10.0,
        start,
        (
            pass,
            format!("250 instances: dominance {dom:.1e} (tol 1e-10), KKT {kkt:.1e} (tol 1e-7), golden-section {gold:.1e} (tol 1e-6)"),
        ),
    )
}

/// Accelerated gradient descent on the inner objective over `(α, c)`.
fn gd_oracle(k: &KernelMatrix, y: &DVector<f64>, lambda: f64, steps: usize) -> f64 {
    let km = k.as_matrix();
    let n = y.len();
    let nf = n as f64;
    let ones = DVector::from_element(n, 1.0);
    let mut h = DMatrix::zeros(n + 1, n + 1);
    h.view_mut((0, 0), (n, n)).copy_from(&(km * km / nf + km * lambda));
    let k1 = km * &ones / nf;
    h.view_mut((0, n), (n, 1)).copy_from(&k1);
    h.view_mut((n, 0), (1, n)).copy_from(&k1.transpose());
    h[(n, n)] = 1.0;
    let step = 1.0 / SymmetricEigen::new(h).eigenvalues.max();
    let (mut a, mut c) = (DVector::zeros(n), 0.0);
    let (mut a_prev, mut c_prev) = (a.clone(), c);
    for t in 0..steps {
        let mom = t as f64 / (t as f64 + 3.0);
        let ya = &a + (&a - &a_prev) * mom;
        let yc = c + (c - c_prev) * mom;
        let r = km * &ya + &ones * yc - y;
        let ga = km * &r / nf + km * &ya * lambda;
        let gc = r.sum() / nf;
        a_prev = a;
        c_prev = c;
        a = &ya - ga * step;
        c = yc - gc * step;
    }
    let sol = RidgeSolution {
        alpha: a,
        intercept: c,
        g_value: f64::NAN,
    };
    objective_full(k, y, &sol, lambda)
}

// 3. Inner-solve oracle.
fn inner_solve_oracle() -> Verdict {
    let mut rng = seeded(77);
    let (mut excess, mut identity): (f64, f64) = (f64::NEG_INFINITY, 0.0);
    for i in 0..10 {
        let n = rng.random_range(5..=10);
        let x = normal_matrix(n, 3, 500 + i);
        let w = normal_matrix(3, 4, 600 + i);
        let y = normal_matrix(n, 1, 700 + i).column(0).into_owned();
        let lambda = 10f64.powf(rng.random_range(-2.0..0.0));
        let k = averaged_kernel_matrix(&x, &w, ScalarKernel::Brownian).unwrap();
        let sol = solve_inner(&k, &y, lambda).unwrap();
        let closed = objective_full(&k, &y, &sol, lambda);
        excess = excess.max(closed - gd_oracle(&k, &y, lambda, 100_000));
        identity = identity.max((sol.g_value - closed).abs() / closed.abs());
    }
    (
        excess <= 1e-8 && identity <= 1e-8,
        format!("closed form minus oracle at most {excess:.1e} (tol 1e-8), identity gap {identity:.1e} (tol 1e-8)"),
    )
}

struct Runs {
    outputs: Vec<(ExperimentName, ExperimentOutput, f64)>,
}

impl Runs {
    fn get(&self, name: ExperimentName) -> &ExperimentOutput {
        &self.outputs.iter().find(|(n, _, _)| *n == name).expect("experiment ran").1
    }
}

fn run_all(jobs: usize) -> Runs {
    let outputs = ExperimentName::ALL
        .iter()
        .map(|&name| {
            let start = Instant::now();
            let params = ExperimentParams::defaults(name, 1.0, None).unwrap();
            let out = params.run(0, jobs).unwrap_or_else(|e| panic!("{name} failed: {e}"));
            let secs = start.elapsed().as_secs_f64();
            println!("  ran {name} at full size in {secs:.1}s");
            (name, out, secs)
        })
        .collect();
    Runs { outputs }
}

// 4. Descent on every experiment configuration.
fn descent(runs: &Runs) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, out, _) in &runs.outputs {
        let rise = out.max_objective_rise();
        let fits: usize = out
            .tables
            .iter()
            .map(|t| t.values("max_objective_rise").iter().filter(|v| !v.is_nan()).count())
            .sum();
        pass &= rise <= 1e-10 && fits > 0;
        parts.push(format!("{name} {rise:.1e} over {fits} fits"));
    }
    (pass, format!("largest objective rise per step: {} (tol 1e-10)", parts.join(", ")))
}

// 5. Kernel comparison trend.
fn kernel_trend(runs: &Runs) -> Verdict {
    let t = runs.get(ExperimentName::Exp1).table("results").unwrap();
    let med = |k: ScalarKernel| median(&select(t, "test_mse", &[("kernel", k.code() as f64)]));
    let (b, e, g) = (
        med(ScalarKernel::Brownian),
        med(ScalarKernel::Exponential),
        med(ScalarKernel::Gaussian),
    );
    let secs = runs.outputs.iter().find(|o| o.0 == ExperimentName::Exp1).unwrap().2;
    (
        b < e && b < g,
        format!("median test MSE brownian {b:.4}, exponential {e:.4}, gaussian {g:.4}; {secs:.0}s"),
    )
}

// 6. Concave penalties trend.
fn penalty_trend(runs: &Runs) -> Verdict {
    let t = runs.get(ExperimentName::Exp3).table("results").unwrap();
    let r2 = |mech: f64, pen: f64| mean(&select(t, "test_r2", &[("mechanism", mech), ("penalty", pen)]));
    // Penalty codes: 0 basic, 1 variable, 2 feature, 3 concave variable, 4 concave feature.
    let (vb, vv, vc) = (r2(1.0, 0.0), r2(1.0, 1.0), r2(1.0, 3.0));
    let (fb, ff, fc) = (r2(2.0, 0.0), r2(2.0, 2.0), r2(2.0, 4.0));
    let pass = vc >= vv && vv >= vb && fc >= ff && ff >= fb;
    (
        pass,
        format!(
            "variables: concave {vc:.4} >= variable {vv:.4} >= basic {vb:.4}; features: concave {fc:.4} >= feature {ff:.4} >= basic {fb:.4}"
        ),
    )
}

// 7. Feature learning trend.
fn feature_trend(runs: &Runs) -> Verdict {
    let t = runs.get(ExperimentName::Exp5).table("results").unwrap();
    // Method codes: 0 bkernn, 1 bkrr, 2 relu. Sweep 0 varies n at d = 15.
    let score = |n: f64, method: f64| {
        mean(&select(t, "feature_score", &[("sweep", 0.0), ("n", n), ("method", method)]))
    };
    let r2 = |n: f64, method: f64| mean(&select(t, "test_r2", &[("sweep", 0.0), ("n", n), ("method", method)]));
    let (s50, s200, s500) = (score(50.0, 0.0), score(200.0, 0.0), score(500.0, 0.0));
    let relu = score(500.0, 2.0);
    let (rb, rk) = (r2(500.0, 0.0), r2(500.0, 1.0));
    let pass = s50 < s200 && s200 < s500 && s500 > relu && rb > rk;
    (
        pass,
        format!(
            "feature score n=50 {s50:.4} < n=200 {s200:.4} < n=500 {s500:.4}; relu at n=500 {relu:.4}; R² at n=500 bkernn {rb:.4} vs bkrr {rk:.4}"
        ),
    )
}

// 8. One-dimensional reduction.
fn one_dimensional_reduction() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = seeded(900 + seed);
        let n = rng.random_range(10..=40);
        let x: DMatrix<f64> = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |i, _| (3.0 * x[(i, 0)]).sin() + 0.1 * rng.random_range(-1.0..1.0));
        let xn: DMatrix<f64> = DMatrix::from_fn(50, 1, |_, _| rng.random_range(-2.5..2.5));
        let lambda = 10f64.powf(rng.random_range(-3.0..0.0));
        let a = bkrr_fit_predict(&x, &y, &xn, lambda).unwrap();
        let model = fit_fixed_particles(&x, &y, &DMatrix::from_element(1, 1, 1.0), lambda, ScalarKernel::Brownian).unwrap();
        worst = worst.max((a - model.predict(&xn).unwrap()).abs().max());
    }
    (worst <= 1e-8, format!("max prediction gap {worst:.1e} over 5 datasets (tol 1e-8)"))
}

// 9. Complexity probe below the dimension-dependent bound and decreasing in n.
fn complexity_probe() -> Verdict {
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    let mut notes = Vec::new();
    for sphere in [Sphere::L2, Sphere::L1] {
        for d in [2usize, 5, 10] {
            let mut prev = f64::INFINITY;
            for n in [50usize, 200, 800] {
                let mut rng = seeded(31 * n as u64 + d as u64);
                let x: DMatrix<f64> = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..=1.0));
                let cfg = ProbeConfig {
                    n_noise_draws: 100,
                    n_direction_draws: 200,
                    sphere,
                    seed: 5,
                };
                let g = estimate_gn(&x, &cfg).unwrap();
                let bound = dimension_dependent_bound(&x, sphere);
                worst_ratio = worst_ratio.max(g / bound);
                if g > bound {
                    pass = false;
                    notes.push(format!("{sphere:?} n={n} d={d}: {g:.4} > {bound:.4}"));
                }
                if g >= prev {
                    pass = false;
                    notes.push(format!("{sphere:?} d={d}: not decreasing at n={n}"));
                }
                prev = g;
            }
        }
    }
    let mut detail = format!("18 settings, largest estimate/bound ratio {worst_ratio:.3}");
    if !notes.is_empty() {
        detail.push_str(&format!("; {}", notes.join("; ")));
    }
    (pass, detail)
}

// 10. Replaying a manifest reproduces identical CSVs.
fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bkernn");
    let mut pass = true;
    let mut compared = 0;
    let mut notes = Vec::new();
    for name in ExperimentName::ALL {
        let a = dir.path().join(format!("{name}_a"));
        let b = dir.path().join(format!("{name}_b"));
        let first = Command::new(bin)
            .args(["experiment", name.as_str(), "--scale", "0.25", "--seeds", "2", "--seed", "11", "--jobs", "1"])
            .arg("--out")
            .arg(&a)
            .output()
            .unwrap();
        let replay = Command::new(bin)
            .args(["experiment", "--jobs", "3", "--manifest"])
            .arg(a.join("manifest.txt"))
            .arg("--out")
            .arg(&b)
            .output()
            .unwrap();
        if !first.status.success() || !replay.status.success() {
            pass = false;
            notes.push(format!("{name}: command failed"));
            continue;
        }
        for f in csv_files(&a) {
            compared += 1;
            let same = std::fs::read(a.join(&f)).ok() == std::fs::read(b.join(&f)).ok();
            if !same {
                pass = false;
                notes.push(format!("{name}/{f} differs"));
            }
        }
    }
    let mut detail = format!("{compared} CSV files byte-identical after manifest replay with a different worker count");
    if !notes.is_empty() {
        detail = notes.join("; ");
    }
    (pass && compared >= 7, detail)
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|f| f.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    })
}

fn main() {
    let jobs = resolve_jobs(None).unwrap_or(1);
    let mut verdicts: Vec<(usize, &str, Verdict)> = Vec::new();
    verdicts.push((1, "gradient oracle", guarded(gradient_oracle)));
    verdicts.push((2, "prox oracle", guarded(prox_oracle)));
    verdicts.push((3, "inner-solve oracle", guarded(inner_solve_oracle)));
    println!("running all experiments at full size with {jobs} worker(s)");
    let runs = catch_unwind(|| run_all(jobs));
    match &runs {
        Ok(runs) => {
            verdicts.push((4, "descent", guarded(|| descent(runs))));
            verdicts.push((5, "kernel comparison trend", guarded(|| kernel_trend(runs))));
            verdicts.push((6, "concave penalty trend", guarded(|| penalty_trend(runs))));
            verdicts.push((7, "feature learning trend", guarded(|| feature_trend(runs))));
        }
        Err(_) => {
            for (i, name) in [(4, "descent"), (5, "kernel comparison trend"), (6, "concave penalty trend"), (7, "feature learning trend")] {
                verdicts.push((i, name, (false, "experiment run failed".into())));
            }
        }
    }
    verdicts.push((8, "one-dimensional reduction", guarded(one_dimensional_reduction)));
    verdicts.push((9, "complexity probe", guarded(complexity_probe)));
    verdicts.push((10, "determinism", guarded(determinism)));

    println!();
    let mut failed = 0;
    for (i, name, (pass, detail)) in &verdicts {
        if !pass {
            failed += 1;
        }
        println!("criterion {i:>2} {:<4} {name}: {detail}", if *pass { "PASS" } else { "FAIL" });
    }
    println!("\nacceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
