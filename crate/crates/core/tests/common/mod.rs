//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use bkernn::rng::seeded;
use bkernn::Penalty;
use nalgebra::{DMatrix, SVD};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    normal_matrix(d, d, seed).qr().q()
}

pub fn all_kinds(s: f64) -> [Penalty; 5] {
    [
        Penalty::Basic,
        Penalty::Variable,
        Penalty::Feature,
        Penalty::ConcaveVariable { s },
        Penalty::ConcaveFeature { s },
    ]
}

/// `½‖W − U‖² + t·Ω(U)`.
pub fn prox_objective(kind: &Penalty, w: &DMatrix<f64>, u: &DMatrix<f64>, t: f64) -> f64 {
    0.5 * (w - u).norm_squared() + t * kind.value(u)
}

/// Largest violation of `obj(prox) ≤ obj(prox + δ)` over `n` random perturbations.
pub fn dominance_violation(kind: &Penalty, w: &DMatrix<f64>, t: f64, n: usize, seed: u64) -> f64 {
    let u = kind.prox(w, t);
    let base = prox_objective(kind, w, &u, t);
    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        let scale = 10f64.powf(rng.random_range(-4.0..0.0));
        let delta = normal_matrix(w.nrows(), w.ncols(), seed.wrapping_add(1000 + i as u64)) * scale;
        // Some perturbations also zero a random column or row to probe sparse candidates.
        let mut v = &u + delta;
        if i % 4 == 0 {
            let j = rng.random_range(0..w.ncols());
            v.column_mut(j).fill(0.0);
        } else if i % 4 == 1 {
            let a = rng.random_range(0..w.nrows());
            v.row_mut(a).fill(0.0);
        }
        worst = worst.max(base - prox_objective(kind, w, &v, t));
    }
    worst
}

fn singular_values(w: &DMatrix<f64>) -> Vec<f64> {
    SVD::new(w.clone(), false, false).singular_values.iter().copied().collect()
}

fn spectral_norm(w: &DMatrix<f64>) -> f64 {
    singular_values(w).into_iter().fold(0.0, f64::max)
}

/// Group-lasso optimality for blocks `(w_b, u_b)` with threshold `thr`:
/// `w_b − u_b = thr·u_b/‖u_b‖` when `u_b ≠ 0`, `‖w_b‖ ≤ thr` otherwise.
fn group_kkt(blocks: Vec<(Vec<f64>, Vec<f64>)>, thr: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (wb, ub) in blocks {
        let un = ub.iter().map(|v| v * v).sum::<f64>().sqrt();
        if un == 0.0 {
            let wn = wb.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(wn - thr);
        } else {
            for (a, b) in wb.iter().zip(&ub) {
                worst = worst.max((a - b - thr * b / un).abs());
            }
        }
    }
    worst
}

/// Scalar objective of a concave prox along one block of norm `r` scaled by `c`.
pub fn concave_scalar(c: f64, r: f64, t: f64, s: f64, sqrt_m: f64) -> f64 {
    0.5 * r * r * (1.0 - c) * (1.0 - c) + t / (2.0 * s) * (s / sqrt_m * r * c).ln_1p()
}

/// Minimizer over `c ∈ [0, 1]`: coarse grid, then golden-section refinement around the best node.
pub fn golden_oracle(r: f64, t: f64, s: f64, sqrt_m: f64) -> f64 {
    let f = |c: f64| concave_scalar(c, r, t, s, sqrt_m);
    let nodes = 4000;
    let h = 1.0 / nodes as f64;
    let best = (0..=nodes)
        .map(|i| i as f64 * h)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    let (mut lo, mut hi) = ((best - h).max(0.0), (best + h).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c1 = hi - g * (hi - lo);
        let c2 = lo + g * (hi - lo);
        if f(c1) <= f(c2) {
            hi = c2;
        } else {
            lo = c1;
        }
    }
    let c = 0.5 * (lo + hi);
    if f(0.0) <= f(c) {
        0.0
    } else {
        c
    }
}

/// Distance of a concave prox output from the golden-section oracle, block by block.
/// A block counts as matching when its scaling agrees to `1e-6`, or when the two
/// scalings tie in objective (two global minimizers).
pub fn concave_oracle_violation(kind: &Penalty, w: &DMatrix<f64>, t: f64) -> f64 {
    let sqrt_m = (w.ncols() as f64).sqrt();
    let u = kind.prox(w, t);
    let mut worst: f64 = 0.0;
    let mut check = |r: f64, r_u: f64, s: f64| {
        if r <= 1e-12 {
            return;
        }
        let c = r_u / r;
        let c_star = golden_oracle(r, t, s, sqrt_m);
        let gap = (c - c_star).abs();
        let tie = (concave_scalar(c, r, t, s, sqrt_m) - concave_scalar(c_star, r, t, s, sqrt_m)).abs() <= 1e-12;
        if !tie {
            worst = worst.max(gap);
        }
    };
    match *kind {
        Penalty::ConcaveVariable { s } => {
            for a in 0..w.nrows() {
                check(w.row(a).norm(), u.row(a).norm(), s);
            }
        }
        Penalty::ConcaveFeature { s } => {
            let sw = singular_values(w);
            let su = singular_values(&u);
            let mut sw_sorted = sw.clone();
            let mut su_sorted = su.clone();
            sw_sorted.sort_by(|a, b| b.total_cmp(a));
            su_sorted.sort_by(|a, b| b.total_cmp(a));
            for (r, ru) in sw_sorted.into_iter().zip(su_sorted) {
                check(r, ru, s);
            }
            // The prox keeps the singular vectors: U Wᵀ and Wᵀ U are symmetric PSD.
            let uwt = &u * w.transpose();
            worst = worst.max((&uwt - uwt.transpose()).abs().max());
            let wtu = w.transpose() * &u;
            worst = worst.max((&wtu - wtu.transpose()).abs().max());
        }
        _ => {}
    }
    worst
}

/// Largest KKT residual of `U = prox(W, t)`.
///
/// Convex kinds use their subgradient characterization; concave kinds require
/// every kept block to be a stationary point of its scalar objective and every
/// dropped block to be beaten by no positive scaling.
pub fn kkt_violation(kind: &Penalty, w: &DMatrix<f64>, t: f64) -> f64 {
    let m = w.ncols() as f64;
    let sqrt_m = m.sqrt();
    let u = kind.prox(w, t);
    match *kind {
        Penalty::Basic => {
            let blocks = (0..w.ncols())
                .map(|j| (w.column(j).iter().copied().collect(), u.column(j).iter().copied().collect()))
                .collect();
            group_kkt(blocks, t / (2.0 * m))
        }
        Penalty::Variable => {
            let blocks = (0..w.nrows())
                .map(|a| (w.row(a).iter().copied().collect(), u.row(a).iter().copied().collect()))
                .collect();
            group_kkt(blocks, t / (2.0 * sqrt_m))
        }
        Penalty::Feature => {
            // G = (W − U)/thr must satisfy ‖G‖_op ≤ 1 and ⟨G, U⟩ = ‖U‖_*.
            let thr = t / (2.0 * sqrt_m);
            let g = (w - &u) / thr;
            let nuclear: f64 = singular_values(&u).iter().sum();
            let a = (spectral_norm(&g) - 1.0).max(0.0);
            let b = (g.dot(&u) - nuclear).abs() / nuclear.max(1.0);
            a.max(b) * thr
        }
        Penalty::ConcaveVariable { s } | Penalty::ConcaveFeature { s } => {
            let pairs: Vec<(f64, f64)> = if matches!(kind, Penalty::ConcaveVariable { .. }) {
                (0..w.nrows()).map(|a| (w.row(a).norm(), u.row(a).norm())).collect()
            } else {
                let mut sw = singular_values(w);
                let mut su = singular_values(&u);
                sw.sort_by(|a, b| b.total_cmp(a));
                su.sort_by(|a, b| b.total_cmp(a));
                sw.into_iter().zip(su).collect()
            };
            let mut worst: f64 = 0.0;
            for (r, ru) in pairs {
                if r <= 1e-12 {
                    continue;
                }
                let c = ru / r;
                // Singular values of a dropped direction come back at rounding level, not exactly 0.
                if c > 1e-9 {
                    // d/dc of the scalar objective vanishes at an interior minimizer.
                    let deriv = -r * r * (1.0 - c) + t / (2.0 * sqrt_m) * r / (1.0 + s / sqrt_m * r * c);
                    worst = worst.max(deriv.abs() / (r * r).max(1.0));
                } else {
                    let f0 = concave_scalar(0.0, r, t, s, sqrt_m);
                    for i in 1..=200 {
                        let fc = concave_scalar(i as f64 / 200.0, r, t, s, sqrt_m);
                        worst = worst.max(f0 - fc);
                    }
                }
            }
            worst
        }
    }
}
