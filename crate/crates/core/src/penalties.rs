//! Particle penalties and their proximal operators.
//!
//! For a particle matrix `W` (`d × m`) with rows `W^(a)` and singular values `S_a`:
//!
//! | kind               | value                                   |
//! |--------------------|-----------------------------------------|
//! | basic              | `(1/2m) Σ_j ‖w_j‖₂`                     |
//! | variable           | `(1/2√m) Σ_a ‖W^(a)‖₂`                  |
//! | feature            | `(1/2√m) Σ_a S_a`                       |
//! | concave variable   | `(1/2s) Σ_a log(1 + (s/√m)‖W^(a)‖₂)`    |
//! | concave feature    | `(1/2s) Σ_a log(1 + (s/√m) S_a)`        |
//!
//! `prox(W, t)` returns a minimizer of `½‖W − U‖²_F + t·Ω(U)`.

use std::fmt;

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cutoff below which singular values are treated as zero.
const SINGULAR_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Penalty {
    Basic,
    Variable,
    Feature,
    ConcaveVariable { s: f64 },
    ConcaveFeature { s: f64 },
}

impl Penalty {
    /// Builds a penalty from its command-line name; `s` is used by the concave kinds.
    pub fn from_name(name: &str, s: f64) -> Result<Self> {
        let p = match name {
            "basic" => Penalty::Basic,
            "variable" => Penalty::Variable,
            "feature" => Penalty::Feature,
            "concave-variable" | "concave_variable" => Penalty::ConcaveVariable { s },
            "concave-feature" | "concave_feature" => Penalty::ConcaveFeature { s },
            other => return Err(Error::param(format!("unknown penalty '{other}'"))),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Penalty::ConcaveVariable { s } | Penalty::ConcaveFeature { s } if !(s > 0.0 && s.is_finite()) => {
                Err(Error::param(format!("concave penalties need s > 0, got {s}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Penalty::Basic => "basic",
            Penalty::Variable => "variable",
            Penalty::Feature => "feature",
            Penalty::ConcaveVariable { .. } => "concave-variable",
            Penalty::ConcaveFeature { .. } => "concave-feature",
        }
    }

    /// Numeric code used in result tables.
    pub fn code(&self) -> u8 {
        match self {
            Penalty::Basic => 0,
            Penalty::Variable => 1,
            Penalty::Feature => 2,
            Penalty::ConcaveVariable { .. } => 3,
            Penalty::ConcaveFeature { .. } => 4,
        }
    }

    /// Penalties acting on singular values (plus `basic`, whose learned features
    /// are also read off the SVD).
    pub fn is_spectral(&self) -> bool {
        matches!(self, Penalty::Basic | Penalty::Feature | Penalty::ConcaveFeature { .. })
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, Penalty::Basic | Penalty::Variable | Penalty::Feature)
    }

    /// The convex penalty this one reduces to as `s → 0`.
    pub fn convex_counterpart(&self) -> Penalty {
        match self {
            Penalty::ConcaveVariable { .. } => Penalty::Variable,
            Penalty::ConcaveFeature { .. } => Penalty::Feature,
            p => *p,
        }
    }

    pub fn value(&self, w: &DMatrix<f64>) -> f64 {
        let m = w.ncols() as f64;
        if w.ncols() == 0 {
            return 0.0;
        }
        let sqrt_m = m.sqrt();
        match *self {
            Penalty::Basic => w.column_iter().map(|c| c.norm()).sum::<f64>() / (2.0 * m),
            Penalty::Variable => row_norms(w).iter().sum::<f64>() / (2.0 * sqrt_m),
            Penalty::Feature => singular_values(w).iter().sum::<f64>() / (2.0 * sqrt_m),
            Penalty::ConcaveVariable { s } => {
                row_norms(w).iter().map(|r| (s / sqrt_m * r).ln_1p()).sum::<f64>() / (2.0 * s)
            }
            Penalty::ConcaveFeature { s } => {
                singular_values(w).iter().map(|r| (s / sqrt_m * r).ln_1p()).sum::<f64>() / (2.0 * s)
            }
        }
    }

    /// Proximal operator of `t·Ω`.
    pub fn prox(&self, w: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        let m = w.ncols();
        if m == 0 || w.nrows() == 0 {
            return w.clone();
        }
        let mf = m as f64;
        let sqrt_m = mf.sqrt();
        match *self {
            Penalty::Basic => {
                let thr = t / (2.0 * mf);
                let mut out = w.clone();
                for mut col in out.column_iter_mut() {
                    let f = shrink_factor(col.norm(), thr);
                    col *= f;
                }
                out
            }
            Penalty::Variable => {
                let thr = t / (2.0 * sqrt_m);
                scale_rows(w, |r| shrink_factor(r, thr))
            }
            Penalty::ConcaveVariable { s } => scale_rows(w, |r| concave_factor(r, t, s, sqrt_m)),
            Penalty::Feature => {
                let thr = t / (2.0 * sqrt_m);
                spectral_map(w, |sv| sv * shrink_factor(sv, thr))
            }
            Penalty::ConcaveFeature { s } => spectral_map(w, |sv| sv * concave_factor(sv, t, s, sqrt_m)),
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Penalty::ConcaveVariable { s } | Penalty::ConcaveFeature { s } => {
                write!(f, "{}(s={s})", self.name())
            }
            _ => f.write_str(self.name()),
        }
    }
}

pub fn penalty_value(kind: &Penalty, w: &DMatrix<f64>) -> f64 {
    kind.value(w)
}

pub fn prox(kind: &Penalty, w: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    kind.prox(w, t)
}

pub(crate) fn row_norms(w: &DMatrix<f64>) -> Vec<f64> {
    w.row_iter().map(|r| r.norm()).collect()
}

fn singular_values(w: &DMatrix<f64>) -> DVector<f64> {
    SVD::new(w.clone(), false, false).singular_values
}

/// `(1 − thr/r)₊`, zero for `r = 0`.
fn shrink_factor(r: f64, thr: f64) -> f64 {
    if r <= thr || r == 0.0 {
        0.0
    } else {
        1.0 - thr / r
    }
}

fn scale_rows(w: &DMatrix<f64>, factor: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut out = w.clone();
    for mut row in out.row_iter_mut() {
        let f = factor(row.norm());
        row *= f;
    }
    out
}

fn spectral_map(w: &DMatrix<f64>, map: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let svd = SVD::new(w.clone(), true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let s_max = svd.singular_values.max();
    let shrunk = svd.singular_values.map(|sv| {
        if sv <= SINGULAR_CUTOFF * s_max {
            0.0
        } else {
            map(sv)
        }
    });
    u * DMatrix::from_diagonal(&shrunk) * v_t
}

/// Scalar objective of the concave prox along a block of norm `r`, scaled by `c ≥ 0`.
fn concave_objective(c: f64, r: f64, t: f64, s: f64, sqrt_m: f64) -> f64 {
    0.5 * r * r * (1.0 - c) * (1.0 - c) + t / (2.0 * s) * (s / sqrt_m * r * c).ln_1p()
}

/// Scaling `c` applied to a block of norm `r` by the concave prox.
///
/// Stationary points solve `β c² + (1 − β) c + (q − 1) = 0` with `β = s r/√m`
/// and `q = t/(2√m r)`. Candidates are `0` and the positive roots; the smallest
/// objective wins, ties going to `0`.
pub(crate) fn concave_factor(r: f64, t: f64, s: f64, sqrt_m: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let beta = s * r / sqrt_m;
    let q = t / (2.0 * sqrt_m * r);
    let a = beta;
    let b = 1.0 - beta;
    let c0 = q - 1.0;
    let disc = b * b - 4.0 * a * c0;
    if disc <= 0.0 {
        return 0.0;
    }
    let mut roots = Vec::with_capacity(2);
    if a == 0.0 {
        if b != 0.0 {
            roots.push(-c0 / b);
        }
    } else {
        // Numerically stable pair of roots.
        let sq = disc.sqrt();
        let qq = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
        if qq != 0.0 {
            roots.push(qq / a);
            roots.push(c0 / qq);
        } else {
            roots.push(0.0);
        }
    }
    let mut best_c = 0.0;
    let mut best = concave_objective(0.0, r, t, s, sqrt_m);
    for c in roots.into_iter().filter(|c| *c > 0.0 && c.is_finite()) {
        let v = concave_objective(c, r, t, s, sqrt_m);
        if v < best {
            best = v;
            best_c = c;
        }
    }
    best_c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_w(d: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded(seed);
        DMatrix::from_fn(d, m, |_, _| rng.random_range(-1.0..1.0))
    }

    fn all_kinds(s: f64) -> [Penalty; 5] {
        [
            Penalty::Basic,
            Penalty::Variable,
            Penalty::Feature,
            Penalty::ConcaveVariable { s },
            Penalty::ConcaveFeature { s },
        ]
    }

    // Grid scan followed by golden-section refinement of
    // u ↦ ½(r − u)² + (t/2s)·log(1 + (s/√m)·u) over u ≥ 0.
    fn golden_oracle(r: f64, t: f64, s: f64, sqrt_m: f64) -> f64 {
        let f = |u: f64| 0.5 * (r - u) * (r - u) + t / (2.0 * s) * (s / sqrt_m * u).ln_1p();
        let steps = 2000;
        let hi = r;
        let (mut best_u, mut best) = (0.0, f(0.0));
        for i in 1..=steps {
            let u = hi * i as f64 / steps as f64;
            if f(u) < best {
                best = f(u);
                best_u = u;
            }
        }
        let h = hi / steps as f64;
        let (mut lo, mut up) = ((best_u - h).max(0.0), (best_u + h).min(hi));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = up - g * (up - lo);
            let b = lo + g * (up - lo);
            if f(a) < f(b) {
                up = b;
            } else {
                lo = a;
            }
        }
        let u = 0.5 * (lo + up);
        if f(0.0) <= f(u) {
            0.0
        } else {
            u
        }
    }

    #[test]
    fn zero_matrix_has_zero_penalty() {
        let w = DMatrix::zeros(3, 4);
        for kind in all_kinds(0.7) {
            assert_eq!(kind.value(&w), 0.0);
            assert_eq!(kind.prox(&w, 0.3), w);
        }
    }

    #[test]
    fn feature_value_on_diagonal() {
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let v = Penalty::Feature.value(&w);
        assert!((v - 5.0 / (2.0 * 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn concave_value_approaches_convex() {
        let w = random_w(4, 5, 1);
        let f = Penalty::Feature.value(&w);
        let cf = Penalty::ConcaveFeature { s: 0.01 }.value(&w);
        assert!((cf - f).abs() <= 0.01 * f);
        let v = Penalty::Variable.value(&w);
        let cv = Penalty::ConcaveVariable { s: 0.01 }.value(&w);
        assert!((cv - v).abs() <= 0.01 * v);
    }

    #[test]
    fn basic_prox_examples() {
        // m = 1, t/(2m) = 1.
        let w = DMatrix::from_column_slice(2, 1, &[2.0, 0.0]);
        let u = Penalty::Basic.prox(&w, 2.0);
        assert!((u - DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).abs().max() < 1e-15);

        let w = DMatrix::from_column_slice(2, 2, &[0.3, 0.4, 3.0, 0.0]);
        // t/(2m) = 0.5 ≥ ‖w_0‖ = 0.5
        let u = Penalty::Basic.prox(&w, 2.0);
        assert_eq!(u.column(0).norm(), 0.0);
        assert!((u[(0, 1)] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn feature_prox_example() {
        // m = 2: t/(2√2) = 2.
        let t = 4.0 * 2f64.sqrt();
        let w = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let u = Penalty::Feature.prox(&w, t);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((u - expect).abs().max() < 1e-12);
    }

    #[test]
    fn concave_prox_matches_scalar_oracle() {
        let mut rng = seeded(21);
        for _ in 0..50 {
            let m = rng.random_range(1..6);
            let w = DMatrix::from_fn(1, m, |_, _| rng.random_range(-2.0..2.0));
            let r = w.norm();
            let sqrt_m = (m as f64).sqrt();
            let u = Penalty::ConcaveVariable { s: 1.0 }.prox(&w, 0.5);
            let oracle = golden_oracle(r, 0.5, 1.0, sqrt_m);
            assert!((u.norm() - oracle).abs() < 1e-6, "r={r} m={m}: {} vs {oracle}", u.norm());
        }
    }

    #[test]
    fn vanishing_step_is_identity() {
        let w = random_w(4, 3, 2);
        for kind in all_kinds(2.0) {
            for &t in &[1e-3, 1e-6, 1e-9] {
                let u = kind.prox(&w, t);
                assert!((u - &w).norm() <= t * 10.0, "{kind} t={t}");
            }
        }
    }

    #[test]
    fn huge_step_zeroes_everything() {
        let w = random_w(5, 4, 3);
        for kind in all_kinds(1.0) {
            assert!(kind.prox(&w, 1e6).abs().max() < 1e-12, "{kind}");
        }
    }

    #[test]
    fn names_parse() {
        for kind in all_kinds(0.5) {
            let p = Penalty::from_name(kind.name(), 0.5).unwrap();
            assert_eq!(p, kind);
        }
        assert!(Penalty::from_name("lasso", 1.0).is_err());
        assert!(Penalty::from_name("concave-feature", 0.0).is_err());
    }

    #[test]
    fn concave_factor_branches() {
        // Δ ≤ 0 maps to zero.
        assert_eq!(concave_factor(0.1, 10.0, 1.0, 1.0), 0.0);
        // No penalty pressure: root at c = 1.
        let c = concave_factor(1.0, 1e-14, 1.0, 1.0);
        assert!((c - 1.0).abs() < 1e-12);
        assert_eq!(concave_factor(0.0, 1.0, 1.0, 1.0), 0.0);
    }
}
