//! Scalar kernels and the kernel matrices built from projected data.
//!
//! All matrices are dense. Data matrices are `n × d` with one sample per row,
//! particle matrices are `d × m` with one particle per column.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-dimensional kernel applied to projected coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKernel {
    /// `(|a| + |b| - |a - b|) / 2`, the covariance of Brownian motion.
    Brownian,
    /// `exp(-|a - b| / 2)`.
    Exponential,
    /// `exp(-|a - b|² / 2)`.
    Gaussian,
}

#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ScalarKernel {
    pub const ALL: [ScalarKernel; 3] = [
        ScalarKernel::Brownian,
        ScalarKernel::Exponential,
        ScalarKernel::Gaussian,
    ];

    #[inline]
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            ScalarKernel::Brownian => (a.abs() + b.abs() - (a - b).abs()) / 2.0,
            ScalarKernel::Exponential => (-(a - b).abs() / 2.0).exp(),
            ScalarKernel::Gaussian => {
                let d = a - b;
                (-d * d / 2.0).exp()
            }
        }
    }

    /// Partial derivative with respect to the first argument, with `sign(0) = 0`.
    #[inline]
    pub fn d_first(self, a: f64, b: f64) -> f64 {
        match self {
            ScalarKernel::Brownian => (sign(a) - sign(a - b)) / 2.0,
            ScalarKernel::Exponential => -0.5 * sign(a - b) * (-(a - b).abs() / 2.0).exp(),
            ScalarKernel::Gaussian => {
                let d = a - b;
                -d * (-d * d / 2.0).exp()
            }
        }
    }

    /// Whether `k(κa, κb) = κ·k(a, b)` for `κ > 0`.
    pub fn is_homogeneous(self) -> bool {
        matches!(self, ScalarKernel::Brownian)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarKernel::Brownian => "brownian",
            ScalarKernel::Exponential => "exponential",
            ScalarKernel::Gaussian => "gaussian",
        }
    }

    /// Numeric code used in result tables.
    pub fn code(self) -> u8 {
        match self {
            ScalarKernel::Brownian => 0,
            ScalarKernel::Exponential => 1,
            ScalarKernel::Gaussian => 2,
        }
    }
}

impl fmt::Display for ScalarKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScalarKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brownian" => Ok(ScalarKernel::Brownian),
            "exponential" | "exp" => Ok(ScalarKernel::Exponential),
            "gaussian" => Ok(ScalarKernel::Gaussian),
            other => Err(Error::param(format!("unknown kernel '{other}'"))),
        }
    }
}

pub fn scalar_kernel(kind: ScalarKernel, a: f64, b: f64) -> f64 {
    kind.eval(a, b)
}

/// Symmetric kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix(DMatrix<f64>);

impl KernelMatrix {
    /// Wraps a matrix after checking that it is square and exactly symmetric.
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::dims(format!(
                "kernel matrix must be square, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        let n = k.nrows();
        for i in 0..n {
            for j in 0..i {
                if k[(i, j)] != k[(j, i)] {
                    return Err(Error::param("kernel matrix is not symmetric"));
                }
            }
        }
        Ok(KernelMatrix(k))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.0.clone()).eigenvalues.min()
    }

    /// Smallest eigenvalue is at least `-1e-8 · trace`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-8 * self.trace().abs()
    }
}

/// Projections `w_jᵀx_i` stored row-major, one row per sample.
pub(crate) struct Projections {
    pub n: usize,
    pub m: usize,
    data: Vec<f64>,
}

impl Projections {
    pub fn new(x: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<Self> {
        if x.ncols() != w.nrows() {
            return Err(Error::dims(format!(
                "data has {} columns but particles have dimension {}",
                x.ncols(),
                w.nrows()
            )));
        }
        if w.ncols() == 0 {
            return Err(Error::param("particle matrix has no columns"));
        }
        let p = (x * w).transpose();
        Ok(Projections {
            n: x.nrows(),
            m: w.ncols(),
            data: p.as_slice().to_vec(),
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.m + j]).collect()
    }
}

fn averaged_from_projections(proj: &Projections, kind: ScalarKernel) -> DMatrix<f64> {
    fn fill<F: Fn(f64, f64) -> f64>(proj: &Projections, f: F) -> DMatrix<f64> {
        let n = proj.n;
        let inv_m = 1.0 / proj.m as f64;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            let pi = proj.row(i);
            for i2 in 0..=i {
                let pj = proj.row(i2);
                let s: f64 = pi.iter().zip(pj).map(|(&a, &b)| f(a, b)).sum();
                let v = s * inv_m;
                k[(i, i2)] = v;
                k[(i2, i)] = v;
            }
        }
        k
    }
    match kind {
        ScalarKernel::Brownian => fill(proj, |a, b| ScalarKernel::Brownian.eval(a, b)),
        ScalarKernel::Exponential => fill(proj, |a, b| ScalarKernel::Exponential.eval(a, b)),
        ScalarKernel::Gaussian => fill(proj, |a, b| ScalarKernel::Gaussian.eval(a, b)),
    }
}

/// `K_ii' = k(wᵀx_i, wᵀx_i')` for a single particle `w`.
pub fn particle_kernel_matrix(
    x: &DMatrix<f64>,
    w: &DVector<f64>,
    kind: ScalarKernel,
) -> Result<KernelMatrix> {
    let w = DMatrix::from_column_slice(w.len(), 1, w.as_slice());
    averaged_kernel_matrix(x, &w, kind)
}

/// Mean over the particles (columns of `w`) of the per-particle kernel matrices.
pub fn averaged_kernel_matrix(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    kind: ScalarKernel,
) -> Result<KernelMatrix> {
    let proj = Projections::new(x, w)?;
    Ok(KernelMatrix(averaged_from_projections(&proj, kind)))
}

/// Kernel block between new points (rows of the result) and training points
/// (columns of the result): entry `(r, i)` is `(1/m) Σ_j k(w_jᵀx_new_r, w_jᵀx_train_i)`.
pub fn cross_kernel(
    x_train: &DMatrix<f64>,
    x_new: &DMatrix<f64>,
    w: &DMatrix<f64>,
    kind: ScalarKernel,
) -> Result<DMatrix<f64>> {
    if x_new.ncols() != x_train.ncols() {
        return Err(Error::dims(format!(
            "new data has {} columns, training data has {}",
            x_new.ncols(),
            x_train.ncols()
        )));
    }
    let pt = Projections::new(x_train, w)?;
    let pn = Projections::new(x_new, w)?;
    let inv_m = 1.0 / pt.m as f64;
    let mut out = DMatrix::zeros(pn.n, pt.n);
    for r in 0..pn.n {
        let a = pn.row(r);
        for i in 0..pt.n {
            let b = pt.row(i);
            let s: f64 = a.iter().zip(b).map(|(&u, &v)| kind.eval(u, v)).sum();
            out[(r, i)] = s * inv_m;
        }
    }
    Ok(out)
}

/// A kernel system with the intercept removed by centring.
#[derive(Debug, Clone)]
pub struct CenteredSystem {
    /// `ΠKΠ` with `Π = I - 11ᵀ/n`.
    pub k_tilde: DMatrix<f64>,
    /// `Y - mean(Y)·1`.
    pub y_tilde: DVector<f64>,
    pub y_mean: f64,
}

pub fn center(k: &KernelMatrix, y: &DVector<f64>) -> CenteredSystem {
    let k = k.as_matrix();
    let n = k.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let k_tilde = DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand);
    let y_mean = if n == 0 { 0.0 } else { y.sum() / nf };
    let y_tilde = y.map(|v| v - y_mean);
    CenteredSystem {
        k_tilde,
        y_tilde,
        y_mean,
    }
}

fn row_major(x: &DMatrix<f64>) -> Vec<f64> {
    x.transpose().as_slice().to_vec()
}

fn mdb_block(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.ncols();
    let ra = row_major(a);
    let rb = row_major(b);
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let na: Vec<f64> = ra.chunks(d.max(1)).map(norm).collect();
    let nb: Vec<f64> = rb.chunks(d.max(1)).map(norm).collect();
    DMatrix::from_fn(a.nrows(), b.nrows(), |r, i| {
        if d == 0 {
            return 0.0;
        }
        let xr = &ra[r * d..(r + 1) * d];
        let xi = &rb[i * d..(i + 1) * d];
        let dist = xr.iter().zip(xi).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        (na[r] + nb[i] - dist) / 2.0
    })
}

/// Multi-dimensional Brownian kernel `(‖x‖ + ‖x'‖ - ‖x - x'‖) / 2` on the raw data.
pub fn mdb_kernel_matrix(x: &DMatrix<f64>) -> KernelMatrix {
    let mut k = mdb_block(x, x);
    // Enforce exact symmetry; the two triangles only differ by rounding in `dist`.
    let n = k.nrows();
    for i in 0..n {
        for j in 0..i {
            k[(j, i)] = k[(i, j)];
        }
    }
    KernelMatrix(k)
}

/// Multi-dimensional Brownian kernel block, new points by training points.
pub fn mdb_cross_kernel(x_train: &DMatrix<f64>, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_new.ncols() != x_train.ncols() {
        return Err(Error::dims(format!(
            "new data has {} columns, training data has {}",
            x_new.ncols(),
            x_train.ncols()
        )));
    }
    Ok(mdb_block(x_new, x_train))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    // Direct double loop over sample pairs.
    fn oracle_particle(x: &DMatrix<f64>, w: &[f64], kind: ScalarKernel) -> DMatrix<f64> {
        let n = x.nrows();
        let proj: Vec<f64> = (0..n)
            .map(|i| (0..w.len()).map(|a| x[(i, a)] * w[a]).sum())
            .collect();
        DMatrix::from_fn(n, n, |i, j| kind.eval(proj[i], proj[j]))
    }

    #[test]
    fn scalar_values() {
        use ScalarKernel::*;
        assert_eq!(scalar_kernel(Brownian, 1.0, 2.0), 1.0);
        assert_eq!(scalar_kernel(Brownian, -1.0, 2.0), 0.0);
        assert_eq!(scalar_kernel(Brownian, -3.0, -3.0), 3.0);
        assert_eq!(scalar_kernel(Brownian, 0.0, 5.0), 0.0);
        assert_eq!(scalar_kernel(Exponential, 1.0, 1.0), 1.0);
        assert!((scalar_kernel(Exponential, 0.0, 2.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((scalar_kernel(Gaussian, 0.0, 2.0) - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn brownian_is_min_on_same_sign() {
        let mut rng = seeded(3);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(-5.0..5.0);
            let b: f64 = rng.random_range(-5.0..5.0);
            let v = ScalarKernel::Brownian.eval(a, b);
            let expect = if a * b > 0.0 { a.abs().min(b.abs()) } else { 0.0 };
            assert!((v - expect).abs() < 1e-14);
            assert!(v >= -1e-15 && v <= a.abs().min(b.abs()) + 1e-15);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-6;
        for kind in ScalarKernel::ALL {
            for &(a, b) in &[(0.7, -0.3), (-1.2, -0.4), (0.5, 1.5), (2.0, 0.1)] {
                let fd = (kind.eval(a + h, b) - kind.eval(a - h, b)) / (2.0 * h);
                assert!((fd - kind.d_first(a, b)).abs() < 1e-7, "{kind} at ({a},{b})");
            }
        }
    }

    #[test]
    fn particle_matrix_examples() {
        let x = DMatrix::zeros(3, 2);
        let w = DVector::from_vec(vec![0.4, -1.0]);
        let k = particle_kernel_matrix(&x, &w, ScalarKernel::Brownian).unwrap();
        assert_eq!(k.as_matrix(), &DMatrix::zeros(3, 3));

        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let w = DVector::from_vec(vec![1.0]);
        let k = particle_kernel_matrix(&x, &w, ScalarKernel::Brownian).unwrap();
        assert_eq!(k.as_matrix(), &DMatrix::identity(2, 2));

        for kind in ScalarKernel::ALL {
            let x = random_matrix(4, 3, 11);
            let w = vec![0.3, -0.8, 1.1];
            let k = particle_kernel_matrix(&x, &DVector::from_vec(w.clone()), kind).unwrap();
            let o = oracle_particle(&x, &w, kind);
            assert!((k.as_matrix() - o).abs().max() < 1e-14);
        }
    }

    #[test]
    fn particle_matrix_rejects_bad_shapes() {
        let x = DMatrix::zeros(3, 2);
        let w = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            particle_kernel_matrix(&x, &w, ScalarKernel::Brownian),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn averaged_matrix_examples() {
        let x = random_matrix(5, 3, 1);
        let w = random_matrix(3, 3, 2);
        for kind in ScalarKernel::ALL {
            let single = averaged_kernel_matrix(&x, &w.columns(0, 1).into_owned(), kind).unwrap();
            let direct = particle_kernel_matrix(&x, &w.column(0).into_owned(), kind).unwrap();
            assert_eq!(single, direct);

            let dup = DMatrix::from_columns(&[w.column(1), w.column(1)]);
            let kd = averaged_kernel_matrix(&x, &dup, kind).unwrap();
            let k1 = particle_kernel_matrix(&x, &w.column(1).into_owned(), kind).unwrap();
            assert!((kd.as_matrix() - k1.as_matrix()).abs().max() < 1e-15);

            let k = averaged_kernel_matrix(&x, &w, kind).unwrap();
            let mut oracle = DMatrix::zeros(5, 5);
            for j in 0..3 {
                let wj: Vec<f64> = w.column(j).iter().copied().collect();
                oracle += oracle_particle(&x, &wj, kind);
            }
            oracle /= 3.0;
            assert!((k.as_matrix() - oracle).abs().max() < 1e-14);
        }
    }

    #[test]
    fn cross_kernel_examples() {
        let x = random_matrix(6, 4, 5);
        let w = random_matrix(4, 3, 6);
        for kind in ScalarKernel::ALL {
            let c = cross_kernel(&x, &x, &w, kind).unwrap();
            let k = averaged_kernel_matrix(&x, &w, kind).unwrap();
            assert!((c - k.as_matrix()).abs().max() < 1e-15);
        }
        let zeros = DMatrix::zeros(2, 4);
        let c = cross_kernel(&x, &zeros, &w, ScalarKernel::Brownian).unwrap();
        assert_eq!(c, DMatrix::zeros(2, 6));

        let x_new = random_matrix(3, 4, 7);
        let c = cross_kernel(&x, &x_new, &w, ScalarKernel::Gaussian).unwrap();
        for r in 0..3 {
            for i in 0..6 {
                let mut s = 0.0;
                for j in 0..3 {
                    let a: f64 = (0..4).map(|q| w[(q, j)] * x_new[(r, q)]).sum();
                    let b: f64 = (0..4).map(|q| w[(q, j)] * x[(i, q)]).sum();
                    s += ScalarKernel::Gaussian.eval(a, b);
                }
                assert!((c[(r, i)] - s / 3.0).abs() < 1e-14);
            }
        }
        assert!(cross_kernel(&x, &DMatrix::zeros(2, 3), &w, ScalarKernel::Brownian).is_err());
    }

    #[test]
    fn center_examples() {
        let k = KernelMatrix::new(DMatrix::from_element(1, 1, 2.5)).unwrap();
        let c = center(&k, &DVector::from_vec(vec![4.0]));
        assert_eq!(c.k_tilde[(0, 0)], 0.0);
        assert_eq!(c.y_tilde[0], 0.0);
        assert_eq!(c.y_mean, 4.0);

        let x = random_matrix(5, 2, 9);
        let w = random_matrix(2, 2, 10);
        let k = averaged_kernel_matrix(&x, &w, ScalarKernel::Brownian).unwrap();
        let c = center(&k, &DVector::from_element(5, 3.0));
        assert!(c.y_tilde.iter().all(|v| *v == 0.0));

        let pi = DMatrix::identity(5, 5) - DMatrix::from_element(5, 5, 1.0 / 5.0);
        let dense = &pi * k.as_matrix() * &pi;
        assert!((dense - &c.k_tilde).abs().max() < 1e-14);
        let max_k = k.as_matrix().abs().max();
        for i in 0..5 {
            assert!(c.k_tilde.row(i).sum().abs() <= 1e-8 * 5.0 * max_k);
            assert!(c.k_tilde.column(i).sum().abs() <= 1e-8 * 5.0 * max_k);
        }
    }

    #[test]
    fn centring_is_idempotent() {
        let x = random_matrix(7, 3, 12);
        let w = random_matrix(3, 4, 13);
        let y = DVector::from_fn(7, |i, _| i as f64 * 0.3 - 1.0);
        let k = averaged_kernel_matrix(&x, &w, ScalarKernel::Brownian).unwrap();
        let once = center(&k, &y);
        let mut sym = once.k_tilde.clone();
        for i in 0..7 {
            for j in 0..i {
                sym[(j, i)] = sym[(i, j)];
            }
        }
        let twice = center(&KernelMatrix::new(sym).unwrap(), &once.y_tilde);
        assert!((twice.k_tilde - &once.k_tilde).abs().max() < 1e-10);
        assert!((twice.y_tilde - &once.y_tilde).abs().max() < 1e-10);
    }

    #[test]
    fn mdb_examples() {
        let x = random_matrix(4, 3, 14);
        let k = mdb_kernel_matrix(&x);
        for i in 0..4 {
            assert!((k.as_matrix()[(i, i)] - x.row(i).norm()).abs() < 1e-15);
            for j in 0..4 {
                let o = (x.row(i).norm() + x.row(j).norm() - (x.row(i) - x.row(j)).norm()) / 2.0;
                assert!((k.as_matrix()[(i, j)] - o).abs() < 1e-14);
            }
        }
        let opp = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, -0.5, 1.0]);
        let k = mdb_kernel_matrix(&opp);
        assert!(k.as_matrix()[(0, 1)].abs() < 1e-15);
        assert!(k.is_psd());
    }

    #[test]
    fn brownian_identities() {
        let x = random_matrix(8, 3, 15);
        let w = DVector::from_vec(vec![0.9, -0.2, 0.4]);
        let k = particle_kernel_matrix(&x, &w, ScalarKernel::Brownian).unwrap();
        let km = k.as_matrix();
        let proj = &x * &w;
        for i in 0..8 {
            for j in 0..8 {
                let lhs = km[(i, i)] + km[(j, j)] - 2.0 * km[(i, j)];
                assert!((lhs - (proj[i] - proj[j]).abs()).abs() < 1e-14);
            }
        }
        let tr: f64 = proj.iter().map(|v| v.abs()).sum();
        assert!((k.trace() - tr).abs() < 1e-14);
        let bound = w.norm() * (0..8).map(|i| x.row(i).norm()).sum::<f64>();
        assert!(k.trace() <= bound);
    }

    #[test]
    fn produced_matrices_are_psd() {
        for seed in 0..5 {
            let x = random_matrix(12, 4, 100 + seed);
            let w = random_matrix(4, 5, 200 + seed);
            for kind in ScalarKernel::ALL {
                let k = averaged_kernel_matrix(&x, &w, kind).unwrap();
                assert!(k.is_psd(), "{kind} seed {seed}: {}", k.min_eigenvalue());
            }
            assert!(mdb_kernel_matrix(&x).is_psd());
        }
    }

    #[test]
    fn kernel_matrix_rejects_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(KernelMatrix::new(m).is_err());
        assert!(KernelMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn kernel_names_round_trip() {
        for kind in ScalarKernel::ALL {
            assert_eq!(kind.name().parse::<ScalarKernel>().unwrap(), kind);
        }
        assert!("laplace".parse::<ScalarKernel>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn brownian_is_positively_homogeneous(
                seed in 0u64..1000,
                kappa in 0.01f64..100.0,
            ) {
                let x = random_matrix(6, 3, seed);
                let w = random_matrix(3, 1, seed + 1).column(0).into_owned();
                let k1 = particle_kernel_matrix(&x, &(&w * kappa), ScalarKernel::Brownian).unwrap();
                let k0 = particle_kernel_matrix(&x, &w, ScalarKernel::Brownian).unwrap();
                let scaled = k0.as_matrix() * kappa;
                for (a, b) in k1.as_matrix().iter().zip(scaled.iter()) {
                    prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300) + 1e-15);
                }
            }
        }
    }
}
