//! Synthetic datasets, Haar-random feature matrices and CSV input/output.
//!
//! Covariates of every synthetic mechanism are uniform on `[-1, 1]^d`; the
//! one-dimensional mechanisms use an equally spaced test grid instead.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::FeatureBasis;
use crate::rng::{derive_seed, seeded, Rng};

/// Covariates, responses and column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    /// Dataset with generated column names `x1, …, xd` and target `y`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::dims(format!("{} rows but {} responses", x.nrows(), y.len())));
        }
        let feature_names = (1..=x.ncols()).map(|a| format!("x{a}")).collect();
        Ok(Dataset {
            x,
            y,
            feature_names,
            target_name: "y".into(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: self.y.select_rows(idx),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }
}

/// Response recipes of the synthetic experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// `2π |Σ_{a≤k} (Pᵀx)_a|`.
    Exp1AbsSum,
    /// `Σ_{a≤k} |2π x_a|`.
    Exp2AbsCoords,
    /// `Σ_{a≤d} sin(x_a)`.
    Exp3None,
    /// `Σ_{a≤k} sin(x_a)`.
    Exp3Variables,
    /// `Σ_{a≤k} sin((Pᵀx)_a)`.
    Exp3Features,
    /// `sin(2πx)`.
    Exp4Sine,
    /// `sign(sin(2πx))`.
    Exp4Square,
    /// Triangle wave `4|x + 0.75 − ⌊x + 0.75⌋ − 0.5| − 1`.
    Exp4Triangle,
    /// `|Σ_{a≤k} sin((Pᵀx)_a)|`.
    Exp5AbsSin,
}

impl Mechanism {
    pub const ALL: [Mechanism; 9] = [
        Mechanism::Exp1AbsSum,
        Mechanism::Exp2AbsCoords,
        Mechanism::Exp3None,
        Mechanism::Exp3Variables,
        Mechanism::Exp3Features,
        Mechanism::Exp4Sine,
        Mechanism::Exp4Square,
        Mechanism::Exp4Triangle,
        Mechanism::Exp5AbsSin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Exp1AbsSum => "exp1_abs_sum",
            Mechanism::Exp2AbsCoords => "exp2_abs_coords",
            Mechanism::Exp3None => "exp3_none",
            Mechanism::Exp3Variables => "exp3_variables",
            Mechanism::Exp3Features => "exp3_features",
            Mechanism::Exp4Sine => "exp4_sine",
            Mechanism::Exp4Square => "exp4_square",
            Mechanism::Exp4Triangle => "exp4_triangle",
            Mechanism::Exp5AbsSin => "exp5_abs_sin",
        }
    }

    /// Whether responses depend on a random feature matrix `P`.
    pub fn uses_rotation(self) -> bool {
        matches!(
            self,
            Mechanism::Exp1AbsSum | Mechanism::Exp3Features | Mechanism::Exp5AbsSin
        )
    }

    pub fn is_one_dimensional(self) -> bool {
        matches!(
            self,
            Mechanism::Exp4Sine | Mechanism::Exp4Square | Mechanism::Exp4Triangle
        )
    }

    /// Test responses are noiseless for the 1-D and exp5 mechanisms.
    pub fn noiseless_test(self) -> bool {
        self.is_one_dimensional() || self == Mechanism::Exp5AbsSin
    }

    /// Noiseless response of every row of `x`; `p` is required by rotated mechanisms.
    pub fn response(self, x: &DMatrix<f64>, k: usize, p: Option<&DMatrix<f64>>) -> Result<DVector<f64>> {
        let d = x.ncols();
        if k > d {
            return Err(Error::param(format!("k = {k} exceeds d = {d}")));
        }
        let z = if self.uses_rotation() {
            let p = p.ok_or_else(|| Error::param(format!("{} needs a feature matrix", self.name())))?;
            if p.nrows() != d || p.ncols() != k {
                return Err(Error::dims(format!(
                    "feature matrix is {}x{}, expected {d}x{k}",
                    p.nrows(),
                    p.ncols()
                )));
            }
            x * p
        } else {
            x.clone()
        };
        if self.is_one_dimensional() && d != 1 {
            return Err(Error::param(format!("{} requires d = 1, got {d}", self.name())));
        }
        let head = |i: usize| z.row(i).columns(0, k).into_owned();
        let y = DVector::from_fn(x.nrows(), |i, _| match self {
            Mechanism::Exp1AbsSum => 2.0 * PI * head(i).sum().abs(),
            Mechanism::Exp2AbsCoords => head(i).iter().map(|v| (2.0 * PI * v).abs()).sum(),
            Mechanism::Exp3None => z.row(i).iter().map(|v| v.sin()).sum(),
            Mechanism::Exp3Variables | Mechanism::Exp3Features => head(i).iter().map(|v| v.sin()).sum(),
            Mechanism::Exp4Sine => (2.0 * PI * z[(i, 0)]).sin(),
            Mechanism::Exp4Square => {
                let s = (2.0 * PI * z[(i, 0)]).sin();
                if s > 0.0 {
                    1.0
                } else if s < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Mechanism::Exp4Triangle => {
                let u = z[(i, 0)] + 0.75;
                4.0 * (u - u.floor() - 0.5).abs() - 1.0
            }
            Mechanism::Exp5AbsSin => head(i).iter().map(|v| v.sin()).sum::<f64>().abs(),
        });
        Ok(y)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param(format!("unknown mechanism '{s}'")))
    }
}

/// Recipe for a seeded synthetic train/test pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub k: usize,
    pub noise_std: f64,
    pub mechanism: Mechanism,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::param("d must be at least 1"));
        }
        if self.k == 0 || self.k > self.d {
            return Err(Error::param(format!("need 1 <= k <= d, got k = {}, d = {}", self.k, self.d)));
        }
        if self.mechanism.is_one_dimensional() && self.d != 1 {
            return Err(Error::param(format!("{} requires d = 1", self.mechanism)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::param(format!("noise_std must be non-negative, got {}", self.noise_std)));
        }
        if self.n_train == 0 {
            return Err(Error::param("n_train must be at least 1"));
        }
        Ok(())
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub train: Dataset,
    pub test: Dataset,
    /// Ground-truth features: `P` for rotated mechanisms, the first `k`
    /// coordinates for `exp2_abs_coords` and `exp3_variables`, none otherwise.
    pub p_true: Option<FeatureBasis>,
}

/// Haar-distributed `d × k` matrix with orthonormal columns.
pub fn sample_orthogonal(d: usize, k: usize, seed: u64) -> Result<FeatureBasis> {
    sample_orthogonal_with(d, k, &mut seeded(seed))
}

/// QR of a standard normal `d × d` matrix with `diag(R) > 0`, truncated to the first `k` columns.
pub fn sample_orthogonal_with(d: usize, k: usize, rng: &mut Rng) -> Result<FeatureBasis> {
    if k == 0 || k > d {
        return Err(Error::param(format!("need 1 <= k <= d, got k = {k}, d = {d}")));
    }
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut *rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    FeatureBasis::new(q.columns(0, k).into_owned())
}

fn uniform_cube(n: usize, d: usize, rng: &mut Rng) -> DMatrix<f64> {
    // Row by row so that a prefix of rows is stable when n grows.
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for a in 0..d {
            x[(i, a)] = rng.random_range(-1.0..=1.0);
        }
    }
    x
}

fn add_noise(y: &mut DVector<f64>, std: f64, rng: &mut Rng) {
    if std > 0.0 {
        for v in y.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut *rng);
            *v += std * z;
        }
    }
}

/// Equally spaced grid on `[-1, 1]` with both endpoints.
pub fn grid_1d(n: usize) -> DMatrix<f64> {
    if n == 1 {
        return DMatrix::zeros(1, 1);
    }
    DMatrix::from_fn(n, 1, |i, _| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
}

/// Draws a train/test pair for `spec`. Independent streams derived from the seed
/// drive the feature matrix, train covariates, train noise, test covariates and test noise.
pub fn generate(spec: &SyntheticSpec) -> Result<Generated> {
    spec.validate()?;
    let SyntheticSpec { d, k, .. } = *spec;
    let mech = spec.mechanism;
    let p = if mech.uses_rotation() {
        Some(sample_orthogonal(d, k, derive_seed(spec.seed, 1))?)
    } else if matches!(mech, Mechanism::Exp2AbsCoords | Mechanism::Exp3Variables) {
        Some(FeatureBasis::coordinates(d, k)?)
    } else {
        None
    };
    let p_mat = p.as_ref().map(|b| b.matrix());

    let x_train = uniform_cube(spec.n_train, d, &mut seeded(derive_seed(spec.seed, 2)));
    let mut y_train = mech.response(&x_train, k, p_mat)?;
    add_noise(&mut y_train, spec.noise_std, &mut seeded(derive_seed(spec.seed, 3)));

    let x_test = if mech.is_one_dimensional() {
        grid_1d(spec.n_test)
    } else {
        uniform_cube(spec.n_test, d, &mut seeded(derive_seed(spec.seed, 4)))
    };
    let mut y_test = mech.response(&x_test, k, p_mat)?;
    if !mech.noiseless_test() {
        add_noise(&mut y_test, spec.noise_std, &mut seeded(derive_seed(spec.seed, 5)));
    }
    Ok(Generated {
        train: Dataset::new(x_train, y_train)?,
        test: Dataset::new(x_test, y_test)?,
        p_true: p,
    })
}

/// A numeric CSV table: header and row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a headered CSV whose cells are all decimal floats.
pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Data(format!("{}: missing header row", path.display())));
    }
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::Data(format!("{}: duplicate column '{h}'", path.display())));
        }
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = r + 2;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "{}: line {line} has {} fields, header has {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        let row = record
            .iter()
            .zip(&headers)
            .map(|(cell, h)| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "{}: line {line}, column '{h}': '{cell}' is not a number",
                        path.display()
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    Ok(Table { headers, rows })
}

/// Writes a headered numeric CSV; floats use the shortest round-trip representation.
pub fn write_table(path: impl AsRef<Path>, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in rows {
        if row.len() != headers.len() {
            return Err(Error::dims(format!(
                "row has {} values, header has {}",
                row.len(),
                headers.len()
            )));
        }
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn matrix_from_rows(rows: &[Vec<f64>], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, a| rows[i][cols[a]])
}

/// Loads a dataset; every column other than `target` becomes a covariate, in header order.
pub fn load_csv(path: impl AsRef<Path>, target: &str) -> Result<Dataset> {
    let table = read_table(path.as_ref())?;
    let t = table.headers.iter().position(|h| h == target).ok_or_else(|| {
        Error::Data(format!(
            "{}: no column named '{target}'",
            path.as_ref().display()
        ))
    })?;
    let cols: Vec<usize> = (0..table.headers.len()).filter(|&a| a != t).collect();
    Ok(Dataset {
        x: matrix_from_rows(&table.rows, &cols),
        y: DVector::from_iterator(table.rows.len(), table.rows.iter().map(|r| r[t])),
        feature_names: cols.iter().map(|&a| table.headers[a].clone()).collect(),
        target_name: target.to_string(),
    })
}

/// Loads covariates only, optionally dropping a target column.
pub fn load_covariates(path: impl AsRef<Path>, drop: Option<&str>) -> Result<(DMatrix<f64>, Vec<String>)> {
    let table = read_table(path.as_ref())?;
    let skip = match drop {
        Some(name) => Some(table.headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Data(format!("{}: no column named '{name}'", path.as_ref().display()))
        })?),
        None => None,
    };
    let cols: Vec<usize> = (0..table.headers.len()).filter(|&a| Some(a) != skip).collect();
    let names = cols.iter().map(|&a| table.headers[a].clone()).collect();
    Ok((matrix_from_rows(&table.rows, &cols), names))
}

/// Writes covariates followed by the target column.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut headers: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    headers.push(&data.target_name);
    let rows: Vec<Vec<f64>> = (0..data.n())
        .map(|i| {
            let mut r: Vec<f64> = data.x.row(i).iter().copied().collect();
            r.push(data.y[i]);
            r
        })
        .collect();
    write_table(path, &headers, &rows)
}

/// Per-column affine map fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Population standard deviations; 1 for constant columns.
    pub stds: Vec<f64>,
    /// Columns that were constant on the training set.
    pub constant: Vec<bool>,
}

impl Standardization {
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.d() != self.means.len() {
            return Err(Error::dims(format!(
                "dataset has {} columns, standardization has {}",
                data.d(),
                self.means.len()
            )));
        }
        let mut out = data.clone();
        for a in 0..data.d() {
            let (m, s) = (self.means[a], self.stds[a]);
            out.x.column_mut(a).apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }
}

/// Centres and scales covariates with statistics of `train`; responses are left untouched.
pub fn standardize(train: &Dataset, others: &[Dataset]) -> Result<(Dataset, Vec<Dataset>, Standardization)> {
    if train.n() < 2 {
        return Err(Error::param("standardization needs at least 2 training rows"));
    }
    let n = train.n() as f64;
    let mut means = Vec::with_capacity(train.d());
    let mut stds = Vec::with_capacity(train.d());
    let mut constant = Vec::with_capacity(train.d());
    for col in train.x.column_iter() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let is_const = col.iter().all(|&v| v == col[0]);
        means.push(mean);
        stds.push(if is_const || var == 0.0 { 1.0 } else { var.sqrt() });
        constant.push(is_const);
    }
    let st = Standardization { means, stds, constant };
    let train_out = st.apply(train)?;
    let others_out = others.iter().map(|o| st.apply(o)).collect::<Result<Vec<_>>>()?;
    Ok((train_out, others_out, st))
}
