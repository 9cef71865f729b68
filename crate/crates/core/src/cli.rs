//! Command-line front end.
//!
//! Exit codes: 0 success, 2 bad flags or parameters, 3 data or file problems,
//! 4 numerical failure. Diagnostics go to standard error; results and
//! `key = value` summaries go to standard output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::datagen::{load_covariates, load_csv, write_table};
use crate::error::{Error, Result};
use crate::estimators::ModelState;
use crate::experiments::{
    exp3::DEFAULT_CONCAVE_S, resolve_jobs, run_to_dir, ExperimentName, ExperimentParams, Manifest,
};
use crate::kernels::ScalarKernel;
use crate::metrics::r2_score;
use crate::penalties::Penalty;
use crate::trainer::{default_lambda, fit, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bkernn", version, about = "Brownian kernel neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a CSV file.
    Fit(FitArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Regenerate one of the experiment tables.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training CSV with a header row and numeric cells.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column; all other columns are covariates.
    #[arg(long)]
    pub target: String,
    /// basic, variable, feature, concave-variable or concave-feature.
    #[arg(long, default_value = "basic")]
    pub penalty: String,
    /// Number of particles.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Regularization strength, or "auto" for 2·max‖x_i‖/n.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    /// Shape parameter of the concave penalties.
    #[arg(long, default_value_t = DEFAULT_CONCAVE_S)]
    pub s: f64,
    /// Initial step size of the backtracking search.
    #[arg(long, default_value_t = TrainConfig::DEFAULT_GAMMA0)]
    pub gamma0: f64,
    /// Number of proximal gradient iterations.
    #[arg(long, default_value_t = TrainConfig::DEFAULT_ITERATIONS)]
    pub iters: usize,
    /// Seed of the particle initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// brownian, exponential or gaussian.
    #[arg(long, default_value = "brownian")]
    pub kernel: String,
    /// Model file to write.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Objective trace CSV; defaults to `<out stem>_trace.csv` next to the model.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of covariates, in the column order used for training.
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Response column of `--data`; it is excluded from the covariates and R² is printed.
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// exp1, exp2, exp3, exp4 or exp5; optional when replaying a manifest.
    #[arg(value_parser = parse_experiment)]
    pub name: Option<ExperimentName>,
    #[arg(long, conflicts_with = "manifest")]
    pub seed: Option<u64>,
    /// Output directory; defaults to `results/<name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Factor in (0, 1] shrinking sample sizes and dimensions for quick runs.
    #[arg(long, conflicts_with = "manifest")]
    pub scale: Option<f64>,
    /// Number of repetitions, overriding the experiment default.
    #[arg(long, conflicts_with = "manifest")]
    pub seeds: Option<usize>,
    /// Worker threads; falls back to BKERNN_JOBS, then to the machine's parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Replay the parameters and seed recorded in a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn parse_experiment(s: &str) -> std::result::Result<ExperimentName, String> {
    s.parse::<ExperimentName>().map_err(|e| e.to_string())
}

/// Exit code of a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else if matches!(e, Error::InvalidParameter(_)) {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let command_line = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Experiment(a) => cmd_experiment(a, &command_line, out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn parse_lambda(text: &str, x: &nalgebra::DMatrix<f64>) -> Result<(f64, bool)> {
    if text == "auto" {
        return Ok((default_lambda(x), true));
    }
    match text.parse::<f64>() {
        Ok(l) if l > 0.0 && l.is_finite() => Ok((l, false)),
        _ => Err(Error::param(format!("--lambda must be a positive number or 'auto', got '{text}'"))),
    }
}

fn default_trace_path(model: &Path) -> PathBuf {
    let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    model.with_file_name(format!("{stem}_trace.csv"))
}

pub fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let penalty = Penalty::from_name(&a.penalty, a.s)?;
    let kernel: ScalarKernel = a.kernel.parse()?;
    let data = load_csv(&a.data, &a.target)?;
    let (lambda, auto) = parse_lambda(&a.lambda, &data.x)?;
    let cfg = TrainConfig::new(a.m, lambda)
        .with_penalty(penalty)
        .with_kernel(kernel)
        .with_gamma0(a.gamma0)
        .with_iterations(a.iters)
        .with_seed(a.seed);
    cfg.validate()?;
    let (model, report) = fit(&data.x, &data.y, &cfg)?;
    let r2 = r2_score(&data.y, &model.fitted()?)?;
    model.save(&a.out)?;
    let trace = a.trace.clone().unwrap_or_else(|| default_trace_path(&a.out));
    let rows: Vec<Vec<f64>> = report
        .objective_trace
        .iter()
        .enumerate()
        .map(|(i, &obj)| {
            // The step column holds the step size accepted at iteration i; NaN before the first step.
            let step = if i == 0 { f64::NAN } else { report.step_trace[i - 1] };
            vec![i as f64, obj, step]
        })
        .collect();
    write_table(&trace, &["iteration", "objective", "step"], &rows)?;
    writeln!(out, "lambda = {lambda}{}", if auto { " (auto)" } else { "" }).map_err(io)?;
    writeln!(out, "penalty = {}", penalty.name()).map_err(io)?;
    writeln!(out, "n = {}", data.n()).map_err(io)?;
    writeln!(out, "d = {}", data.d()).map_err(io)?;
    writeln!(out, "objective = {}", report.objective_trace.last().copied().unwrap_or(f64::NAN)).map_err(io)?;
    writeln!(out, "train_r2 = {r2}").map_err(io)?;
    writeln!(out, "model = {}", a.out.display()).map_err(io)?;
    writeln!(out, "trace = {}", trace.display()).map_err(io)?;
    Ok(())
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = ModelState::load(&a.model)?;
    let (x, y): (_, Option<DVector<f64>>) = match &a.target {
        Some(t) => {
            let d = load_csv(&a.data, t)?;
            (d.x, Some(d.y))
        }
        None => (load_covariates(&a.data, None)?.0, None),
    };
    if x.ncols() != model.d() {
        return Err(Error::Data(format!(
            "model was trained on {} covariates, {} has {}",
            model.d(),
            a.data.display(),
            x.ncols()
        )));
    }
    let pred = model.predict(&x)?;
    let rows: Vec<Vec<f64>> = pred.iter().map(|&v| vec![v]).collect();
    write_table(&a.out, &["prediction"], &rows)?;
    writeln!(out, "predictions = {}", a.out.display()).map_err(io)?;
    if let Some(y) = y {
        writeln!(out, "r2 = {}", r2_score(&y, &pred)?).map_err(io)?;
    }
    Ok(())
}

pub fn cmd_experiment(a: &ExperimentArgs, command_line: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let jobs = resolve_jobs(a.jobs)?;
    let (params, seed) = match &a.manifest {
        Some(path) => {
            let m = Manifest::read(path)?;
            if let Some(name) = a.name {
                if name != m.experiment {
                    return Err(Error::param(format!(
                        "manifest records {}, not {name}",
                        m.experiment
                    )));
                }
            }
            (m.params, m.seed)
        }
        None => {
            let name = a
                .name
                .ok_or_else(|| Error::param("an experiment name or --manifest is required"))?;
            (
                ExperimentParams::defaults(name, a.scale.unwrap_or(1.0), a.seeds)?,
                a.seed.unwrap_or(0),
            )
        }
    };
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(params.name().as_str()));
    let _ = writeln!(err, "running {} with {jobs} worker(s) into {}", params.name(), dir.display());
    let (_, paths) = run_to_dir(&params, seed, jobs, &dir, command_line)?;
    for p in paths {
        writeln!(out, "artifact = {}", p.display()).map_err(io)?;
    }
    writeln!(out, "manifest = {}", dir.join(crate::experiments::MANIFEST_FILE).display()).map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = run_args(&["bkernn", "fit", "--target", "y"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--data"));
        assert_eq!(run_args(&["bkernn", "experiment", "exp9"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["bkernn"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_args(&["bkernn", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("experiment"));
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::param("x")), 2);
        assert_eq!(exit_code(&Error::Data("x".into())), 3);
        assert_eq!(exit_code(&Error::dims("x")), 3);
        assert_eq!(exit_code(&Error::Diverged(3)), 4);
        assert_eq!(exit_code(&Error::NonFinite("x".into())), 4);
    }

    #[test]
    fn lambda_flag() {
        let x = nalgebra::DMatrix::from_row_slice(2, 1, &[3.0, -4.0]);
        assert_eq!(parse_lambda("auto", &x).unwrap(), (4.0, true));
        assert_eq!(parse_lambda("0.5", &x).unwrap(), (0.5, false));
        assert!(parse_lambda("-1", &x).is_err());
        assert!(parse_lambda("abc", &x).is_err());
    }
}
