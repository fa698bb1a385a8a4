//! The `ubound` command line.
//!
//! Every command writes one JSON report (or CSV for curves) carrying the
//! schema tag, the fully resolved configuration including defaults, and the
//! result. Exit codes: 0 success, 1 invalid input, 2 a bound was violated,
//! 3 a numerical routine failed.
//!
//! Kernel files are JSON objects with `marginals` and exactly one of
//! `values` (flat, row-major), `representation` (`lambda`, `factors`) or
//! `preset`:
//!
//! ```json
//! {
//!   "marginals": [
//!     { "points": [0, 1, 3], "weights": [0.5, 0.3, 0.2] },
//!     { "distribution": { "family": "exponential", "rate": 1.0 }, "cells": 16, "upper": 4.0 }
//!   ],
//!   "preset": { "kind": "min" },
//!   "scale": 1.0
//! }
//! ```

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bell::{sandwich_point, sandwich_report, write_sandwich_csv, BellEvalConfig};
use crate::gls::{tail_upper, write_tail_csv, ConjugateGrid, PsiSpec};
use crate::kernels::presets::KernelPreset;
use crate::kernels::{dplus_norm, eigen_rank_truncation, materialize, DegenerateRepresentation, GridKernel, Marginal, NmfConfig};
use crate::multisum::{IndexSet, PreparedKernel, WBoundConfig, DEFAULT_M_MAX};
use crate::onedim::{one_dim_report, schechtman_sup, MomentTable};
use crate::verify::battery::{run_battery, BatteryConfig};
use crate::verify::{verify_against, DistributionSpec, McConfig, Status, SumKernel};
use crate::{Error, Result, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ubound", version, about = "Moment and tail bounds for normalized multi-index sums")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poisson moment B(p, β) with its envelopes at one point.
    Bell(BellArgs),
    /// Envelope check over a (p, β) grid.
    Sweep(SweepArgs),
    /// Moment bounds for sums and normalized multi-index sums.
    #[command(subcommand)]
    Bound(BoundCommand),
    /// Tail bound curve from a moment envelope ψ.
    Tail(TailArgs),
    /// Nonnegative low-degree approximations of a kernel.
    Approx(ApproxArgs),
    /// Monte Carlo and exact checks of the bounds.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum BoundCommand {
    /// Θ, Rosenthal–Bell and Schechtman bounds for one sum.
    OneDim(OneDimArgs),
    /// Composite bound for S_L of a kernel.
    Multisum(MultisumArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BellArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Integer orders 1..=p_max.
    #[arg(long, default_value_t = 50)]
    pub p_max: u32,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0])]
    pub betas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct OneDimArgs {
    #[arg(long)]
    pub p: f64,
    /// First moments of the summands.
    #[arg(long, value_delimiter = ',', required = true)]
    pub m1: Vec<f64>,
    /// p-th moments of the summands.
    #[arg(long, value_delimiter = ',', required = true)]
    pub mp: Vec<f64>,
    /// Treat the single (m1, mp) pair as this many i.i.d. summands.
    #[arg(long)]
    pub iid: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct MultisumArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 3.0, 4.0])]
    pub p: Vec<f64>,
    /// Box shapes such as 10x10; repeat or separate by commas.
    #[arg(long = "L", value_delimiter = ',', value_parser = parse_shape)]
    pub shapes: Vec<Vec<usize>>,
    /// JSON list of 1-based points for a non-rectangular index set.
    #[arg(long)]
    pub index_set: Option<PathBuf>,
    /// Extra side length tried for circumscribing boxes.
    #[arg(long, default_value_t = 0)]
    pub extra: usize,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    pub m_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TailArgs {
    /// ψ as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub psi: String,
    /// Explicit levels y ≥ e.
    #[arg(long, value_delimiter = ',')]
    pub y: Vec<f64>,
    /// Otherwise `points` levels spaced evenly on [e, y_max].
    #[arg(long, default_value_t = 50.0)]
    pub y_max: f64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    /// Bound on the GLS norm; ψ is multiplied by it.
    #[arg(long, default_value_t = 1.0)]
    pub norm: f64,
    #[arg(long, default_value_t = 200.0)]
    pub p_max: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ApproxArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    pub m_max: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = NmfConfig::default().iters)]
    pub iters: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, required_unless_present = "battery")]
    pub kernel: Option<PathBuf>,
    /// Run a named battery instead of a single kernel; only `standard` exists.
    #[arg(long)]
    pub battery: Option<String>,
    #[arg(long = "L", value_parser = |s: &str| parse_shape(s).map(Shape))]
    pub shape: Option<Shape>,
    #[arg(long)]
    pub index_set: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 3.0, 4.0])]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 64)]
    pub chunks: u64,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    pub m_max: usize,
    /// Tail levels checked, evenly spaced on [e, max f].
    #[arg(long, default_value_t = 12)]
    pub tail_points: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

/// Box side lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Shape(pub Vec<usize>);

/// Parses `10x10`, `2x2x2` or `7`.
pub fn parse_shape(s: &str) -> std::result::Result<Vec<usize>, String> {
    let sides: std::result::Result<Vec<usize>, _> = s.split(['x', 'X']).map(|t| t.trim().parse::<usize>()).collect();
    match sides {
        Ok(v) if !v.is_empty() && !v.contains(&0) => Ok(v),
        _ => Err(format!("expected a box shape like 10x10, got `{s}`")),
    }
}

/// One coordinate's marginal in a kernel file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalInput {
    Explicit { points: Vec<f64>, weights: Vec<f64> },
    Distribution { distribution: DistributionSpec, cells: Option<usize>, upper: Option<f64> },
}

impl MarginalInput {
    pub fn resolve(&self) -> Result<Marginal> {
        match self {
            MarginalInput::Explicit { points, weights } => Marginal::new(points.clone(), weights.clone()),
            MarginalInput::Distribution { distribution, cells, upper } => {
                distribution.discretize(cells.unwrap_or(16), *upper)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationInput {
    pub lambda: Vec<f64>,
    pub factors: Vec<Vec<Vec<f64>>>,
}

/// Kernel file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub marginals: Vec<MarginalInput>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub representation: Option<RepresentationInput>,
    #[serde(default)]
    pub preset: Option<KernelPreset>,
    /// Multiplies the kernel.
    #[serde(default)]
    pub scale: Option<f64>,
}

/// A kernel ready for bounding and simulation.
#[derive(Debug, Clone)]
pub struct LoadedKernel {
    pub sum_kernel: SumKernel,
    pub representation: Option<DegenerateRepresentation>,
    pub grid: GridKernel,
}

impl KernelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read kernel file {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("kernel file {} is not valid: {e}", path.display())))
    }

    pub fn build(&self) -> Result<LoadedKernel> {
        let marginals: Vec<Marginal> = self.marginals.iter().map(MarginalInput::resolve).collect::<Result<_>>()?;
        let scale = self.scale.unwrap_or(1.0);
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(Error::InvalidInput(format!("scale must be finite and >= 0, got {scale}")));
        }
        let given = [self.values.is_some(), self.representation.is_some(), self.preset.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(Error::InvalidInput("kernel file needs exactly one of values, representation, preset".into()));
        }
        if let Some(r) = &self.representation {
            let lambda = r.lambda.iter().map(|l| l * scale).collect();
            let rep = DegenerateRepresentation::new(lambda, r.factors.clone())?;
            let m = materialize(&rep, &marginals)?;
            if m.negative_kernel {
                return Err(Error::InvalidInput("representation evaluates to negative kernel values".into()));
            }
            let grid = GridKernel::new(marginals.clone(), m.kernel.values().iter().map(|v| v.max(0.0)).collect())?;
            return Ok(LoadedKernel {
                sum_kernel: SumKernel::Representation { representation: rep.clone(), marginals },
                representation: Some(rep),
                grid,
            });
        }
        let grid = if let Some(v) = &self.values {
            GridKernel::new(marginals, v.iter().map(|x| x * scale).collect())?
        } else {
            let preset = self.preset.expect("checked above");
            if marginals.len() != 2 {
                return Err(Error::InvalidInput("presets are two-dimensional".into()));
            }
            GridKernel::from_fn(marginals, |x| scale * preset.eval(x[0], x[1]))?
        };
        Ok(LoadedKernel { sum_kernel: SumKernel::Grid(grid.clone()), representation: None, grid })
    }
}

impl LoadedKernel {
    pub fn prepare(&self, cfg: WBoundConfig) -> Result<PreparedKernel> {
        match &self.representation {
            Some(r) => PreparedKernel::from_representation(r.clone(), self.grid.marginals(), cfg),
            None => PreparedKernel::from_grid(self.grid.clone(), cfg),
        }
    }
}

fn load_index_set(path: &Path) -> Result<IndexSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read index set {}: {e}", path.display())))?;
    let points: Vec<Vec<usize>> = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("index set {} is not a list of points: {e}", path.display())))?;
    IndexSet::new(points)
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    schema: &'static str,
    command: &'a str,
    config: C,
    result: R,
}

fn json_report<C: Serialize, R: Serialize>(command: &str, config: C, result: R) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(&Report { schema: SCHEMA_VERSION, command, config, result })?;
    buf.push(b'\n');
    Ok(buf)
}

fn emit(out: &OutputArgs, bytes: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, bytes)?,
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn check_orders(ps: &[f64]) -> Result<()> {
    if ps.is_empty() || ps.iter().any(|p| !(*p >= 2.0) || !p.is_finite()) {
        return Err(Error::InvalidInput(format!("moment orders must be >= 2, got {ps:?}")));
    }
    Ok(())
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergent { .. } | Error::BracketFailure { .. } | Error::NotPsd { .. } => EXIT_NUMERIC,
        _ => EXIT_INVALID,
    }
}

/// Runs a parsed command, writing to `stdout` unless an output path is set.
/// Returns the exit code for non-error outcomes.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Bell(a) => {
            let cfg = BellEvalConfig::default();
            let res = sandwich_point(a.p, a.beta, &cfg)?;
            emit(&a.out, &json_report("bell", (&a, cfg), res)?, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Sweep(a) => {
            let cfg = BellEvalConfig::default();
            let ps: Vec<f64> = (1..=a.p_max).map(f64::from).collect();
            let rep = sandwich_report(&ps, &a.betas, &cfg)?;
            let bytes = match a.format {
                Format::Json => json_report("sweep", (&a, cfg), &rep)?,
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_sandwich_csv(&rep.records, &mut buf)?;
                    buf
                }
            };
            emit(&a.out, &bytes, stdout)?;
            Ok(if rep.violations.is_empty() { EXIT_OK } else { EXIT_VIOLATION })
        }
        Command::Bound(BoundCommand::OneDim(a)) => {
            let cfg = BellEvalConfig::default();
            let t = match a.iid {
                Some(n) => {
                    if a.m1.len() != 1 || a.mp.len() != 1 {
                        return Err(Error::InvalidInput("--iid takes a single m1 and mp".into()));
                    }
                    MomentTable::iid(a.p, n, a.m1[0], a.mp[0])?
                }
                None => MomentTable::new(a.p, a.m1.clone(), a.mp.clone())?,
            };
            let report = one_dim_report(&t, &cfg)?;
            let class_sup = schechtman_sup(t.m1().iter().sum(), t.mp().iter().sum(), t.p(), &cfg)?;
            let result = serde_json::json!({ "bounds": report, "schechtman": class_sup });
            emit(&a.out, &json_report("bound one-dim", (&a, cfg), result)?, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Bound(BoundCommand::Multisum(a)) => {
            check_orders(&a.p)?;
            let loaded = KernelFile::load(&a.kernel)?.build()?;
            let wcfg = WBoundConfig { m_max: a.m_max, seed: a.seed, ..Default::default() };
            let pk = loaded.prepare(wcfg)?;
            let index_set = a.index_set.as_deref().map(load_index_set).transpose()?;
            if a.shapes.is_empty() && index_set.is_none() {
                return Err(Error::InvalidInput("give at least one --L shape or an --index-set".into()));
            }
            let mut boxes = Vec::new();
            let mut sups = Vec::new();
            for &p in &a.p {
                let mut sup = f64::NEG_INFINITY;
                for n in &a.shapes {
                    let b = pk.bound(p, n)?;
                    sup = sup.max(b.chosen);
                    boxes.push(b);
                }
                if !a.shapes.is_empty() {
                    sups.push(serde_json::json!({ "p": p, "sup_chosen": sup }));
                }
            }
            let nonrect = match &index_set {
                Some(l) => a.p.iter().map(|&p| pk.nonrect_bound(l, p, a.extra)).collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            let result = serde_json::json!({ "boxes": boxes, "sup_over_shapes": sups, "index_set": nonrect });
            emit(&a.out, &json_report("bound multisum", (&a, wcfg), result)?, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Tail(a) => {
            let text = if Path::new(&a.psi).is_file() { std::fs::read_to_string(&a.psi)? } else { a.psi.clone() };
            let psi: PsiSpec = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("psi is neither a JSON spec nor a readable file: {e}")))?;
            let ys = if a.y.is_empty() {
                let e = std::f64::consts::E;
                if !(a.y_max > e) || a.points < 2 {
                    return Err(Error::InvalidInput("need y_max > e and at least 2 points".into()));
                }
                (0..a.points).map(|i| e + (a.y_max - e) * i as f64 / (a.points - 1) as f64).collect()
            } else {
                a.y.clone()
            };
            let grid = ConjugateGrid { p_max: a.p_max, ..Default::default() };
            let curve = tail_upper(&psi, &ys, a.norm, &grid)?;
            let bytes = match a.format {
                Format::Json => json_report("tail", (&a, grid, &psi), &curve)?,
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_tail_csv(&curve, &mut buf)?;
                    buf
                }
            };
            emit(&a.out, &bytes, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Approx(a) => {
            let loaded = KernelFile::load(&a.kernel)?.build()?;
            let nmf = NmfConfig { iters: a.iters, ..Default::default() };
            let sweep = crate::kernels::degree_sweep(&loaded.grid, a.m_max, a.p, a.seed, &nmf)?;
            let mut rows = Vec::new();
            for r in &sweep {
                rows.push(serde_json::json!({
                    "degree": r.degree,
                    "residual_lp": r.residual_lp,
                    "residual_l2": r.residual_l2,
                    "dplus_norm": dplus_norm(&r.representation, loaded.grid.marginals(), a.p)?,
                    "iterations": r.iterations,
                    "converged": r.converged,
                }));
            }
            let spectral: Vec<serde_json::Value> = (1..=a.m_max)
                .map_while(|m| eigen_rank_truncation(&loaded.grid, m).ok())
                .map(|s| {
                    serde_json::json!({
                        "degree": s.kept,
                        "projective_residual": s.projective_residual,
                        "l2_residual": s.l2_residual,
                    })
                })
                .collect();
            let result = serde_json::json!({ "nonnegative": rows, "spectral": spectral });
            emit(&a.out, &json_report("approx", (&a, nmf), result)?, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Verify(a) => {
            check_orders(&a.p)?;
            if let Some(name) = &a.battery {
                if name != "standard" {
                    return Err(Error::InvalidInput(format!("unknown battery `{name}`; only `standard` exists")));
                }
                let cfg = BatteryConfig {
                    n_samples: a.n,
                    seed: a.seed,
                    n_chunks: a.chunks,
                    p_list: a.p.clone(),
                    m_max: a.m_max,
                    tail_points: a.tail_points,
                    ..Default::default()
                };
                let rep = run_battery(&cfg)?;
                emit(&a.out, &json_report("verify", &cfg, &rep)?, stdout)?;
                return Ok(if rep.failures() == 0 { EXIT_OK } else { EXIT_VIOLATION });
            }
            let loaded = KernelFile::load(a.kernel.as_deref().expect("clap requires kernel"))?.build()?;
            let l = match (&a.shape, &a.index_set) {
                (Some(n), None) => IndexSet::full_box(&n.0)?,
                (None, Some(path)) => load_index_set(path)?,
                _ => return Err(Error::InvalidInput("give exactly one of --L or --index-set".into())),
            };
            let wcfg = WBoundConfig { m_max: a.m_max, seed: a.seed, ..Default::default() };
            let pk = loaded.prepare(wcfg)?;
            let bound_at = |p: f64| -> Result<f64> {
                if l.is_box() {
                    Ok(pk.bound(p, &l.sides())?.chosen)
                } else {
                    Ok(pk.nonrect_bound(&l, p, 0)?.value)
                }
            };
            let moment_bounds = a.p.iter().map(|&p| bound_at(p)).collect::<Result<Vec<_>>>()?;
            let tail_ps: Vec<f64> = (2..=12).map(f64::from).collect();
            let tab = tail_ps.iter().map(|&p| bound_at(p).map(|v| v.max(1e-300))).collect::<Result<Vec<_>>>()?;
            let e = std::f64::consts::E;
            let hi = loaded.grid.max_value().max(e + 1.0) * 1.01;
            let n_y = a.tail_points.max(2);
            let ys: Vec<f64> = (0..n_y).map(|i| e + (hi - e) * i as f64 / (n_y - 1) as f64).collect();
            let curve = tail_upper(&PsiSpec::Tabulated { p: tail_ps, values: tab }, &ys, 1.0, &ConjugateGrid::default())?;
            let mc = McConfig { n_samples: a.n, seed: a.seed, n_chunks: a.chunks, p_list: a.p.clone(), y_grid: ys, threads: 0 };
            let rep = verify_against(&loaded.sum_kernel, &l, &mc, &moment_bounds, &curve.bounds)?;
            let failed = rep.count(Status::Fail) > 0;
            emit(&a.out, &json_report("verify", (&a, wcfg, &mc), &rep)?, stdout)?;
            Ok(if failed { EXIT_VIOLATION } else { EXIT_OK })
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ubound: {e}");
            exit_code(&e)
        }
    }
}
