//! Subcommands and their orchestration.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mfd_core::analyze::{
    certify_monotone, convergence_study, oscillation_metric, reconstructed_error_norms, ErrorMeasure,
    DEFAULT_DENSE_LIMIT,
};
use mfd_core::assembly::{discretize, DiscreteField, ProblemKind, ProblemSpec};
use mfd_core::dualmesh::DualMesh;
use mfd_core::expfit::{build_exp_averages, build_flux_operators, PotentialField};
use mfd_core::fem::reference_fem_scalar;
use mfd_core::io::{write_mesh_json, write_text, write_vtk};
use mfd_core::mimetic::{build_incidence, MimeticOperators};
use mfd_core::presets::{preset, preset_catalog, Exact};
use mfd_core::solve::{solve, SolveOptions};
use serde::Serialize;
use serde_json::json;

use crate::config::{Coefficient, MeshConfig, MeshSource, OutputConfig, ProblemConfig, SolverConfig, SolverMethod};
use crate::expr::parse_expr;
use crate::CliError;

/// Bound on `||J1 J0||` relative to `||J1|| ||J0||` (infinity norms).
pub const DEC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(
    name = "mfdcd",
    version,
    about = "Exponentially fitted mimetic finite differences for convection-diffusion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a mesh and its Voronoi dual; print a summary and optionally export it.
    Mesh(MeshArgs),
    /// Assemble and solve one problem.
    Solve(SolveArgs),
    /// Convergence study of a preset with a known solution.
    Converge(ConvergeArgs),
    /// Certify that a scalar operator is monotone and check the solution bounds.
    Certify(CertifyArgs),
    /// Check that the fitted gradient and curl form a complex.
    DecCheck(DecCheckArgs),
    /// Compare oscillations of the fitted scheme and plain Galerkin P1.
    CompareFem(CompareArgs),
    /// List the built-in problems.
    Presets,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[arg(long, value_enum, default_value = "hex")]
    pub family: MeshSource,
    #[arg(long, default_value_t = 0)]
    pub levels: usize,
    /// Mesh file (JSON vertex/triangle lists) for `--family file`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Write the refined mesh as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub vtk: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// JSON problem configuration.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Diffusion parameter of the preset.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Refinement level (overrides the preset or configuration).
    #[arg(long, visible_alias = "levels")]
    pub level: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<SolverMethod>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Degrees of freedom as CSV (index, x, y, value).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub vtk: Option<PathBuf>,
    /// Full report including the solution.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MeasureArg {
    Reconstructed,
    Lumped,
}

impl From<MeasureArg> for ErrorMeasure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Reconstructed => ErrorMeasure::Reconstructed,
            MeasureArg::Lumped => ErrorMeasure::Lumped,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub preset: String,
    /// Comma-separated diffusion values; defaults to the preset's.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Finest refinement level.
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    #[arg(long, default_value_t = 1)]
    pub min_level: usize,
    #[arg(long, value_enum, default_value = "reconstructed")]
    pub measure: MeasureArg,
    #[arg(long, value_enum, default_value = "direct")]
    pub method: SolverMethod,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Largest system whose inverse is checked entrywise; larger systems use
    /// a structural certificate (symmetrized definiteness, or chained column
    /// dominance when the operator has no diagonal symmetrizer).
    #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecCheckArgs {
    #[arg(long, value_enum, default_value = "hex")]
    pub mesh: MeshSource,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Potential; its gradient is derived symbolically.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub phi: String,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// Run a parsed command line, writing reports to `out`.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Mesh(a) => cmd_mesh(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Converge(a) => cmd_converge(a, out),
        Command::Certify(a) => cmd_certify(a, out),
        Command::DecCheck(a) => cmd_dec_check(a, out),
        Command::CompareFem(a) => cmd_compare(a, out),
        Command::Presets => emit(out, &preset_catalog(), None),
    }
}

/// Worker count for studies: `MFD_THREADS` if set, else the available cores.
pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var("MFD_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Validation(format!("MFD_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn emit<T: Serialize + ?Sized>(out: &mut dyn std::io::Write, value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(p) = path {
        write_text(p, &format!("{text}\n"))?;
    }
    writeln!(out, "{text}").map_err(|e| CliError::Validation(format!("stdout: {e}")))
}

fn build_mesh(family: MeshSource, levels: usize, input: Option<&Path>) -> Result<DualMesh, CliError> {
    MeshConfig {
        family,
        levels,
        path: input.map(|p| p.display().to_string()),
    }
    .build(None)
}

fn mesh_summary(mesh: &DualMesh) -> serde_json::Value {
    let m = &mesh.metrics;
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    json!({
        "vertices": mesh.num_vertices(),
        "edges": mesh.num_edges(),
        "triangles": mesh.num_triangles(),
        "interior_vertices": mesh.primal.interior_vertices().len(),
        "interior_edges": mesh.primal.interior_edges().len(),
        "h": mesh.mesh_spacing(),
        "area": mesh.domain_area(),
        "min_edge_length": min(&m.edge_length),
        "min_dual_edge_length": min(&m.dual_edge_length),
        "min_cell_area": min(&m.cell_area),
    })
}

fn cmd_mesh(a: &MeshArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mesh = build_mesh(a.family, a.levels, a.input.as_deref())?;
    if let Some(p) = &a.json {
        write_mesh_json(&mesh, p)?;
    }
    if let Some(p) = &a.vtk {
        write_vtk(&mesh, None, "mesh", p)?;
    }
    emit(out, &mesh_summary(&mesh), None)
}

/// A fully resolved problem.
pub struct Problem {
    pub name: String,
    pub mesh: DualMesh,
    pub spec: ProblemSpec,
    pub exact: Option<Exact>,
    pub lower: f64,
    pub upper: f64,
    pub solver: SolveOptions,
    pub outputs: OutputConfig,
}

fn read_config(path: &Path) -> Result<ProblemConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    ProblemConfig::from_json(&text)
}

fn solver_config(mut base: SolverConfig, a: &ProblemArgs) -> SolverConfig {
    if let Some(m) = a.method {
        base.method = m;
    }
    if let Some(t) = a.tol {
        base.tol = t;
    }
    base
}

pub fn resolve_problem(a: &ProblemArgs) -> Result<Problem, CliError> {
    if let Some(path) = &a.config {
        let mut cfg = read_config(path)?;
        if let Some(alpha) = a.alpha {
            if cfg.preset.is_none() {
                return Err(CliError::Validation("--alpha applies to preset problems only".into()));
            }
            cfg.alpha = Some(Coefficient::Number(alpha));
        }
        if let Some(l) = a.level {
            cfg.mesh.levels = l;
        }
        let mesh = cfg.mesh.build(path.parent())?;
        let solver = solver_config(cfg.solver.clone(), a);
        let name = cfg.preset.clone().unwrap_or_else(|| "custom".into());
        let (spec, exact, lower, upper) = match &cfg.preset {
            Some(p) if !cfg.has_overrides() => {
                let alpha = match cfg.alpha {
                    Some(Coefficient::Number(v)) => Some(v),
                    _ => None,
                };
                let pre = preset(p, alpha)?;
                if cfg.kind.is_some_and(|k| k != pre.spec.kind) {
                    return Err(CliError::Validation(format!("kind does not match preset '{p}'")));
                }
                (pre.spec, pre.exact, pre.lower_bound, pre.upper_bound)
            }
            _ => (cfg.expressions()?.to_spec()?, None, None, None),
        };
        let spec = match cfg.rot_treatment {
            Some(t) => spec.with_rot_treatment(t),
            None => spec,
        };
        return Ok(Problem {
            name,
            mesh,
            solver: solver.options(!spec.uses_edge_drift())?,
            spec,
            exact,
            lower: lower.unwrap_or(f64::NEG_INFINITY),
            upper: upper.unwrap_or(f64::INFINITY),
            outputs: cfg.outputs,
        });
    }
    let Some(name) = &a.preset else {
        return Err(CliError::Validation("either --config or --preset is required".into()));
    };
    let pre = preset(name, a.alpha)?;
    let mesh = pre.family.build(a.level.unwrap_or(pre.default_level))?;
    let solver = solver_config(SolverConfig::default(), a).options(!pre.spec.uses_edge_drift())?;
    Ok(Problem {
        name: name.clone(),
        mesh,
        solver,
        exact: pre.exact,
        lower: pre.lower_bound.unwrap_or(f64::NEG_INFINITY),
        upper: pre.upper_bound.unwrap_or(f64::INFINITY),
        spec: pre.spec,
        outputs: OutputConfig::default(),
    })
}

fn dof_csv(mesh: &DualMesh, field: &DiscreteField) -> String {
    let mut s = String::from("index,x,y,value\n");
    for (i, v) in field.values.iter().enumerate() {
        let p = match field.kind {
            ProblemKind::ScalarGrad => mesh.primal.vertices[i],
            ProblemKind::VectorCurl => mesh.primal.edge_midpoint(i),
        };
        s.push_str(&format!("{i},{:.17e},{:.17e},{:.17e}\n", p[0], p[1], v));
    }
    s
}

fn finite_bound(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let pr = resolve_problem(&a.problem)?;
    let disc = discretize(&pr.mesh, &pr.spec)?;
    let rep = solve(&disc.system, &pr.solver)?;
    let values = &rep.solution.values;
    let errors = match &pr.exact {
        Some(ex) => Some(reconstructed_error_norms(&pr.mesh, ex, &rep.solution)?),
        None => None,
    };
    let diag = &disc.averages.diagnostics;
    let summary = json!({
        "problem": pr.name,
        "kind": pr.spec.kind,
        "mesh": mesh_summary(&pr.mesh),
        "dofs": disc.system.size(),
        "method": rep.method,
        "iterations": rep.iterations,
        "relative_residual": rep.residual_norm,
        "min_value": values.iter().copied().fold(f64::INFINITY, f64::min),
        "max_value": values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "oscillation": oscillation_metric(values, pr.lower, pr.upper),
        "lower_bound": finite_bound(pr.lower),
        "upper_bound": finite_bound(pr.upper),
        "errors": errors,
        "diagnostics": {
            "gauge_shift": diag.gauge_shift,
            "stable_edges": diag.stable_edges.len(),
            "sign_fallback_edges": diag.sign_fallback_edges.len(),
            "limit_triangles": diag.limit_triangles.len(),
            "fallback_triangles": diag.fallback_triangles.len(),
        },
    });
    let csv = a.csv.clone().or(pr.outputs.csv.as_ref().map(PathBuf::from));
    let vtk = a.vtk.clone().or(pr.outputs.vtk.as_ref().map(PathBuf::from));
    let json_path = a.json.clone().or(pr.outputs.json.as_ref().map(PathBuf::from));
    if let Some(p) = csv {
        write_text(&p, &dof_csv(&pr.mesh, &rep.solution))?;
    }
    if let Some(p) = vtk {
        write_vtk(&pr.mesh, Some(&rep.solution), &pr.name, &p)?;
    }
    if let Some(p) = json_path {
        let full = json!({ "summary": summary, "solution": rep.solution });
        mfd_core::io::write_json(&full, &p)?;
    }
    emit(out, &summary, None)
}

fn cmd_converge(a: &ConvergeArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    if a.min_level > a.levels {
        return Err(CliError::Validation(format!(
            "--min-level {} exceeds --levels {}",
            a.min_level, a.levels
        )));
    }
    let base = preset(&a.preset, None)?;
    let alphas = if a.alphas.is_empty() {
        vec![base.alpha]
    } else {
        a.alphas.clone()
    };
    let opts = SolverConfig {
        method: a.method,
        tol: a.tol,
        ..SolverConfig::default()
    }
    .options(!base.spec.uses_edge_drift())?;
    let levels: Vec<usize> = (a.min_level..=a.levels).collect();
    let report = convergence_study(&a.preset, &levels, &alphas, &opts, a.measure.into(), thread_count()?)?;
    let csv = report.to_csv();
    if let Some(p) = &a.json {
        mfd_core::io::write_json(&report, p)?;
    }
    let io = |e: std::io::Error| CliError::Validation(format!("stdout: {e}"));
    match &a.csv {
        Some(p) => {
            write_text(p, &csv)?;
            for &alpha in &alphas {
                if let Some((re, rl)) = report.finest_rates(alpha) {
                    writeln!(out, "alpha={alpha:e} finest rates: energy {re:.3}, L2 {rl:.3}").map_err(io)?;
                }
            }
            Ok(())
        }
        None => out.write_all(csv.as_bytes()).map_err(io),
    }
}

fn cmd_certify(a: &CertifyArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let pr = resolve_problem(&a.problem)?;
    if pr.spec.kind != ProblemKind::ScalarGrad {
        return Err(CliError::Validation("certify applies to scalar problems".into()));
    }
    let disc = discretize(&pr.mesh, &pr.spec)?;
    let report = certify_monotone(&disc.system, a.dense_limit, pr.lower, pr.upper)?;
    let doc = json!({
        "problem": pr.name,
        "h": pr.mesh.mesh_spacing(),
        "lower_bound": finite_bound(pr.lower),
        "upper_bound": finite_bound(pr.upper),
        "sign_fallback_edges": disc.averages.diagnostics.sign_fallback_edges.len(),
        "report": report,
    });
    emit(out, &doc, a.json.as_deref())?;
    if report.monotone {
        Ok(())
    } else {
        Err(CliError::CheckFailed("operator is not certified monotone".into()))
    }
}

/// Report of the complex-exactness check.
#[derive(Clone, Debug, Serialize)]
pub struct DecReport {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    /// `max |K G|` in exact integer arithmetic.
    pub kg_max_abs: i64,
    pub curl_grad_max_abs: f64,
    pub j1_j0_norm: f64,
    pub j1_norm: f64,
    pub j0_norm: f64,
    /// `||J1 J0|| / (||J1|| ||J0||)`.
    pub relative_residual: f64,
    pub tolerance: f64,
    pub gauge_shift: f64,
    pub passed: bool,
}

pub fn dec_check(mesh: &DualMesh, phi_text: &str) -> Result<DecReport, CliError> {
    let phi = parse_expr(phi_text).map_err(|e| CliError::Validation(format!("phi = {phi_text:?}: {e}")))?;
    let derivative = |axis| {
        phi.derivative(axis)
            .map_err(|e| CliError::Validation(format!("phi: {e}")))
    };
    let (dx, dy) = (derivative(0)?, derivative(1)?);
    let pot = PotentialField::new(
        move |p| phi.eval_or_nan(p),
        move |p| [dx.eval_or_nan(p), dy.eval_or_nan(p)],
    );
    let inc = build_incidence(mesh);
    let ops = MimeticOperators::new(mesh, &inc);
    let avg = build_exp_averages(mesh, &pot)?;
    let flux = build_flux_operators(&ops, &avg);
    let curl_grad = ops.curl_d.matmul(&ops.grad_d)?.max_abs();
    let prod = flux.j1.matmul(&flux.j0)?.norm_inf();
    let (n1, n0) = (flux.j1.norm_inf(), flux.j0.norm_inf());
    let relative = if n1 * n0 > 0.0 { prod / (n1 * n0) } else { prod };
    let kg = inc.kg_max_abs();
    Ok(DecReport {
        vertices: mesh.num_vertices(),
        edges: mesh.num_edges(),
        triangles: mesh.num_triangles(),
        kg_max_abs: kg,
        curl_grad_max_abs: curl_grad,
        j1_j0_norm: prod,
        j1_norm: n1,
        j0_norm: n0,
        relative_residual: relative,
        tolerance: DEC_TOLERANCE,
        gauge_shift: avg.diagnostics.gauge_shift,
        passed: kg == 0 && relative <= DEC_TOLERANCE,
    })
}

fn cmd_dec_check(a: &DecCheckArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mesh = build_mesh(a.mesh, a.levels, a.input.as_deref())?;
    let report = dec_check(&mesh, &a.phi)?;
    emit(out, &report, a.json.as_deref())?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "relative residual {:e}",
            report.relative_residual
        )))
    }
}

/// Range and oscillation of one discrete solution.
#[derive(Clone, Debug, Serialize)]
pub struct RangeReport {
    pub min_value: f64,
    pub max_value: f64,
    pub oscillation: f64,
}

impl RangeReport {
    fn of(values: &[f64], lower: f64, upper: f64) -> Self {
        Self {
            min_value: values.iter().copied().fold(f64::INFINITY, f64::min),
            max_value: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            oscillation: oscillation_metric(values, lower, upper),
        }
    }
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let pr = resolve_problem(&a.problem)?;
    if pr.spec.kind != ProblemKind::ScalarGrad {
        return Err(CliError::Validation("compare-fem applies to scalar problems".into()));
    }
    let disc = discretize(&pr.mesh, &pr.spec)?;
    let mfd = solve(&disc.system, &pr.solver)?;
    let fem = reference_fem_scalar(&pr.mesh, &pr.spec)?;
    // without explicit bounds, measure against the range of the data
    let doc = json!({
        "problem": pr.name,
        "h": pr.mesh.mesh_spacing(),
        "lower_bound": finite_bound(pr.lower),
        "upper_bound": finite_bound(pr.upper),
        "mfd": RangeReport::of(&mfd.solution.values, pr.lower, pr.upper),
        "fem": RangeReport::of(&fem.values, pr.lower, pr.upper),
    });
    emit(out, &doc, a.json.as_deref())
}
