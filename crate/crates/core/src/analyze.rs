//! Error norms, convergence studies, monotonicity certificates and the
//! oscillation metric.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::{discretize, edge_tangential_average, DiscreteField, DiscreteSystem, ProblemKind};
use crate::dualmesh::DualMesh;
use crate::mimetic::{build_incidence, edge_mass, MimeticOperators};
use crate::presets::{preset, Exact};
use crate::solve::{solve, symmetrized, SolveOptions, SparseLdu};
use crate::sparse::{dot, norm2, SparseMatrix, TripletBuilder};
use crate::{MfdError, Result};

/// Discrete errors in the energy (semi-)norm and the mass-lumped L2 norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub energy: f64,
    pub l2: f64,
}

/// Degrees-of-freedom interpolant of an exact solution: nodal values for the
/// scalar problem, two-point Gauss tangential averages for the vector one.
pub fn interpolate(mesh: &DualMesh, exact: &Exact) -> Vec<f64> {
    match exact {
        Exact::Scalar { u, .. } => mesh.primal.vertices.iter().map(|&p| u(p)).collect(),
        Exact::Vector { u, .. } => edge_tangential_average(mesh, &|p| u(p)),
    }
}

/// Mass-lumped errors of `solution` against the interpolant of `exact`.
///
/// Scalar: `energy^2 = sum_e (grad_D err)_e^2 |e||dV_e|/2` and
/// `l2^2 = sum_i err_i^2 |V_i|`. Vector: `energy^2 = sum_k (curl_D err)_k^2 |D_k|`
/// and `l2^2 = sum_e err_e^2 |e||dV_e|/2`.
pub fn error_norms(
    mesh: &DualMesh,
    ops: &MimeticOperators,
    exact: &Exact,
    solution: &DiscreteField,
) -> Result<ErrorNorms> {
    let interp = interpolate(mesh, exact);
    let expected_kind = check_solution(exact, solution, interp.len())?;
    let err: Vec<f64> = interp.iter().zip(&solution.values).map(|(a, b)| a - b).collect();
    let m = &mesh.metrics;
    let mass = edge_mass(mesh);
    let (energy2, l2_2) = match expected_kind {
        ProblemKind::ScalarGrad => {
            let g = ops.grad_d.matvec(&err);
            let e2: f64 = g.iter().zip(&mass).map(|(g, w)| g * g * w).sum();
            let l2: f64 = err.iter().zip(&m.cell_area).map(|(v, a)| v * v * a).sum();
            (e2, l2)
        }
        ProblemKind::VectorCurl => {
            let c = ops.curl_d.matvec(&err);
            let e2: f64 = c.iter().zip(&m.triangle_area).map(|(c, a)| c * c * a).sum();
            let l2: f64 = err.iter().zip(&mass).map(|(v, w)| v * v * w).sum();
            (e2, l2)
        }
    };
    Ok(ErrorNorms {
        energy: energy2.sqrt(),
        l2: l2_2.sqrt(),
    })
}

fn check_solution(exact: &Exact, solution: &DiscreteField, expected_len: usize) -> Result<ProblemKind> {
    let expected_kind = match exact {
        Exact::Scalar { .. } => ProblemKind::ScalarGrad,
        Exact::Vector { .. } => ProblemKind::VectorCurl,
    };
    if solution.kind != expected_kind {
        return Err(MfdError::KindMismatch {
            expected: expected_kind.as_str(),
        });
    }
    if expected_len != solution.values.len() {
        return Err(MfdError::Dimension(format!(
            "solution has {} values, mesh expects {}",
            solution.values.len(),
            expected_len
        )));
    }
    Ok(expected_kind)
}

/// Degree-5 rule on the reference triangle: barycentric points and weights
/// summing to one.
const TRI_RULE: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W1: f64 = 0.132_394_152_788_506_2;
    const W2: f64 = 0.125_939_180_544_827_1;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Errors of the finite-element reconstruction of `solution` against the
/// exact field itself: `|u - u_h|_1` and `||u - u_h||` with `u_h` the
/// piecewise-linear interpolant of nodal values (scalar), or
/// `||curl(u - u_h)||` and `||u - u_h||` with `u_h` the lowest-order Whitney
/// field whose edge circulations are `value * |e|` (vector). Integrals use a
/// degree-5 rule per triangle.
pub fn reconstructed_error_norms(mesh: &DualMesh, exact: &Exact, solution: &DiscreteField) -> Result<ErrorNorms> {
    let p = &mesh.primal;
    let expected_len = match exact {
        Exact::Scalar { .. } => p.num_vertices(),
        Exact::Vector { .. } => p.num_edges(),
    };
    check_solution(exact, solution, expected_len)?;
    let vals = &solution.values;
    let (mut energy2, mut l2_2) = (0.0, 0.0);
    for (t, tri) in p.triangles.iter().enumerate() {
        let x = tri.map(|v| p.vertices[v]);
        let area = mesh.metrics.triangle_area[t];
        // gradients of the barycentric coordinates of a counter-clockwise triangle
        let grad_l: [[f64; 2]; 3] = std::array::from_fn(|a| {
            let (b, c) = (x[(a + 1) % 3], x[(a + 2) % 3]);
            [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)]
        });
        let at = |lam: [f64; 3]| -> [f64; 2] {
            [
                lam[0] * x[0][0] + lam[1] * x[1][0] + lam[2] * x[2][0],
                lam[0] * x[0][1] + lam[1] * x[1][1] + lam[2] * x[2][1],
            ]
        };
        match exact {
            Exact::Scalar { u, grad } => {
                let nodal = tri.map(|v| vals[v]);
                let gh: [f64; 2] = std::array::from_fn(|k| (0..3).map(|a| nodal[a] * grad_l[a][k]).sum());
                for (lam, w) in TRI_RULE {
                    let q = at(lam);
                    let g = grad(q);
                    let uh: f64 = (0..3).map(|a| lam[a] * nodal[a]).sum();
                    energy2 += w * area * ((g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2));
                    l2_2 += w * area * (u(q) - uh).powi(2);
                }
            }
            Exact::Vector { u, curl } => {
                // local vertex a..b edge, circulation oriented from a to b
                let mut circ = [[0.0; 2]; 3];
                let mut pairs = [(0usize, 0usize); 3];
                let mut curl_h = 0.0;
                for (k, &e) in p.triangle_edges[t].iter().enumerate() {
                    let [i, j] = p.edges[e];
                    let (a, b) = (local(tri, i), local(tri, j));
                    let c = vals[e] * mesh.metrics.edge_length[e];
                    pairs[k] = (a, b);
                    circ[k] = [c, 0.0];
                    curl_h += c * 2.0 * cross(grad_l[a], grad_l[b]);
                }
                for (lam, w) in TRI_RULE {
                    let q = at(lam);
                    let mut uh = [0.0; 2];
                    for (k, &(a, b)) in pairs.iter().enumerate() {
                        let c = circ[k][0];
                        for d in 0..2 {
                            uh[d] += c * (lam[a] * grad_l[b][d] - lam[b] * grad_l[a][d]);
                        }
                    }
                    let ue = u(q);
                    energy2 += w * area * (curl(q) - curl_h).powi(2);
                    l2_2 += w * area * ((ue[0] - uh[0]).powi(2) + (ue[1] - uh[1]).powi(2));
                }
            }
        }
    }
    Ok(ErrorNorms {
        energy: energy2.sqrt(),
        l2: l2_2.sqrt(),
    })
}

fn local(tri: &[usize; 3], v: usize) -> usize {
    tri.iter()
        .position(|&w| w == v)
        .expect("edge vertex belongs to its triangle")
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Which realization of the error norms a study reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMeasure {
    /// Norms of the finite-element reconstruction against the exact field.
    #[default]
    Reconstructed,
    /// Mass-lumped norms of the difference of degree-of-freedom vectors.
    Lumped,
}

impl ErrorMeasure {
    pub fn evaluate(
        self,
        mesh: &DualMesh,
        ops: &MimeticOperators,
        exact: &Exact,
        solution: &DiscreteField,
    ) -> Result<ErrorNorms> {
        match self {
            ErrorMeasure::Reconstructed => reconstructed_error_norms(mesh, exact, solution),
            ErrorMeasure::Lumped => error_norms(mesh, ops, exact, solution),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub alpha: f64,
    pub dofs: usize,
    pub err_energy: f64,
    pub err_l2: f64,
    /// Rates against the previous (coarser) row with the same `alpha`.
    pub rate_energy: Option<f64>,
    pub rate_l2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub preset: String,
    pub kind: ProblemKind,
    pub measure: ErrorMeasure,
    /// Grouped by `alpha` (in the requested order), then by increasing level.
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn rows_for(&self, alpha: f64) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.alpha == alpha).collect()
    }

    /// Rates on the finest interval for `alpha`.
    pub fn finest_rates(&self, alpha: f64) -> Option<(f64, f64)> {
        let last = self.rows_for(alpha).into_iter().last()?;
        Some((last.rate_energy?, last.rate_l2?))
    }

    /// CSV with header `h,alpha,err_energy,err_l2,rate_energy,rate_l2`;
    /// missing rates are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,alpha,err_energy,err_l2,rate_energy,rate_l2\n");
        let opt = |r: Option<f64>| r.map(|v| format!("{v:.6e}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{:.6e},{:.6e},{:.6e},{:.6e},{},{}\n",
                r.h,
                r.alpha,
                r.err_energy,
                r.err_l2,
                opt(r.rate_energy),
                opt(r.rate_l2)
            ));
        }
        out
    }
}

/// Observed order between two (h, error) pairs.
pub fn observed_rate(h_coarse: f64, e_coarse: f64, h_fine: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

/// Assemble, solve and measure one preset on one mesh.
pub fn run_level(
    mesh: &DualMesh,
    preset_name: &str,
    alpha: f64,
    opts: &SolveOptions,
    measure: ErrorMeasure,
) -> Result<(ErrorNorms, usize)> {
    let p = preset(preset_name, Some(alpha))?;
    let exact = p
        .exact
        .as_ref()
        .ok_or_else(|| MfdError::Format(format!("preset '{preset_name}' has no exact solution")))?;
    let disc = discretize(mesh, &p.spec)?;
    let report = solve(&disc.system, opts)?;
    let norms = measure.evaluate(mesh, &disc.ops, exact, &report.solution)?;
    Ok((norms, disc.system.size()))
}

/// Convergence study over `levels` (strictly increasing) and `alphas`.
///
/// Runs are independent and spread over at most `threads` workers; each run
/// is single-threaded, and rows are merged by key, so the report does not
/// depend on the thread count.
pub fn convergence_study(
    preset_name: &str,
    levels: &[usize],
    alphas: &[f64],
    opts: &SolveOptions,
    measure: ErrorMeasure,
    threads: usize,
) -> Result<ConvergenceReport> {
    let base = preset(preset_name, alphas.first().copied())?;
    if base.exact.is_none() {
        return Err(MfdError::Format(format!(
            "preset '{preset_name}' has no exact solution"
        )));
    }
    if levels.is_empty() || alphas.is_empty() {
        return Err(MfdError::Dimension(
            "convergence study needs at least one level and one alpha".into(),
        ));
    }
    if levels.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(MfdError::Dimension("levels must be consecutive and increasing".into()));
    }
    let mut meshes = Vec::with_capacity(levels.len());
    let mut mesh = base.family.build(levels[0])?;
    for (i, _) in levels.iter().enumerate() {
        if i > 0 {
            mesh = mesh.refine()?;
        }
        meshes.push(mesh.clone());
    }

    let jobs: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|a| (0..levels.len()).map(move |l| (a, l)))
        .collect();
    // Finest meshes first so the longest runs start early.
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by_key(|&j| std::cmp::Reverse(jobs[j].1));
    let results: Mutex<Vec<Option<Result<(ErrorNorms, usize)>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&j) = order.get(k) else { break };
                let (a, l) = jobs[j];
                let r = run_level(&meshes[l], preset_name, alphas[a], opts, measure);
                results.lock().expect("no worker panics while holding the lock")[j] = Some(r);
            });
        }
    });

    let results = results.into_inner().expect("workers finished");
    let mut rows = Vec::with_capacity(jobs.len());
    for (j, r) in results.into_iter().enumerate() {
        let (a, l) = jobs[j];
        let (norms, dofs) = r.expect("every job ran")?;
        let h = meshes[l].mesh_spacing();
        // jobs are ordered by alpha, then level: the previous row is the coarser level
        let (rate_energy, rate_l2) = match rows.last() {
            Some(prev) if l > 0 => {
                let prev: &ConvergenceRow = prev;
                (
                    Some(observed_rate(prev.h, prev.err_energy, h, norms.energy)),
                    Some(observed_rate(prev.h, prev.err_l2, h, norms.l2)),
                )
            }
            _ => (None, None),
        };
        rows.push(ConvergenceRow {
            level: levels[l],
            h,
            alpha: alphas[a],
            dofs,
            err_energy: norms.energy,
            err_l2: norms.l2,
            rate_energy,
            rate_l2,
        });
    }
    Ok(ConvergenceReport {
        preset: preset_name.to_string(),
        kind: base.spec.kind,
        measure,
        rows,
    })
}

/// Undershoot below `lower` or overshoot above `upper`, whichever is larger;
/// zero when the values respect both bounds.
pub fn oscillation_metric(values: &[f64], lower: f64, upper: f64) -> f64 {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    0.0f64.max(lower - min).max(max - upper)
}

/// Off-diagonal entries above this count as positive.
pub const Z_MATRIX_TOL: f64 = 1e-14;
/// Inverse entries below `-INVERSE_TOL` fail the dense check.
pub const INVERSE_TOL: f64 = 1e-10;
pub const DEFAULT_DENSE_LIMIT: usize = 1200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateRoute {
    /// Entrywise check of the dense inverse.
    DenseInverse,
    /// Z-matrix, weighted symmetry and positive definiteness of the
    /// symmetrized operator.
    SymmetrizedDefinite,
    /// Z-matrix whose weighted columns are weakly chained diagonally
    /// dominant; used when the operator has no diagonal symmetrizer.
    ColumnDominance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub dofs: usize,
    #[serde(rename = "is_Z_matrix")]
    pub is_z_matrix: bool,
    pub max_offdiagonal: f64,
    pub route: CertificateRoute,
    /// Dense route only.
    pub inverse_nonnegative: Option<bool>,
    pub min_inverse_entry: Option<f64>,
    /// Proof route only: `s_i L_ij = s_j L_ji` with the system's symmetrizer.
    pub weighted_symmetric: Option<bool>,
    /// Proof route only: all `L D L^T` pivots of the symmetrized operator are positive.
    pub symmetrized_positive_definite: Option<bool>,
    pub min_eigenvalue_estimate: Option<f64>,
    /// Column-dominance route only.
    pub column_dominant: Option<bool>,
    pub min_solution_value: f64,
    pub max_solution_value: f64,
    pub oscillation_metric: f64,
    /// The certificate holds: the operator is a nonsingular M-matrix.
    pub monotone: bool,
}

/// Certify that the scalar operator is monotone (a nonsingular M-matrix),
/// solve the system and measure the solution against `[lower, upper]`.
pub fn certify_monotone(
    system: &DiscreteSystem,
    dense_limit: usize,
    lower: f64,
    upper: f64,
) -> Result<MonotonicityReport> {
    if system.kind != ProblemKind::ScalarGrad {
        return Err(MfdError::KindMismatch {
            expected: ProblemKind::ScalarGrad.as_str(),
        });
    }
    let l = &system.l;
    let n = l.nrows();
    let max_offdiagonal = l
        .iter()
        .filter(|(r, c, _)| r != c)
        .map(|(_, _, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let is_z_matrix = max_offdiagonal <= Z_MATRIX_TOL;

    let mut report = MonotonicityReport {
        dofs: n,
        is_z_matrix,
        max_offdiagonal: if n > 1 { max_offdiagonal } else { 0.0 },
        route: CertificateRoute::DenseInverse,
        inverse_nonnegative: None,
        min_inverse_entry: None,
        weighted_symmetric: None,
        symmetrized_positive_definite: None,
        min_eigenvalue_estimate: None,
        column_dominant: None,
        min_solution_value: f64::NAN,
        max_solution_value: f64::NAN,
        oscillation_metric: f64::NAN,
        monotone: false,
    };

    if n <= dense_limit {
        let min_entry = dense_inverse_min(l)?;
        let ok = min_entry >= -INVERSE_TOL;
        report.inverse_nonnegative = Some(ok);
        report.min_inverse_entry = Some(min_entry);
        report.monotone = ok;
    } else if system.ln_symmetrizer.is_empty() {
        report.route = CertificateRoute::ColumnDominance;
        let ok = !system.column_weights.is_empty() && chained_column_dominance(l, &system.column_weights);
        report.column_dominant = Some(ok);
        report.monotone = is_z_matrix && ok;
    } else {
        report.route = CertificateRoute::SymmetrizedDefinite;
        let ws = weighted_symmetry_holds(l, &system.ln_symmetrizer);
        let m = symmetrized(l);
        let (pd, lambda) = match SparseLdu::factor(&m) {
            Ok(f) => {
                let pd = f.pivots().iter().all(|&d| d > 0.0);
                (pd, if pd { Some(smallest_eigenvalue(&m, &f)) } else { None })
            }
            Err(_) => (false, None),
        };
        report.weighted_symmetric = Some(ws);
        report.symmetrized_positive_definite = Some(pd);
        report.min_eigenvalue_estimate = lambda;
        report.monotone = is_z_matrix && ws && pd && lambda.is_some_and(|v| v > 0.0);
    }

    let solved = solve(system, &SolveOptions::default())?;
    let values = &solved.solution.values;
    report.min_solution_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    report.max_solution_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.oscillation_metric = oscillation_metric(values, lower, upper);
    Ok(report)
}

/// Smallest entry of `a^-1`, from a partially pivoted dense LU.
fn dense_inverse_min(a: &SparseMatrix) -> Result<f64> {
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for (r, c, v) in a.iter() {
        dense[(r, c)] = v;
    }
    let inv = dense.lu().try_inverse().ok_or(MfdError::SingularMatrix(n))?;
    Ok(inv.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `ln s_i + ln|L_ij| = ln s_j + ln|L_ji|` for every off-diagonal pair with
/// equal signs. When the transposed entry is below the representable range,
/// the relation must place it there too.
fn weighted_symmetry_holds(l: &SparseMatrix, ln_s: &[f64]) -> bool {
    const TINY: f64 = 1e-280;
    let ln_tiny = TINY.ln();
    let scale = 1.0 + ln_s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale + 1e-10;
    l.iter().filter(|(r, c, v)| r != c && v.abs() >= TINY).all(|(r, c, v)| {
        let w = l.get(c, r);
        let implied = ln_s[r] + v.abs().ln() - ln_s[c];
        if w.abs() < TINY {
            implied < ln_tiny + 1.0 + tol
        } else {
            v.signum() == w.signum() && (implied - w.abs().ln()).abs() <= tol
        }
    })
}

/// Relative slack allowed in the weighted column sums.
const COLUMN_SUM_TOL: f64 = 1e-12;

/// `diag(w) L` has nonnegative column sums and a positive diagonal, and every
/// column reaches a strictly dominant one through the nonzero pattern. For a
/// Z-matrix this makes `L` a nonsingular M-matrix.
fn chained_column_dominance(l: &SparseMatrix, w: &[f64]) -> bool {
    let n = l.nrows();
    let mut sum = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    for (r, c, v) in l.iter() {
        sum[c] += w[r] * v;
        magnitude[c] += (w[r] * v).abs();
    }
    let diag = l.diagonal();
    if (0..n).any(|j| diag[j] <= 0.0 || sum[j] < -COLUMN_SUM_TOL * magnitude[j]) {
        return false;
    }
    let mut reached: Vec<bool> = (0..n).map(|j| sum[j] > COLUMN_SUM_TOL * magnitude[j]).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&j| reached[j]).collect();
    while let Some(k) = queue.pop_front() {
        let (cols, vals) = l.row(k);
        for (&j, &v) in cols.iter().zip(vals) {
            if v != 0.0 && !reached[j] {
                reached[j] = true;
                queue.push_back(j);
            }
        }
    }
    reached.into_iter().all(|r| r)
}

/// A few steps of inverse iteration for the smallest eigenvalue of the
/// symmetric positive definite `m`.
fn smallest_eigenvalue(m: &SparseMatrix, f: &SparseLdu) -> f64 {
    let n = m.nrows();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7919) % 101) as f64).collect();
    let mut lambda = f64::NAN;
    for _ in 0..12 {
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y = f.solve(&x);
        let mx = m.matvec(&x);
        lambda = dot(&x, &mx);
        x = y;
    }
    lambda
}

/// Test hook: negate the off-diagonal entries of row `row`, planting positive
/// off-diagonals as a sign-flipped weight would.
#[doc(hidden)]
pub fn inject_sign_flip(system: &mut DiscreteSystem, row: usize) {
    let l = &system.l;
    let mut b = TripletBuilder::with_capacity(l.nrows(), l.ncols(), l.nnz());
    for (r, c, v) in l.iter() {
        b.push(r, c, if r == row && c != r { -v } else { v });
    }
    system.l = b.build();
}

/// Incidence and operators for measuring errors without a full discretization.
pub fn operators(mesh: &DualMesh) -> MimeticOperators {
    MimeticOperators::new(mesh, &build_incidence(mesh))
}
