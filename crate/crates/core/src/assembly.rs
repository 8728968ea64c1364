//! Assembly of the exponentially fitted scalar and vector systems.
//!
//! Scalar problem, unknowns at vertices:
//!
//! ```text
//! -div(alpha grad u + beta u) + gamma u = f,   u = g on the boundary
//! L = D_V^-1 G^T W G E_x + D_gamma,   W = D_dV D_alpha E_e^-1 D_e^-1
//! ```
//!
//! Vector problem in 2D, unknowns are tangential components on edges:
//!
//! ```text
//! rot(alpha curl u + beta x u) + gamma u = f,   u . t = g . t on the boundary
//! L = curl_V D_alpha,tri J1 + D_gamma,edge
//! ```
//!
//! with `curl u = d1 u2 - d2 u1`, `beta x u = beta1 u2 - beta2 u1` and
//! `rot w = (d2 w, -d1 w)`. Boundary unknowns are eliminated and their
//! contribution is moved to the right-hand side.
//!
//! A divergence-free part of the scalar convection, `beta = alpha grad phi +
//! rot_part`, is by default carried as a drift along each edge (see
//! [`RotTreatment`]); the operator then loses its diagonal symmetrizer but
//! keeps zero column sums in the flux part.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dualmesh::{DualMesh, Point};
use crate::expfit::{
    build_exp_averages, build_flux_operators, edge_exp_average_ln, ExpAverages, FluxOperators, PotentialField,
    ScalarFn, VectorFn, STABLE_SWITCH,
};
use crate::mimetic::{build_incidence, IncidenceSet, MimeticOperators};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::{MfdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    ScalarGrad,
    VectorCurl,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::ScalarGrad => "scalar_grad",
            ProblemKind::VectorCurl => "vector_curl",
        }
    }
}

/// How a divergence-free `rot_part` of the convection enters the scalar
/// scheme. The vector problem always uses [`RotTreatment::Denominator`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotTreatment {
    /// The averages are fitted to `phi` alone; each edge flux is then fitted
    /// to the full drift, the potential difference plus the line integral of
    /// `rot_part / alpha`. Consistent, and the operator stays an M-matrix, but
    /// it has no diagonal symmetrizer.
    #[default]
    EdgeDrift,
    /// `rot_part / alpha` is added to `theta` in the quadrature denominators
    /// only. This rescales the diffusive edge flux by an O(1) factor, so the
    /// scheme is not consistent when `rot_part` is comparable to `beta`.
    Denominator,
}

/// A scalar or vector field on the plane.
#[derive(Clone)]
pub enum Field {
    Scalar(ScalarFn),
    Vector(VectorFn),
}

impl Field {
    pub fn scalar(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Field::Scalar(Arc::new(f))
    }

    pub fn vector(f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Field::Vector(Arc::new(f))
    }

    fn as_scalar(&self) -> Result<&ScalarFn> {
        match self {
            Field::Scalar(f) => Ok(f),
            Field::Vector(_) => Err(MfdError::KindMismatch {
                expected: "scalar field",
            }),
        }
    }

    fn as_vector(&self) -> Result<&VectorFn> {
        match self {
            Field::Vector(f) => Ok(f),
            Field::Scalar(_) => Err(MfdError::KindMismatch {
                expected: "vector field",
            }),
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Scalar(_) => f.write_str("Field::Scalar"),
            Field::Vector(_) => f.write_str("Field::Vector"),
        }
    }
}

/// Coefficients, data and potential of one boundary value problem.
///
/// `phi` must satisfy `grad phi = beta / alpha`; the quadrature denominators
/// use `beta / alpha` (plus `rot_part`, when present) sampled at edge midpoints.
#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub alpha: ScalarFn,
    pub beta: VectorFn,
    pub gamma: ScalarFn,
    pub source: Field,
    pub phi: ScalarFn,
    pub rot_part: Option<VectorFn>,
    pub rot_treatment: RotTreatment,
    /// Scalar trace for the scalar problem; a vector field whose tangential
    /// component is imposed for the vector problem.
    pub dirichlet: Field,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("kind", &self.kind)
            .field("source", &self.source)
            .field("rot_part", &self.rot_part.is_some())
            .field("rot_treatment", &self.rot_treatment)
            .field("dirichlet", &self.dirichlet)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Scalar problem with homogeneous Dirichlet data.
    pub fn scalar(
        alpha: impl Fn(Point) -> f64 + Send + Sync + 'static,
        beta: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        gamma: impl Fn(Point) -> f64 + Send + Sync + 'static,
        source: impl Fn(Point) -> f64 + Send + Sync + 'static,
        phi: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: ProblemKind::ScalarGrad,
            alpha: Arc::new(alpha),
            beta: Arc::new(beta),
            gamma: Arc::new(gamma),
            source: Field::scalar(source),
            phi: Arc::new(phi),
            rot_part: None,
            rot_treatment: RotTreatment::default(),
            dirichlet: Field::scalar(|_| 0.0),
        }
    }

    /// Vector problem with homogeneous tangential data.
    pub fn vector(
        alpha: impl Fn(Point) -> f64 + Send + Sync + 'static,
        beta: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        gamma: impl Fn(Point) -> f64 + Send + Sync + 'static,
        source: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        phi: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: ProblemKind::VectorCurl,
            alpha: Arc::new(alpha),
            beta: Arc::new(beta),
            gamma: Arc::new(gamma),
            source: Field::vector(source),
            phi: Arc::new(phi),
            rot_part: None,
            rot_treatment: RotTreatment::default(),
            dirichlet: Field::vector(|_| [0.0, 0.0]),
        }
    }

    pub fn with_dirichlet(mut self, data: Field) -> Self {
        self.dirichlet = data;
        self
    }

    pub fn with_rot_part(mut self, rot: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.rot_part = Some(Arc::new(rot));
        self
    }

    pub fn with_rot_treatment(mut self, treatment: RotTreatment) -> Self {
        self.rot_treatment = treatment;
        self
    }

    /// Whether the scalar edge fluxes carry the rotational drift.
    pub fn uses_edge_drift(&self) -> bool {
        self.kind == ProblemKind::ScalarGrad && self.rot_part.is_some() && self.rot_treatment == RotTreatment::EdgeDrift
    }

    /// `phi` with `theta = beta / alpha`; a divergence-free `rot_part` of the
    /// convection enters the quadrature denominators as `rot_part / alpha`.
    pub fn potential(&self) -> PotentialField {
        let (alpha, beta) = (self.alpha.clone(), self.beta.clone());
        PotentialField {
            phi: self.phi.clone(),
            theta: Arc::new(move |p| {
                let (a, b) = (alpha(p), beta(p));
                [b[0] / a, b[1] / a]
            }),
            rot_part: self.rot_part.clone().map(|rot| {
                let alpha = self.alpha.clone();
                let scaled: VectorFn = Arc::new(move |p| {
                    let (a, r) = (alpha(p), rot(p));
                    [r[0] / a, r[1] / a]
                });
                scaled
            }),
        }
    }

    /// The potential the exponential averages are fitted to: [`Self::potential`],
    /// without the rotational part when the edge fluxes carry it instead.
    pub fn fitting_potential(&self) -> PotentialField {
        let mut pot = self.potential();
        if self.uses_edge_drift() {
            pot.rot_part = None;
        }
        pot
    }

    /// Full convection field `beta + rot_part`.
    pub fn convection(&self, p: Point) -> [f64; 2] {
        let b = (self.beta)(p);
        match &self.rot_part {
            Some(r) => {
                let r = r(p);
                [b[0] + r[0], b[1] + r[1]]
            }
            None => b,
        }
    }
}

/// Sampled coefficient values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientMatrices {
    /// `alpha` at edge midpoints.
    pub d_alpha_edge: Vec<f64>,
    /// `alpha` at triangle centroids.
    pub d_alpha_tri: Vec<f64>,
    /// `gamma` at vertices.
    pub d_gamma_node: Vec<f64>,
    /// `gamma` at edge midpoints.
    pub d_gamma_edge: Vec<f64>,
    /// Non-fatal findings, e.g. negative reaction samples.
    pub warnings: Vec<String>,
}

pub fn sample_coefficients(mesh: &DualMesh, spec: &ProblemSpec) -> Result<CoefficientMatrices> {
    let p = &mesh.primal;
    let mids: Vec<Point> = (0..p.num_edges()).map(|e| p.edge_midpoint(e)).collect();
    let cents: Vec<Point> = (0..p.num_triangles()).map(|k| p.centroid(k)).collect();
    let positive = |pts: &[Point]| -> Result<Vec<f64>> {
        pts.iter()
            .map(|&x| {
                let a = (spec.alpha)(x);
                if a > 0.0 && a.is_finite() {
                    Ok(a)
                } else {
                    Err(MfdError::NonpositiveDiffusion { value: a, at: x })
                }
            })
            .collect()
    };
    let d_alpha_edge = positive(&mids)?;
    let d_alpha_tri = positive(&cents)?;
    let d_gamma_node: Vec<f64> = p.vertices.iter().map(|&x| (spec.gamma)(x)).collect();
    let d_gamma_edge: Vec<f64> = mids.iter().map(|&x| (spec.gamma)(x)).collect();

    let mut warnings = Vec::new();
    let negative = d_gamma_node.iter().chain(&d_gamma_edge).filter(|&&g| g < 0.0).count();
    if negative > 0 {
        warnings.push(format!(
            "reaction coefficient is negative at {negative} sample points; the monotonicity guarantee does not apply"
        ));
    }
    if d_gamma_node.iter().chain(&d_gamma_edge).any(|g| !g.is_finite()) {
        return Err(MfdError::NonfiniteInput {
            entity: Some("reaction coefficient".into()),
        });
    }
    Ok(CoefficientMatrices {
        d_alpha_edge,
        d_alpha_tri,
        d_gamma_node,
        d_gamma_edge,
        warnings,
    })
}

/// Interior/boundary bookkeeping for the unknowns of one system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DofMap {
    /// Global entity index of every interior unknown.
    pub interior: Vec<usize>,
    /// Interior index of every global entity, `None` on the boundary.
    pub global_to_interior: Vec<Option<usize>>,
    /// Dirichlet values on boundary entities, zero elsewhere.
    pub boundary_values: Vec<f64>,
}

impl DofMap {
    fn new(boundary: &[bool], values: Vec<f64>) -> Self {
        let mut interior = Vec::new();
        let global_to_interior = boundary
            .iter()
            .enumerate()
            .map(|(g, &b)| {
                if b {
                    None
                } else {
                    interior.push(g);
                    Some(interior.len() - 1)
                }
            })
            .collect();
        let boundary_values = values
            .into_iter()
            .zip(boundary)
            .map(|(v, &b)| if b { v } else { 0.0 })
            .collect();
        Self {
            interior,
            global_to_interior,
            boundary_values,
        }
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn num_global(&self) -> usize {
        self.global_to_interior.len()
    }
}

/// A field over all vertices (scalar) or all edges (vector).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteField {
    pub kind: ProblemKind,
    pub values: Vec<f64>,
}

/// The linear system on interior unknowns.
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    pub kind: ProblemKind,
    pub l: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Logarithms of the per-edge weights `W` of the scalar factorisation,
    /// shifted by the gauge of the averages. Empty for the vector problem and
    /// when the edge fluxes carry a rotational drift.
    pub ln_w: Vec<f64>,
    pub dofs: DofMap,
    /// Contribution of the Dirichlet data already subtracted from `rhs`.
    pub lift: Vec<f64>,
    /// Logarithm of a positive diagonal `s` (interior unknowns) such that
    /// `diag(s) L` is symmetric. Empty when no such diagonal exists (edge
    /// fluxes with a rotational drift).
    pub ln_symmetrizer: Vec<f64>,
    /// Scalar problem: dual cell areas of the interior unknowns, the weights
    /// `w` for which `diag(w) L` has nonnegative column sums when `gamma >= 0`.
    /// Empty for the vector problem.
    pub column_weights: Vec<f64>,
}

impl DiscreteSystem {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    /// Combine interior solution values with the boundary data.
    pub fn expand(&self, interior_values: &[f64]) -> Result<DiscreteField> {
        if interior_values.len() != self.size() {
            return Err(MfdError::Dimension(format!(
                "solution has {} entries, system has {}",
                interior_values.len(),
                self.size()
            )));
        }
        let mut values = self.dofs.boundary_values.clone();
        for (&g, &v) in self.dofs.interior.iter().zip(interior_values) {
            values[g] = v;
        }
        Ok(DiscreteField {
            kind: self.kind,
            values,
        })
    }

    /// Restrict a global field to the interior unknowns.
    pub fn restrict(&self, field: &[f64]) -> Vec<f64> {
        self.dofs.interior.iter().map(|&g| field[g]).collect()
    }
}

fn eliminate(
    kind: ProblemKind,
    global: &SparseMatrix,
    mut rhs: Vec<f64>,
    dofs: DofMap,
    ln_w: Vec<f64>,
    ln_symmetrizer_global: &[f64],
    column_weights_global: &[f64],
) -> DiscreteSystem {
    let n = dofs.num_interior();
    let mut b = TripletBuilder::with_capacity(n, n, global.nnz());
    let mut lift = vec![0.0; n];
    for (r, &g) in dofs.interior.iter().enumerate() {
        let (cols, vals) = global.row(g);
        for (&c, &v) in cols.iter().zip(vals) {
            match dofs.global_to_interior[c] {
                Some(ci) => b.push(r, ci, v),
                None => lift[r] += v * dofs.boundary_values[c],
            }
        }
    }
    let rhs_interior: Vec<f64> = dofs.interior.iter().zip(&lift).map(|(&g, l)| rhs[g] - l).collect();
    rhs.clear();
    let pick = |v: &[f64]| -> Vec<f64> {
        if v.is_empty() {
            Vec::new()
        } else {
            dofs.interior.iter().map(|&g| v[g]).collect()
        }
    };
    let ln_symmetrizer = pick(ln_symmetrizer_global);
    let column_weights = pick(column_weights_global);
    DiscreteSystem {
        kind,
        l: b.build(),
        rhs: rhs_interior,
        ln_w,
        dofs,
        lift,
        ln_symmetrizer,
        column_weights,
    }
}

/// `G^T diag(|dV| alpha) J0`, i.e. `D_V L` without reaction, over all vertices.
///
/// Each off-diagonal entry is a single product of positive factors with a
/// minus sign, so the sign pattern is exact.
pub fn scalar_flux_matrix(mesh: &DualMesh, flux: &FluxOperators, coeffs: &CoefficientMatrices) -> SparseMatrix {
    let p = &mesh.primal;
    let n = p.num_vertices();
    let mut b = TripletBuilder::with_capacity(n, n, 4 * p.num_edges());
    for (e, &[i, j]) in p.edges.iter().enumerate() {
        let a = mesh.metrics.dual_edge_length[e] * coeffs.d_alpha_edge[e];
        let (cols, vals) = flux.j0.row(e);
        let mut ji = 0.0;
        let mut jj = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            if c == i {
                ji = v;
            } else if c == j {
                jj = v;
            }
        }
        b.push(i, i, -(a * ji));
        b.push(i, j, -(a * jj));
        b.push(j, i, a * ji);
        b.push(j, j, a * jj);
    }
    b.build()
}

/// Line integral of `rot / alpha` along every edge, from the lower to the
/// higher vertex index (two-point Gauss).
fn edge_drift(mesh: &DualMesh, rot: &VectorFn, alpha: &ScalarFn) -> Result<Vec<f64>> {
    let scaled = |x: Point| {
        let (r, a) = (rot(x), alpha(x));
        [r[0] / a, r[1] / a]
    };
    let rho: Vec<f64> = edge_tangential_average(mesh, &scaled)
        .iter()
        .zip(&mesh.metrics.edge_length)
        .map(|(v, l)| v * l)
        .collect();
    match rho.iter().position(|v| !v.is_finite()) {
        Some(e) => Err(MfdError::NonfiniteInput {
            entity: Some(format!("rotational drift on edge {e}")),
        }),
        None => Ok(rho),
    }
}

/// `D_V L` without reaction when the edge fluxes carry the drift `rho`.
///
/// On edge `(i, j)` the flux is fitted to the potential pair
/// `(phi_i - rho/2, phi_j + rho/2)`, whose difference is the full drift along
/// the edge; with `rho = 0` this is exactly [`scalar_flux_matrix`]. Both
/// off-diagonal entries are negative and every edge contributes zero to each
/// column sum.
pub fn drift_flux_matrix(
    mesh: &DualMesh,
    avg: &ExpAverages,
    coeffs: &CoefficientMatrices,
    rho: &[f64],
) -> Result<SparseMatrix> {
    let p = &mesh.primal;
    let n = p.num_vertices();
    let mut b = TripletBuilder::with_capacity(n, n, 4 * p.num_edges());
    for (e, &[i, j]) in p.edges.iter().enumerate() {
        let (fi, fj) = (avg.ln_node[i] - 0.5 * rho[e], avg.ln_node[j] + 0.5 * rho[e]);
        let delta = fj - fi;
        let mut tdt = avg.theta_dot_t[e] + rho[e];
        if delta.abs() > STABLE_SWITCH && (tdt == 0.0 || tdt.signum() != delta.signum()) {
            tdt = delta;
        }
        let (ln_e, _) = edge_exp_average_ln(fi, fj, tdt).map_err(|err| err.at_entity(format!("edge {e}")))?;
        let len = mesh.metrics.edge_length[e];
        let a = mesh.metrics.dual_edge_length[e] * coeffs.d_alpha_edge[e];
        let ci = a * (fi - ln_e).exp() / len;
        let cj = a * (fj - ln_e).exp() / len;
        b.push(i, i, ci);
        b.push(i, j, -cj);
        b.push(j, i, -ci);
        b.push(j, j, cj);
    }
    Ok(b.build())
}

/// Assemble the scalar system on interior vertices.
pub fn assemble_scalar(
    mesh: &DualMesh,
    avg: &ExpAverages,
    flux: &FluxOperators,
    coeffs: &CoefficientMatrices,
    spec: &ProblemSpec,
) -> Result<DiscreteSystem> {
    if spec.kind != ProblemKind::ScalarGrad {
        return Err(MfdError::KindMismatch {
            expected: "scalar_grad",
        });
    }
    let p = &mesh.primal;
    let source = spec.source.as_scalar()?;
    let data = spec.dirichlet.as_scalar()?;

    let inv_area: Vec<f64> = mesh.metrics.cell_area.iter().map(|a| 1.0 / a).collect();
    let drift = match &spec.rot_part {
        Some(rot) if spec.uses_edge_drift() => Some(edge_drift(mesh, rot, &spec.alpha)?),
        _ => None,
    };
    let flux_matrix = match &drift {
        Some(rho) => drift_flux_matrix(mesh, avg, coeffs, rho)?,
        None => scalar_flux_matrix(mesh, flux, coeffs),
    };
    let flux_part = flux_matrix.scale(Some(&inv_area), None);
    let global = flux_part.add_scaled(&SparseMatrix::from_diagonal(&coeffs.d_gamma_node), 1.0)?;

    let rhs: Vec<f64> = p.vertices.iter().map(|&x| source(x)).collect();
    let values: Vec<f64> = p.vertices.iter().map(|&x| data(x)).collect();
    if rhs.iter().chain(&values).any(|v| !v.is_finite()) {
        return Err(MfdError::NonfiniteInput {
            entity: Some("source or boundary data".into()),
        });
    }
    let (ln_w, ln_sym) = if drift.is_some() {
        (Vec::new(), Vec::new())
    } else {
        let m = &mesh.metrics;
        let ln_w = (0..p.num_edges())
            .map(|e| (m.dual_edge_length[e] * coeffs.d_alpha_edge[e] / m.edge_length[e]).ln() - avg.ln_edge[e])
            .collect();
        let ln_sym = avg.ln_node.iter().zip(&m.cell_area).map(|(l, a)| l + a.ln()).collect();
        (ln_w, ln_sym)
    };
    let dofs = DofMap::new(&p.boundary_vertex, values);
    Ok(eliminate(
        ProblemKind::ScalarGrad,
        &global,
        rhs,
        dofs,
        ln_w,
        &ln_sym,
        &mesh.metrics.cell_area,
    ))
}

/// Two-point Gauss average of `f . t` along every edge (unit tangent from the
/// lower to the higher vertex index).
pub fn edge_tangential_average(mesh: &DualMesh, f: &dyn Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let p = &mesh.primal;
    let off = 0.5 / 3f64.sqrt();
    p.edges
        .iter()
        .enumerate()
        .map(|(e, &[i, _])| {
            let a = p.vertices[i];
            let t = p.edge_vector(e);
            let len = mesh.metrics.edge_length[e];
            let mut s = 0.0;
            for q in [0.5 - off, 0.5 + off] {
                let x = [a[0] + q * t[0], a[1] + q * t[1]];
                let v = f(x);
                s += 0.5 * (v[0] * t[0] + v[1] * t[1]);
            }
            s / len
        })
        .collect()
}

/// Assemble the vector (curl-curl) system on interior edges.
pub fn assemble_vector_curl(
    mesh: &DualMesh,
    ops: &MimeticOperators,
    avg: &ExpAverages,
    flux: &FluxOperators,
    coeffs: &CoefficientMatrices,
    spec: &ProblemSpec,
) -> Result<DiscreteSystem> {
    if spec.kind != ProblemKind::VectorCurl {
        return Err(MfdError::KindMismatch {
            expected: "vector_curl",
        });
    }
    let p = &mesh.primal;
    let source = spec.source.as_vector()?;
    let data = spec.dirichlet.as_vector()?;
    let interior = p.interior_edges();
    if interior.iter().all(|&e| coeffs.d_gamma_edge[e] == 0.0) {
        return Err(MfdError::SingularReaction);
    }

    let curl_part = ops.curl_v.scale(None, Some(&coeffs.d_alpha_tri)).matmul(&flux.j1)?;
    let global = curl_part.add_scaled(&SparseMatrix::from_diagonal(&coeffs.d_gamma_edge), 1.0)?;

    let rhs = edge_tangential_average(mesh, &|x| source(x));
    let values = edge_tangential_average(mesh, &|x| data(x));
    if rhs.iter().chain(&values).any(|v| !v.is_finite()) {
        return Err(MfdError::NonfiniteInput {
            entity: Some("source or boundary data".into()),
        });
    }
    let m = &mesh.metrics;
    let ln_sym: Vec<f64> = (0..p.num_edges())
        .map(|e| avg.ln_edge[e] + (m.edge_length[e] * m.dual_edge_length[e]).ln())
        .collect();
    let dofs = DofMap::new(&p.boundary_edge, values);
    Ok(eliminate(
        ProblemKind::VectorCurl,
        &global,
        rhs,
        dofs,
        Vec::new(),
        &ln_sym,
        &[],
    ))
}

/// Result of comparing the assembled scalar operator with the product of its
/// factors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LumpingReport {
    /// `max |D_V L - G^T D_dV D_alpha J0|` over all vertices, reaction off.
    pub max_deviation: f64,
    /// `max |D_V L|`, for scale.
    pub scale: f64,
}

/// Check that the left-scaled scalar operator equals the product
/// `G^T D_dV D_alpha (E_e^-1 D_e^-1 G E_x)` evaluated through sparse products.
pub fn lumping_identity_check(
    mesh: &DualMesh,
    inc: &IncidenceSet,
    flux: &FluxOperators,
    coeffs: &CoefficientMatrices,
) -> Result<LumpingReport> {
    let assembled = scalar_flux_matrix(mesh, flux, coeffs);
    let weights: Vec<f64> = mesh
        .metrics
        .dual_edge_length
        .iter()
        .zip(&coeffs.d_alpha_edge)
        .map(|(d, a)| d * a)
        .collect();
    let product = inc.g.transpose().matmul(&flux.j0.scale(Some(&weights), None))?;
    let diff = assembled.add_scaled(&product, -1.0)?;
    Ok(LumpingReport {
        max_deviation: diff.max_abs(),
        scale: assembled.max_abs(),
    })
}

/// Every intermediate object of one discretisation.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub incidence: IncidenceSet,
    pub ops: MimeticOperators,
    pub averages: ExpAverages,
    pub flux: FluxOperators,
    pub coeffs: CoefficientMatrices,
    pub system: DiscreteSystem,
}

/// Run the whole pipeline: operators, averages, coefficients and assembly.
pub fn discretize(mesh: &DualMesh, spec: &ProblemSpec) -> Result<Discretization> {
    let incidence = build_incidence(mesh);
    let ops = MimeticOperators::new(mesh, &incidence);
    let averages = build_exp_averages(mesh, &spec.fitting_potential())?;
    let flux = build_flux_operators(&ops, &averages);
    let coeffs = sample_coefficients(mesh, spec)?;
    let system = match spec.kind {
        ProblemKind::ScalarGrad => assemble_scalar(mesh, &averages, &flux, &coeffs, spec)?,
        ProblemKind::VectorCurl => assemble_vector_curl(mesh, &ops, &averages, &flux, &coeffs, spec)?,
    };
    Ok(Discretization {
        incidence,
        ops,
        averages,
        flux,
        coeffs,
        system,
    })
}
