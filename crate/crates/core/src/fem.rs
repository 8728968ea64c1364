//! Unstabilized piecewise-linear Galerkin solver for the scalar problem, the
//! baseline against which the fitted scheme is compared.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{DiscreteField, Field, ProblemKind, ProblemSpec};
use crate::dualmesh::DualMesh;
use crate::solve::direct_solve;
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::{MfdError, Result};

/// Largest system solved by dense LU when the sparse factorization without
/// pivoting breaks down.
pub const DENSE_FALLBACK_LIMIT: usize = 6000;

/// Solve `<alpha grad u + beta u, grad v> + <gamma u, v> = <f, v>` with P1
/// elements, edge-midpoint quadrature and nodal Dirichlet values.
pub fn reference_fem_scalar(mesh: &DualMesh, spec: &ProblemSpec) -> Result<DiscreteField> {
    if spec.kind != ProblemKind::ScalarGrad {
        return Err(MfdError::KindMismatch {
            expected: ProblemKind::ScalarGrad.as_str(),
        });
    }
    let (Field::Scalar(f), Field::Scalar(g)) = (&spec.source, &spec.dirichlet) else {
        return Err(MfdError::KindMismatch {
            expected: ProblemKind::ScalarGrad.as_str(),
        });
    };
    let p = &mesh.primal;
    let nv = p.num_vertices();
    let mut interior_index = vec![None; nv];
    let mut interior = Vec::new();
    for v in 0..nv {
        if !p.boundary_vertex[v] {
            interior_index[v] = Some(interior.len());
            interior.push(v);
        }
    }
    let boundary: Vec<f64> = (0..nv)
        .map(|v| if p.boundary_vertex[v] { g(p.vertices[v]) } else { 0.0 })
        .collect();
    if boundary.iter().any(|v| !v.is_finite()) {
        return Err(MfdError::NonfiniteInput {
            entity: Some("dirichlet data".into()),
        });
    }

    let n = interior.len();
    let mut a = TripletBuilder::with_capacity(n, n, 9 * p.num_triangles());
    let mut rhs = vec![0.0; n];
    for (t, tri) in p.triangles.iter().enumerate() {
        let x = tri.map(|v| p.vertices[v]);
        let area = mesh.metrics.triangle_area[t];
        let grad_l: [[f64; 2]; 3] = std::array::from_fn(|k| {
            let (b, c) = (x[(k + 1) % 3], x[(k + 2) % 3]);
            [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)]
        });
        let mut local = [[0.0; 3]; 3];
        let mut load = [0.0; 3];
        for q in 0..3 {
            // midpoint of the edge opposite vertex q
            let mut lam = [0.5; 3];
            lam[q] = 0.0;
            let pt = [
                lam[0] * x[0][0] + lam[1] * x[1][0] + lam[2] * x[2][0],
                lam[0] * x[0][1] + lam[1] * x[1][1] + lam[2] * x[2][1],
            ];
            let w = area / 3.0;
            let (alpha, beta, gamma, fq) = ((spec.alpha)(pt), spec.convection(pt), (spec.gamma)(pt), f(pt));
            if !(alpha.is_finite() && beta.iter().all(|b| b.is_finite()) && gamma.is_finite() && fq.is_finite()) {
                return Err(MfdError::NonfiniteInput {
                    entity: Some(format!("triangle {t}")),
                });
            }
            for r in 0..3 {
                let gr = grad_l[r];
                for c in 0..3 {
                    let gc = grad_l[c];
                    local[r][c] += w
                        * (alpha * (gc[0] * gr[0] + gc[1] * gr[1])
                            + lam[c] * (beta[0] * gr[0] + beta[1] * gr[1])
                            + gamma * lam[c] * lam[r]);
                }
                load[r] += w * fq * lam[r];
            }
        }
        for r in 0..3 {
            let Some(ri) = interior_index[tri[r]] else { continue };
            rhs[ri] += load[r];
            for c in 0..3 {
                match interior_index[tri[c]] {
                    Some(ci) => a.push(ri, ci, local[r][c]),
                    None => rhs[ri] -= local[r][c] * boundary[tri[c]],
                }
            }
        }
    }
    let a = a.build();
    let u = solve_general(&a, &rhs)?;
    let mut values = boundary;
    for (&v, &val) in interior.iter().zip(&u) {
        values[v] = val;
    }
    Ok(DiscreteField {
        kind: ProblemKind::ScalarGrad,
        values,
    })
}

/// Sparse factorization first; partially pivoted dense LU if that breaks down.
fn solve_general(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    match direct_solve(a, b, 1e-10) {
        Ok(x) => Ok(x),
        Err(err) if a.nrows() > DENSE_FALLBACK_LIMIT => Err(err),
        Err(_) => {
            let n = a.nrows();
            let mut dense = DMatrix::<f64>::zeros(n, n);
            for (r, c, v) in a.iter() {
                dense[(r, c)] = v;
            }
            dense
                .lu()
                .solve(&DVector::from_column_slice(b))
                .map(|x| x.as_slice().to_vec())
                .ok_or(MfdError::SingularMatrix(n))
        }
    }
}
