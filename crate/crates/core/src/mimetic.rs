//! Signed incidence matrices and the standard mimetic operators.
//!
//! In two dimensions the six operators of the three-dimensional complex
//! collapse to four:
//!
//! * `grad_D`: vertex values -> primal edges, `D_e^-1 G`
//! * `curl_D`: primal edges -> triangles, `D_D^-1 K D_e`
//! * `curl_V`: triangles -> primal edges (through the dual edges), `D_dV^-1 K^T`
//! * `div_D`: primal-edge fluxes -> dual cells, `D_V^-1 G^T D_dV`
//!
//! The dual sequence `curl_V`, `div_D` plays the role of the Voronoi
//! gradient/divergence pair after the index collapse, so `grad_V` and `div_V`
//! are not built.

use crate::dualmesh::DualMesh;
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Integer signed incidence data of the primal mesh.
#[derive(Clone, Debug)]
pub struct IncidenceSet {
    /// Edge-vertex incidence: `-1` at the lower vertex index, `+1` at the higher.
    pub g: SparseMatrix,
    /// Triangle-edge incidence: `+1` when the edge tangent follows the
    /// counterclockwise traversal of the triangle.
    pub k: SparseMatrix,
    g_int: Vec<[(usize, i8); 2]>,
    k_int: Vec<[(usize, i8); 3]>,
    num_vertices: usize,
}

impl IncidenceSet {
    pub fn new(mesh: &DualMesh) -> Self {
        let p = &mesh.primal;
        let g_int: Vec<[(usize, i8); 2]> = p.edges.iter().map(|&[i, j]| [(i, -1), (j, 1)]).collect();
        let k_int: Vec<[(usize, i8); 3]> = p
            .triangles
            .iter()
            .zip(&p.triangle_edges)
            .map(|(t, te)| {
                let mut row = [(0usize, 0i8); 3];
                for l in 0..3 {
                    let sign = if t[l] < t[(l + 1) % 3] { 1 } else { -1 };
                    row[l] = (te[l], sign);
                }
                row
            })
            .collect();

        let mut gb = TripletBuilder::with_capacity(p.num_edges(), p.num_vertices(), 2 * p.num_edges());
        for (e, row) in g_int.iter().enumerate() {
            for &(v, s) in row {
                gb.push(e, v, f64::from(s));
            }
        }
        let mut kb = TripletBuilder::with_capacity(p.num_triangles(), p.num_edges(), 3 * p.num_triangles());
        for (t, row) in k_int.iter().enumerate() {
            for &(e, s) in row {
                kb.push(t, e, f64::from(s));
            }
        }
        Self {
            g: gb.build(),
            k: kb.build(),
            g_int,
            k_int,
            num_vertices: p.num_vertices(),
        }
    }

    /// `max |K G|` evaluated in integer arithmetic.
    pub fn kg_max_abs(&self) -> i64 {
        let mut acc = vec![0i64; self.num_vertices];
        let mut worst = 0;
        for row in &self.k_int {
            let mut touched = Vec::with_capacity(6);
            for &(e, ks) in row {
                for &(v, gs) in &self.g_int[e] {
                    acc[v] += i64::from(ks) * i64::from(gs);
                    touched.push(v);
                }
            }
            for v in touched {
                worst = worst.max(acc[v].abs());
                acc[v] = 0;
            }
        }
        worst
    }
}

pub fn build_incidence(mesh: &DualMesh) -> IncidenceSet {
    IncidenceSet::new(mesh)
}

/// Standard (unshifted) mimetic operators.
#[derive(Clone, Debug)]
pub struct MimeticOperators {
    pub grad_d: SparseMatrix,
    pub curl_d: SparseMatrix,
    pub div_d: SparseMatrix,
    pub curl_v: SparseMatrix,
}

impl MimeticOperators {
    pub fn new(mesh: &DualMesh, inc: &IncidenceSet) -> Self {
        Self {
            grad_d: build_grad_d(mesh, inc),
            curl_d: build_curl_d(mesh, inc),
            div_d: build_div_d(mesh, inc),
            curl_v: build_curl_v(mesh, inc),
        }
    }
}

fn inverse(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| 1.0 / x).collect()
}

/// `(grad_D u)_e = (u_j - u_i) / |e|`.
pub fn build_grad_d(mesh: &DualMesh, inc: &IncidenceSet) -> SparseMatrix {
    inc.g.scale(Some(&inverse(&mesh.metrics.edge_length)), None)
}

/// Circulation per unit area: `(curl_D u)_k = |D_k|^-1 sum_e K_ke |e| u_e`.
pub fn build_curl_d(mesh: &DualMesh, inc: &IncidenceSet) -> SparseMatrix {
    inc.k.scale(
        Some(&inverse(&mesh.metrics.triangle_area)),
        Some(&mesh.metrics.edge_length),
    )
}

/// Net flux through the dual cell boundary: `D_V^-1 G^T D_dV`.
///
/// With `G^T` the sign is that of the outward flux of `-u`, so `div_D grad_D`
/// is positive semi-definite (a discrete `-div grad`).
pub fn build_div_d(mesh: &DualMesh, inc: &IncidenceSet) -> SparseMatrix {
    inc.g.transpose().scale(
        Some(&inverse(&mesh.metrics.cell_area)),
        Some(&mesh.metrics.dual_edge_length),
    )
}

/// Difference of triangle values across each dual edge:
/// `(curl_V w)_e = (w_left - w_right) / |dV_e|`.
///
/// The third metric factor of the three-dimensional form (dual edge lengths
/// paired with Delaunay faces) is the identity on triangle scalars in 2D.
pub fn build_curl_v(mesh: &DualMesh, inc: &IncidenceSet) -> SparseMatrix {
    inc.k
        .transpose()
        .scale(Some(&inverse(&mesh.metrics.dual_edge_length)), None)
}

/// Lumped edge mass: the diamond area `|e| |dV| / 2`.
pub fn edge_mass(mesh: &DualMesh) -> Vec<f64> {
    mesh.metrics
        .edge_length
        .iter()
        .zip(&mesh.metrics.dual_edge_length)
        .map(|(a, b)| 0.5 * a * b)
        .collect()
}

/// Tangential samples `u(midpoint) . T/|T|` of a vector field on every edge.
pub fn sample_tangential(mesh: &DualMesh, field: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    (0..mesh.num_edges())
        .map(|e| {
            let t = mesh.primal.edge_vector(e);
            let len = mesh.metrics.edge_length[e];
            let u = field(mesh.primal.edge_midpoint(e));
            (u[0] * t[0] + u[1] * t[1]) / len
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualmesh::{build_hexagon_mesh, build_square_mesh, import_mesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(levels: usize) -> (DualMesh, IncidenceSet, MimeticOperators) {
        let m = build_hexagon_mesh(levels);
        let inc = build_incidence(&m);
        let ops = MimeticOperators::new(&m, &inc);
        (m, inc, ops)
    }

    fn metric_ratio(m: &DualMesh) -> f64 {
        let all: Vec<f64> = m
            .metrics
            .edge_length
            .iter()
            .chain(&m.metrics.dual_edge_length)
            .chain(&m.metrics.triangle_area)
            .chain(&m.metrics.cell_area)
            .copied()
            .collect();
        let max = all.iter().copied().fold(0.0, f64::max);
        let min = all.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    #[test]
    fn incidence_shapes_and_rows() {
        let (_, inc, _) = setup(0);
        assert_eq!(inc.g.shape(), (12, 7));
        assert_eq!(inc.k.shape(), (6, 12));
        for e in 0..12 {
            let (_, vals) = inc.g.row(e);
            let mut v = vals.to_vec();
            v.sort_by(f64::total_cmp);
            assert_eq!(v, vec![-1.0, 1.0]);
        }
        assert_eq!(inc.kg_max_abs(), 0);
        assert_eq!(inc.k.matmul(&inc.g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn single_triangle_signs() {
        // vertices 0 -> 1 -> 2 counterclockwise: edges (0,1), (1,2) follow the
        // traversal, (0,2) runs against it
        let m = import_mesh(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.8]], vec![[0, 1, 2]]).unwrap();
        let inc = build_incidence(&m);
        assert_eq!(m.primal.edges, vec![[0, 1], [0, 2], [1, 2]]);
        assert_eq!(inc.k.to_dense(), vec![vec![1.0, -1.0, 1.0]]);
    }

    #[test]
    fn grad_examples() {
        let (m, _, ops) = setup(0);
        let c = vec![3.5; m.num_vertices()];
        assert!(ops.grad_d.matvec(&c).iter().all(|v| v.abs() < 1e-15));

        let x: Vec<f64> = m.primal.vertices.iter().map(|p| p[0]).collect();
        let g = ops.grad_d.matvec(&x);
        for e in 0..m.num_edges() {
            let t = m.primal.edge_vector(e);
            let tx = t[0] / m.metrics.edge_length[e];
            assert!((g[e] - tx).abs() < 1e-15);
        }
        // edge (0,0) -> (1,0) with u = (0, 1)
        let e = m.primal.edges.iter().position(|&e| e == [0, 1]).unwrap();
        let mut u = vec![0.0; 7];
        u[1] = 1.0;
        assert_eq!(ops.grad_d.matvec(&u)[e], 1.0);
    }

    #[test]
    fn curl_examples() {
        let (m, _, ops) = setup(2);
        let cg = ops.curl_d.matmul(&ops.grad_d).unwrap();
        assert!(cg.max_abs() <= 1e-13 * metric_ratio(&m));

        let uniform = sample_tangential(&m, |_| [1.0, 0.0]);
        assert!(ops.curl_d.matvec(&uniform).iter().all(|v| v.abs() < 1e-13));

        let rotation = sample_tangential(&m, |p| [-0.5 * p[1], 0.5 * p[0]]);
        for v in ops.curl_d.matvec(&rotation) {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn div_examples() {
        let (m, _, ops) = setup(2);
        let dc = ops.div_d.matmul(&ops.curl_v).unwrap();
        assert!(dc.max_abs() <= 1e-13 * metric_ratio(&m));

        let zero = vec![0.0; m.num_edges()];
        assert!(ops.div_d.matvec(&zero).iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..m.num_edges())
            .map(|e| {
                if m.primal.boundary_edge[e] {
                    0.0
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        let d = ops.div_d.matvec(&u);
        let total: f64 = d.iter().zip(&m.metrics.cell_area).map(|(a, b)| a * b).sum();
        assert!(total.abs() < 1e-13);
    }

    #[test]
    fn curl_v_adjointness() {
        let (m, _, ops) = setup(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<f64> = (0..m.num_edges())
            .map(|e| {
                if m.primal.boundary_edge[e] {
                    0.0
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        let w: Vec<f64> = (0..m.num_triangles()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs: f64 = ops
            .curl_d
            .matvec(&u)
            .iter()
            .zip(&w)
            .zip(&m.metrics.triangle_area)
            .map(|((a, b), c)| a * b * c)
            .sum();
        let rhs: f64 = u
            .iter()
            .zip(ops.curl_v.matvec(&w))
            .zip(edge_mass(&m))
            .map(|((a, b), c)| a * b * c)
            .sum();
        // the diamond mass carries a factor 1/2
        assert!((lhs - 2.0 * rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");

        let constant = vec![2.0; m.num_triangles()];
        let cv = ops.curl_v.matvec(&constant);
        for e in m.primal.interior_edges() {
            assert!(cv[e].abs() < 1e-12);
        }
    }

    #[test]
    fn square_mesh_sequence() {
        let m = build_square_mesh(2).unwrap();
        let inc = build_incidence(&m);
        let ops = MimeticOperators::new(&m, &inc);
        assert_eq!(inc.kg_max_abs(), 0);
        let r = metric_ratio(&m);
        assert!(ops.curl_d.matmul(&ops.grad_d).unwrap().max_abs() <= 1e-13 * r);
        assert!(ops.div_d.matmul(&ops.curl_v).unwrap().max_abs() <= 1e-13 * r);
    }
}
