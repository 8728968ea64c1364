//! Mesh files, legacy VTK export and JSON reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::{DiscreteField, ProblemKind};
use crate::dualmesh::{import_mesh, DualMesh, Point};
use crate::{MfdError, Result};

/// Plain vertex/triangle lists, the on-disk mesh format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

impl MeshFile {
    pub fn from_mesh(mesh: &DualMesh) -> Self {
        Self {
            vertices: mesh.primal.vertices.clone(),
            triangles: mesh.primal.triangles.clone(),
        }
    }

    pub fn into_mesh(self) -> Result<DualMesh> {
        import_mesh(self.vertices, self.triangles)
    }
}

pub fn read_mesh_json(path: &Path) -> Result<DualMesh> {
    let text = fs::read_to_string(path).map_err(|e| MfdError::Io(format!("{}: {e}", path.display())))?;
    let file: MeshFile = serde_json::from_str(&text)?;
    file.into_mesh()
}

pub fn write_mesh_json(mesh: &DualMesh, path: &Path) -> Result<()> {
    write_json(&MeshFile::from_mesh(mesh), path)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| MfdError::Io(format!("{}: {e}", path.display())))
}

/// Lowest-order Whitney reconstruction of an edge field at each triangle
/// centroid, with the (constant) curl per triangle. Edge values are mean
/// tangential components along `v_j - v_i`.
pub fn reconstruct_cell_vectors(mesh: &DualMesh, values: &[f64]) -> (Vec<[f64; 2]>, Vec<f64>) {
    let p = &mesh.primal;
    let mut vectors = Vec::with_capacity(p.num_triangles());
    let mut curls = Vec::with_capacity(p.num_triangles());
    for (t, tri) in p.triangles.iter().enumerate() {
        let area = mesh.metrics.triangle_area[t];
        let x = tri.map(|v| p.vertices[v]);
        let grad_l: [[f64; 2]; 3] = std::array::from_fn(|a| {
            let (b, c) = (x[(a + 1) % 3], x[(a + 2) % 3]);
            [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)]
        });
        let mut u = [0.0; 2];
        let mut curl = 0.0;
        for &e in &p.triangle_edges[t] {
            let [i, j] = p.edges[e];
            let a = tri.iter().position(|&v| v == i).expect("edge in triangle");
            let b = tri.iter().position(|&v| v == j).expect("edge in triangle");
            let c = values[e] * mesh.metrics.edge_length[e];
            for d in 0..2 {
                u[d] += c * (grad_l[b][d] - grad_l[a][d]) / 3.0;
            }
            curl += 2.0 * c * (grad_l[a][0] * grad_l[b][1] - grad_l[a][1] * grad_l[b][0]);
        }
        vectors.push(u);
        curls.push(curl);
    }
    (vectors, curls)
}

/// Legacy ASCII VTK unstructured grid of the primal mesh. A scalar solution is
/// written as point data; a vector solution as cell vectors and cell curl.
/// Dual cell areas are always included.
pub fn vtk_string(mesh: &DualMesh, field: Option<&DiscreteField>, name: &str) -> Result<String> {
    let p = &mesh.primal;
    let (nv, nt) = (p.num_vertices(), p.num_triangles());
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{name}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for v in &p.vertices {
        let _ = writeln!(s, "{:.17e} {:.17e} 0", v[0], v[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in &p.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "5");
    }

    let _ = writeln!(s, "POINT_DATA {nv}");
    let _ = writeln!(s, "SCALARS dual_cell_area double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for a in &mesh.metrics.cell_area {
        let _ = writeln!(s, "{a:.17e}");
    }
    match field {
        Some(f) if f.kind == ProblemKind::ScalarGrad => {
            if f.values.len() != nv {
                return Err(MfdError::Dimension(format!(
                    "scalar field has {} values for {nv} vertices",
                    f.values.len()
                )));
            }
            let _ = writeln!(s, "SCALARS u double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for v in &f.values {
                let _ = writeln!(s, "{v:.17e}");
            }
        }
        Some(f) => {
            if f.values.len() != p.num_edges() {
                return Err(MfdError::Dimension(format!(
                    "edge field has {} values for {} edges",
                    f.values.len(),
                    p.num_edges()
                )));
            }
            let (vectors, curls) = reconstruct_cell_vectors(mesh, &f.values);
            let _ = writeln!(s, "CELL_DATA {nt}");
            let _ = writeln!(s, "VECTORS u double");
            for u in &vectors {
                let _ = writeln!(s, "{:.17e} {:.17e} 0", u[0], u[1]);
            }
            let _ = writeln!(s, "SCALARS curl_u double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for c in &curls {
                let _ = writeln!(s, "{c:.17e}");
            }
        }
        None => {}
    }
    Ok(s)
}

pub fn write_vtk(mesh: &DualMesh, field: Option<&DiscreteField>, name: &str, path: &Path) -> Result<()> {
    write_text(path, &vtk_string(mesh, field, name)?)
}
