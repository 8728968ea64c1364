//! Primal Delaunay triangulations with their Voronoi duals.
//!
//! The primal mesh stores vertices, edges `(i, j)` with `i < j` and
//! counterclockwise triangles. The dual places one vertex at the circumcenter
//! of every triangle; each primal edge owns the dual edge joining the
//! circumcenters on either side (clipped at the edge midpoint on the domain
//! boundary), and each primal vertex owns the dual cell made of the diamond
//! halves around it.
//!
//! In two dimensions the Delaunay faces are the triangles themselves and the
//! Voronoi faces are the dual edges, so only four metric diagonals are kept:
//! primal edge lengths, dual edge lengths, triangle areas and dual cell areas.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{MfdError, Result};

pub type Point = [f64; 2];

/// Minimum barycentric coordinate a circumcenter must have inside its triangle.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot2(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross2(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Twice the signed area of `(a, b, c)`; positive when counterclockwise.
#[inline]
pub(crate) fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross2(sub(b, a), sub(c, a))
}

/// Circumcenter of the triangle `(a, b, c)`.
pub fn circumcenter(a: Point, b: Point, c: Point) -> Result<Point> {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let d = 2.0 * cross2(ab, ac);
    let scale = dot2(ab, ab).max(dot2(ac, ac));
    if !d.is_finite() || d.abs() <= 1e-14 * scale {
        return Err(MfdError::CollinearPoints(a, b, c));
    }
    let ab2 = dot2(ab, ab);
    let ac2 = dot2(ac, ac);
    let ux = (ac[1] * ab2 - ab[1] * ac2) / d;
    let uy = (ab[0] * ac2 - ac[0] * ab2) / d;
    Ok([a[0] + ux, a[1] + uy])
}

/// Barycentric coordinates of `p` with respect to `(a, b, c)`.
pub fn barycentric(p: Point, a: Point, b: Point, c: Point) -> [f64; 3] {
    let area = orient(a, b, c);
    [orient(p, b, c) / area, orient(a, p, c) / area, orient(a, b, p) / area]
}

/// Primal triangulation with edge/triangle connectivity.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalMesh {
    pub vertices: Vec<Point>,
    /// Edges `(i, j)` with `i < j`, sorted lexicographically.
    pub edges: Vec<[usize; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Edge ids of `(v0, v1)`, `(v1, v2)`, `(v2, v0)` for each triangle.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Adjacent triangles per edge: the one on the left of the tangent
    /// (traversed counterclockwise along `i -> j`) and the one on the right.
    pub edge_triangles: Vec<[Option<usize>; 2]>,
    pub boundary_vertex: Vec<bool>,
    pub boundary_edge: Vec<bool>,
}

impl PrimalMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Edge vector `x_j - x_i` (tangent pointing from lower to higher index).
    pub fn edge_vector(&self, e: usize) -> Point {
        let [i, j] = self.edges[e];
        sub(self.vertices[j], self.vertices[i])
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [i, j] = self.edges[e];
        midpoint(self.vertices[i], self.vertices[j])
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.triangle_points(k);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| !self.boundary_vertex[v]).collect()
    }

    pub fn interior_edges(&self) -> Vec<usize> {
        (0..self.num_edges()).filter(|&e| !self.boundary_edge[e]).collect()
    }

    /// Build connectivity from vertices and triangles, orienting every
    /// triangle counterclockwise.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(p) = vertices.iter().find(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(MfdError::InvalidMesh(format!("non-finite vertex {p:?}")));
        }
        let mut tris = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(MfdError::InvalidMesh(format!(
                    "triangle {k} references a vertex outside 0..{n}"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(MfdError::InvalidMesh(format!("triangle {k} repeats a vertex")));
            }
            let o = orient(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if o == 0.0 {
                return Err(MfdError::DegenerateDual {
                    triangle: k,
                    min_barycentric: f64::NEG_INFINITY,
                });
            }
            tris.push(if o > 0.0 { *t } else { [t[0], t[2], t[1]] });
        }

        let mut keys: Vec<[usize; 2]> = tris
            .iter()
            .flat_map(|t| {
                (0..3).map(move |l| {
                    let (a, b) = (t[l], t[(l + 1) % 3]);
                    [a.min(b), a.max(b)]
                })
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let index: HashMap<[usize; 2], usize> = keys.iter().enumerate().map(|(e, &k)| (k, e)).collect();

        let mut edge_triangles = vec![[None, None]; keys.len()];
        let mut triangle_edges = Vec::with_capacity(tris.len());
        for (k, t) in tris.iter().enumerate() {
            let mut te = [0usize; 3];
            for l in 0..3 {
                let (a, b) = (t[l], t[(l + 1) % 3]);
                let e = index[&[a.min(b), a.max(b)]];
                te[l] = e;
                // counterclockwise traversal a -> b agrees with the i -> j tangent
                let side = if a < b { 0 } else { 1 };
                if edge_triangles[e][side].is_some() {
                    return Err(MfdError::InvalidMesh(format!(
                        "edge ({}, {}) is shared by more than two triangles or inconsistently oriented",
                        keys[e][0], keys[e][1]
                    )));
                }
                edge_triangles[e][side] = Some(k);
            }
            triangle_edges.push(te);
        }

        let boundary_edge: Vec<bool> = edge_triangles
            .iter()
            .map(|s| s[0].is_none() || s[1].is_none())
            .collect();
        let mut boundary_vertex = vec![false; n];
        for (e, &b) in boundary_edge.iter().enumerate() {
            if b {
                boundary_vertex[keys[e][0]] = true;
                boundary_vertex[keys[e][1]] = true;
            }
        }
        let mut used = vec![false; n];
        for t in &tris {
            for &v in t {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MfdError::InvalidMesh(format!("vertex {v} belongs to no triangle")));
        }

        Ok(Self {
            vertices,
            edges: keys,
            triangles: tris,
            triangle_edges,
            edge_triangles,
            boundary_vertex,
            boundary_edge,
        })
    }

    /// Check the empty-circumcircle property across every interior edge.
    pub fn check_delaunay(&self) -> Result<()> {
        for (e, sides) in self.edge_triangles.iter().enumerate() {
            let (Some(left), Some(right)) = (sides[0], sides[1]) else {
                continue;
            };
            let [i, j] = self.edges[e];
            for (tri, other) in [(left, right), (right, left)] {
                let opposite = self.triangles[other]
                    .iter()
                    .copied()
                    .find(|&v| v != i && v != j)
                    .expect("triangle has a vertex off the shared edge");
                let [a, b, c] = self.triangle_points(tri);
                if in_circle(a, b, c, self.vertices[opposite]) {
                    return Err(MfdError::NotDelaunay {
                        triangle: tri,
                        vertex: opposite,
                    });
                }
            }
        }
        Ok(())
    }

    /// Uniform 4-way midpoint subdivision.
    pub fn refine(&self) -> Result<PrimalMesh> {
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        vertices.extend((0..self.num_edges()).map(|e| self.edge_midpoint(e)));
        let mut triangles = Vec::with_capacity(4 * self.num_triangles());
        for (t, te) in self.triangles.iter().zip(&self.triangle_edges) {
            let [a, b, c] = *t;
            let (ab, bc, ca) = (nv + te[0], nv + te[1], nv + te[2]);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        PrimalMesh::from_triangles(vertices, triangles)
    }
}

/// Strict in-circle test with a relative tolerance (cocircular points pass).
fn in_circle(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
    let scale = ad.max(bd).max(cd);
    let o = orient(a, b, c);
    det * o.signum() > 1e-12 * scale * scale
}

/// Diagonal metric data of the dual mesh pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshMetrics {
    /// Primal edge lengths `|e|`.
    pub edge_length: Vec<f64>,
    /// Dual edge lengths `|∂V|`.
    pub dual_edge_length: Vec<f64>,
    /// Triangle areas `|D|`.
    pub triangle_area: Vec<f64>,
    /// Dual cell areas `|V|`.
    pub cell_area: Vec<f64>,
}

/// Primal Delaunay mesh together with its Voronoi dual.
#[derive(Clone, Debug, PartialEq)]
pub struct DualMesh {
    pub primal: PrimalMesh,
    /// Circumcenter of each triangle.
    pub dual_vertices: Vec<Point>,
    /// Dual edge per primal edge, oriented so that its direction is the
    /// primal tangent rotated by +90 degrees.
    pub dual_edges: Vec<[Point; 2]>,
    /// Dual cell polygon per primal vertex (counterclockwise).
    pub dual_cells: Vec<Vec<Point>>,
    pub metrics: MeshMetrics,
}

impl DualMesh {
    /// Build the dual of a primal mesh, checking the Delaunay property and
    /// that every circumcenter lies strictly inside its triangle.
    pub fn new(primal: PrimalMesh) -> Result<Self> {
        primal.check_delaunay()?;

        let mut dual_vertices = Vec::with_capacity(primal.num_triangles());
        for k in 0..primal.num_triangles() {
            let [a, b, c] = primal.triangle_points(k);
            let cc = circumcenter(a, b, c).map_err(|_| MfdError::DegenerateDual {
                triangle: k,
                min_barycentric: f64::NEG_INFINITY,
            })?;
            let bary = barycentric(cc, a, b, c);
            let min_b = bary.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min_b >= DEGENERACY_TOL) {
                return Err(MfdError::DegenerateDual {
                    triangle: k,
                    min_barycentric: min_b,
                });
            }
            dual_vertices.push(cc);
        }

        let ne = primal.num_edges();
        let mut edge_length = Vec::with_capacity(ne);
        let mut dual_edge_length = Vec::with_capacity(ne);
        let mut dual_edges = Vec::with_capacity(ne);
        for e in 0..ne {
            let t = primal.edge_vector(e);
            let len = norm(t);
            let mid = primal.edge_midpoint(e);
            let [left, right] = primal.edge_triangles[e];
            // signed distance of each circumcenter from the edge line, positive
            // towards the triangle that owns it
            let dist = |k: usize, sign: f64| sign * cross2(t, sub(dual_vertices[k], mid)) / len;
            let mut d = 0.0;
            let start = match right {
                Some(k) => {
                    d += dist(k, -1.0);
                    dual_vertices[k]
                }
                None => mid,
            };
            let end = match left {
                Some(k) => {
                    d += dist(k, 1.0);
                    dual_vertices[k]
                }
                None => mid,
            };
            edge_length.push(len);
            dual_edge_length.push(d);
            dual_edges.push([start, end]);
        }

        let triangle_area: Vec<f64> = (0..primal.num_triangles())
            .map(|k| {
                let [a, b, c] = primal.triangle_points(k);
                0.5 * orient(a, b, c)
            })
            .collect();

        let mut cell_area = vec![0.0; primal.num_vertices()];
        for (e, &[i, j]) in primal.edges.iter().enumerate() {
            let quarter = 0.25 * edge_length[e] * dual_edge_length[e];
            cell_area[i] += quarter;
            cell_area[j] += quarter;
        }

        let dual_cells = build_dual_cells(&primal, &dual_vertices);

        Ok(Self {
            primal,
            dual_vertices,
            dual_edges,
            dual_cells,
            metrics: MeshMetrics {
                edge_length,
                dual_edge_length,
                triangle_area,
                cell_area,
            },
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.primal.num_vertices()
    }

    pub fn num_edges(&self) -> usize {
        self.primal.num_edges()
    }

    pub fn num_triangles(&self) -> usize {
        self.primal.num_triangles()
    }

    /// Characteristic spacing: the longest primal edge.
    pub fn mesh_spacing(&self) -> f64 {
        self.metrics.edge_length.iter().copied().fold(0.0, f64::max)
    }

    /// Total area covered by the triangles.
    pub fn domain_area(&self) -> f64 {
        self.metrics.triangle_area.iter().sum()
    }

    pub fn refine(&self) -> Result<DualMesh> {
        DualMesh::new(self.primal.refine()?)
    }

    pub fn refined(&self, levels: usize) -> Result<DualMesh> {
        let mut m = self.clone();
        for _ in 0..levels {
            m = m.refine()?;
        }
        Ok(m)
    }
}

fn build_dual_cells(primal: &PrimalMesh, cc: &[Point]) -> Vec<Vec<Point>> {
    let nv = primal.num_vertices();
    // fan[v] = list of (triangle, next vertex ccw after v, previous vertex)
    let mut fan: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); nv];
    for (k, t) in primal.triangles.iter().enumerate() {
        for l in 0..3 {
            fan[t[l]].push((k, t[(l + 1) % 3], t[(l + 2) % 3]));
        }
    }
    (0..nv)
        .map(|v| {
            let items = &fan[v];
            let x = primal.vertices[v];
            // boundary fans start at the triangle whose `next` vertex is not
            // the `prev` vertex of any other triangle in the fan
            let start = items
                .iter()
                .position(|&(_, a, _)| !items.iter().any(|&(_, _, b)| b == a))
                .unwrap_or(0);
            let mut order = vec![items[start]];
            while order.len() < items.len() {
                let (_, _, prev) = *order.last().unwrap();
                match items.iter().find(|&&(_, a, _)| a == prev) {
                    Some(&it) if it.0 != order[0].0 => order.push(it),
                    _ => break,
                }
            }
            if primal.boundary_vertex[v] {
                let first = order.first().unwrap();
                let last = order.last().unwrap();
                let mut poly = vec![x, midpoint(x, primal.vertices[first.1])];
                poly.extend(order.iter().map(|&(k, _, _)| cc[k]));
                poly.push(midpoint(x, primal.vertices[last.2]));
                poly
            } else {
                order.iter().map(|&(k, _, _)| cc[k]).collect()
            }
        })
        .collect()
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|i| cross2(poly[i], poly[(i + 1) % n])).sum::<f64>()
}

/// Build a dual mesh from raw vertex and triangle lists.
pub fn import_mesh(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<DualMesh> {
    DualMesh::new(PrimalMesh::from_triangles(vertices, triangles)?)
}

/// Base hexagon: center at the origin, six boundary vertices at unit distance.
pub fn hexagon_base() -> (Vec<Point>, Vec<[usize; 3]>) {
    let s = 3f64.sqrt() / 2.0;
    let vertices = vec![
        [0.0, 0.0],
        [1.0, 0.0],
        [0.5, s],
        [-0.5, s],
        [-1.0, 0.0],
        [-0.5, -s],
        [0.5, -s],
    ];
    let triangles = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
    (vertices, triangles)
}

/// Base unit-square mesh: 12 vertices, 14 acute triangles.
pub fn square_base() -> (Vec<Point>, Vec<[usize; 3]>) {
    let vertices = vec![
        [0.0, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
        [1.0, 1.0],
        [0.55, 0.0],
        [0.0, 0.55],
        [1.0, 0.45],
        [0.45, 1.0],
        [0.3, 0.7],
        [0.7, 0.3],
        [0.6, 0.6],
        [0.4, 0.4],
    ];
    let triangles = vec![
        [0, 4, 11],
        [0, 11, 5],
        [1, 9, 4],
        [1, 6, 9],
        [2, 5, 8],
        [2, 8, 7],
        [3, 10, 6],
        [3, 7, 10],
        [4, 9, 11],
        [5, 11, 8],
        [6, 10, 9],
        [7, 8, 10],
        [8, 11, 10],
        [9, 10, 11],
    ];
    (vertices, triangles)
}

/// Hexagon family refined `levels` times; spacing `2^-levels`.
pub fn build_hexagon_mesh(levels: usize) -> DualMesh {
    let (v, t) = hexagon_base();
    import_mesh(v, t)
        .and_then(|m| m.refined(levels))
        .expect("hexagon family is non-degenerate at every level")
}

/// Unit-square family refined `levels` times.
pub fn build_square_mesh(levels: usize) -> Result<DualMesh> {
    let (v, t) = square_base();
    import_mesh(v, t)?.refined(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    #[test]
    fn circumcenter_examples() {
        let c = circumcenter([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);

        let c = circumcenter([0.0, 0.0], [1.0, 0.0], [0.5, SQRT3 / 2.0]).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15);
        assert!((c[1] - SQRT3 / 6.0).abs() < 1e-15);

        let (a, b, p) = ([0.0, 0.0], [2.0, 0.0], [1.0, 1.2]);
        let c = circumcenter(a, b, p).unwrap();
        // by hand: x = 1, (1)^2 + y^2 = (1.2 - y)^2  =>  y = (1.44 - 1) / 2.4
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert!((c[1] - 0.44 / 2.4).abs() < 1e-15);
        let r = [norm(sub(c, a)), norm(sub(c, b)), norm(sub(c, p))];
        assert!((r[0] - r[1]).abs() < 1e-12 * r[0] && (r[0] - r[2]).abs() < 1e-12 * r[0]);

        assert!(matches!(
            circumcenter([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]),
            Err(MfdError::CollinearPoints(..))
        ));
    }

    #[test]
    fn hexagon_counts() {
        let m0 = build_hexagon_mesh(0);
        assert_eq!((m0.num_vertices(), m0.num_edges(), m0.num_triangles()), (7, 12, 6));
        let m1 = build_hexagon_mesh(1);
        assert_eq!((m1.num_vertices(), m1.num_edges(), m1.num_triangles()), (19, 42, 24));
        assert_eq!(m0.mesh_spacing(), 1.0);
        assert_eq!(m1.mesh_spacing(), 0.5);
    }

    #[test]
    fn equilateral_circumcenters_are_centroids() {
        let m = build_hexagon_mesh(0);
        for k in 0..m.num_triangles() {
            let c = m.primal.centroid(k);
            let cc = m.dual_vertices[k];
            assert!((c[0] - cc[0]).abs() < 1e-15 && (c[1] - cc[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn square_counts_and_area() {
        let m0 = build_square_mesh(0).unwrap();
        assert_eq!((m0.num_vertices(), m0.num_edges(), m0.num_triangles()), (12, 25, 14));
        let total: f64 = m0.metrics.cell_area.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let m1 = build_square_mesh(1).unwrap();
        assert_eq!(m1.num_triangles(), 56);
    }

    #[test]
    fn square_circumcenters_match_figure() {
        // circumcenters printed (to 3 decimals) alongside the base square mesh
        let expected = [
            [0.275, 0.125],
            [0.125, 0.275],
            [0.775, 0.075],
            [0.925, 0.225],
            [0.075, 0.775],
            [0.225, 0.925],
            [0.875, 0.725],
            [0.725, 0.875],
            [0.504, 0.211],
            [0.211, 0.504],
            [0.789, 0.496],
            [0.496, 0.789],
            [0.425, 0.575],
            [0.575, 0.425],
        ];
        let m = build_square_mesh(0).unwrap();
        for (k, e) in expected.iter().enumerate() {
            let c = m.dual_vertices[k];
            assert!(
                (c[0] - e[0]).abs() < 6e-4 && (c[1] - e[1]).abs() < 6e-4,
                "triangle {k}: {c:?} vs {e:?}"
            );
        }
    }

    #[test]
    fn right_triangle_is_degenerate() {
        let r = import_mesh(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]);
        assert!(matches!(r, Err(MfdError::DegenerateDual { triangle: 0, .. })));
    }

    #[test]
    fn flipped_edge_is_not_delaunay() {
        let v = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 1.2], [1.0, -1.2]];
        let r = import_mesh(v.clone(), vec![[0, 3, 2], [1, 2, 3]]);
        assert!(matches!(r, Err(MfdError::NotDelaunay { .. })));
        // the other diagonal is fine
        assert!(import_mesh(v, vec![[0, 1, 2], [0, 3, 1]]).is_ok());
    }

    #[test]
    fn import_reorients_clockwise_triangles() {
        let (v, t) = hexagon_base();
        let flipped: Vec<[usize; 3]> = t.iter().map(|t| [t[0], t[2], t[1]]).collect();
        assert_eq!(import_mesh(v, flipped).unwrap(), build_hexagon_mesh(0));
    }

    #[test]
    fn import_rejects_bad_indices() {
        let r = import_mesh(vec![[0.0, 0.0], [1.0, 0.0]], vec![[0, 1, 2]]);
        assert!(matches!(r, Err(MfdError::InvalidMesh(_))));
    }

    fn check_invariants(m: &DualMesh) {
        let area = m.domain_area();
        let cells: f64 = m.metrics.cell_area.iter().sum();
        assert!((cells - area).abs() <= 1e-10 * area);
        for e in 0..m.num_edges() {
            let t = m.primal.edge_vector(e);
            let [a, b] = m.dual_edges[e];
            let d = sub(b, a);
            let (lt, ld) = (norm(t), norm(d));
            assert!((cross2(t, d) / (lt * ld) - 1.0).abs() < 1e-12, "edge {e}");
            assert!((ld - m.metrics.dual_edge_length[e]).abs() < 1e-12 * lt);
        }
        for (v, poly) in m.dual_cells.iter().enumerate() {
            let a = polygon_area(poly);
            assert!((a - m.metrics.cell_area[v]).abs() < 1e-12 * area, "cell {v}");
        }
        assert!(m.metrics.cell_area.iter().all(|&a| a > 0.0));
        assert!(m.metrics.dual_edge_length.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn dual_invariants_hold_across_refinement() {
        let mut h = build_hexagon_mesh(0);
        let mut s = build_square_mesh(0).unwrap();
        for _ in 0..=6 {
            check_invariants(&h);
            check_invariants(&s);
            let (hh, sh) = (h.mesh_spacing(), s.mesh_spacing());
            if h.num_triangles() < 20_000 {
                h = h.refine().unwrap();
                assert!((h.mesh_spacing() - hh / 2.0).abs() <= 1e-14 * hh);
            }
            if s.num_triangles() < 20_000 {
                s = s.refine().unwrap();
                // midpoints of non-dyadic coordinates halve lengths only up to rounding
                assert!((s.mesh_spacing() - sh / 2.0).abs() <= 1e-14 * sh);
            }
        }
        assert!((s.domain_area() - 1.0).abs() < 1e-12);
        assert!((h.domain_area() - 1.5 * SQRT3).abs() < 1e-12);
    }

    #[test]
    fn construction_is_deterministic() {
        assert_eq!(build_square_mesh(2).unwrap(), build_square_mesh(2).unwrap());
    }
}
