//! Exponentially fitted averages and the discrete flux operators built from them.
//!
//! With a potential `phi` satisfying `grad phi = theta = beta/alpha`, the
//! convection-diffusion fluxes become
//!
//! ```text
//! alpha grad u + beta u      = alpha e^-phi grad (e^phi u)
//! alpha curl u + beta x u    = alpha e^-phi curl (e^phi u)
//! ```
//!
//! and the discrete operators replace `e^-phi` on an entity by the inverse of
//! the average of `e^phi` over it. Averages are computed with closed-form
//! quadrature rules that are exact when `phi` is linear on the entity.
//!
//! `phi` scales like `1/alpha`, so the averages overflow double precision as
//! soon as `alpha` is small. Everything here is therefore stored as natural
//! logarithms, shifted by a gauge constant `max phi`, and operator entries are
//! formed from ratios `exp(ln a - ln b)` that stay bounded.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dualmesh::{DualMesh, Point};
use crate::mimetic::MimeticOperators;
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::{MfdError, Result};

/// Potential differences at or below this size use the confluent limit.
pub const STABLE_SWITCH: f64 = 1e-12;

/// Relative agreement between `theta . T` and the potential difference below
/// which the two are treated as the same number.
const CONSISTENCY_TOL: f64 = 1e-10;

/// If the three-term sums cancel down to this fraction of their largest term,
/// the closed form has lost too many digits and the divided-difference
/// evaluation is used instead.
const CANCELLATION_LIMIT: f64 = 1e-8;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// The potential `phi`, its gradient `theta`, and an optional rotational part
/// that is added to `theta` inside quadrature denominators only.
#[derive(Clone)]
pub struct PotentialField {
    pub phi: ScalarFn,
    pub theta: VectorFn,
    /// Experimental: a divergence-free addition to the convection field.
    pub rot_part: Option<VectorFn>,
}

impl fmt::Debug for PotentialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialField")
            .field("rot_part", &self.rot_part.is_some())
            .finish_non_exhaustive()
    }
}

impl PotentialField {
    pub fn new(
        phi: impl Fn(Point) -> f64 + Send + Sync + 'static,
        theta: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            phi: Arc::new(phi),
            theta: Arc::new(theta),
            rot_part: None,
        }
    }

    pub fn with_rot_part(mut self, rot: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.rot_part = Some(Arc::new(rot));
        self
    }

    /// `phi = 0`: the operators reduce to the standard mimetic ones.
    pub fn zero() -> Self {
        Self::new(|_| 0.0, |_| [0.0, 0.0])
    }

    /// `phi(x) = g . x + c`.
    pub fn linear(g: [f64; 2], c: f64) -> Self {
        Self::new(move |p| g[0] * p[0] + g[1] * p[1] + c, move |_| g)
    }

    /// `theta` plus the rotational part, as used in quadrature denominators.
    pub fn theta_full(&self, p: Point) -> [f64; 2] {
        let t = (self.theta)(p);
        match &self.rot_part {
            Some(r) => {
                let r = r(p);
                [t[0] + r[0], t[1] + r[1]]
            }
            None => t,
        }
    }
}

/// Which formula produced an average.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Closed-form quadrature rule.
    Rule,
    /// Coinciding potentials: confluent limit of the rule.
    Limit,
    /// Rule evaluated as an exponential divided difference, either because
    /// `theta . T` matched the potential differences or because the closed
    /// form cancelled too badly.
    DividedDifference,
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MfdError::NonfiniteInput { entity: None })
    }
}

fn nonpositive(ln_abs: f64, negative: bool) -> MfdError {
    let mag = ln_abs.exp();
    MfdError::NonpositiveAverage {
        value: if negative { -mag } else { 0.0 },
        entity: None,
    }
}

/// `ln e[x_0, ..., x_k]`, the log of the divided difference of `exp`.
///
/// Evaluated without overflow for arbitrary magnitudes and without
/// cancellation for clustered or coinciding points. The average of `e^phi`
/// over a simplex with vertex values `x` is `k! e[x_0, ..., x_k]`.
pub fn ln_exp_divided_difference(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty() && xs.len() <= 8);
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut ys: Vec<f64> = xs.iter().map(|x| x - m).collect();
    ys.sort_by(f64::total_cmp);
    m + shifted_divided_difference(&ys).ln()
}

fn shifted_divided_difference(ys: &[f64]) -> f64 {
    let k = ys.len() - 1;
    if k == 0 {
        return ys[0].exp();
    }
    let spread = ys[k] - ys[0];
    if spread <= 1.0 {
        divided_difference_series(ys)
    } else if k == 1 {
        // e^y1 (1 - e^-(y1 - y0)) / (y1 - y0)
        -ys[1].exp() * (-spread).exp_m1() / spread
    } else {
        (shifted_divided_difference(&ys[1..]) - shifted_divided_difference(&ys[..k])) / spread
    }
}

/// `e[y] = e^c sum_n h_n(y - c) / (n + k)!` with `h_n` the complete
/// homogeneous symmetric polynomials; `|y - c| <= 1/2` makes 30 terms ample.
fn divided_difference_series(ys: &[f64]) -> f64 {
    const TERMS: usize = 30;
    let k = ys.len() - 1;
    let c = 0.5 * (ys[0] + ys[k]);
    let mut h = [0.0; TERMS];
    h[0] = 1.0;
    for &y in ys {
        let z = y - c;
        for n in 1..TERMS {
            h[n] += z * h[n - 1];
        }
    }
    let mut fact: f64 = (1..=k).map(|i| i as f64).product();
    let mut sum = 0.0;
    for (n, hn) in h.iter().enumerate() {
        sum += hn / fact;
        fact *= (n + k + 1) as f64;
    }
    c.exp() * sum
}

fn consistent(t: f64, d: f64) -> bool {
    (t - d).abs() <= CONSISTENCY_TOL * d.abs().max(1.0)
}

/// Log-domain edge rule. Returns `(ln E, branch)`.
pub fn edge_exp_average_ln(phi_i: f64, phi_j: f64, theta_dot_t: f64) -> Result<(f64, Branch)> {
    check_finite(&[phi_i, phi_j, theta_dot_t])?;
    let delta = phi_j - phi_i;
    if delta.abs() <= STABLE_SWITCH {
        return Ok((0.5 * (phi_i + phi_j), Branch::Limit));
    }
    let hi = phi_i.max(phi_j);
    let ln_num = hi + (-(-delta.abs()).exp_m1()).ln();
    if theta_dot_t == 0.0 || delta.signum() != theta_dot_t.signum() {
        return Err(nonpositive(ln_num - theta_dot_t.abs().ln(), theta_dot_t != 0.0));
    }
    Ok((ln_num - theta_dot_t.abs().ln(), Branch::Rule))
}

/// Edge rule `(e^phi_j - e^phi_i) / (theta . T)`.
///
/// For `|phi_j - phi_i| <= 1e-12` the confluent value `e^((phi_i + phi_j)/2)`
/// is returned. The result overflows for potentials beyond ~709; use
/// [`edge_exp_average_ln`] there.
pub fn edge_exp_average(phi_i: f64, phi_j: f64, theta_dot_t: f64) -> Result<f64> {
    edge_exp_average_ln(phi_i, phi_j, theta_dot_t).map(|(l, _)| l.exp())
}

/// `ln(e^x0/(ab) - e^x1/(ac) + e^x2/(bc))` in shifted form, or `None` when the
/// sum is non-positive. The flag reports heavy cancellation.
fn ln_bracket(phi: [f64; 3], a: f64, b: f64, c: f64, shift: f64) -> (Option<f64>, f64, bool) {
    let t = [
        (phi[0] - shift).exp() / (a * b),
        -(phi[1] - shift).exp() / (a * c),
        (phi[2] - shift).exp() / (b * c),
    ];
    let s: f64 = t.iter().sum();
    let big = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cancelled = s.abs() < CANCELLATION_LIMIT * big;
    if s > 0.0 && s.is_finite() {
        (Some(shift + s.ln()), s, cancelled)
    } else {
        (None, s, cancelled)
    }
}

/// Log-domain triangle rule for vertices ordered `i < j < k` and
/// `theta_dots = [theta . T_ij, theta . T_ik, theta . T_jk]` (tangents from the
/// lower to the higher index). Returns `(ln E, branch)`.
pub fn tri_exp_average_ln(phi: [f64; 3], theta_dots: [f64; 3]) -> Result<(f64, Branch)> {
    check_finite(&phi)?;
    check_finite(&theta_dots)?;
    let [pi, pj, pk] = phi;
    let gaps = [(pj - pi).abs(), (pk - pi).abs(), (pk - pj).abs()];
    let two = std::f64::consts::LN_2;
    if gaps.iter().any(|&g| g <= STABLE_SWITCH) {
        return Ok((two + ln_exp_divided_difference(&phi), Branch::Limit));
    }
    let [a, b, c] = theta_dots;
    if consistent(a, pj - pi) && consistent(b, pk - pi) && consistent(c, pk - pj) {
        return Ok((two + ln_exp_divided_difference(&phi), Branch::DividedDifference));
    }
    let shift = pi.max(pj).max(pk);
    match ln_bracket(phi, a, b, c, shift) {
        (Some(l), _, false) => Ok((two + l, Branch::Rule)),
        (Some(_), _, true) => Ok((two + ln_exp_divided_difference(&phi), Branch::DividedDifference)),
        (None, s, _) => Err(MfdError::NonpositiveAverage {
            value: 2.0 * s * shift.exp(),
            entity: None,
        }),
    }
}

/// Triangle rule `2 (e^phi_i/(ab) - e^phi_j/(ac) + e^phi_k/(bc))` with
/// `a = theta . T_ij`, `b = theta . T_ik`, `c = theta . T_jk` and `i < j < k`.
///
/// Coinciding potentials use the confluent limit (down to `e^phi` when all
/// three agree).
pub fn tri_exp_average(phi: [f64; 3], theta_dots: [f64; 3]) -> Result<f64> {
    tri_exp_average_ln(phi, theta_dots).map(|(l, _)| l.exp())
}

/// Log-domain tetrahedron rule; `theta_dots` ordered `ij, ik, il, jk, jl, kl`.
pub fn tet_exp_average_ln(phi: [f64; 4], theta_dots: [f64; 6]) -> Result<(f64, Branch)> {
    check_finite(&phi)?;
    check_finite(&theta_dots)?;
    let ln6 = 6f64.ln();
    let mut min_gap = f64::INFINITY;
    for a in 0..4 {
        for b in a + 1..4 {
            min_gap = min_gap.min((phi[b] - phi[a]).abs());
        }
    }
    if min_gap <= STABLE_SWITCH {
        return Ok((ln6 + ln_exp_divided_difference(&phi), Branch::Limit));
    }
    let [pi, pj, pk, pl] = phi;
    let [t_ij, t_ik, t_il, t_jk, t_jl, t_kl] = theta_dots;
    let diffs = [pj - pi, pk - pi, pl - pi, pk - pj, pl - pj, pl - pk];
    if theta_dots.iter().zip(&diffs).all(|(&t, &d)| consistent(t, d)) {
        return Ok((ln6 + ln_exp_divided_difference(&phi), Branch::DividedDifference));
    }
    let shift = pi.max(pj).max(pk).max(pl);
    let (_, s_ijl, c1) = ln_bracket([pi, pj, pl], t_ij, t_il, t_jl, shift);
    let (_, s_ijk, c2) = ln_bracket([pi, pj, pk], t_ij, t_ik, t_jk, shift);
    let s = (s_ijl - s_ijk) / t_kl;
    let cancelled = c1 || c2 || (s.abs() < CANCELLATION_LIMIT * s_ijl.abs().max(s_ijk.abs()) / t_kl.abs());
    if !(s > 0.0 && s.is_finite()) {
        return Err(MfdError::NonpositiveAverage {
            value: 6.0 * s * shift.exp(),
            entity: None,
        });
    }
    if cancelled {
        Ok((ln6 + ln_exp_divided_difference(&phi), Branch::DividedDifference))
    } else {
        Ok((ln6 + shift + s.ln(), Branch::Rule))
    }
}

/// Tetrahedron rule `6 (A_ijl - A_ijk) / (theta . T_kl)`, where `A` is the
/// three-term triangle bracket; exact for linear `phi` with constant `theta`.
pub fn tet_exp_average(phi: [f64; 4], theta_dots: [f64; 6]) -> Result<f64> {
    tet_exp_average_ln(phi, theta_dots).map(|(l, _)| l.exp())
}

/// Counters and entity lists describing how the averages were obtained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpDiagnostics {
    /// Additive constant subtracted from `phi` before exponentiation.
    pub gauge_shift: f64,
    /// Edges evaluated with the confluent limit.
    pub stable_edges: Vec<usize>,
    /// Edges whose sampled `theta . T` disagreed in sign with the potential
    /// difference; they use the potential difference instead.
    pub sign_fallback_edges: Vec<usize>,
    /// Triangles evaluated with the confluent limit.
    pub limit_triangles: Vec<usize>,
    /// Triangles whose closed form was non-positive; they use the divided
    /// difference of the vertex potentials instead.
    pub fallback_triangles: Vec<usize>,
}

/// Logarithms of the exponential averages, all shifted by `diagnostics.gauge_shift`.
#[derive(Clone, Debug)]
pub struct ExpAverages {
    pub ln_node: Vec<f64>,
    pub ln_edge: Vec<f64>,
    pub ln_tri: Vec<f64>,
    /// `theta . T` actually used on each edge (tangent from lower to higher index).
    pub theta_dot_t: Vec<f64>,
    pub diagnostics: ExpDiagnostics,
}

impl ExpAverages {
    /// `e^phi` at the vertices, un-shifted. Overflows for large potentials.
    pub fn e_node(&self) -> Vec<f64> {
        self.unshifted(&self.ln_node)
    }

    pub fn e_edge(&self) -> Vec<f64> {
        self.unshifted(&self.ln_edge)
    }

    pub fn e_tri(&self) -> Vec<f64> {
        self.unshifted(&self.ln_tri)
    }

    fn unshifted(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|l| (l + self.diagnostics.gauge_shift).exp()).collect()
    }
}

/// Sample the potential on `mesh` and evaluate all vertex, edge and triangle
/// averages.
pub fn build_exp_averages(mesh: &DualMesh, pot: &PotentialField) -> Result<ExpAverages> {
    let p = &mesh.primal;
    let phi: Vec<f64> = p.vertices.iter().map(|&x| (pot.phi)(x)).collect();
    if let Some(v) = phi.iter().position(|f| !f.is_finite()) {
        return Err(MfdError::NonfiniteInput { entity: None }.at_entity(format!("vertex {v}")));
    }
    let gauge = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_node: Vec<f64> = phi.iter().map(|f| f - gauge).collect();
    let mut diag = ExpDiagnostics {
        gauge_shift: gauge,
        ..Default::default()
    };

    let mut ln_edge = Vec::with_capacity(p.num_edges());
    let mut theta_dot_t = Vec::with_capacity(p.num_edges());
    for (e, &[i, j]) in p.edges.iter().enumerate() {
        let th = pot.theta_full(p.edge_midpoint(e));
        let t = p.edge_vector(e);
        let mut tdt = th[0] * t[0] + th[1] * t[1];
        let (fi, fj) = (ln_node[i], ln_node[j]);
        let delta = fj - fi;
        if delta.abs() > STABLE_SWITCH && tdt.is_finite() && (tdt == 0.0 || tdt.signum() != delta.signum()) {
            diag.sign_fallback_edges.push(e);
            tdt = delta;
        }
        let (l, branch) = edge_exp_average_ln(fi, fj, tdt).map_err(|err| err.at_entity(format!("edge {e}")))?;
        if branch == Branch::Limit {
            diag.stable_edges.push(e);
        }
        ln_edge.push(l);
        theta_dot_t.push(tdt);
    }

    let mut ln_tri = Vec::with_capacity(p.num_triangles());
    for (k, tri) in p.triangles.iter().enumerate() {
        let mut v = *tri;
        v.sort_unstable();
        let edge_of = |a: usize, b: usize| {
            p.triangle_edges[k]
                .iter()
                .copied()
                .find(|&e| p.edges[e] == [a, b])
                .expect("triangle edge present")
        };
        let dots = [
            theta_dot_t[edge_of(v[0], v[1])],
            theta_dot_t[edge_of(v[0], v[2])],
            theta_dot_t[edge_of(v[1], v[2])],
        ];
        let f = [ln_node[v[0]], ln_node[v[1]], ln_node[v[2]]];
        let l = match tri_exp_average_ln(f, dots) {
            Ok((l, Branch::Limit)) => {
                diag.limit_triangles.push(k);
                l
            }
            Ok((l, _)) => l,
            Err(MfdError::NonpositiveAverage { .. }) => {
                diag.fallback_triangles.push(k);
                std::f64::consts::LN_2 + ln_exp_divided_difference(&f)
            }
            Err(err) => return Err(err.at_entity(format!("triangle {k}"))),
        };
        ln_tri.push(l);
    }

    Ok(ExpAverages {
        ln_node,
        ln_edge,
        ln_tri,
        theta_dot_t,
        diagnostics: diag,
    })
}

/// Exponentially fitted gradient and curl.
#[derive(Clone, Debug)]
pub struct FluxOperators {
    /// `E_edge^-1 grad_D E_node`.
    pub j0: SparseMatrix,
    /// `E_tri^-1 curl_D E_edge`.
    pub j1: SparseMatrix,
    pub gauge: ExpDiagnostics,
}

fn fitted(op: &SparseMatrix, ln_left: &[f64], ln_right: &[f64]) -> SparseMatrix {
    let mut b = TripletBuilder::with_capacity(op.nrows(), op.ncols(), op.nnz());
    for (r, c, v) in op.iter() {
        b.push(r, c, v * (ln_right[c] - ln_left[r]).exp());
    }
    b.build()
}

pub fn build_flux_operators(ops: &MimeticOperators, avg: &ExpAverages) -> FluxOperators {
    FluxOperators {
        j0: fitted(&ops.grad_d, &avg.ln_edge, &avg.ln_node),
        j1: fitted(&ops.curl_d, &avg.ln_tri, &avg.ln_edge),
        gauge: avg.diagnostics.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualmesh::build_hexagon_mesh;
    use crate::mimetic::{build_incidence, MimeticOperators};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    /// Gauss-Legendre nodes and weights on [0, 1], by Newton on the Legendre
    /// recurrence.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out.push((0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    }

    /// Collapsed-coordinate product quadrature of `e^(g . x)` over the
    /// reference triangle, as an average.
    fn tri_oracle(g: [f64; 2]) -> f64 {
        let q = gauss_legendre(24);
        let mut s = 0.0;
        for &(u, wu) in &q {
            for &(v, wv) in &q {
                let (x, y) = (u, v * (1.0 - u));
                s += wu * wv * (1.0 - u) * (g[0] * x + g[1] * y).exp();
            }
        }
        2.0 * s
    }

    /// Same oracle with the triangle split into four similar children.
    fn tri_oracle_subdivided(g: [f64; 2]) -> f64 {
        let q = gauss_legendre(24);
        let children = [
            ([0.0, 0.0], [0.5, 0.0], [0.0, 0.5]),
            ([0.5, 0.0], [1.0, 0.0], [0.5, 0.5]),
            ([0.0, 0.5], [0.5, 0.5], [0.0, 1.0]),
            ([0.5, 0.5], [0.0, 0.5], [0.5, 0.0]),
        ];
        let mut s = 0.0;
        for (a, b, c) in children {
            for &(u, wu) in &q {
                for &(v, wv) in &q {
                    let (l1, l2) = (u, v * (1.0 - u));
                    let x = a[0] + l1 * (b[0] - a[0]) + l2 * (c[0] - a[0]);
                    let y = a[1] + l1 * (b[1] - a[1]) + l2 * (c[1] - a[1]);
                    s += 0.25 * wu * wv * (1.0 - u) * (g[0] * x + g[1] * y).exp();
                }
            }
        }
        2.0 * s
    }

    fn tet_oracle(g: [f64; 3]) -> f64 {
        let q = gauss_legendre(20);
        let mut s = 0.0;
        for &(u, wu) in &q {
            for &(v, wv) in &q {
                for &(w, ww) in &q {
                    let x = u;
                    let y = v * (1.0 - u);
                    let z = w * (1.0 - u) * (1.0 - v);
                    let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                    s += wu * wv * ww * jac * (g[0] * x + g[1] * y + g[2] * z).exp();
                }
            }
        }
        6.0 * s
    }

    fn tri_dots(phi: [f64; 3]) -> [f64; 3] {
        [phi[1] - phi[0], phi[2] - phi[0], phi[2] - phi[1]]
    }

    fn tet_dots(p: [f64; 4]) -> [f64; 6] {
        [
            p[1] - p[0],
            p[2] - p[0],
            p[3] - p[0],
            p[2] - p[1],
            p[3] - p[1],
            p[3] - p[2],
        ]
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn edge_examples() {
        let v = edge_exp_average(0.0, 1.0, 1.0).unwrap();
        assert!(rel(v, E - 1.0) <= 1e-14, "{v}");
        assert!(rel(edge_exp_average(0.0, 1.0, 1.0).unwrap(), 1.718281828459045) <= 1e-14);
        assert_eq!(edge_exp_average(2.5, 2.5, 0.0).unwrap(), 2.5f64.exp());
        let v = edge_exp_average(0.0, -1.0, -1.0).unwrap();
        assert!(rel(v, 1.0 - (-1.0f64).exp()) <= 1e-14);
        assert!(matches!(
            edge_exp_average(0.0, 1.0, -1.0),
            Err(MfdError::NonpositiveAverage { .. })
        ));
        assert!(matches!(
            edge_exp_average(f64::NAN, 1.0, 1.0),
            Err(MfdError::NonfiniteInput { .. })
        ));
    }

    #[test]
    fn edge_large_potentials_do_not_overflow() {
        let (l, _) = edge_exp_average_ln(1000.0, 1001.0, 1.0).unwrap();
        assert!((l - (1000.0 + (E - 1.0).ln())).abs() < 1e-12);
        let (l, _) = edge_exp_average_ln(-1e6, 1e6, 2e6).unwrap();
        assert!((l - (1e6 - 2e6f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn edge_switch_continuity() {
        for base in [-3.0, 0.0, 5.0] {
            for s in [1.0, -1.0] {
                // use the differences that are actually representable
                let (pin, pout) = (base + s * STABLE_SWITCH * 0.999, base + s * STABLE_SWITCH * 1.001);
                let a = edge_exp_average(base, pin, pin - base).unwrap();
                let b = edge_exp_average(base, pout, pout - base).unwrap();
                assert!(rel(a, b) <= 1e-9);
            }
        }
    }

    #[test]
    fn tri_examples() {
        assert_eq!(tri_exp_average([0.0; 3], [0.0; 3]).unwrap(), 1.0);
        // reference triangle, phi = x: vertex values (0, 1, 0)
        let v = tri_exp_average([0.0, 1.0, 0.0], [1.0, 0.0, -1.0]).unwrap();
        assert!(rel(v, 2.0 * (E - 2.0)) <= 1e-12, "{v}");
        assert!(rel(v, 1.436563656918090) <= 1e-12);
        assert!(rel(tri_oracle([1.0, 0.0]), 2.0 * (E - 2.0)) <= 1e-13);

        let phi = [0.0, 1.0, 1.0];
        let (_, br) = tri_exp_average_ln(phi, tri_dots(phi)).unwrap();
        assert_eq!(br, Branch::Limit);
        assert!(rel(tri_exp_average(phi, tri_dots(phi)).unwrap(), tri_oracle([1.0, 1.0])) <= 1e-12);
    }

    #[test]
    fn tri_matches_oracle_on_random_linear_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = [rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)];
            let phi = [0.0, g[0], g[1]];
            let exact = tri_oracle(g);
            assert!(rel(exact, tri_oracle_subdivided(g)) <= 1e-13);
            let v = tri_exp_average(phi, tri_dots(phi)).unwrap();
            assert!(rel(v, exact) <= 1e-12, "{g:?}: {v} vs {exact}");
        }
    }

    #[test]
    fn tri_closed_form_agrees_with_divided_difference() {
        // slightly perturbed denominators force the three-term closed form
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let phi = [
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ];
            let mut d = tri_dots(phi);
            d.iter_mut().for_each(|x| *x *= 1.0 + 1e-9);
            let (l, br) = tri_exp_average_ln(phi, d).unwrap();
            let reference = std::f64::consts::LN_2 + ln_exp_divided_difference(&phi);
            assert!((l - reference).abs() < 1e-7, "{phi:?} {br:?}");
        }
    }

    #[test]
    fn tri_nonpositive_is_reported() {
        // denominators of the wrong sign for these potentials
        let r = tri_exp_average([0.0, 1.0, 3.0], [1.0, 3.0, -2.0]);
        assert!(matches!(r, Err(MfdError::NonpositiveAverage { .. })), "{r:?}");
    }

    #[test]
    fn tri_near_coincident_potentials_are_stable() {
        for gap in [1e-13, 1e-11, 1e-8, 1e-5, 1e-3] {
            let phi = [0.3, 0.3 + gap, 1.7];
            let v = tri_exp_average(phi, tri_dots(phi)).unwrap();
            let g = [gap, 1.4];
            let exact = tri_oracle(g) * 0.3f64.exp();
            assert!(rel(v, exact) <= 1e-12, "gap {gap}: {v} vs {exact}");
        }
    }

    #[test]
    fn tet_examples() {
        assert_eq!(tet_exp_average([0.0; 4], [0.0; 6]).unwrap(), 1.0);
        let exact = 6.0 * (E - 2.5);
        assert!(rel(tet_oracle([1.0, 0.0, 0.0]), exact) <= 1e-12);
        let phi = [0.0, 1.0, 0.0, 0.0];
        let v = tet_exp_average(phi, tet_dots(phi)).unwrap();
        assert!(rel(v, exact) <= 1e-8);
        assert!(rel(v, 1.309690970754271) <= 1e-8);

        let phi = [0.0, 1.0, 2.0, 3.0];
        let v = tet_exp_average(phi, tet_dots(phi)).unwrap();
        assert!(rel(v, tet_oracle([1.0, 2.0, 3.0])) <= 1e-8);
    }

    #[test]
    fn tet_matches_oracle_on_random_linear_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = [
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
            ];
            let phi = [0.0, g[0], g[1], g[2]];
            let oracle = tet_oracle(g);
            let v = tet_exp_average(phi, tet_dots(phi)).unwrap();
            assert!(rel(v, oracle) <= 1e-8, "{g:?}");
            // closed form with denominators off by roundoff-level amounts
            let mut d = tet_dots(phi);
            d.iter_mut().for_each(|x| *x *= 1.0 + 1e-9);
            let w = tet_exp_average(phi, d).unwrap();
            assert!(rel(w, oracle) <= 1e-6, "{g:?}: {w} vs {oracle}");
        }
    }

    #[test]
    fn divided_difference_series_and_recurrence_agree() {
        for xs in [[0.0, 0.4, 0.9], [0.0, 0.5, 1.0], [-0.2, 0.3, 0.8001]] {
            let ys = xs.map(|x| x - 0.9);
            let series = divided_difference_series(&ys);
            let rec = (shifted_divided_difference(&ys[1..]) - shifted_divided_difference(&ys[..2])) / (ys[2] - ys[0]);
            assert!(rel(series, rec) < 1e-13);
        }
    }

    fn hex_setup(levels: usize, pot: &PotentialField) -> (DualMesh, MimeticOperators, ExpAverages, FluxOperators) {
        let m = build_hexagon_mesh(levels);
        let inc = build_incidence(&m);
        let ops = MimeticOperators::new(&m, &inc);
        let avg = build_exp_averages(&m, pot).unwrap();
        let flux = build_flux_operators(&ops, &avg);
        (m, ops, avg, flux)
    }

    #[test]
    fn zero_potential_reproduces_standard_operators() {
        let (_, ops, avg, flux) = hex_setup(2, &PotentialField::zero());
        assert!(avg
            .e_node()
            .iter()
            .chain(&avg.e_edge())
            .chain(&avg.e_tri())
            .all(|&v| v == 1.0));
        assert_eq!(flux.j0.to_dense(), ops.grad_d.to_dense());
        assert_eq!(flux.j1.to_dense(), ops.curl_d.to_dense());
    }

    #[test]
    fn hexagon_edge_average_for_phi_x() {
        let (m, _, avg, _) = hex_setup(0, &PotentialField::linear([1.0, 0.0], 0.0));
        let e = m.primal.edges.iter().position(|&e| e == [0, 1]).unwrap();
        // edge (0,0) -> (1,0): (e - 1)/1
        assert!(rel(avg.e_edge()[e], E - 1.0) < 1e-14);
        // the domain-shifted statement: an edge from -1/2 to 1/2 gives 2 sinh(1/2)
        let v = edge_exp_average(-0.5, 0.5, 1.0).unwrap();
        assert!(rel(v, 1.042190610987495) < 1e-14);
    }

    #[test]
    fn shift_invariance() {
        let (_, _, a, fa) = hex_setup(1, &PotentialField::linear([1.3, -0.4], 0.0));
        let (_, _, b, fb) = hex_setup(1, &PotentialField::linear([1.3, -0.4], 2.0));
        for (x, y) in a.e_edge().iter().zip(b.e_edge()) {
            assert!(rel(y, x * 2f64.exp()) < 1e-13);
        }
        for (x, y) in a.e_tri().iter().zip(b.e_tri()) {
            assert!(rel(y, x * 2f64.exp()) < 1e-13);
        }
        assert!(fa.j0.add_scaled(&fb.j0, -1.0).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn sequence_preserved_for_steep_potential() {
        let alpha = 1e-3;
        let pot = PotentialField::linear([1.0 / alpha, 0.0], 0.0);
        let (_, _, avg, flux) = hex_setup(3, &pot);
        assert!(avg.ln_edge.iter().chain(&avg.ln_tri).all(|v| v.is_finite()));
        let prod = flux.j1.matmul(&flux.j0).unwrap();
        let scale = flux.j1.norm_inf() * flux.j0.norm_inf();
        assert!(prod.max_abs() <= 1e-12 * scale, "{} vs {scale}", prod.max_abs());
    }

    #[test]
    fn kernel_of_fitted_gradient() {
        let pot = PotentialField::new(|p| p[0].sin() + p[1] * p[1], |p| [p[0].cos(), 2.0 * p[1]]);
        let (m, _, _, flux) = hex_setup(3, &pot);
        let u: Vec<f64> = m.primal.vertices.iter().map(|&p| (-(pot.phi)(p)).exp()).collect();
        let scale = flux.j0.norm_inf() * u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(flux.j0.matvec(&u).iter().all(|v| v.abs() <= 1e-14 * scale));
    }

    #[test]
    fn sign_mismatch_falls_back_and_is_recorded() {
        // theta opposes the sampled potential on every non-vertical edge
        let pot = PotentialField::new(|p| p[0], |_| [-1.0, 0.0]);
        let (_, _, avg, _) = hex_setup(1, &pot);
        assert!(!avg.diagnostics.sign_fallback_edges.is_empty());
        assert!(avg.ln_edge.iter().all(|v| v.is_finite()));
    }
}
