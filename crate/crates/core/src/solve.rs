//! Linear solvers for the assembled systems.
//!
//! The default is a sparse direct solve: a nested-dissection ordering from
//! breadth-first level structures, followed by an `L D U` factorisation over
//! the (structurally symmetric) pattern without pivoting. That is safe for the
//! systems built here: the scalar operator is a nonsingular M-matrix and the
//! vector operator is a positive diagonal times a symmetric positive definite
//! matrix. A few steps of iterative refinement and a residual check guard
//! other inputs.
//!
//! Iterative alternatives: conjugate gradients on the symmetrised system and
//! BiCGSTAB with an ILU(0) preconditioner.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::assembly::{DiscreteField, DiscreteSystem};
use crate::sparse::{dot, norm2, SparseMatrix, TripletBuilder};
use crate::{MfdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Direct,
    /// Conjugate gradients on `D^1/2 L D^-1/2`, `D` the system's symmetrizer.
    Cg,
    /// BiCGSTAB preconditioned with ILU(0).
    Bicgstab,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative residual target `||b - L x|| / ||b||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Direct,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: DiscreteField,
    /// Interior unknowns only.
    pub interior: Vec<f64>,
    pub residual_norm: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Solve `system.l x = system.rhs` and expand to a full field.
pub fn solve(system: &DiscreteSystem, opts: &SolveOptions) -> Result<SolveReport> {
    let (x, iterations) = match opts.method {
        SolveMethod::Direct => {
            let x = direct_solve(&system.l, &system.rhs, opts.tol)?;
            (x, 0)
        }
        SolveMethod::Cg => symmetrized_cg(system, opts)?,
        SolveMethod::Bicgstab => bicgstab(&system.l, &system.rhs, opts)?,
    };
    let residual_norm = relative_residual(&system.l, &x, &system.rhs);
    if residual_norm > opts.tol || !residual_norm.is_finite() {
        return Err(MfdError::NoConvergence {
            iterations,
            residual: residual_norm,
        });
    }
    Ok(SolveReport {
        solution: system.expand(&x)?,
        interior: x,
        residual_norm,
        method: opts.method,
        iterations,
    })
}

/// Factor, solve and refine. Fails with `NoConvergence` if refinement cannot
/// reach `tol`.
pub fn direct_solve(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    if a.nrows() != b.len() || a.ncols() != b.len() {
        return Err(MfdError::Dimension(format!(
            "matrix {}x{} with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let f = SparseLdu::factor(a)?;
    let mut x = f.solve(b);
    for _ in 0..3 {
        let res = relative_residual(a, &x, b);
        if res <= tol * 1e-2 {
            break;
        }
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = f.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
    }
    let res = relative_residual(a, &x, b);
    if !res.is_finite() || res > tol {
        return Err(MfdError::NoConvergence {
            iterations: 3,
            residual: res,
        });
    }
    Ok(x)
}

/// Symmetric adjacency of the pattern of `a` (diagonal excluded).
fn adjacency(a: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for (r, c, _) in a.iter() {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Nested-dissection ordering: `perm[new] = old`.
///
/// Each subgraph is split by the middle level of a breadth-first level
/// structure rooted at a pseudo-peripheral node; the separator is numbered
/// after both halves.
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    const LEAF: usize = 48;
    let n = adj.len();
    let mut perm = Vec::with_capacity(n);
    // region[v]: id of the subgraph currently containing v
    let mut region = vec![0usize; n];
    let mut next_region = 1;
    let mut level = vec![usize::MAX; n];

    // work stack of (region id, members, separator to emit after children)
    enum Task {
        Split(usize, Vec<usize>),
        Emit(Vec<usize>),
    }
    let mut stack = vec![Task::Split(0, (0..n).collect())];

    let bfs =
        |root: usize, id: usize, region: &[usize], level: &mut [usize], members: &[usize]| -> (Vec<usize>, usize) {
            for &v in members {
                level[v] = usize::MAX;
            }
            let mut order = Vec::with_capacity(members.len());
            let mut q = VecDeque::new();
            level[root] = 0;
            q.push_back(root);
            while let Some(v) = q.pop_front() {
                order.push(v);
                for &w in &adj[v] {
                    if region[w] == id && level[w] == usize::MAX {
                        level[w] = level[v] + 1;
                        q.push_back(w);
                    }
                }
            }
            let depth = order.last().map(|&v| level[v]).unwrap_or(0);
            (order, depth)
        };

    while let Some(task) = stack.pop() {
        let (id, members) = match task {
            Task::Emit(sep) => {
                perm.extend(sep);
                continue;
            }
            Task::Split(id, members) => (id, members),
        };
        if members.len() <= LEAF {
            perm.extend(members);
            continue;
        }
        // connected component containing the first member
        let (mut order, mut depth) = bfs(members[0], id, &region, &mut level, &members);
        if order.len() < members.len() {
            // split off the component, requeue the rest
            let comp_id = next_region;
            next_region += 1;
            for &v in &order {
                region[v] = comp_id;
            }
            let rest: Vec<usize> = members.into_iter().filter(|&v| region[v] == id).collect();
            stack.push(Task::Split(id, rest));
            stack.push(Task::Split(comp_id, order));
            continue;
        }
        // pseudo-peripheral root: restart from the farthest node while the
        // eccentricity grows
        for _ in 0..4 {
            let far = *order.last().unwrap();
            let (o2, d2) = bfs(far, id, &region, &mut level, &members);
            if d2 <= depth {
                // restore levels for the better root found so far
                let (o3, d3) = bfs(far, id, &region, &mut level, &members);
                order = o3;
                depth = d3;
                break;
            }
            order = o2;
            depth = d2;
        }
        if depth < 2 {
            perm.extend(members);
            continue;
        }
        // middle level by node count
        let mut counts = vec![0usize; depth + 1];
        for &v in &order {
            counts[level[v]] += 1;
        }
        let half = order.len() / 2;
        let mut acc = 0;
        let mut mid = 1;
        for (l, c) in counts.iter().enumerate() {
            acc += c;
            if acc >= half {
                mid = l.clamp(1, depth - 1);
                break;
            }
        }
        let (a_id, b_id) = (next_region, next_region + 1);
        next_region += 2;
        let mut part_a = Vec::new();
        let mut part_b = Vec::new();
        let mut sep = Vec::new();
        for &v in &order {
            match level[v].cmp(&mid) {
                std::cmp::Ordering::Less => {
                    region[v] = a_id;
                    part_a.push(v);
                }
                std::cmp::Ordering::Greater => {
                    region[v] = b_id;
                    part_b.push(v);
                }
                std::cmp::Ordering::Equal => {
                    region[v] = usize::MAX;
                    sep.push(v);
                }
            }
        }
        stack.push(Task::Emit(sep));
        stack.push(Task::Split(b_id, part_b));
        stack.push(Task::Split(a_id, part_a));
    }
    perm
}

/// `P A P^T = L D U` with unit triangular `L`, `U` sharing one sparsity
/// pattern; no pivoting.
#[derive(Clone, Debug)]
pub struct SparseLdu {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    l_val: Vec<f64>,
    /// `U^T` stored in the same columns as `L`.
    u_val: Vec<f64>,
    d: Vec<f64>,
}

impl SparseLdu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let adj = adjacency(a);
        let perm = nested_dissection(&adj);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &SparseMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(MfdError::Dimension(
                "factorisation needs a square matrix and a full ordering".into(),
            ));
        }
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // permuted matrix B = P A P^T and its transpose, both CSR
        let mut bb = TripletBuilder::with_capacity(n, n, a.nnz());
        for (r, c, v) in a.iter() {
            bb.push(inv[r], inv[c], v);
        }
        let b = bb.build();
        let bt = b.transpose();

        // symbolic phase: elimination tree and column counts of the union pattern
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        let each_upper = |k: usize, f: &mut dyn FnMut(usize)| {
            let (c1, _) = b.row(k);
            let (c2, _) = bt.row(k);
            for &i in c1.iter().chain(c2) {
                if i < k {
                    f(i);
                }
            }
        };
        for k in 0..n {
            flag[k] = k;
            each_upper(k, &mut |mut i| {
                while flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            });
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + lnz[k];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut l_val = vec![0.0; nnz];
        let mut u_val = vec![0.0; nnz];
        let mut d = vec![0.0; n];

        // numeric phase
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut fill = vec![0usize; n];
        flag.iter_mut().for_each(|f| *f = usize::MAX);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            // column k above the diagonal goes to y, row k left of it to z
            let (cols, vals) = bt.row(k);
            for (&i, &v) in cols.iter().zip(vals) {
                if i < k {
                    y[i] += v;
                } else if i == k {
                    d[k] = v;
                }
            }
            let (cols, vals) = b.row(k);
            for (&i, &v) in cols.iter().zip(vals) {
                if i < k {
                    z[i] += v;
                }
            }
            for &start in cols.iter().chain(bt.row(k).0) {
                if start >= k {
                    continue;
                }
                let mut len = 0;
                let mut i = start;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            for &i in &pattern[top..n] {
                let (yi, zi) = (y[i], z[i]);
                y[i] = 0.0;
                z[i] = 0.0;
                let start = col_ptr[i];
                for p in start..start + fill[i] {
                    let r = row_idx[p];
                    y[r] -= l_val[p] * yi;
                    z[r] -= u_val[p] * zi;
                }
                let l_ki = zi / d[i];
                let u_ik = yi / d[i];
                d[k] -= l_ki * yi;
                let p = start + fill[i];
                row_idx[p] = k;
                l_val[p] = l_ki;
                u_val[p] = u_ik;
                fill[i] += 1;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(MfdError::SingularMatrix(k));
            }
        }
        Ok(Self {
            n,
            perm,
            col_ptr,
            row_idx,
            l_val,
            u_val,
            d,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Nonzeros in the strictly lower factor.
    pub fn factor_nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Pivots of the permuted matrix.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let wj = w[j];
            if wj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    w[self.row_idx[p]] -= self.l_val[p] * wj;
                }
            }
        }
        for (wj, dj) in w.iter_mut().zip(&self.d) {
            *wj /= dj;
        }
        for j in (0..n).rev() {
            let mut s = w[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s -= self.u_val[p] * w[self.row_idx[p]];
            }
            w[j] = s;
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = w[new];
        }
        x
    }
}

/// The symmetric matrix `D^1/2 L D^-1/2` similar to a symmetrizable `L`,
/// formed entrywise as `sign(L_ij) sqrt(L_ij L_ji)` so that it never
/// overflows, whatever the range of `D`.
pub fn symmetrized(l: &SparseMatrix) -> SparseMatrix {
    let mut b = TripletBuilder::with_capacity(l.nrows(), l.ncols(), l.nnz());
    for (r, c, v) in l.iter() {
        if r == c {
            b.push(r, c, v);
        } else {
            let w = l.get(c, r);
            let g = (v.abs().sqrt()) * (w.abs().sqrt());
            b.push(r, c, v.signum() * g);
        }
    }
    b.build()
}

/// Largest spread of the symmetrizer logarithms that still allows forming
/// `D^1/2` in double precision.
pub const MAX_LN_SCALING_RANGE: f64 = 1400.0;

fn symmetrized_cg(system: &DiscreteSystem, opts: &SolveOptions) -> Result<(Vec<f64>, usize)> {
    let s = &system.ln_symmetrizer;
    if s.is_empty() && system.size() > 0 {
        return Err(MfdError::Dimension(
            "the operator has no diagonal symmetrizer; conjugate gradients do not apply, use the direct solver or BiCGSTAB".into(),
        ));
    }
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > MAX_LN_SCALING_RANGE {
        return Err(MfdError::Dimension(format!(
            "symmetrizer spans e^{:.0}; conjugate gradients cannot form the scaled system, use the direct solver",
            hi - lo
        )));
    }
    let mid = 0.5 * (hi + lo);
    let half: Vec<f64> = s.iter().map(|v| (0.5 * (v - mid)).exp()).collect();
    let m = symmetrized(&system.l);
    let rhs: Vec<f64> = system.rhs.iter().zip(&half).map(|(b, h)| b * h).collect();
    let (y, it) = conjugate_gradient(&m, &rhs, opts)?;
    Ok((y.iter().zip(&half).map(|(y, h)| y / h).collect(), it))
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite `a`.
pub fn conjugate_gradient(a: &SparseMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let nb = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..opts.max_iter {
        if norm2(&r) / nb <= opts.tol * 0.5 {
            return Ok((x, it));
        }
        a.matvec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(MfdError::NoConvergence {
        iterations: opts.max_iter,
        residual: norm2(&r) / nb,
    })
}

/// Incomplete LU with zero fill on the pattern of `a`.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    diag_pos: Vec<usize>,
    values: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(a.nnz() + n);
        let mut values = Vec::with_capacity(a.nnz() + n);
        for i in 0..n {
            let (c, v) = a.row(i);
            let mut has_diag = false;
            for (&j, &x) in c.iter().zip(v) {
                if j == i {
                    has_diag = true;
                }
                cols.push(j);
                values.push(x);
            }
            if !has_diag {
                // keep a structural diagonal; sorted insertion below
                let pos = c.partition_point(|&j| j < i);
                cols.insert(row_ptr[i] + pos, i);
                values.insert(row_ptr[i] + pos, 0.0);
            }
            row_ptr[i + 1] = cols.len();
        }
        let mut diag_pos = vec![0usize; n];
        for i in 0..n {
            diag_pos[i] = row_ptr[i] + cols[row_ptr[i]..row_ptr[i + 1]].partition_point(|&j| j < i);
        }
        let mut where_ = vec![usize::MAX; n];
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                where_[cols[p]] = p;
            }
            for p in row_ptr[i]..diag_pos[i] {
                let k = cols[p];
                let pivot = values[diag_pos[k]];
                values[p] /= pivot;
                let lik = values[p];
                for q in diag_pos[k] + 1..row_ptr[k + 1] {
                    let w = where_[cols[q]];
                    if w != usize::MAX {
                        values[w] -= lik * values[q];
                    }
                }
            }
            if values[diag_pos[i]] == 0.0 || !values[diag_pos[i]].is_finite() {
                return Err(MfdError::SingularMatrix(i));
            }
            for p in row_ptr[i]..row_ptr[i + 1] {
                where_[cols[p]] = usize::MAX;
            }
        }
        Ok(Self {
            diag_pos,
            values,
            row_ptr,
            cols,
        })
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for p in self.row_ptr[i]..self.diag_pos[i] {
                s -= self.values[p] * x[self.cols[p]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.diag_pos[i] + 1..self.row_ptr[i + 1] {
                s -= self.values[p] * x[self.cols[p]];
            }
            x[i] = s / self.values[self.diag_pos[i]];
        }
        x
    }
}

/// Right-preconditioned BiCGSTAB with ILU(0).
pub fn bicgstab(a: &SparseMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let m = Ilu0::new(a)?;
    let nb = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 0..opts.max_iter {
        let res = norm2(&r) / nb;
        if res <= opts.tol * 0.5 {
            return Ok((x, it));
        }
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(MfdError::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = m.apply(&p);
        a.matvec_into(&ph, &mut v);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if norm2(&s) / nb <= opts.tol * 0.5 {
            x.iter_mut().zip(&ph).for_each(|(x, p)| *x += alpha * p);
            return Ok((x, it + 1));
        }
        let sh = m.apply(&s);
        let t = a.matvec(&sh);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
    }
    Err(MfdError::NoConvergence {
        iterations: opts.max_iter,
        residual: norm2(&r) / nb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_laplacian(m: usize, shift: f64) -> SparseMatrix {
        let n = m * m;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                b.push(k, k, 4.0 + shift);
                if i > 0 {
                    b.push(k, k - m, -1.0);
                }
                if i + 1 < m {
                    b.push(k, k + m, -1.2);
                }
                if j > 0 {
                    b.push(k, k - 1, -0.8);
                }
                if j + 1 < m {
                    b.push(k, k + 1, -1.0);
                }
            }
        }
        b.build()
    }

    #[test]
    fn ordering_is_a_permutation() {
        let a = grid_laplacian(30, 0.0);
        let perm = nested_dissection(&adjacency(&a));
        let mut seen = perm.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..900).collect::<Vec<_>>());
    }

    #[test]
    fn ordering_handles_disconnected_graphs() {
        let mut b = TripletBuilder::new(200, 200);
        for i in 0..200 {
            b.push(i, i, 2.0);
            if i % 100 != 99 {
                b.push(i, i + 1, -1.0);
                b.push(i + 1, i, -1.0);
            }
        }
        let a = b.build();
        let perm = nested_dissection(&adjacency(&a));
        let mut seen = perm.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..200).collect::<Vec<_>>());
        let x = direct_solve(&a, &vec![1.0; 200], 1e-12).unwrap();
        assert!(relative_residual(&a, &x, &vec![1.0; 200]) < 1e-13);
    }

    #[test]
    fn nested_dissection_limits_fill() {
        let a = grid_laplacian(60, 0.0);
        let f = SparseLdu::factor(&a).unwrap();
        let natural = SparseLdu::factor_with_ordering(&a, (0..3600).collect()).unwrap();
        assert!(
            f.factor_nnz() < natural.factor_nnz(),
            "{} vs {}",
            f.factor_nnz(),
            natural.factor_nnz()
        );
    }

    #[test]
    fn ldu_solves_nonsymmetric_values() {
        let a = grid_laplacian(25, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..625).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x);
        let f = SparseLdu::factor(&a).unwrap();
        let y = f.solve(&b);
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn ldu_matches_dense_reference() {
        let a = SparseMatrix::from_dense(&[
            vec![4.0, -1.0, 0.0, -0.5],
            vec![-2.0, 5.0, -1.0, 0.0],
            vec![0.0, -1.5, 3.0, -1.0],
            vec![-0.5, 0.0, -0.25, 2.0],
        ]);
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = direct_solve(&a, &b, 1e-14).unwrap();
        let ax = a.matvec(&x);
        for (p, q) in ax.iter().zip(b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn trivial_systems() {
        let a = SparseMatrix::from_dense(&[vec![4.0]]);
        assert_eq!(direct_solve(&a, &[1.0], 1e-12).unwrap(), vec![0.25]);
        let id = SparseMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(direct_solve(&id, &b, 1e-12).unwrap(), b.to_vec());
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(
            direct_solve(&a, &[1.0, 2.0], 1e-12),
            Err(MfdError::SingularMatrix(_))
        ));
    }

    #[test]
    fn krylov_solvers_agree_with_direct() {
        let a = grid_laplacian(20, 0.0);
        let b: Vec<f64> = (0..400).map(|i| (i as f64 * 0.1).sin()).collect();
        let x = direct_solve(&a, &b, 1e-12).unwrap();
        let opts = SolveOptions {
            tol: 1e-11,
            ..Default::default()
        };
        let (y, it) = bicgstab(&a, &b, &opts).unwrap();
        assert!(it > 0);
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8);

        let s = symmetrized(&a);
        for (r, c, v) in s.iter() {
            assert_eq!(v, s.get(c, r));
        }
        let spd = grid_laplacian(20, 0.0)
            .add_scaled(&grid_laplacian(20, 0.0).transpose(), 1.0)
            .unwrap();
        let (z, _) = conjugate_gradient(&spd, &b, &opts).unwrap();
        assert!(relative_residual(&spd, &z, &b) < 1e-10);
    }

    #[test]
    fn ilu0_is_exact_for_tridiagonal() {
        let mut b = TripletBuilder::new(50, 50);
        for i in 0..50 {
            b.push(i, i, 3.0);
            if i > 0 {
                b.push(i, i - 1, -1.0);
            }
            if i < 49 {
                b.push(i, i + 1, -1.5);
            }
        }
        let a = b.build();
        let m = Ilu0::new(&a).unwrap();
        let rhs = vec![1.0; 50];
        let x = m.apply(&rhs);
        assert!(relative_residual(&a, &x, &rhs) < 1e-14);
    }

    #[test]
    fn cg_requires_a_symmetrizer() {
        let p = crate::presets::preset("helmholtz-scalar", None).unwrap();
        let mesh = crate::dualmesh::build_hexagon_mesh(2);
        let sys = crate::assembly::discretize(&mesh, &p.spec).unwrap().system;
        let cg = SolveOptions {
            method: SolveMethod::Cg,
            ..SolveOptions::default()
        };
        assert!(matches!(solve(&sys, &cg), Err(MfdError::Dimension(_))));
        let bi = SolveOptions {
            method: SolveMethod::Bicgstab,
            ..SolveOptions::default()
        };
        let x = solve(&sys, &bi).unwrap().solution.values;
        let y = solve(&sys, &SolveOptions::default()).unwrap().solution.values;
        let err = x.iter().zip(&y).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        assert!(err <= 1e-6 * y.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
}
