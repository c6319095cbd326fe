//! Solution of the bordered saddle-point system.
//!
//! The primary path is a sparse LU factorisation with partial pivoting,
//! followed by a few steps of iterative refinement. If that fails to reach
//! the residual target, restarted GMRES with an ILU(0) right preconditioner
//! is tried on the same system.
//!
//! A bordered matrix `[[K, w], [sᵀ, 0]]` is never factorised directly: its
//! dense last row and column would couple every column of the elimination
//! tree. Instead `K` with one row pinned is factorised once, and the border
//! is closed with a 2×2 system (see [`solve_bordered_csr`]).

use std::time::{Duration, Instant};

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::assembly::{SolutionField, SparseSystem};
use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix};

/// Relative residual every successful solve must reach.
pub const RESIDUAL_TARGET: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    Direct,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Direct factorisation, Krylov fallback.
    Auto,
    DirectOnly,
    KrylovOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub relative_residual: f64,
    pub path: SolverPath,
    /// Refinement sweeps (direct) or Krylov iterations.
    pub iterations: usize,
    pub unknowns: usize,
    pub nonzeros: usize,
    pub wall_time: Duration,
}

/// Solves a constrained system and unpacks the fields.
pub fn solve(system: &SparseSystem) -> Result<(SolutionField, SolveReport)> {
    solve_with(system, Strategy::Auto)
}

pub fn solve_with(system: &SparseSystem, strategy: Strategy) -> Result<(SolutionField, SolveReport)> {
    if system.mean_weights.is_none() {
        return Err(Error::Solver {
            reason: "structurally singular: pressure is only defined up to a constant without the mean constraint"
                .into(),
            residual: f64::NAN,
        });
    }
    let (x, report) = solve_bordered_csr(&system.matrix, &system.rhs, strategy)?;
    Ok((SolutionField::from_vector(system.layout, &x), report))
}

/// Solves a system whose last unknown is a multiplier bordering the rest.
pub fn solve_bordered_csr(matrix: &CsrMatrix, rhs: &[f64], strategy: Strategy) -> Result<(Vec<f64>, SolveReport)> {
    solve_impl(matrix, rhs, strategy, true)
}

/// Solves `A x = b` for a square CSR matrix.
pub fn solve_csr(matrix: &CsrMatrix, rhs: &[f64], strategy: Strategy) -> Result<(Vec<f64>, SolveReport)> {
    solve_impl(matrix, rhs, strategy, false)
}

fn solve_impl(matrix: &CsrMatrix, rhs: &[f64], strategy: Strategy, bordered: bool) -> Result<(Vec<f64>, SolveReport)> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(Error::Solver { reason: format!("shape mismatch: {}x{} with rhs {}", n, matrix.ncols(), rhs.len()), residual: f64::NAN });
    }
    check_structure(matrix)?;
    let start = Instant::now();
    let b_norm = norm2(rhs);
    let report = |x: &[f64], path, iterations| SolveReport {
        relative_residual: relative_residual(matrix, x, rhs, b_norm),
        path,
        iterations,
        unknowns: n,
        nonzeros: matrix.nnz(),
        wall_time: start.elapsed(),
    };

    let mut last_residual = f64::NAN;
    let mut last_reason = String::new();
    if strategy != Strategy::KrylovOnly {
        let attempt = if bordered { direct_bordered(matrix, rhs, b_norm) } else { direct(matrix, rhs, b_norm) };
        match attempt {
            Ok((x, sweeps)) => {
                let r = report(&x, SolverPath::Direct, sweeps);
                if r.relative_residual <= RESIDUAL_TARGET {
                    return Ok((x, r));
                }
                last_residual = r.relative_residual;
                last_reason = "direct factorisation did not reach the residual target".into();
            }
            Err(reason) => last_reason = reason,
        }
        if strategy == Strategy::DirectOnly {
            return Err(Error::Solver { reason: last_reason, residual: last_residual });
        }
    }

    let (x, iterations) = gmres_ilu0(matrix, rhs, b_norm);
    let r = report(&x, SolverPath::Krylov, iterations);
    if r.relative_residual <= RESIDUAL_TARGET {
        return Ok((x, r));
    }
    let reason = if last_reason.is_empty() {
        "GMRES did not converge".to_string()
    } else {
        format!("{last_reason}; GMRES fallback did not converge")
    };
    Err(Error::Solver { reason, residual: r.relative_residual.min(if last_residual.is_nan() { f64::INFINITY } else { last_residual }) })
}

fn relative_residual(matrix: &CsrMatrix, x: &[f64], b: &[f64], b_norm: f64) -> f64 {
    if x.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let ax = matrix.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(a, b)| b - a).collect();
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    norm2(&r) / scale
}

fn check_structure(matrix: &CsrMatrix) -> Result<()> {
    let n = matrix.nrows();
    let mut col_used = vec![false; n];
    for r in 0..n {
        let mut any = false;
        for (c, v) in matrix.row(r) {
            if v != 0.0 {
                any = true;
                col_used[c] = true;
            }
        }
        if !any {
            return Err(Error::Solver { reason: format!("structurally singular: row {r} is empty"), residual: f64::NAN });
        }
    }
    if let Some(c) = col_used.iter().position(|&u| !u) {
        return Err(Error::Solver { reason: format!("structurally singular: column {c} is empty"), residual: f64::NAN });
    }
    Ok(())
}

fn factorize(matrix: &CsrMatrix) -> std::result::Result<faer::sparse::linalg::solvers::Lu<usize, f64>, String> {
    let n = matrix.nrows();
    let triplets: Vec<Triplet<usize, usize, f64>> = matrix.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).map_err(|e| format!("{e:?}"))?;
    a.sp_lu().map_err(|e| format!("sparse LU failed: {e:?}"))
}

fn lu_solve(lu: &faer::sparse::linalg::solvers::Lu<usize, f64>, b: &[f64]) -> Vec<f64> {
    let col = Col::<f64>::from_fn(b.len(), |i| b[i]);
    let x = lu.solve(&col);
    (0..b.len()).map(|i| x[i]).collect()
}

/// Applies `solve` and up to three sweeps of iterative refinement.
fn refine(
    matrix: &CsrMatrix,
    rhs: &[f64],
    b_norm: f64,
    solve: impl Fn(&[f64]) -> Vec<f64>,
) -> std::result::Result<(Vec<f64>, usize), String> {
    let mut x = solve(rhs);
    let mut sweeps = 0;
    while sweeps < 3 {
        let res = relative_residual(matrix, &x, rhs, b_norm);
        if !res.is_finite() {
            return Err("factorisation produced non-finite values (numerically singular matrix)".into());
        }
        if res <= 1e-14 {
            break;
        }
        let ax = matrix.mul_vec(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        sweeps += 1;
    }
    Ok((x, sweeps))
}

fn direct(matrix: &CsrMatrix, rhs: &[f64], b_norm: f64) -> std::result::Result<(Vec<f64>, usize), String> {
    let lu = factorize(matrix)?;
    refine(matrix, rhs, b_norm, |b| lu_solve(&lu, b))
}

/// Direct solve of `[[K, w], [sᵀ, 0]] [x; λ] = [b; β]` where `K` may have a
/// one-dimensional kernel.
///
/// With `K_j` equal to `K` except that row `j` is replaced by `e_jᵀ`, every
/// solution has the form `x = y_b − λ y_w + α c` where `K_j y_b = b⁽ʲ⁾`,
/// `K_j y_w = w⁽ʲ⁾` (row `j` zeroed) and `K_j c = e_j`. Row `j` of the block
/// equation and the constraint then fix `λ` and `α`.
fn direct_bordered(matrix: &CsrMatrix, rhs: &[f64], b_norm: f64) -> std::result::Result<(Vec<f64>, usize), String> {
    let n = matrix.nrows();
    if n < 2 {
        return direct(matrix, rhs, b_norm);
    }
    let m = n - 1;
    if matrix.get(m, m) != 0.0 {
        return Err("bordered solve expects a zero multiplier diagonal".into());
    }
    let mut w = vec![0.0; m];
    let mut inner = Vec::with_capacity(matrix.nnz());
    for r in 0..m {
        for (c, v) in matrix.row(r) {
            if c == m {
                w[r] = v;
            } else {
                inner.push((r, c, v));
            }
        }
    }
    let s: Vec<(usize, f64)> = matrix.row(m).filter(|&(c, _)| c < m).collect();
    let j = (0..m)
        .max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()))
        .filter(|&j| w[j] != 0.0)
        .ok_or("border column is empty")?;
    let k = CsrMatrix::from_triplets(m, m, &inner);
    let row_j: Vec<(usize, f64)> = k.row(j).collect();
    let mut pinned: Vec<_> = inner.into_iter().filter(|e| e.0 != j).collect();
    pinned.push((j, j, 1.0));
    let lu = factorize(&CsrMatrix::from_triplets(m, m, &pinned))?;

    let mut wj = w.clone();
    wj[j] = 0.0;
    let y_w = lu_solve(&lu, &wj);
    let mut ej = vec![0.0; m];
    ej[j] = 1.0;
    let c = lu_solve(&lu, &ej);
    let dot_row = |y: &[f64]| row_j.iter().map(|&(col, v)| v * y[col]).sum::<f64>();
    let dot_s = |y: &[f64]| s.iter().map(|&(col, v)| v * y[col]).sum::<f64>();
    let (k_yw, k_c) = (dot_row(&y_w), dot_row(&c));
    let (s_yw, s_c) = (dot_s(&y_w), dot_s(&c));
    // [[w_j − (K y_w)_j, (K c)_j], [−sᵀy_w, sᵀc]] [λ; α]
    let a11 = w[j] - k_yw;
    let det = a11 * s_c + k_c * s_yw;
    if !(det.is_finite() && det.abs() > 1e-300) {
        return Err("bordered system is singular".into());
    }

    let solve = |full: &[f64]| -> Vec<f64> {
        let mut b = full[..m].to_vec();
        let b_j = b[j];
        b[j] = 0.0;
        let y_b = lu_solve(&lu, &b);
        let r1 = b_j - dot_row(&y_b);
        let r2 = full[m] - dot_s(&y_b);
        let lambda = (r1 * s_c - k_c * r2) / det;
        let alpha = (a11 * r2 + s_yw * r1) / det;
        let mut x: Vec<f64> = (0..m).map(|i| y_b[i] - lambda * y_w[i] + alpha * c[i]).collect();
        x.push(lambda);
        x
    };
    refine(matrix, rhs, b_norm, solve)
}

/// Incomplete LU with zero fill, stored on the pattern of the matrix.
struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(matrix: &CsrMatrix) -> Self {
        let n = matrix.nrows();
        // Every row needs a stored diagonal entry.
        let mut t: Vec<_> = matrix.triplets().collect();
        t.extend((0..n).map(|r| (r, r, 0.0)));
        let m = CsrMatrix::from_triplets(n, n, &t);
        let (row_ptr, col_idx, values) = m.parts();
        let (row_ptr, col_idx, mut values) = (row_ptr.to_vec(), col_idx.to_vec(), values.to_vec());
        let diag: Vec<usize> =
            (0..n).map(|r| row_ptr[r] + col_idx[row_ptr[r]..row_ptr[r + 1]].binary_search(&r).unwrap()).collect();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = k;
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                let c = col_idx[k];
                if c >= i {
                    break;
                }
                let piv = values[diag[c]];
                values[k] /= piv;
                let lik = values[k];
                for kk in diag[c] + 1..row_ptr[c + 1] {
                    let p = pos[col_idx[kk]];
                    if p != usize::MAX {
                        values[p] -= lik * values[kk];
                    }
                }
            }
            if values[diag[i]].abs() < 1e-12 * scale {
                values[diag[i]] = if values[diag[i]] < 0.0 { -1e-8 } else { 1e-8 } * scale;
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = usize::MAX;
            }
        }
        Self { row_ptr, col_idx, values, diag }
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in self.row_ptr[i]..self.diag[i] {
                s -= self.values[k] * y[self.col_idx[k]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in self.diag[i] + 1..self.row_ptr[i + 1] {
                s -= self.values[k] * y[self.col_idx[k]];
            }
            y[i] = s / self.values[self.diag[i]];
        }
        y
    }
}

/// Right-preconditioned restarted GMRES. Returns the iterate and iteration count.
fn gmres_ilu0(matrix: &CsrMatrix, rhs: &[f64], b_norm: f64) -> (Vec<f64>, usize) {
    const RESTART: usize = 60;
    const MAX_ITERS: usize = 5000;
    let n = rhs.len();
    let ilu = Ilu0::new(matrix);
    let mut x = vec![0.0; n];
    let target = 1e-12 * if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut total = 0;
    while total < MAX_ITERS {
        let ax = matrix.mul_vec(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm2(&r);
        if beta <= target || !beta.is_finite() {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; RESTART]; RESTART + 1];
        let (mut cs, mut sn) = (vec![0.0; RESTART], vec![0.0; RESTART]);
        let mut g = vec![0.0; RESTART + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..RESTART {
            total += 1;
            let z = ilu.apply(&basis[k]);
            let mut w = matrix.mul_vec(&z);
            for (j, v) in basis.iter().enumerate() {
                let h: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
                hess[j][k] = h;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= h * vi;
                }
            }
            let h_next = norm2(&w);
            hess[k + 1][k] = h_next;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= target || h_next == 0.0 || total >= MAX_ITERS {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, v) in update.iter_mut().zip(&basis[j]) {
                *u += yj * v;
            }
        }
        let dz = ilu.apply(&update);
        for (xi, d) in x.iter_mut().zip(&dz) {
            *xi += d;
        }
        if k_used == 0 {
            break;
        }
    }
    (x, total)
}
