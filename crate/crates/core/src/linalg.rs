//! Sparse storage and the linear solvers used by the time steppers.
//!
//! Two backends satisfy the same contract (`‖Ax − b‖/‖b‖ ≤ tol` or an
//! error): restarted GMRES with a block-Jacobi preconditioner, and a sparse
//! LU factorisation for stiff configurations.

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::Solve;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicates are summed; columns within a row end up sorted.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity_scaled(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// `alpha·self + beta·other`; both must share dimensions.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            t.extend(self.row(i).map(|(j, v)| (i, j, alpha * v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, beta * v)));
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    /// Gershgorin bound on the spectral radius of `diag⁻¹·A`.
    pub fn scaled_gershgorin(&self, diag: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>() / diag[i])
            .fold(0.0, f64::max)
    }
}

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

pub trait Preconditioner: Sync {
    /// z = P⁻¹ r
    fn apply_inverse(&self, r: &[f64], z: &mut [f64]);
}

/// Inverse of the dense diagonal blocks of a matrix.
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    ranges: Vec<std::ops::Range<usize>>,
    inverses: Vec<Vec<f64>>,
}

impl BlockJacobi {
    pub fn from_blocks(ranges: Vec<std::ops::Range<usize>>, blocks: Vec<Vec<f64>>) -> Result<Self> {
        let inverses = ranges
            .iter()
            .zip(blocks)
            .map(|(r, b)| invert_dense(b, r.len()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ranges, inverses })
    }

    pub fn new(matrix: &CsrMatrix, ranges: Vec<std::ops::Range<usize>>) -> Result<Self> {
        let blocks = ranges
            .iter()
            .map(|r| {
                let n = r.len();
                let mut b = vec![0.0; n * n];
                for (bi, i) in r.clone().enumerate() {
                    for (j, v) in matrix.row(i) {
                        if r.contains(&j) {
                            b[bi * n + (j - r.start)] = v;
                        }
                    }
                }
                b
            })
            .collect();
        Self::from_blocks(ranges, blocks)
    }
}

impl Preconditioner for BlockJacobi {
    fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
        for (range, inv) in self.ranges.iter().zip(&self.inverses) {
            let n = range.len();
            for i in 0..n {
                let row = &inv[i * n..(i + 1) * n];
                z[range.start + i] = row.iter().zip(&r[range.clone()]).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// Gauss–Jordan inverse with partial pivoting of a row-major n×n block.
fn invert_dense(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap();
        let p = a[piv * n + col];
        if p == 0.0 || !p.is_finite() {
            return Err(Error::Parameter("singular diagonal block".into()));
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        for k in 0..n {
            a[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for row in 0..n {
            if row != col {
                let f = a[row * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        a[row * n + k] -= f * a[col * n + k];
                        inv[row * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Ok(inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Right-preconditioned restarted GMRES. `x` holds the initial guess on
/// entry. Convergence is declared on the true residual `‖b − Ax‖/‖b‖`.
pub fn gmres(
    op: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = op.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    let residual = |x: &[f64], r: &mut [f64], tmp: &mut [f64]| {
        op.apply(x, tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        norm(r)
    };
    let mut beta = residual(x, &mut r, &mut w);
    loop {
        if beta <= tol * bnorm {
            return Ok(SolveStats {
                iterations: total,
                relative_residual: beta / bnorm,
            });
        }
        if total >= max_iter {
            return Err(Error::LinearSolver {
                iterations: total,
                residual: beta / bnorm,
            });
        }
        let m = restart.min(max_iter - total).max(1);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m {
            precond.apply_inverse(&v[k], &mut z);
            op.apply(&z, &mut w);
            for i in 0..=k {
                let hik: f64 = w.iter().zip(&v[i]).map(|(a, b)| a * b).sum();
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / d;
                sn[k] = h[k + 1][k] / d;
            }
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() <= 0.5 * tol * bnorm || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution and update x += P⁻¹ V y
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = ((i + 1)..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut vy = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (a, b) in vy.iter_mut().zip(vi) {
                *a += yi * b;
            }
        }
        precond.apply_inverse(&vy, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        let prev = beta;
        beta = residual(x, &mut r, &mut w);
        if !beta.is_finite() {
            return Err(Error::LinearSolver {
                iterations: total,
                residual: beta,
            });
        }
        // stagnation guard: restart made no progress at all
        if beta >= prev && k == m && total >= max_iter {
            return Err(Error::LinearSolver {
                iterations: total,
                residual: beta / bnorm,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Restarted GMRES with element block-Jacobi preconditioning.
    Gmres,
    /// Sparse LU factorisation, computed once per operator.
    Direct,
}

pub trait LinearSolver: Send + Sync {
    fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<SolveStats>;
}

pub struct GmresSolver {
    pub matrix: CsrMatrix,
    pub precond: BlockJacobi,
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl LinearSolver for GmresSolver {
    fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<SolveStats> {
        gmres(&self.matrix, &self.precond, b, x, self.tol, self.restart, self.max_iter)
    }
}

pub struct DirectSolver {
    matrix: CsrMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    tol: f64,
}

impl DirectSolver {
    pub fn new(matrix: CsrMatrix, tol: f64) -> Result<Self> {
        let mut trip = Vec::with_capacity(matrix.nnz());
        for i in 0..matrix.nrows {
            for (j, v) in matrix.row(i) {
                trip.push(Triplet::new(i, j, v));
            }
        }
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(matrix.nrows, matrix.ncols, &trip)
            .map_err(|e| Error::Parameter(format!("sparse matrix: {e:?}")))?;
        let lu = csc
            .sp_lu()
            .map_err(|e| Error::Parameter(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { matrix, lu, tol })
    }
}

impl LinearSolver for DirectSolver {
    fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<SolveStats> {
        let n = b.len();
        x.copy_from_slice(b);
        self.lu
            .solve_in_place(faer::MatMut::from_column_major_slice_mut(x, n, 1));
        let ax = self.matrix.mul(x);
        let bnorm = norm(b);
        let res = if bnorm == 0.0 {
            norm(&ax)
        } else {
            ax.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt() / bnorm
        };
        if !(res <= self.tol) {
            return Err(Error::LinearSolver {
                iterations: 1,
                residual: res,
            });
        }
        Ok(SolveStats {
            iterations: 1,
            relative_residual: res,
        })
    }
}

/// Builds a solver of the requested kind for `matrix`; `blocks` are the
/// element ranges used by block-Jacobi.
pub fn build_solver(
    kind: SolverKind,
    matrix: CsrMatrix,
    blocks: Vec<std::ops::Range<usize>>,
    tol: f64,
) -> Result<Box<dyn LinearSolver>> {
    Ok(match kind {
        SolverKind::Gmres => {
            let precond = BlockJacobi::new(&matrix, blocks)?;
            let n = matrix.nrows;
            Box::new(GmresSolver {
                matrix,
                precond,
                tol,
                restart: 60,
                max_iter: 20 * n.max(100),
            })
        }
        SolverKind::Direct => Box::new(DirectSolver::new(matrix, tol)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.8));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.mul(&[1.0, 1.0]), vec![4.0, 2.0]);
    }

    #[test]
    fn block_inverse() {
        let inv = invert_dense(vec![0.0, 2.0, 1.0, 1.0], 2).unwrap();
        // [[0,2],[1,1]]⁻¹ = [[-0.5, 1], [0.5, 0]]
        assert_eq!(inv, vec![-0.5, 1.0, 0.5, 0.0]);
        assert!(invert_dense(vec![1.0, 1.0, 1.0, 1.0], 2).is_err());
    }

    #[test]
    fn solvers_meet_tolerance() {
        let n = 200;
        let a = laplacian_1d(n, 0.01);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let blocks: Vec<_> = (0..n / 4).map(|k| 4 * k..4 * k + 4).collect();
        for kind in [SolverKind::Gmres, SolverKind::Direct] {
            let s = build_solver(kind, a.clone(), blocks.clone(), 1e-10).unwrap();
            let mut x = vec![0.0; n];
            let st = s.solve(&b, &mut x).unwrap();
            let ax = a.mul(&x);
            let r = norm(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) / norm(&b);
            assert!(r <= 1e-10, "{kind:?}: {r}");
            assert!(st.relative_residual <= 1e-10);
        }
    }

    #[test]
    fn gmres_reports_non_convergence() {
        let n = 200;
        let a = laplacian_1d(n, 0.0);
        let b = vec![1.0; n];
        let blocks: Vec<_> = (0..n).map(|k| k..k + 1).collect();
        let p = BlockJacobi::new(&a, blocks).unwrap();
        let mut x = vec![0.0; n];
        let err = gmres(&a, &p, &b, &mut x, 1e-14, 5, 10).unwrap_err();
        assert!(matches!(err, Error::LinearSolver { .. }));
    }
}
