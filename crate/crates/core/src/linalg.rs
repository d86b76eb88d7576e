//! Dense real matrix kernels.
//!
//! Everything here works on small matrices (the largest LMI block in this
//! crate is 9x9), so the routines favour accuracy and simplicity over speed:
//! cyclic Jacobi for symmetric eigenproblems, one-sided Jacobi for singular
//! values, LU with partial pivoting for linear solves, and Hessenberg QR for
//! the spectrum of non-symmetric matrices.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;
const HQR_MAX_ITERS: usize = 60;

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        Matrix::from_vec(r.rows, r.cols, r.data)
    }
}

impl From<Matrix> for MatrixRepr {
    fn from(m: Matrix) -> Self {
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>14.6e}", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row slices. Panics on ragged input; meant for
    /// literals in code and tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn column(v: &[f64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn row(v: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        Matrix {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension");
        (0..self.rows).map(|i| dot(self.row_slice(i), x)).collect()
    }

    /// Checked product; the `*` operator panics on mismatch instead.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Assembles a block matrix. `None` entries are zero blocks; every block
    /// row needs at least one `Some` to fix its height, likewise for columns.
    pub fn from_blocks(blocks: &[Vec<Option<&Matrix>>]) -> Result<Matrix> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, |r| r.len());
        let mut heights = vec![None; nbr];
        let mut widths = vec![None; nbc];
        for (bi, brow) in blocks.iter().enumerate() {
            if brow.len() != nbc {
                return Err(Error::Dimension("ragged block rows".into()));
            }
            for (bj, b) in brow.iter().enumerate() {
                if let Some(m) = b {
                    for (slot, v) in [(&mut heights[bi], m.rows), (&mut widths[bj], m.cols)] {
                        match slot {
                            Some(prev) if *prev != v => {
                                return Err(Error::Dimension(format!(
                                    "block ({bi},{bj}) is {}x{}, inconsistent with its row/column",
                                    m.rows, m.cols
                                )))
                            }
                            _ => *slot = Some(v),
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights
            .into_iter()
            .map(|h| h.ok_or_else(|| Error::Dimension("block row without size".into())))
            .collect::<Result<_>>()?;
        let widths: Vec<usize> = widths
            .into_iter()
            .map(|w| w.ok_or_else(|| Error::Dimension("block column without size".into())))
            .collect::<Result<_>>()?;
        let mut out = Matrix::zeros(heights.iter().sum(), widths.iter().sum());
        let mut r0 = 0;
        for (bi, brow) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (bj, b) in brow.iter().enumerate() {
                if let Some(m) = b {
                    out.set_block(r0, c0, m);
                }
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        Ok(out)
    }

    pub fn block_diag(blocks: &[&Matrix]) -> Matrix {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            out.set_block(r0, c0, b);
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    /// x^T M x for square M.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.shape(),
            rhs.shape(),
            "matrix difference dimension mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Symmetric matrix stored as its packed upper triangle.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct SymmetricMatrix {
    dim: usize,
    upper: Vec<f64>,
}

impl TryFrom<MatrixRepr> for SymmetricMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let m = Matrix::from_vec(r.rows, r.cols, r.data)?;
        SymmetricMatrix::try_from_matrix(&m, 1e-9)
    }
}

impl From<SymmetricMatrix> for MatrixRepr {
    fn from(s: SymmetricMatrix) -> Self {
        s.to_matrix().into()
    }
}

impl fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symmetric{:?}", self.to_matrix())
    }
}

#[inline]
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut s = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            s.set(i, i, v);
        }
        s
    }

    pub fn scalar(v: f64) -> Self {
        Self::diag(&[v])
    }

    /// Packed upper triangle, row by row.
    pub fn from_upper(dim: usize, upper: Vec<f64>) -> Result<Self> {
        if upper.len() != dim * (dim + 1) / 2 {
            return Err(Error::Dimension(format!(
                "packed upper triangle of dim {dim} needs {} entries, got {}",
                dim * (dim + 1) / 2,
                upper.len()
            )));
        }
        if upper.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix entries".into()));
        }
        Ok(SymmetricMatrix { dim, upper })
    }

    /// (M + M^T) / 2.
    pub fn symmetrize(m: &Matrix) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.rows();
        let mut s = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                s.set(i, j, 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
        s
    }

    /// Accepts `m` only if it is symmetric to `rel_tol` relative to its
    /// largest entry.
    pub fn try_from_matrix(m: &Matrix, rel_tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let scale = 1.0 + m.max_abs();
        let n = m.rows();
        for i in 0..n {
            for j in i + 1..n {
                if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                    return Err(Error::Dimension(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self::symmetrize(m))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[packed_index(self.dim, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.dim, i, j);
        self.upper[k] = v;
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn to_matrix(&self) -> Matrix {
        let n = self.dim;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        SymmetricMatrix {
            dim: self.dim,
            upper: self.upper.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &SymmetricMatrix) -> Self {
        assert_eq!(self.dim, other.dim, "symmetric sum dimension mismatch");
        SymmetricMatrix {
            dim: self.dim,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymmetricMatrix) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Adds `s * other` in place.
    pub fn axpy(&mut self, s: f64, other: &SymmetricMatrix) {
        assert_eq!(self.dim, other.dim, "symmetric axpy dimension mismatch");
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += s * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.to_matrix().frobenius_norm()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "quadratic form dimension");
        let mut acc = 0.0;
        for i in 0..self.dim {
            acc += self.get(i, i) * x[i] * x[i];
            for j in i + 1..self.dim {
                acc += 2.0 * self.get(i, j) * x[i] * x[j];
            }
        }
        acc
    }

    /// B^T S B, symmetric by construction.
    pub fn congruence(&self, b: &Matrix) -> SymmetricMatrix {
        let sb = &self.to_matrix() * b;
        SymmetricMatrix::symmetrize(&(&b.transpose() * &sb))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues in ascending order, eigenvectors as the matching columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition.
pub fn sym_eigendecompose(m: &SymmetricMatrix) -> Result<SymEigen> {
    let n = m.dim();
    let mut a = m.to_matrix();
    if !a.is_finite() {
        return Err(Error::NonFinite("eigendecomposition input".into()));
    }
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    let mut converged = n <= 1 || scale == 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            what: "Jacobi eigenvalue iteration",
            iterations: JACOBI_MAX_SWEEPS,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &SymmetricMatrix) -> Result<f64> {
    Ok(sym_eigendecompose(m)?
        .values
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY))
}

/// True iff every eigenvalue is below `-margin`.
pub fn is_negative_definite(m: &SymmetricMatrix, margin: f64) -> bool {
    match max_eigenvalue(m) {
        Ok(l) => l < -margin,
        Err(_) => false,
    }
}

pub fn is_positive_definite(m: &SymmetricMatrix, margin: f64) -> bool {
    is_negative_definite(&m.scale(-1.0), margin)
}

/// LU factorisation with partial pivoting, packed in place.
struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

fn lu_decompose(a: &Matrix) -> Result<Lu> {
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (piv, pval) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if pval <= 1e-14 * scale {
            return Err(Error::Singular {
                condition: f64::INFINITY,
            });
        }
        if piv != k {
            perm.swap(piv, k);
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
        }
        for i in k + 1..n {
            let f = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = f;
            for j in k + 1..n {
                let u = lu[(k, j)];
                lu[(i, j)] -= f * u;
            }
        }
    }
    Ok(Lu { lu, perm })
}

impl Lu {
    fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    fn solve(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.col_vec(j));
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

fn norm_one(a: &Matrix) -> f64 {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number, computed from the explicit inverse.
pub fn condition_estimate(a: &Matrix) -> f64 {
    match lu_decompose(a) {
        Ok(lu) => norm_one(a) * norm_one(&lu.solve(&Matrix::identity(a.rows()))),
        Err(_) => f64::INFINITY,
    }
}

/// Solves `a x = b` for square, nonsingular `a`.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "solve_linear: a is {}x{}, b is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("solve_linear input".into()));
    }
    let lu = lu_decompose(a)?;
    let x = lu.solve(b);
    let cond = condition_estimate(a);
    if !(cond < 1e14) || !x.is_finite() {
        return Err(Error::Singular { condition: cond });
    }
    Ok(x)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve_linear(a, &Matrix::identity(a.rows()))
}

/// Lower Cholesky factor L with m = L L^T.
pub fn cholesky(m: &SymmetricMatrix) -> Result<Matrix> {
    let n = m.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "Cholesky pivot {j} is {d:.3e}"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// log det of a positive definite matrix, or `None` if Cholesky fails.
pub fn log_det_pd(m: &SymmetricMatrix) -> Option<f64> {
    let l = cholesky(m).ok()?;
    Some((0..m.dim()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn invert_spd(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let n = m.dim();
    let l = cholesky(m)?;
    // L^{-1} by forward substitution, then M^{-1} = L^{-T} L^{-1}.
    let mut linv = Matrix::zeros(n, n);
    for j in 0..n {
        linv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = s / l[(i, i)];
        }
    }
    let mut out = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (j..n).map(|k| linv[(k, i)] * linv[(k, j)]).sum();
            out.set(i, j, s);
        }
    }
    Ok(out)
}

/// Singular values in descending order (one-sided Jacobi).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let work = if a.cols() > a.rows() {
        a.transpose()
    } else {
        a.clone()
    };
    let (m, n) = work.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| work.col_vec(j)).collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let ap = cols[p][k];
                    let aq = cols[q][k];
                    cols[p][k] = c * ap - s * aq;
                    cols[q][k] = s * ap + c * aq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Rank with threshold `rel_tol * sigma_max`.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// A possibly complex eigenvalue of a real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Eigenvalues of a general real square matrix (Hessenberg reduction
/// followed by Francis double-shift QR).
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Eigenvalue>> {
    if !a.is_square() {
        return Err(Error::Dimension(
            "eigenvalues of a non-square matrix".into(),
        ));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("eigenvalue input".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based working copy keeps the QR sweep close to its textbook form.
    let mut h = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            h[i + 1][j + 1] = a[(i, j)];
        }
    }
    hessenberg(&mut h, n);
    hqr(&mut h, n)
}

fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    for m in 2..n {
        let mut x = 0.0f64;
        let mut i = m;
        for j in m..=n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let t = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = t;
            }
            for row in a.iter_mut().take(n + 1).skip(1) {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut().take(n + 1).skip(1) {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            if i > j + 1 {
                a[i][j] = 0.0;
            }
        }
    }
}

fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<Eigenvalue>> {
    let n = n as isize;
    let mut wr = vec![0.0f64; n as usize + 1];
    let mut wi = vec![0.0f64; n as usize + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i - 1).max(1)..=n {
            anorm += a[i as usize][j as usize].abs();
        }
    }
    macro_rules! at {
        ($i:expr, $j:expr) => {
            a[($i) as usize][($j) as usize]
        };
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = at!(l - 1, l - 1).abs() + at!(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at!(l, l - 1).abs() + s == s {
                    at!(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            x = at!(nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
            } else {
                y = at!(nn - 1, nn - 1);
                w = at!(nn, nn - 1) * at!(nn - 1, nn);
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[(nn - 1) as usize] = x + z;
                        wr[nn as usize] = x + z;
                        if z != 0.0 {
                            wr[nn as usize] = x - w / z;
                        }
                        wi[(nn - 1) as usize] = 0.0;
                        wi[nn as usize] = 0.0;
                    } else {
                        wr[(nn - 1) as usize] = x + p;
                        wr[nn as usize] = x + p;
                        wi[(nn - 1) as usize] = -z;
                        wi[nn as usize] = z;
                    }
                    nn -= 2;
                } else {
                    if its == HQR_MAX_ITERS {
                        return Err(Error::NotConverged {
                            what: "Hessenberg QR",
                            iterations: HQR_MAX_ITERS,
                        });
                    }
                    if its == 10 || its == 20 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            at!(i, i) -= x;
                        }
                        let s = at!(nn, nn - 1).abs() + at!(nn - 1, nn - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    while m >= l {
                        z = at!(m, m);
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / at!(m + 1, m) + at!(m, m + 1);
                        q = at!(m + 1, m + 1) - z - r - s0;
                        r = at!(m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = at!(m, m - 1).abs() * (q.abs() + r.abs());
                        let v =
                            p.abs() * (at!(m - 1, m - 1).abs() + z.abs() + at!(m + 1, m + 1).abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        at!(i, i - 2) = 0.0;
                        if i != m + 2 {
                            at!(i, i - 3) = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = at!(k, k - 1);
                            q = at!(k + 1, k - 1);
                            r = 0.0;
                            if k != nn - 1 {
                                r = at!(k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    at!(k, k - 1) = -at!(k, k - 1);
                                }
                            } else {
                                at!(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = at!(k, j) + q * at!(k + 1, j);
                                if k != nn - 1 {
                                    p += r * at!(k + 2, j);
                                    at!(k + 2, j) -= p * z;
                                }
                                at!(k + 1, j) -= p * y;
                                at!(k, j) -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * at!(i, k) + y * at!(i, k + 1);
                                if k != nn - 1 {
                                    p += z * at!(i, k + 2);
                                    at!(i, k + 2) -= p * r;
                                }
                                at!(i, k + 1) -= p * q;
                                at!(i, k) -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if !(l < nn - 1) {
                break;
            }
        }
    }
    Ok((1..=n as usize)
        .map(|i| Eigenvalue {
            re: wr[i],
            im: wi[i],
        })
        .collect())
}

/// max |lambda_i(a)|. Falls back to Gelfand's formula if QR fails.
pub fn spectral_radius(a: &Matrix) -> f64 {
    assert!(a.is_square(), "spectral radius of a non-square matrix");
    match eigenvalues(a) {
        Ok(ev) => ev.iter().map(Eigenvalue::modulus).fold(0.0, f64::max),
        Err(_) => {
            let mut p = a.clone();
            let mut k = 1u32;
            for _ in 0..8 {
                p = &p * &p;
                k *= 2;
            }
            p.frobenius_norm().powf(1.0 / k as f64)
        }
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn sym_strategy(n: usize) -> impl Strategy<Value = SymmetricMatrix> {
        proptest::collection::vec(-5.0f64..5.0, n * (n + 1) / 2)
            .prop_map(move |v| SymmetricMatrix::from_upper(n, v).unwrap())
    }

    fn mat_strategy(n: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-2.0f64..2.0, n * n)
            .prop_map(move |v| Matrix::from_vec(n, n, v).unwrap())
    }

    proptest! {
        #[test]
        fn eigenvectors_orthogonal(m in (1usize..7).prop_flat_map(sym_strategy)) {
            let e = sym_eigendecompose(&m).unwrap();
            let n = m.dim();
            for i in 0..n {
                for j in i + 1..n {
                    let d = dot(&e.vectors.col_vec(i), &e.vectors.col_vec(j));
                    prop_assert!(d.abs() < 1e-9);
                }
            }
            let rec = &(&e.vectors * &Matrix::diag(&e.values)) * &e.vectors.transpose();
            prop_assert!((&rec - &m.to_matrix()).frobenius_norm() <= 1e-10 * (1.0 + m.frobenius_norm()));
        }

        #[test]
        fn never_both_definite(m in (1usize..6).prop_flat_map(sym_strategy)) {
            prop_assume!(m.frobenius_norm() > 0.0);
            prop_assert!(!(is_negative_definite(&m, 0.0) && is_negative_definite(&m.scale(-1.0), 0.0)));
        }

        #[test]
        fn spectral_radius_transpose_invariant(a in (1usize..6).prop_flat_map(mat_strategy)) {
            let r1 = spectral_radius(&a);
            let r2 = spectral_radius(&a.transpose());
            prop_assert!((r1 - r2).abs() <= 1e-9 * (1.0 + r1));
        }
    }
}
