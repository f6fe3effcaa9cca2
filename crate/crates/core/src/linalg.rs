//! Small dense linear algebra kernels.
//!
//! Problem sizes here are desk-scale (a few hundred at most), so plain
//! row-major storage and textbook algorithms are adequate: cyclic Jacobi for
//! symmetric eigenproblems, Cholesky for SPD solves, power iteration for the
//! leading eigenvector of a Hermitian matrix.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { context: "matrix data", expected: rows * cols, found: data.len() });
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self · selfᵀ`, computed on the upper triangle and mirrored so the
    /// result is exactly symmetric.
    pub fn gram_rows(&self) -> Self {
        let n = self.rows;
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: T = self.row(i).iter().zip(self.row(j)).map(|(&a, &b)| a * b).sum();
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec dimension");
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum()).collect()
    }

    pub fn scale(&self, s: T) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn add(&self, other: &Mat<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Mat<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Sub-block `[r0, r0+nr) × [c0, c0+nc)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Mat::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat<T>) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// Largest absolute asymmetry `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Mat::from_fn(self.rows, self.cols, |i, j| half * (self[(i, j)] + self[(j, i)]))
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Mat<T>,
}

/// Cyclic Jacobi eigenvalue algorithm. The input is symmetrized first.
pub fn symmetric_eigen<T: Real>(a: &Mat<T>) -> SymEigen<T> {
    assert_eq!(a.rows(), a.cols(), "eigen of non-square matrix");
    let n = a.rows();
    let mut a = a.symmetrized();
    let mut v = Mat::identity(n);
    let eps = T::epsilon();
    let total: T = a.as_slice().iter().map(|&x| x * x).sum();

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off == T::zero() || off <= eps * eps * total * T::lit(1e-4) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = if theta.abs() > T::lit(1e150) {
                    T::one() / (T::lit(2.0) * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
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

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymEigen { values, vectors }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky<T: Real>(a: &Mat<T>) -> Result<Mat<T>> {
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::Singular(format!("Cholesky pivot {j} is not positive")));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

pub fn cholesky_solve<T: Real>(l: &Mat<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[(i, k)] * y[k];
            y[i] -= t;
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[(k, i)] * y[k];
            y[i] -= t;
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse<T: Real>(a: &Mat<T>) -> Result<Mat<T>> {
    let l = cholesky(a)?;
    let n = a.rows();
    let mut inv = Mat::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[j] = T::one();
        let col = cholesky_solve(&l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv.symmetrized())
}

/// Dense complex square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat<T> {
    n: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![Cplx::new(T::zero(), T::zero()); n * n] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `w · v vᴴ`.
    pub fn add_outer(&mut self, w: T, v: &[Cplx<T>]) {
        let n = self.n;
        for (i, &v_i) in v.iter().enumerate().take(n) {
            let vi = v_i * w;
            for (j, vj) in v.iter().enumerate().take(n) {
                self.data[i * n + j] += vi * vj.conj();
            }
        }
    }

    pub fn matvec(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(x)
                    .fold(Cplx::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Real symmetric `2n × 2n` embedding `[[Re, -Im], [Im, Re]]` of a
    /// Hermitian matrix; every eigenvalue appears twice.
    pub fn realify(&self) -> Mat<T> {
        let n = self.n;
        Mat::from_fn(2 * n, 2 * n, |i, j| {
            let h = self[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => h.re,
                (true, false) => -h.im,
                (false, true) => h.im,
            }
        })
    }

    /// Gershgorin bound on the spectral radius.
    pub fn gershgorin_radius(&self) -> T {
        let n = self.n;
        (0..n).map(|i| self.data[i * n..(i + 1) * n].iter().map(|v| v.norm()).sum::<T>()).fold(T::zero(), T::max)
    }
}

impl<T> Index<(usize, usize)> for CMat<T> {
    type Output = Cplx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cplx<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cplx<T> {
        &mut self.data[i * self.n + j]
    }
}

/// Result of [`leading_eigenvector`].
#[derive(Debug, Clone)]
pub struct PowerIteration<T> {
    pub vector: Vec<Cplx<T>>,
    pub value: T,
    pub residual: T,
    pub iterations: usize,
}

/// Leading (largest algebraic) eigenpair of a Hermitian matrix by power
/// iteration, stopping once `‖Hv − λv‖ ≤ tol·|λ|`.
///
/// When the matrix may be indefinite the iteration runs on `H + cI` with `c`
/// the Gershgorin radius, so that the dominant eigenvalue is the largest one.
pub fn leading_eigenvector<T: Real>(h: &CMat<T>, tol: T, max_iter: usize, shift_to_psd: bool) -> PowerIteration<T> {
    let n = h.dim();
    let shift = if shift_to_psd { h.gershgorin_radius() } else { T::zero() };
    // Deterministic start: the basis vector with the largest diagonal entry,
    // plus a small uniform component so it is not orthogonal to the target.
    let k0 = (0..n)
        .max_by(|&a, &b| h[(a, a)].re.partial_cmp(&h[(b, b)].re).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let mut v: Vec<Cplx<T>> = (0..n)
        .map(|i| {
            let base = if i == k0 { T::one() } else { T::zero() };
            Cplx::new(base + T::lit(1e-3), T::lit(1e-3) * T::from_usize_lossy(i % 7))
        })
        .collect();
    normalize(&mut v);

    let mut value = T::zero();
    let mut residual = T::infinity();
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let hv = h.matvec(&v);
        let lambda = crate::scalar::inner(&v, &hv).re;
        residual = hv.iter().zip(&v).map(|(a, b)| (a - b * lambda).norm_sqr()).sum::<T>().sqrt();
        value = lambda;
        if residual <= tol * lambda.abs().max(T::min_positive_value()) {
            break;
        }
        let mut next: Vec<Cplx<T>> = hv.iter().zip(&v).map(|(a, b)| a + b * shift).collect();
        if normalize(&mut next) == T::zero() {
            break;
        }
        v = next;
    }
    PowerIteration { vector: v, value, residual, iterations }
}

fn normalize<T: Real>(v: &mut [Cplx<T>]) -> T {
    let nrm = crate::scalar::norm_sqr(v).sqrt();
    if nrm > T::zero() {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

/// Lower Cholesky factor of a Hermitian positive-definite matrix.
pub fn complex_cholesky<T: Real>(a: &CMat<T>) -> Result<CMat<T>> {
    let n = a.dim();
    let mut l = CMat::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::Singular(format!("Hermitian Cholesky pivot {j} is not positive")));
        }
        let d = d.sqrt();
        l[(j, j)] = Cplx::new(d, T::zero());
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᴴ x = b`.
pub fn complex_cholesky_solve<T: Real>(l: &CMat<T>, b: &[Cplx<T>]) -> Vec<Cplx<T>> {
    let n = l.dim();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[(i, k)] * y[k];
            y[i] -= t;
        }
        y[i] /= l[(i, i)].re;
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[(k, i)].conj() * y[k];
            y[i] -= t;
        }
        y[i] /= l[(i, i)].re;
    }
    y
}
