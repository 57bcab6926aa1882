//! Dense symmetric linear algebra: Cholesky, cyclic Jacobi eigen-solver, the
//! generalized problem `A v = λ G v`, and Sturm bisection for tridiagonals.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square dense matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Mat { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat { n: self.n, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// Leading principal `k × k` block.
    pub fn leading(&self, k: usize) -> Self {
        Self::from_fn(k, |i, j| self[(i, j)])
    }

    /// Sub-matrix on the given index set.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &x| a + x * x).sqrt()
    }

    pub fn max_asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    pub fn symmetrize(&mut self) {
        let half = T::of(0.5);
        for i in 0..self.n {
            for j in 0..i {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).fold(T::zero(), |a, j| a + self[(i, j)] * v[j]))
            .collect()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky<T: Real>(a: &Mat<T>) -> Result<Mat<T>> {
    let n = a.dim();
    let mut l = Mat::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d.to64() });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solve `L x = b` in place for lower-triangular `L`.
fn forward_subst<T: Real>(l: &Mat<T>, b: &mut [T]) {
    for i in 0..l.dim() {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solve `Lᵀ x = b` in place.
fn backward_subst_t<T: Real>(l: &Mat<T>, b: &mut [T]) {
    let n = l.dim();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Column `k` of `vectors` belongs to `values[k]`.
    pub vectors: Mat<T>,
    pub sweeps: usize,
}

impl<T: Real> SymEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        (0..self.vectors.dim()).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is below
/// `tol` times the full norm.
pub fn jacobi_eigen<T: Real>(a: &Mat<T>, tol: f64) -> Result<SymEigen<T>> {
    let n = a.dim();
    let mut a = a.clone();
    a.symmetrize();
    let mut v = Mat::identity(n);
    let scale = a.frobenius();
    let stop = T::of(tol.max(T::roundoff())) * scale;
    let off = |a: &Mat<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s = s + a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let max_sweeps = 100;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        if scale == T::zero() || off(&a) <= stop {
            break;
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Skip rotations that cannot change the diagonal at this precision.
                let tiny = T::of(T::roundoff() * 1e-2);
                if apq.abs() <= tiny * (app.abs() + aqq.abs()) && sweeps > 4 {
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
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
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let residual = off(&a);
    if residual > T::of(1e-12) * scale {
        return Err(Error::EigenNonConvergence { sweeps, off: residual.to64() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Mat::from_fn(n, |i, k| v[(i, order[k])]);
    Ok(SymEigen { values, vectors, sweeps })
}

/// Solution of `A v = λ G v` with `G` positive definite.
#[derive(Clone, Debug)]
pub struct GenEigen<T> {
    pub values: Vec<T>,
    /// Columns are `G`-orthonormal eigenvectors.
    pub vectors: Mat<T>,
    /// Condition number of `G` after diagonal equilibration.
    pub gram_condition: f64,
}

impl<T: Real> GenEigen<T> {
    /// Eigenvector of the smallest eigenvalue, in `f64`.
    pub fn vector0(&self) -> Vec<f64> {
        (0..self.vectors.dim()).map(|i| self.vectors[(i, 0)].to64()).collect()
    }
}

/// Generalized symmetric-definite eigenproblem via Cholesky reduction.
///
/// `G` is first equilibrated by its diagonal, which makes the result
/// invariant under rescaling of the basis functions. Fails with
/// [`Error::BasisDegeneracy`] when the equilibrated `G` has condition number
/// above `max_condition`.
pub fn generalized_eigen<T: Real>(a: &Mat<T>, g: &Mat<T>, max_condition: f64) -> Result<GenEigen<T>> {
    let n = g.dim();
    let dscale: Vec<T> = (0..n)
        .map(|i| {
            let d = g[(i, i)];
            if d > T::zero() { T::one() / d.sqrt() } else { T::one() }
        })
        .collect();
    let gs = Mat::from_fn(n, |i, j| g[(i, j)] * dscale[i] * dscale[j]);
    let as_ = Mat::from_fn(n, |i, j| a[(i, j)] * dscale[i] * dscale[j]);

    let ge = jacobi_eigen(&gs, 1e-14)?;
    let lo = ge.values.first().copied().unwrap_or(T::one()).to64();
    let hi = ge.values.last().copied().unwrap_or(T::one()).to64();
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= max_condition) {
        return Err(Error::BasisDegeneracy { cond, limit: max_condition });
    }

    let l = cholesky(&gs)?;
    // C = L⁻¹ A L⁻ᵀ
    let mut w = Mat::zeros(n);
    for j in 0..n {
        let mut col: Vec<T> = (0..n).map(|i| as_[(i, j)]).collect();
        forward_subst(&l, &mut col);
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    let mut c = Mat::zeros(n);
    for i in 0..n {
        let mut row: Vec<T> = w.row(i).to_vec();
        forward_subst(&l, &mut row);
        for j in 0..n {
            c[(i, j)] = row[j];
        }
    }
    c.symmetrize();
    let ce = jacobi_eigen(&c, 1e-14)?;
    let mut vectors = Mat::zeros(n);
    for k in 0..n {
        let mut y = ce.vector(k);
        backward_subst_t(&l, &mut y);
        for i in 0..n {
            vectors[(i, k)] = y[i] * dscale[i];
        }
    }
    Ok(GenEigen { values: ce.values, vectors, gram_condition: cond })
}

/// Number of eigenvalues of the symmetric tridiagonal matrix (diagonal `d`,
/// off-diagonal `e`) that are strictly less than `x`.
pub fn sturm_count<T: Real>(d: &[T], e: &[T], x: T) -> usize {
    let tiny = T::of(1e-300);
    let mut count = 0;
    let mut q = T::one();
    for i in 0..d.len() {
        let e2 = if i == 0 { T::zero() } else { e[i - 1] * e[i - 1] };
        q = if i == 0 { d[0] - x } else { d[i] - x - e2 / q };
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the spectrum of a symmetric tridiagonal.
pub fn gershgorin_tridiagonal<T: Real>(d: &[T], e: &[T]) -> (T, T) {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..d.len() {
        let mut r = T::zero();
        if i > 0 {
            r = r + e[i - 1].abs();
        }
        if i < e.len() {
            r = r + e[i].abs();
        }
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// `k`-th smallest eigenvalue (0-based) of a symmetric tridiagonal matrix by
/// Sturm bisection to absolute width `tol`.
pub fn tridiagonal_eigenvalue<T: Real>(d: &[T], e: &[T], k: usize, tol: f64) -> T {
    let (mut lo, mut hi) = gershgorin_tridiagonal(d, e);
    let pad = T::of(1e-14) * (lo.abs() + hi.abs() + T::one());
    lo = lo - pad;
    hi = hi + pad;
    let tol = T::of(tol);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * T::of(0.5);
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) * T::of(0.5)
}

/// Largest eigenvalue of a symmetric tridiagonal, returned as an upper
/// bracket endpoint so that it never underestimates by more than the
/// bisection slack.
pub fn tridiagonal_max_eigenvalue<T: Real>(d: &[T], e: &[T], tol: f64) -> (T, T) {
    let n = d.len();
    let (mut lo, mut hi) = gershgorin_tridiagonal(d, e);
    let pad = T::of(1e-14) * (lo.abs() + hi.abs() + T::one());
    lo = lo - pad;
    hi = hi + pad;
    let tol = T::of(tol);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * T::of(0.5);
        if sturm_count(d, e, mid) >= n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_diagonalizes_small_matrix() {
        let a = Mat::from_fn(3, |i, j| [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]][i][j]);
        let e = jacobi_eigen(&a, 1e-14).unwrap();
        let s2 = 2f64.sqrt();
        assert_relative_eq!(e.values[0], 2.0 - s2, epsilon = 1e-13);
        assert_relative_eq!(e.values[1], 2.0, epsilon = 1e-13);
        assert_relative_eq!(e.values[2], 2.0 + s2, epsilon = 1e-13);
        let v = e.vector(0);
        let av = a.mul_vec(&v);
        for i in 0..3 {
            assert_relative_eq!(av[i], e.values[0] * v[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn generalized_matches_reduction() {
        let g = Mat::from_fn(2, |i, j| [[2.0, 0.5], [0.5, 1.0]][i][j]);
        let a = Mat::from_fn(2, |i, j| [[1.0, 0.0], [0.0, 3.0]][i][j]);
        let r = generalized_eigen(&a, &g, 1e12).unwrap();
        // det(A - λG) = 0  →  1.75 λ² - 7 λ + 3 = 0
        let disc = (49.0f64 - 21.0).sqrt();
        assert_relative_eq!(r.values[0], (7.0 - disc) / 3.5, epsilon = 1e-13);
        assert_relative_eq!(r.values[1], (7.0 + disc) / 3.5, epsilon = 1e-13);
    }

    #[test]
    fn sturm_bisection_finds_extremes() {
        let n = 20;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        let (_, hi) = tridiagonal_max_eigenvalue(&d, &e, 1e-13);
        let exact = 2.0 + 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((hi - exact).abs() < 1e-12);
        let low = tridiagonal_eigenvalue(&d, &e, 0, 1e-13);
        assert!((low - (4.0 - exact)).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_fn(2, |i, j| [[1.0, 2.0], [2.0, 1.0]][i][j]);
        assert!(cholesky(&a).is_err());
    }
}
