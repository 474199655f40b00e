//! Small dense linear algebra on the stack.
//!
//! State dimensions here never exceed [`MAX_DIM`], so vectors, matrices and the
//! rank-3/rank-4 derivative tensors live in fixed arrays. Hot loops (Euler
//! steps, per-node Θ assembly) therefore never allocate.

use std::ops::{Add, Deref, DerefMut, Index, IndexMut, Mul, Sub};

/// Largest supported state (and noise) dimension.
pub const MAX_DIM: usize = 4;

#[derive(Clone, Copy, PartialEq)]
pub struct Vector {
    len: usize,
    data: [f64; MAX_DIM],
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_DIM, "dimension {len} exceeds MAX_DIM");
        Self { len, data: [0.0; MAX_DIM] }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut v = Self::zeros(values.len());
        v.data[..values.len()].copy_from_slice(values);
        v
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> f64) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            v.data[i] = f(i);
        }
        v
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len, other.len);
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(mut self, s: f64) -> Self {
        for x in self.iter_mut() {
            *x *= s;
        }
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data[..self.len]
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data[..self.len]
    }
}

impl std::fmt::Debug for Vector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

impl Add for Vector {
    type Output = Vector;
    fn add(mut self, rhs: Vector) -> Vector {
        for (a, b) in self.iter_mut().zip(rhs.iter()) {
            *a += b;
        }
        self
    }
}

impl Sub for Vector {
    type Output = Vector;
    fn sub(mut self, rhs: Vector) -> Vector {
        for (a, b) in self.iter_mut().zip(rhs.iter()) {
            *a -= b;
        }
        self
    }
}

/// Row-major `rows × cols` matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: [[f64; MAX_DIM]; MAX_DIM],
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows <= MAX_DIM && cols <= MAX_DIM);
        Self { rows, cols, data: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i][i] = *d;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged rows");
            m.data[i][..cols].copy_from_slice(r);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.data[j][i])
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vector {
        debug_assert_eq!(self.cols, v.len());
        Vector::from_fn(self.rows, |i| (0..self.cols).map(|j| self.data[i][j] * v[j]).sum())
    }

    /// `v* M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mv = self.mul_vec(v);
        mv.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn symmetric_part(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self.data[i][j] + self.data[j][i]))
    }

    /// Largest `|M_ij − M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.data[i][j] - self.data[j][i]).abs());
            }
        }
        worst
    }

    pub fn scale(mut self, s: f64) -> Matrix {
        for i in 0..self.rows {
            for j in 0..self.cols {
                self.data[i][j] *= s;
            }
        }
        self
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                m = m.max(self.data[i][j].abs());
            }
        }
        m
    }

    /// `M M*`.
    pub fn gram(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.rows, |i, j| {
            (0..self.cols).map(|k| self.data[i][k] * self.data[j][k]).sum()
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.data[i][i]).sum()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i][j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i][j]
    }
}

impl Add for Matrix {
    type Output = Matrix;
    fn add(self, rhs: Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix::from_fn(self.rows, self.cols, |i, j| self.data[i][j] + rhs.data[i][j])
    }
}

impl Sub for Matrix {
    type Output = Matrix;
    fn sub(self, rhs: Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix::from_fn(self.rows, self.cols, |i, j| self.data[i][j] - rhs.data[i][j])
    }
}

impl Mul for Matrix {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        debug_assert_eq!(self.cols, rhs.rows);
        Matrix::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).map(|k| self.data[i][k] * rhs.data[k][j]).sum()
        })
    }
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| &self.data[i][..self.cols]).collect();
        f.debug_list().entries(rows).finish()
    }
}

/// Rank-3 array indexed `(m, l, i)`; used for `∂_m σ_li` and `∂_m a_li`.
#[derive(Clone, Copy, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

impl Tensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        assert!(d0 <= MAX_DIM && d1 <= MAX_DIM && d2 <= MAX_DIM);
        Self { dims: [d0, d1, d2], data: [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM] }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for a in 0..self.dims[0] {
            for b in 0..self.dims[1] {
                for c in 0..self.dims[2] {
                    m = m.max(self.data[a][b][c].abs());
                }
            }
        }
        m
    }

    /// Slice along the first index as a matrix.
    pub fn slab(&self, m: usize) -> Matrix {
        Matrix::from_fn(self.dims[1], self.dims[2], |l, i| self.data[m][l][i])
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    #[inline]
    fn index(&self, (a, b, c): (usize, usize, usize)) -> &f64 {
        &self.data[a][b][c]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (a, b, c): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[a][b][c]
    }
}

impl std::fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let slabs: Vec<Matrix> = (0..self.dims[0]).map(|m| self.slab(m)).collect();
        f.debug_list().entries(slabs).finish()
    }
}

/// Rank-4 array indexed `(m, k, l, i)`; used for `∂_m ∂_k σ_li`.
#[derive(Clone, Copy, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: [[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

impl Tensor4 {
    pub fn zeros(d0: usize, d1: usize, d2: usize, d3: usize) -> Self {
        assert!(d0 <= MAX_DIM && d1 <= MAX_DIM && d2 <= MAX_DIM && d3 <= MAX_DIM);
        Self { dims: [d0, d1, d2, d3], data: [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM] }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn max_abs(&self) -> f64 {
        let [d0, d1, d2, d3] = self.dims;
        let mut m: f64 = 0.0;
        for a in 0..d0 {
            for b in 0..d1 {
                for c in 0..d2 {
                    for e in 0..d3 {
                        m = m.max(self.data[a][b][c][e].abs());
                    }
                }
            }
        }
        m
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    #[inline]
    fn index(&self, (a, b, c, e): (usize, usize, usize, usize)) -> &f64 {
        &self.data[a][b][c][e]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    #[inline]
    fn index_mut(&mut self, (a, b, c, e): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.data[a][b][c][e]
    }
}

impl std::fmt::Debug for Tensor4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor4{:?}", self.dims)
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
///
/// Closed forms for n ≤ 2, cyclic Jacobi rotations otherwise.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vector {
    let n = m.rows();
    debug_assert_eq!(n, m.cols());
    match n {
        0 => Vector::zeros(0),
        1 => Vector::from_slice(&[m[(0, 0)]]),
        2 => {
            let (a, b, c) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
            let mean = 0.5 * (a + c);
            let radius = (0.5 * (a - c)).hypot(b);
            Vector::from_slice(&[mean - radius, mean + radius])
        }
        _ => {
            let mut v = jacobi_eigenvalues(m);
            v.sort_by(|a, b| a.total_cmp(b));
            v
        }
    }
}

fn jacobi_eigenvalues(m: &Matrix) -> Vector {
    let n = m.rows();
    let mut a = m.symmetric_part();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off < 1e-30 * (1.0 + a.max_abs().powi(2)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
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
            }
        }
    }
    Vector::from_fn(n, |i| a[(i, i)])
}

pub fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m)[0]
}

/// Lower-triangular `L` with `m = L L*`, or `None` if `m` is not positive definite.
pub fn cholesky(m: &Matrix) -> Option<Matrix> {
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn lower_triangular_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv
}

/// Smallest λ with `theta − λ a` singular, for symmetric `theta` and
/// positive definite `a`. Reduces the pencil to `L⁻¹ Θ L⁻*` with `a = L L*`.
pub fn min_generalized_eigenvalue(theta: &Matrix, a: &Matrix) -> Option<f64> {
    let l = cholesky(a)?;
    let linv = lower_triangular_inverse(&l);
    let reduced = (linv * *theta * linv.transpose()).symmetric_part();
    Some(min_symmetric_eigenvalue(&reduced))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_eigenvalues_match_trace_and_determinant() {
        let m = Matrix::from_rows(&[&[4.0, -2.0], &[-2.0, 2.0]]);
        let ev = symmetric_eigenvalues(&m);
        assert!((ev[0] - (3.0 - 5f64.sqrt())).abs() < 1e-14);
        assert!((ev[1] - (3.0 + 5f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // Q diag(1,2,3,4) Q* with a Householder Q.
        let u = Vector::from_slice(&[0.5, 0.5, 0.5, 0.5]);
        let q = Matrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 } - 2.0 * u[i] * u[j]);
        let m = q * Matrix::diagonal(&[1.0, 2.0, 3.0, 4.0]) * q.transpose();
        let ev = symmetric_eigenvalues(&m);
        for (k, want) in [1.0, 2.0, 3.0, 4.0].iter().enumerate() {
            assert!((ev[k] - want).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn generalized_pencil_diag_example() {
        let theta = Matrix::diagonal(&[2.0, 0.25]);
        let a = Matrix::identity(2);
        assert!((min_generalized_eigenvalue(&theta, &a).unwrap() - 0.25).abs() < 1e-15);
        let a2 = Matrix::diagonal(&[4.0, 0.5]);
        // Θ ≥ λ a componentwise: min(2/4, 0.25/0.5) = 0.5
        assert!((min_generalized_eigenvalue(&theta, &a2).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let m = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(cholesky(&m).is_none());
    }
}
