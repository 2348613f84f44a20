//! Dense row-major matrices and the handful of kernels the engine needs:
//! Kronecker products, the matrix exponential and its time integral, LU
//! solves, and the normalised null-vector solve used by every stationary
//! computation.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use rayon::prelude::*;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("singular matrix (zero pivot at column {column})")]
    Singular { column: usize },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("ragged or empty input: {0}")]
    Shape(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Dense matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[T]> = if self.cols == 0 {
            Vec::new()
        } else {
            self.data.chunks(self.cols).collect()
        };
        f.debug_struct("Matrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &rows)
            .finish()
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
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
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, MatError> {
        if rows * cols != data.len() {
            return Err(MatError::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from rows; every row must have the same nonzero length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self, MatError> {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if nrows == 0 || ncols == 0 {
            return Err(MatError::Shape("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(MatError::Shape(format!(
                    "row {} has {} entries, expected {ncols}",
                    i + 1,
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    /// 1×n matrix holding a row vector.
    pub fn row_vector(v: &[T]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    /// n×1 matrix holding a column vector.
    pub fn col_vector(v: &[T]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// n×1 column of ones (the `e` vector).
    pub fn ones_col(n: usize) -> Self {
        Self {
            rows: n,
            cols: 1,
            data: vec![T::one(); n],
        }
    }

    /// 1×1 matrix; `scalar(1)` is the neutral Kronecker factor.
    pub fn scalar(x: T) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![x],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        let mut best = T::zero();
        for j in 0..self.cols {
            let mut s = T::zero();
            for i in 0..self.rows {
                s += self[(i, j)].abs();
            }
            best = best.max(s);
        }
        best
    }

    pub fn check_finite(&self) -> Result<(), MatError> {
        match self.data.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(k) => Err(MatError::NonFinite {
                row: k / self.cols,
                col: k % self.cols,
            }),
        }
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows, "vector-matrix dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// Matrix times column vector: `self · v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Copy of the `nr × nc` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Adds `m` into the block whose top-left corner is `(r0, c0)`.
    pub fn add_block(&mut self, r0: usize, c0: usize, m: &Matrix<T>) {
        assert!(
            r0 + m.rows <= self.rows && c0 + m.cols <= self.cols,
            "block out of range"
        );
        for i in 0..m.rows {
            let dst = &mut self.data[(r0 + i) * self.cols + c0..(r0 + i) * self.cols + c0 + m.cols];
            for (d, &s) in dst.iter_mut().zip(m.row(i)) {
                *d += s;
            }
        }
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &Matrix<T>) -> Result<Self, MatError> {
        if self.rows != other.rows {
            return Err(MatError::DimensionMismatch {
                op: "hstack",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        }))
    }

    pub fn try_mul(&self, rhs: &Matrix<T>) -> Result<Self, MatError> {
        if self.cols != rhs.rows {
            return Err(MatError::DimensionMismatch {
                op: "multiply",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(matmul(self, rhs))
    }

    pub fn try_add(&self, rhs: &Matrix<T>) -> Result<Self, MatError> {
        if self.shape() != rhs.shape() {
            return Err(MatError::DimensionMismatch {
                op: "add",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(self + rhs)
    }

    /// `self^n` by binary powering.
    pub fn pow(&self, mut n: u64) -> Result<Self, MatError> {
        require_square(self)?;
        let mut result = Self::identity(self.rows);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        Ok(result)
    }

    pub fn inverse(&self) -> Result<Self, MatError> {
        Lu::factor(self)?.solve_matrix(&Self::identity(self.rows))
    }

    /// Solves `X · self = b` for `X`.
    pub fn right_solve(&self, b: &Matrix<T>) -> Result<Self, MatError> {
        require_square(self)?;
        if b.cols != self.rows {
            return Err(MatError::DimensionMismatch {
                op: "right_solve",
                left: b.shape(),
                right: self.shape(),
            });
        }
        let lu = Lu::factor(&self.transpose())?;
        Ok(lu.solve_matrix(&b.transpose())?.transpose())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix add dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix sub dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> AddAssign<&Matrix<T>> for Matrix<T> {
    fn add_assign(&mut self, rhs: &Matrix<T>) {
        assert_eq!(self.shape(), rhs.shape(), "matrix add dimension mismatch");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl<T: Scalar> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.map(|x| -x)
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(
            self.cols, rhs.rows,
            "matrix multiply dimension mismatch: {:?} x {:?}",
            self.shape(),
            rhs.shape()
        );
        matmul(self, rhs)
    }
}

const PAR_FLOPS: usize = 1 << 21;

fn matmul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let mut out = vec![T::zero(); n * m];
    let kernel = |(i, out_row): (usize, &mut [T])| {
        for (p, &aip) in a.row(i).iter().enumerate() {
            if aip.is_zero() {
                continue;
            }
            for (o, &bpj) in out_row.iter_mut().zip(b.row(p)) {
                *o += aip * bpj;
            }
        }
    };
    if m == 0 {
        return Matrix { rows: n, cols: 0, data: out };
    }
    if n * k * m >= PAR_FLOPS {
        out.par_chunks_mut(m).enumerate().for_each(kernel);
    } else {
        out.chunks_mut(m).enumerate().for_each(kernel);
    }
    Matrix { rows: n, cols: m, data: out }
}

fn require_square<T: Scalar>(m: &Matrix<T>) -> Result<(), MatError> {
    if m.is_square() {
        Ok(())
    } else {
        Err(MatError::NonSquare {
            rows: m.rows,
            cols: m.cols,
        })
    }
}

/// Kronecker product; entry `(i·b.rows + k, j·b.cols + l)` is `a(i,j)·b(k,l)`.
pub fn kron<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (ar, ac, br, bc) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij.is_zero() {
                continue;
            }
            for k in 0..br {
                let dst = (i * br + k) * out.cols + j * bc;
                for (d, &s) in out.data[dst..dst + bc].iter_mut().zip(b.row(k)) {
                    *d = aij * s;
                }
            }
        }
    }
    out
}

/// Left-to-right Kronecker product of several factors.
pub fn kron_all<T: Scalar>(factors: &[&Matrix<T>]) -> Matrix<T> {
    let mut it = factors.iter();
    let first = it.next().expect("kron_all needs at least one factor");
    it.fold((*first).clone(), |acc, f| kron(&acc, f))
}

/// LU factorisation with partial pivoting.
pub struct Lu<T> {
    n: usize,
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self, MatError> {
        require_square(a)?;
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::lit(n as f64);
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pv <= tiny || !pv.is_finite() {
                return Err(MatError::Singular { column: k });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    lu.data.swap(p * n + j, k * n + j);
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix<T>) -> Result<Matrix<T>, MatError> {
        if b.rows != self.n {
            return Err(MatError::DimensionMismatch {
                op: "lu solve",
                left: (self.n, self.n),
                right: b.shape(),
            });
        }
        let cols: Vec<Vec<T>> = (0..b.cols)
            .into_par_iter()
            .map(|j| self.solve(&b.column(j)))
            .collect();
        Ok(Matrix::from_fn(b.rows, b.cols, |i, j| cols[j][i]))
    }
}

// Padé coefficients and thresholds for scaling and squaring (Higham 2005).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

fn lin_comb<T: Scalar>(terms: &[(f64, &Matrix<T>)], n: usize) -> Matrix<T> {
    let mut out = Matrix::zeros(n, n);
    for &(c, m) in terms {
        let c = T::lit(c);
        for (o, &x) in out.data.iter_mut().zip(&m.data) {
            *o += c * x;
        }
    }
    out
}

fn pade_low<T: Scalar>(a: &Matrix<T>, b: &[f64]) -> (Matrix<T>, Matrix<T>) {
    let n = a.rows;
    let eye = Matrix::identity(n);
    let a2 = a * a;
    let mut powers = vec![eye, a2.clone()];
    while powers.len() * 2 < b.len() {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let odd: Vec<(f64, &Matrix<T>)> = (0..b.len() / 2).map(|k| (b[2 * k + 1], &powers[k])).collect();
    let even: Vec<(f64, &Matrix<T>)> = (0..b.len() / 2).map(|k| (b[2 * k], &powers[k])).collect();
    let u = a * &lin_comb(&odd, n);
    let v = lin_comb(&even, n);
    (u, v)
}

fn pade13<T: Scalar>(a: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let n = a.rows;
    let b = &PADE13;
    let eye = Matrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = lin_comb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
    let u = a * &(&(&a6 * &inner_u)
        + &lin_comb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &eye)], n));
    let inner_v = lin_comb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
    let v = &(&a6 * &inner_v) + &lin_comb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &eye)], n);
    (u, v)
}

/// `e^{q t}` by scaling and squaring with a Padé approximant.
pub fn expm<T: Scalar>(q: &Matrix<T>, t: T) -> Result<Matrix<T>, MatError> {
    require_square(q)?;
    if t < T::zero() {
        return Err(MatError::NegativeTime(t.as_f64()));
    }
    let a = q.scale(t);
    let norm = a.norm1().as_f64();
    if norm == 0.0 {
        return Ok(Matrix::identity(q.rows));
    }
    if !norm.is_finite() {
        return Err(MatError::NonFinite { row: 0, col: 0 });
    }
    for &(order, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match order {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(&a, coeffs);
            return pade_ratio(&u, &v);
        }
    }
    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = a.scale(T::lit(0.5f64.powi(s)));
    let (u, v) = pade13(&scaled);
    let mut r = pade_ratio(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_ratio<T: Scalar>(u: &Matrix<T>, v: &Matrix<T>) -> Result<Matrix<T>, MatError> {
    let denom = v - u;
    let numer = v + u;
    Lu::factor(&denom)?.solve_matrix(&numer)
}

/// `∫₀ᵗ e^{q u} du`, read off the upper-right block of `exp([[q, I], [0, 0]] t)`.
pub fn expm_integral<T: Scalar>(q: &Matrix<T>, t: T) -> Result<Matrix<T>, MatError> {
    Ok(expm_with_integral(q, t)?.1)
}

/// `(e^{q t}, ∫₀ᵗ e^{q u} du)` from a single augmented exponential.
pub fn expm_with_integral<T: Scalar>(
    q: &Matrix<T>,
    t: T,
) -> Result<(Matrix<T>, Matrix<T>), MatError> {
    require_square(q)?;
    if t < T::zero() {
        return Err(MatError::NegativeTime(t.as_f64()));
    }
    let n = q.rows;
    let aug = augmented_integrator(q);
    let big = expm(&aug, t)?;
    Ok((big.block(0, 0, n, n), big.block(0, n, n, n)))
}

/// The `2n × 2n` matrix `[[q, I], [0, 0]]`.
pub fn augmented_integrator<T: Scalar>(q: &Matrix<T>) -> Matrix<T> {
    let n = q.rows;
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    aug.add_block(0, 0, q);
    aug.add_block(0, n, &Matrix::identity(n));
    aug
}

/// Solves `x · a = 0`, `x · mass = 1` by replacing the first column of `a`
/// with `mass` and solving against the first unit row vector.
pub fn solve_normalized<T: Scalar>(a: &Matrix<T>, mass: &[T]) -> Result<Vec<T>, MatError> {
    require_square(a)?;
    let n = a.rows;
    if mass.len() != n {
        return Err(MatError::DimensionMismatch {
            op: "solve_normalized",
            left: a.shape(),
            right: (mass.len(), 1),
        });
    }
    let mut replaced = a.clone();
    for (i, &m) in mass.iter().enumerate() {
        replaced[(i, 0)] = m;
    }
    let mut rhs = vec![T::zero(); n];
    rhs[0] = T::one();
    // x · M = e₁ᵀ  ⇔  Mᵀ xᵀ = e₁
    let lu = Lu::factor(&replaced.transpose())?;
    Ok(lu.solve(&rhs))
}
