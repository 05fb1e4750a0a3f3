//! Dense complex matrix algebra.
//!
//! [`ComplexMatrix`] is a thin wrapper over a dense `nalgebra` matrix of
//! `Complex<f64>` entries. Everything in the toolkit reduces to the operations
//! here: Kronecker products, the canonical shuffle permutation, the
//! matrix-unit row used to turn Kronecker products into Schur products, and
//! thresholded eigenvalue checks.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default tolerance for every thresholded PSD check.
pub const DEFAULT_TOL: f64 = 1e-9;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A dense `rows × cols` complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::from_element(rows, cols, ZERO))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count");
        Self(DMatrix::from_fn(rows, cols, |i, j| {
            Complex64::new(entries[i * cols + j], 0.0)
        }))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// The matrix unit `E_ij` of size `rows × cols` (zero-based indices).
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = ONE;
        m
    }

    pub fn from_inner(inner: DMatrix<Complex64>) -> Self {
        Self(inner)
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// `(M + M*)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// Largest entrywise modulus of `M − M*`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// `Re tr(A B*)`, the real Hilbert–Schmidt inner product. For Hermitian
    /// `B` this is `Re tr(A B)`.
    pub fn hs_dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.rows(), other.rows());
        debug_assert_eq!(self.cols(), other.cols());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    /// `tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        debug_assert_eq!(self.cols(), other.rows());
        debug_assert_eq!(self.rows(), other.cols());
        let mut acc = ZERO;
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                acc += self.0[(i, j)] * other.0[(j, i)];
            }
        }
        acc
    }

    /// Copy of the `(r0.., c0..)` sub-block of the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self(self.0.view((r0, c0), (rows, cols)).into_owned())
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        self.0
            .view_mut((r0, c0), (b.rows(), b.cols()))
            .copy_from(&b.0);
    }

    /// Block-diagonal direct sum.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows() + other.rows(), self.cols() + other.cols());
        out.set_block(0, 0, self);
        out.set_block(self.rows(), self.cols(), other);
        out
    }

    /// Eigenvalues (ascending) of the Hermitian part.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .hermitian_part()
            .0
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Eigenvalues (ascending) and matching unit eigenvectors (as columns) of
    /// the Hermitian part.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        let eig = self.hermitian_part().0.symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, ComplexMatrix(vectors))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Principal square root of the PSD part of a Hermitian matrix (negative
    /// eigenvalues are clipped to zero).
    pub fn psd_sqrt(&self) -> Self {
        let (values, vectors) = self.hermitian_eigen();
        let d: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
        let scaled = &vectors.0 * ComplexMatrix::diag_real(&d).0;
        Self(&scaled * vectors.0.adjoint())
    }

    /// Inverse of a Hermitian positive definite matrix, or `None` when the
    /// Cholesky factorization fails.
    pub fn hpd_inverse(&self) -> Option<Self> {
        let l = cholesky_lower(&self.0)?;
        let linv = l.solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))?;
        Some(Self(linv.adjoint() * linv).hermitian_part())
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.0[(i, j)];
                write!(f, "{:>9.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut Complex64 {
        &mut self.0[idx]
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 + rhs.0)
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 - rhs.0)
    }
}

/// Lower Cholesky factor of a Hermitian positive definite matrix. Returns
/// `None` as soon as a pivot is not strictly positive. (The generic nalgebra
/// routine takes complex square roots of negative pivots and never fails.)
pub(crate) fn cholesky_lower(a: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = a.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut s = a[(j, j)].re;
        for k in 0..j {
            s -= l[(j, k)].norm_sqr();
        }
        if !(s > 0.0) || !s.is_finite() {
            return None;
        }
        let d = s.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / d;
        }
    }
    Some(l)
}

/// Kronecker product; the first factor indexes the outer blocks, so
/// `kron(a, b)[(i,k),(j,l)] = a[i,j]·b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

/// The `n × n²` block row `[E_11 E_22 … E_nn]`.
pub fn matrix_units_row(n: usize) -> ComplexMatrix {
    assert!(n >= 1, "matrix_units_row needs n >= 1");
    let mut e = ComplexMatrix::zeros(n, n * n);
    for i in 0..n {
        e[(i, i * n + i)] = ONE;
    }
    e
}

/// Permutation `U` of size `nm` with `U·kron(a,b)·Uᵀ = kron(b,a)` for all
/// `a ∈ M_n`, `b ∈ M_m`.
pub fn canonical_shuffle(n: usize, m: usize) -> ComplexMatrix {
    assert!(n >= 1 && m >= 1, "canonical_shuffle needs n, m >= 1");
    let mut u = ComplexMatrix::zeros(n * m, n * m);
    // basis vector e_i ⊗ f_k (index i*m + k) maps to f_k ⊗ e_i (index k*n + i)
    for i in 0..n {
        for k in 0..m {
            u[(k * n + i, i * m + k)] = ONE;
        }
    }
    u
}

/// `J_k`, the `k × k` matrix of ones.
pub fn all_ones(k: usize) -> ComplexMatrix {
    assert!(k >= 1, "all_ones needs k >= 1");
    ComplexMatrix(DMatrix::from_element(k, k, ONE))
}

/// Outcome of a thresholded PSD test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub is_psd: bool,
    pub tolerance: f64,
}

/// Decides `h ⪰ 0` up to `tol` via a Hermitian eigendecomposition.
pub fn psd_check(h: &ComplexMatrix, tol: f64) -> Result<PsdReport> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "psd_check on a {}x{} matrix",
            h.rows(),
            h.cols()
        )));
    }
    let defect = h.hermitian_defect();
    if defect > tol {
        return Err(Error::NotHermitian(defect));
    }
    let min_eigenvalue = h.min_eigenvalue();
    Ok(PsdReport {
        min_eigenvalue,
        is_psd: min_eigenvalue >= -tol,
        tolerance: tol,
    })
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    // ‖M‖² = λ_max(M*M), computed on the smaller Gram matrix
    let gram = if m.rows() <= m.cols() {
        m * &m.adjoint()
    } else {
        &m.adjoint() * m
    };
    gram.hermitian_eigenvalues()
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
        .sqrt()
}

/// Hermitian basis of `M_n`, trace-orthogonal, every element of operator
/// norm one, `I_n` first. For `n = 2` this is `{I, σx, σy, σz}`.
pub fn hermitian_matrix_basis(n: usize) -> Vec<ComplexMatrix> {
    let mut basis = vec![ComplexMatrix::identity(n)];
    for j in 0..n {
        for k in (j + 1)..n {
            let mut m = ComplexMatrix::zeros(n, n);
            m[(j, k)] = ONE;
            m[(k, j)] = ONE;
            basis.push(m);
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let mut m = ComplexMatrix::zeros(n, n);
            m[(j, k)] = Complex64::new(0.0, -1.0);
            m[(k, j)] = Complex64::new(0.0, 1.0);
            basis.push(m);
        }
    }
    basis.extend(diagonal_traceless_basis(n));
    basis
}

/// Traceless diagonal matrices `diag(1,…,1,−l,0,…)/l`, `l = 1..n−1`.
pub fn diagonal_traceless_basis(n: usize) -> Vec<ComplexMatrix> {
    (1..n)
        .map(|l| {
            let mut d = vec![0.0; n];
            for v in d.iter_mut().take(l) {
                *v = 1.0 / l as f64;
            }
            d[l] = -1.0;
            ComplexMatrix::diag_real(&d)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct MatrixLiteral {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixLiteral {
            rows: self.rows(),
            cols: self.cols(),
            entries: self.row_major().iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let lit = MatrixLiteral::deserialize(d)?;
        let entries: Vec<Complex64> = lit
            .entries
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        ComplexMatrix::from_row_major(lit.rows, lit.cols, &entries).map_err(D::Error::custom)
    }
}
