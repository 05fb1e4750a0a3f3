//! Elements of `M_n(S ⊗ T)` and the cones on them.
//!
//! The coefficient of `s_a ⊗ t_b` in entry `(i,j)` is stored at
//! `((i*n + j)*m_S + a)*m_T + b`. Concrete realizations live in
//! `M_n ⊗ M_{d_S} ⊗ M_{d_T}` with the level index outermost.

mod membership;
mod norm;
mod schur;
pub(crate) mod seesaw;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{canonical_shuffle, kron, ComplexMatrix, ONE, ZERO};
use crate::opsys::{check_same, matrix_unit_coefficients, SystemElement, SystemRef, SystemSpec};
use crate::verdict::ConeVerdict;

pub use membership::{
    max_cone_membership, max_cone_membership_level, CertificateCheck, MaxConeCertificate,
    MaxConeOptions, MaxConeVerdict, MaxConeWitness,
};
pub use norm::{norm_block, osy_max_norm, schur_contraction_check, ContractionReport, NormBracket};
pub use schur::{
    compress_kron, decompose_as_schur, kron_as_schur, kron_tensor, normal_form_level1, schur_product,
    DFormElement, SchurCertificate, SchurDecomposition,
};

#[derive(Debug, Clone)]
pub struct TensorElement {
    left: SystemRef,
    right: SystemRef,
    level: usize,
    coeffs: Vec<Complex64>,
}

impl TensorElement {
    pub fn new(left: SystemRef, right: SystemRef, level: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let want = level * level * left.dim() * right.dim();
        if coeffs.len() != want {
            return Err(Error::SizeMismatch(format!(
                "{} coefficients, expected {want}",
                coeffs.len()
            )));
        }
        Ok(Self {
            left,
            right,
            level,
            coeffs,
        })
    }

    pub fn zeros(left: SystemRef, right: SystemRef, level: usize) -> Self {
        let len = level * level * left.dim() * right.dim();
        Self {
            left,
            right,
            level,
            coeffs: vec![ZERO; len],
        }
    }

    /// `I_n ⊗ 1 ⊗ 1`.
    pub fn unit(left: SystemRef, right: SystemRef, level: usize) -> Self {
        let mut u = Self::zeros(left, right, level);
        for i in 0..level {
            u.set(i, i, 0, 0, ONE);
        }
        u
    }

    /// The level-one elementary tensor `x ⊗ y`.
    pub fn elementary(x: &SystemElement, y: &SystemElement) -> Self {
        let mut u = Self::zeros(x.system.clone(), y.system.clone(), 1);
        for (a, xa) in x.coeffs.iter().enumerate() {
            for (b, yb) in y.coeffs.iter().enumerate() {
                u.set(0, 0, a, b, xa * yb);
            }
        }
        u
    }

    /// Level-one element with coefficient matrix `c` (`m_S × m_T`).
    pub fn from_coefficient_matrix(left: SystemRef, right: SystemRef, c: &ComplexMatrix) -> Result<Self> {
        if c.rows() != left.dim() || c.cols() != right.dim() {
            return Err(Error::SizeMismatch(format!(
                "{}x{} coefficient matrix for systems of dimension {} and {}",
                c.rows(),
                c.cols(),
                left.dim(),
                right.dim()
            )));
        }
        Self::new(left, right, 1, c.row_major())
    }

    /// Coefficients of the projection of a concrete `n·d_S·d_T` matrix onto
    /// `M_n(S ⊗ T)`.
    pub fn from_realization(left: SystemRef, right: SystemRef, level: usize, r: &ComplexMatrix) -> Result<Self> {
        let block = left.ambient_dim() * right.ambient_dim();
        if r.rows() != level * block || r.cols() != level * block {
            return Err(Error::DimensionMismatch(format!(
                "realization {}x{} for level {level} over M_{block}",
                r.rows(),
                r.cols()
            )));
        }
        let duals: Vec<ComplexMatrix> = left
            .dual_basis()
            .iter()
            .flat_map(|s| right.dual_basis().iter().map(move |t| kron(s, t)))
            .collect();
        let mut u = Self::zeros(left, right, level);
        let mt = u.right.dim();
        for i in 0..level {
            for j in 0..level {
                let rij = r.block(i * block, j * block, block, block);
                for (ab, dual) in duals.iter().enumerate() {
                    u.set(i, j, ab / mt, ab % mt, rij.trace_product(dual));
                }
            }
        }
        Ok(u)
    }

    pub fn left(&self) -> &SystemRef {
        &self.left
    }

    pub fn right(&self) -> &SystemRef {
        &self.right
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn idx(&self, i: usize, j: usize, a: usize, b: usize) -> usize {
        ((i * self.level + j) * self.left.dim() + a) * self.right.dim() + b
    }

    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> Complex64 {
        self.coeffs[self.idx(i, j, a, b)]
    }

    pub fn set(&mut self, i: usize, j: usize, a: usize, b: usize, v: Complex64) {
        let k = self.idx(i, j, a, b);
        self.coeffs[k] = v;
    }

    /// The `m_S × m_T` coefficient matrix of entry `(i,j)`.
    pub fn coefficient_matrix(&self, i: usize, j: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.left.dim(), self.right.dim(), |a, b| self.get(i, j, a, b))
    }

    pub fn realize(&self) -> ComplexMatrix {
        let (ds, dt) = (self.left.ambient_dim(), self.right.ambient_dim());
        let block = ds * dt;
        let products: Vec<ComplexMatrix> = self
            .left
            .basis()
            .iter()
            .flat_map(|s| self.right.basis().iter().map(move |t| kron(s, t)))
            .collect();
        let n = self.level;
        let mut r = ComplexMatrix::zeros(n * block, n * block);
        let mt = self.right.dim();
        for i in 0..n {
            for j in 0..n {
                let mut blk = ComplexMatrix::zeros(block, block);
                for (ab, p) in products.iter().enumerate() {
                    let c = self.get(i, j, ab / mt, ab % mt);
                    if c != ZERO {
                        blk = &blk + &p.scale_c(c);
                    }
                }
                r.set_block(i * block, j * block, &blk);
            }
        }
        r
    }

    fn check_compatible(&self, other: &Self, what: &str) -> Result<()> {
        check_same(&self.left, &other.left, what)?;
        check_same(&self.right, &other.right, what)?;
        if self.level != other.level {
            return Err(Error::SizeMismatch(format!(
                "{what}: levels {} and {}",
                self.level, other.level
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other, "TensorElement::add")?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self {
            coeffs,
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * t).collect(),
            ..self.clone()
        }
    }

    /// `self + eps · (I_n ⊗ 1 ⊗ 1)`.
    pub fn plus_unit(&self, eps: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.level {
            let v = out.get(i, i, 0, 0) + eps;
            out.set(i, i, 0, 0, v);
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.left.clone(), self.right.clone(), self.level);
        for i in 0..self.level {
            for j in 0..self.level {
                for a in 0..self.left.dim() {
                    for b in 0..self.right.dim() {
                        out.set(i, j, a, b, self.get(j, i, a, b).conj());
                    }
                }
            }
        }
        out
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.max_distance(&self.adjoint())
    }

    /// Largest coefficient distance (`∞` when incompatible).
    pub fn max_distance(&self, other: &Self) -> f64 {
        if self.check_compatible(other, "distance").is_err() {
            return f64::INFINITY;
        }
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `A·U·B` for scalar `A` (`r × n`) and `B` (`n × s`).
    pub fn sandwich(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Self> {
        let n = self.level;
        if a.cols() != n || b.rows() != n || a.rows() != b.cols() {
            return Err(Error::SizeMismatch(format!(
                "sandwich of level {n} by {}x{} and {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        let r = a.rows();
        let ab = self.left.dim() * self.right.dim();
        let mut out = Self::zeros(self.left.clone(), self.right.clone(), r);
        for p in 0..r {
            for q in 0..r {
                for i in 0..n {
                    let api = a[(p, i)];
                    if api == ZERO {
                        continue;
                    }
                    for j in 0..n {
                        let w = api * b[(j, q)];
                        if w == ZERO {
                            continue;
                        }
                        let src = (i * n + j) * ab;
                        let dst = (p * r + q) * ab;
                        for t in 0..ab {
                            out.coeffs[dst + t] += w * self.coeffs[src + t];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `A·U·A*`.
    pub fn compress(&self, a: &ComplexMatrix) -> Result<Self> {
        self.sandwich(a, &a.adjoint())
    }

    /// Exchanges the two factors; realizations are conjugated by the
    /// canonical shuffle (blockwise at higher levels).
    pub fn swap(&self) -> Self {
        let mut out = Self::zeros(self.right.clone(), self.left.clone(), self.level);
        for i in 0..self.level {
            for j in 0..self.level {
                for a in 0..self.left.dim() {
                    for b in 0..self.right.dim() {
                        out.set(i, j, b, a, self.get(i, j, a, b));
                    }
                }
            }
        }
        out
    }

    /// Rewrites a level-`n` element as a level-one element of
    /// `S ⊗ M_n(T)`, the right system amplified with basis `h_r ⊗ t_b`.
    pub fn amplify_right(&self) -> Result<Self> {
        let n = self.level;
        if n == 1 {
            return Ok(self.clone());
        }
        let right = self.right.amplify(n)?;
        let alpha = matrix_unit_coefficients(n);
        let (ms, mt) = (self.left.dim(), self.right.dim());
        let mut out = Self::zeros(self.left.clone(), right, 1);
        for (r, al) in alpha.iter().enumerate() {
            for a in 0..ms {
                for b in 0..mt {
                    let mut v = ZERO;
                    for i in 0..n {
                        for j in 0..n {
                            v += self.get(i, j, a, b) * al[(i, j)];
                        }
                    }
                    out.set(0, 0, a, r * mt + b, v);
                }
            }
        }
        Ok(out)
    }

    /// Permutation taking the realization of [`Self::amplify_right`]
    /// (`M_{d_S} ⊗ M_n ⊗ M_{d_T}`) to the level-`n` realization.
    pub fn amplification_shuffle(&self) -> ComplexMatrix {
        kron(
            &canonical_shuffle(self.left.ambient_dim(), self.level),
            &ComplexMatrix::identity(self.right.ambient_dim()),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct TensorElementData {
    left: SystemSpec,
    right: SystemSpec,
    level: usize,
    coeffs: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

impl Serialize for TensorElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.level;
        let coeffs = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..self.left.dim())
                            .map(|a| {
                                (0..self.right.dim())
                                    .map(|b| {
                                        let c = self.get(i, j, a, b);
                                        [c.re, c.im]
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        TensorElementData {
            left: SystemSpec::of(&self.left),
            right: SystemSpec::of(&self.right),
            level: n,
            coeffs,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TensorElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let data = TensorElementData::deserialize(d)?;
        let left = data.left.resolve().map_err(D::Error::custom)?;
        let right = data.right.resolve().map_err(D::Error::custom)?;
        let (n, ms, mt) = (data.level, left.dim(), right.dim());
        let shape_ok = data.coeffs.len() == n
            && data.coeffs.iter().all(|row| {
                row.len() == n
                    && row
                        .iter()
                        .all(|e| e.len() == ms && e.iter().all(|r| r.len() == mt))
            });
        if !shape_ok {
            return Err(D::Error::custom(format!(
                "coeffs must have shape [{n}][{n}][{ms}][{mt}]"
            )));
        }
        let coeffs = data
            .coeffs
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        TensorElement::new(left, right, n, coeffs).map_err(D::Error::custom)
    }
}

/// Smallest eigenvalue of the realization when it clears `−tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinConeReport {
    pub min_eigenvalue: f64,
    pub tolerance: f64,
}

/// Unit vector with `v* realize(u) v = min_eigenvalue < −tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinConeWitness {
    pub min_eigenvalue: f64,
    pub vector: ComplexMatrix,
}

/// Positivity of the concrete realization of `u` in `M_{n·d_S·d_T}`.
pub fn min_cone_membership(
    u: &TensorElement,
    tol: f64,
) -> Result<ConeVerdict<MinConeReport, MinConeWitness>> {
    let defect = u.hermitian_defect();
    if defect > tol.max(1e-12) {
        return Err(Error::NotHermitian(defect));
    }
    let (values, vectors) = u.realize().hermitian_eigen();
    let min_eigenvalue = values.first().copied().unwrap_or(0.0);
    if min_eigenvalue >= -tol {
        Ok(ConeVerdict::Member(MinConeReport {
            min_eigenvalue,
            tolerance: tol,
        }))
    } else {
        Ok(ConeVerdict::NonMember(MinConeWitness {
            min_eigenvalue,
            vector: vectors.block(0, 0, vectors.rows(), 1),
        }))
    }
}

/// `Σ_ij E_ij ⊗ E_ij` over `M_d ⊗ M_d` for a full algebra `M_d`.
pub fn max_entangled(system: &SystemRef) -> Result<TensorElement> {
    let d = system.ambient_dim();
    let mut r = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            r[(i * d + i, j * d + j)] = ONE;
        }
    }
    let u = TensorElement::from_realization(system.clone(), system.clone(), 1, &r)?;
    if (&u.realize() - &r).max_abs() > 1e-12 {
        return Err(Error::InvalidSystem(format!(
            "{} does not contain the matrix units",
            system.name()
        )));
    }
    Ok(u)
}
