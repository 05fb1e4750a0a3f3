//! Operator systems realized as unital self-adjoint subspaces of `M_d`,
//! matrices over them, and their duals.
//!
//! A system stores a Hermitian basis `b_0 = I, b_1, …, b_{m-1}`. Everything
//! else (Gram matrix, dual basis, a basis of the Hermitian orthogonal
//! complement) is derived once at construction.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{
    diagonal_traceless_basis, hermitian_matrix_basis, kron, operator_norm, ComplexMatrix, ONE,
    ZERO,
};
use crate::solver::{self, BlockTerm, ConicProblem, SolveStatus, SolverSettings};
use crate::verdict::{ConeVerdict, Diagnostics};

/// Pivot threshold for basis extraction and independence checks.
pub const BASIS_PIVOT_TOL: f64 = 1e-10;

pub type SystemRef = Arc<OperatorSystem>;

pub struct OperatorSystem {
    name: String,
    ambient_dim: usize,
    basis: Vec<ComplexMatrix>,
    gram_inv: DMatrix<f64>,
    dual_basis: Vec<ComplexMatrix>,
    complement: Vec<ComplexMatrix>,
}

impl std::fmt::Debug for OperatorSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "OperatorSystem({}, d={}, m={})",
            self.name,
            self.ambient_dim,
            self.basis.len()
        )
    }
}

impl OperatorSystem {
    /// Builds a system from an explicit basis. `basis[0]` must be exactly
    /// the identity and every element Hermitian within `1e-12`.
    pub fn from_basis(name: &str, ambient_dim: usize, basis: Vec<ComplexMatrix>) -> Result<SystemRef> {
        let d = ambient_dim;
        if d == 0 {
            return Err(Error::InvalidSystem("ambient dimension must be positive".into()));
        }
        if basis.is_empty() || basis[0] != ComplexMatrix::identity(d) {
            return Err(Error::InvalidSystem("basis[0] must be the identity".into()));
        }
        for (i, b) in basis.iter().enumerate() {
            if b.rows() != d || b.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "basis element {i} is {}x{}, expected {d}x{d}",
                    b.rows(),
                    b.cols()
                )));
            }
            let defect = b.hermitian_defect();
            if defect > 1e-12 * b.max_abs().max(1.0) {
                return Err(Error::NotHermitian(defect));
            }
        }
        let basis: Vec<ComplexMatrix> = basis.into_iter().map(|b| b.hermitian_part()).collect();
        let m = basis.len();
        let gram = DMatrix::<f64>::from_fn(m, m, |a, b| basis[a].hs_dot(&basis[b]));
        let scale: Vec<f64> = (0..m).map(|a| gram[(a, a)].sqrt()).collect();
        if scale.iter().any(|s| *s == 0.0) {
            return Err(Error::InvalidSystem("zero basis element".into()));
        }
        let normalized = DMatrix::<f64>::from_fn(m, m, |a, b| gram[(a, b)] / (scale[a] * scale[b]));
        let lam = normalized
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if lam <= BASIS_PIVOT_TOL {
            return Err(Error::InvalidSystem(format!(
                "basis is linearly dependent (normalized Gram eigenvalue {lam:.3e})"
            )));
        }
        let gram_inv = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidSystem("singular Gram matrix".into()))?;
        let dual_basis: Vec<ComplexMatrix> = (0..m)
            .map(|a| {
                let mut s = ComplexMatrix::zeros(d, d);
                for (b, bb) in basis.iter().enumerate() {
                    s = &s + &bb.scale(gram_inv[(a, b)]);
                }
                s
            })
            .collect();

        let mut sys = OperatorSystem {
            name: name.to_string(),
            ambient_dim: d,
            basis,
            gram_inv,
            dual_basis,
            complement: Vec::new(),
        };
        sys.complement = sys.hermitian_complement();
        Ok(Arc::new(sys))
    }

    /// Frobenius-orthonormal Hermitian basis of the orthogonal complement
    /// of the system inside the Hermitian `d × d` matrices.
    fn hermitian_complement(&self) -> Vec<ComplexMatrix> {
        let d = self.ambient_dim;
        let want = d * d - self.basis.len();
        let mut out: Vec<ComplexMatrix> = Vec::with_capacity(want);
        for h in hermitian_matrix_basis(d) {
            if out.len() == want {
                break;
            }
            let mut r = &h - &self.project(&h);
            for _ in 0..2 {
                for q in &out {
                    r = &r - &q.scale(r.hs_dot(q));
                }
            }
            let n = r.frobenius_norm();
            if n > 1e-8 {
                out.push(r.scale(1.0 / n));
            }
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Number of basis elements `m`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// `s^a` with `tr(s^a b_c) = δ_ac`.
    pub fn dual_basis(&self) -> &[ComplexMatrix] {
        &self.dual_basis
    }

    pub fn complement(&self) -> &[ComplexMatrix] {
        &self.complement
    }

    /// Inverse of the trace Gram matrix of the basis.
    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// Basis coefficients of the trace-orthogonal projection of `x` onto the
    /// complex span of the basis.
    pub fn coefficients(&self, x: &ComplexMatrix) -> Vec<Complex64> {
        self.dual_basis.iter().map(|s| x.trace_product(s)).collect()
    }

    pub fn combine(&self, coeffs: &[Complex64]) -> ComplexMatrix {
        let d = self.ambient_dim;
        let mut out = ComplexMatrix::zeros(d, d);
        for (c, b) in coeffs.iter().zip(&self.basis) {
            if *c != ZERO {
                out = &out + &b.scale_c(*c);
            }
        }
        out
    }

    pub fn project(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.combine(&self.coefficients(x))
    }

    /// Structural equality: same ambient dimension and identical basis.
    pub fn same_as(&self, other: &OperatorSystem) -> bool {
        self.ambient_dim == other.ambient_dim && self.basis == other.basis
    }

    pub fn unit(self: &Arc<Self>) -> SystemElement {
        let mut coeffs = vec![ZERO; self.dim()];
        coeffs[0] = ONE;
        SystemElement {
            system: self.clone(),
            coeffs,
        }
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            name: self.name.clone(),
            ambient_dim: self.ambient_dim,
            basis: self.basis.clone(),
        }
    }

    /// `M_n(S)` as a concrete system in `M_n ⊗ M_d` (`n` outer) with basis
    /// `h_r ⊗ b_a`, `h` the Hermitian basis of `M_n` with `h_0 = I_n`.
    pub fn amplify(self: &Arc<Self>, n: usize) -> Result<SystemRef> {
        if n == 1 {
            return Ok(self.clone());
        }
        let basis = hermitian_matrix_basis(n)
            .iter()
            .flat_map(|h| self.basis.iter().map(move |b| kron(h, b)))
            .collect();
        OperatorSystem::from_basis(&format!("M{n}({})", self.name), n * self.ambient_dim, basis)
    }
}

/// Coefficients of `E_ij` in the orthogonal Hermitian basis of `M_n`:
/// `E_ij = Σ_r alpha[r][(i,j)] h_r`.
pub fn matrix_unit_coefficients(n: usize) -> Vec<ComplexMatrix> {
    hermitian_matrix_basis(n)
        .iter()
        .map(|h| {
            let norm = h.hs_dot(h);
            ComplexMatrix::from_fn(n, n, |i, j| h[(j, i)] / norm)
        })
        .collect()
}

/// The system spanned by `generators`, their adjoints and `I_d`. The basis
/// is extracted by real Gram–Schmidt on Hermitian and anti-Hermitian parts
/// (pivot `1e-10`), each new element scaled to operator norm one.
pub fn make_system(ambient_dim: usize, generators: &[ComplexMatrix], name: &str) -> Result<SystemRef> {
    let d = ambient_dim;
    for (i, g) in generators.iter().enumerate() {
        if g.rows() != d || g.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "generator {i} is {}x{}, expected {d}x{d}",
                g.rows(),
                g.cols()
            )));
        }
    }
    let mut basis = vec![ComplexMatrix::identity(d)];
    let mut ortho = vec![ComplexMatrix::identity(d).scale(1.0 / (d as f64).sqrt())];
    let minus_half_i = Complex64::new(0.0, -0.5);
    for g in generators {
        let re = g.hermitian_part();
        let im = (g - &g.adjoint()).scale_c(minus_half_i);
        for h in [re, im] {
            let size = h.frobenius_norm();
            if size == 0.0 {
                continue;
            }
            let mut r = h.clone();
            for _ in 0..2 {
                for q in &ortho {
                    r = &r - &q.scale(r.hs_dot(q));
                }
            }
            let rn = r.frobenius_norm();
            if rn > BASIS_PIVOT_TOL * size {
                ortho.push(r.scale(1.0 / rn));
                basis.push(r.scale(1.0 / operator_norm(&r)).hermitian_part());
            }
        }
    }
    OperatorSystem::from_basis(name, d, basis)
}

/// Named systems: `Mn:d` (full algebra), `Cn:d` (diagonal algebra), both
/// for `d ≤ 4`, and `pauli-xz` = span{I, σx, σz}.
pub fn builtin(name: &str) -> Result<SystemRef> {
    let parse_dim = |s: &str| -> Result<usize> {
        let d: usize = s
            .parse()
            .map_err(|_| Error::UnknownSystem(name.to_string()))?;
        if (1..=4).contains(&d) {
            Ok(d)
        } else {
            Err(Error::UnknownSystem(name.to_string()))
        }
    };
    if let Some(d) = name.strip_prefix("Mn:") {
        let d = parse_dim(d)?;
        return OperatorSystem::from_basis(name, d, hermitian_matrix_basis(d));
    }
    if let Some(d) = name.strip_prefix("Cn:") {
        let d = parse_dim(d)?;
        let mut basis = vec![ComplexMatrix::identity(d)];
        basis.extend(diagonal_traceless_basis(d));
        return OperatorSystem::from_basis(name, d, basis);
    }
    if name == "pauli-xz" {
        let sx = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let sz = ComplexMatrix::diag_real(&[1.0, -1.0]);
        return OperatorSystem::from_basis(name, 2, vec![ComplexMatrix::identity(2), sx, sz]);
    }
    Err(Error::UnknownSystem(name.to_string()))
}

/// On-disk system format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub name: String,
    pub ambient_dim: usize,
    pub basis: Vec<ComplexMatrix>,
}

impl SystemFile {
    pub fn build(&self) -> Result<SystemRef> {
        OperatorSystem::from_basis(&self.name, self.ambient_dim, self.basis.clone())
    }
}

/// A system given by built-in name or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Named(String),
    Inline(SystemFile),
}

impl SystemSpec {
    pub fn resolve(&self) -> Result<SystemRef> {
        match self {
            Self::Named(n) => builtin(n),
            Self::Inline(f) => f.build(),
        }
    }

    /// The name when it denotes this exact built-in, the full basis otherwise.
    pub fn of(system: &OperatorSystem) -> Self {
        match builtin(system.name()) {
            Ok(b) if b.same_as(system) => Self::Named(system.name().to_string()),
            _ => Self::Inline(system.to_file()),
        }
    }
}

pub(crate) fn check_same(a: &SystemRef, b: &SystemRef, what: &str) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.same_as(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what}: systems {} and {} differ",
            a.name(),
            b.name()
        )))
    }
}

pub(crate) fn complex_pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub(crate) fn from_pairs(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

/// One element `Σ c_a b_a` of a system.
#[derive(Debug, Clone)]
pub struct SystemElement {
    pub system: SystemRef,
    pub coeffs: Vec<Complex64>,
}

impl SystemElement {
    pub fn new(system: SystemRef, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != system.dim() {
            return Err(Error::SizeMismatch(format!(
                "{} coefficients for a system of dimension {}",
                coeffs.len(),
                system.dim()
            )));
        }
        Ok(Self { system, coeffs })
    }

    pub fn realize(&self) -> ComplexMatrix {
        self.system.combine(&self.coeffs)
    }

    /// Largest imaginary part among the coefficients.
    pub fn self_adjoint_defect(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }
}

/// An element of `M_k(S)`, coefficient of basis element `a` in entry
/// `(i,j)` stored at `(i*k + j)*m + a`.
#[derive(Debug, Clone)]
pub struct SystemMatrix {
    system: SystemRef,
    size: usize,
    coeffs: Vec<Complex64>,
}

impl SystemMatrix {
    pub fn new(system: SystemRef, size: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != size * size * system.dim() {
            return Err(Error::SizeMismatch(format!(
                "{} coefficients for a {size}x{size} matrix over a system of dimension {}",
                coeffs.len(),
                system.dim()
            )));
        }
        Ok(Self {
            system,
            size,
            coeffs,
        })
    }

    pub fn zeros(system: SystemRef, size: usize) -> Self {
        let m = system.dim();
        Self {
            system,
            size,
            coeffs: vec![ZERO; size * size * m],
        }
    }

    /// `I_k ⊗ 1`.
    pub fn unit(system: SystemRef, size: usize) -> Self {
        Self::from_scalar(system, &ComplexMatrix::identity(size))
    }

    /// `[a_ij · 1]`.
    pub fn from_scalar(system: SystemRef, a: &ComplexMatrix) -> Self {
        let k = a.rows();
        let mut x = Self::zeros(system, k);
        for i in 0..k {
            for j in 0..k {
                x.set(i, j, 0, a[(i, j)]);
            }
        }
        x
    }

    /// Matrix from its coefficient blocks `(X_a)_ij = c_ija`.
    pub fn from_blocks(system: SystemRef, blocks: &[ComplexMatrix]) -> Result<Self> {
        let m = system.dim();
        if blocks.len() != m {
            return Err(Error::SizeMismatch(format!(
                "{} coefficient blocks for a system of dimension {m}",
                blocks.len()
            )));
        }
        let k = blocks[0].rows();
        let mut x = Self::zeros(system, k);
        for (a, b) in blocks.iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    x.set(i, j, a, b[(i, j)]);
                }
            }
        }
        Ok(x)
    }

    /// Reads the entries off a `kd × kd` matrix by projecting each block
    /// onto the system. Also returns the Frobenius norm of what was lost.
    pub fn from_realization(system: SystemRef, size: usize, z: &ComplexMatrix) -> Result<(Self, f64)> {
        let d = system.ambient_dim();
        if z.rows() != size * d || z.cols() != size * d {
            return Err(Error::DimensionMismatch(format!(
                "realization of size {}x{} for a {size}x{size} matrix over M_{d}",
                z.rows(),
                z.cols()
            )));
        }
        let mut x = Self::zeros(system.clone(), size);
        let mut lost = 0.0;
        for i in 0..size {
            for j in 0..size {
                let blk = z.block(i * d, j * d, d, d);
                let c = system.coefficients(&blk);
                lost += (&blk - &system.combine(&c)).frobenius_norm().powi(2);
                for (a, v) in c.into_iter().enumerate() {
                    x.set(i, j, a, v);
                }
            }
        }
        Ok((x, lost.sqrt()))
    }

    pub fn system(&self) -> &SystemRef {
        &self.system
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn idx(&self, i: usize, j: usize, a: usize) -> usize {
        (i * self.size + j) * self.system.dim() + a
    }

    pub fn get(&self, i: usize, j: usize, a: usize) -> Complex64 {
        self.coeffs[self.idx(i, j, a)]
    }

    pub fn set(&mut self, i: usize, j: usize, a: usize, v: Complex64) {
        let k = self.idx(i, j, a);
        self.coeffs[k] = v;
    }

    pub fn entry(&self, i: usize, j: usize) -> SystemElement {
        let m = self.system.dim();
        let start = self.idx(i, j, 0);
        SystemElement {
            system: self.system.clone(),
            coeffs: self.coeffs[start..start + m].to_vec(),
        }
    }

    /// `k × k` matrix of the coefficients of basis element `a`.
    pub fn coefficient_block(&self, a: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.size, self.size, |i, j| self.get(i, j, a))
    }

    pub fn coefficient_blocks(&self) -> Vec<ComplexMatrix> {
        (0..self.system.dim()).map(|a| self.coefficient_block(a)).collect()
    }

    /// The `kd × kd` matrix whose `(i,j)` block is `Σ_a c_ija b_a`.
    pub fn realize(&self) -> ComplexMatrix {
        let d = self.system.ambient_dim();
        let k = self.size;
        let mut z = ComplexMatrix::zeros(k * d, k * d);
        for i in 0..k {
            for j in 0..k {
                z.set_block(i * d, j * d, &self.entry(i, j).realize());
            }
        }
        z
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.system.clone(), self.size);
        for i in 0..self.size {
            for j in 0..self.size {
                for a in 0..self.system.dim() {
                    out.set(i, j, a, self.get(j, i, a).conj());
                }
            }
        }
        out
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.adjoint().coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(&self.system, &other.system, "SystemMatrix::add")?;
        if self.size != other.size {
            return Err(Error::SizeMismatch(format!("{} vs {}", self.size, other.size)));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self {
            system: self.system.clone(),
            size: self.size,
            coeffs,
        })
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            system: self.system.clone(),
            size: self.size,
            coeffs: self.coeffs.iter().map(|c| c * t).collect(),
        }
    }

    /// `B·X·B*` for a scalar `r × k` matrix `B`.
    pub fn compress(&self, b: &ComplexMatrix) -> Result<Self> {
        if b.cols() != self.size {
            return Err(Error::SizeMismatch(format!(
                "compression by {}x{} of a size {} matrix",
                b.rows(),
                b.cols(),
                self.size
            )));
        }
        let m = self.system.dim();
        let blocks: Vec<ComplexMatrix> = (0..m)
            .map(|a| &(b * &self.coefficient_block(a)) * &b.adjoint())
            .collect();
        if b.rows() == 0 {
            return Ok(Self::zeros(self.system.clone(), 0));
        }
        Self::from_blocks(self.system.clone(), &blocks)
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        check_same(&self.system, &other.system, "SystemMatrix::direct_sum")?;
        let m = self.system.dim();
        let blocks: Vec<ComplexMatrix> = (0..m)
            .map(|a| self.coefficient_block(a).direct_sum(&other.coefficient_block(a)))
            .collect();
        Self::from_blocks(self.system.clone(), &blocks)
    }

    /// `X ⊗ s` for a scalar matrix `s`: entry `((i,p),(j,q)) = x_ij · s_pq`.
    pub fn kron_scalar(&self, s: &ComplexMatrix) -> Self {
        let m = self.system.dim();
        let blocks: Vec<ComplexMatrix> = (0..m).map(|a| kron(&self.coefficient_block(a), s)).collect();
        Self::from_blocks(self.system.clone(), &blocks).expect("block count matches")
    }

    /// `s ⊗ X` for a scalar matrix `s`: entry `((p,i),(q,j)) = s_pq · x_ij`.
    pub fn scalar_kron(&self, s: &ComplexMatrix) -> Self {
        let m = self.system.dim();
        let blocks: Vec<ComplexMatrix> = (0..m).map(|a| kron(s, &self.coefficient_block(a))).collect();
        Self::from_blocks(self.system.clone(), &blocks).expect("block count matches")
    }

    /// Largest coefficient distance to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.size != other.size || self.coeffs.len() != other.coeffs.len() {
            return f64::INFINITY;
        }
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct SystemMatrixData {
    system: SystemSpec,
    size: usize,
    coeffs: Vec<[f64; 2]>,
}

impl Serialize for SystemMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SystemMatrixData {
            system: SystemSpec::of(&self.system),
            size: self.size,
            coeffs: complex_pairs(&self.coeffs),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SystemMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let data = SystemMatrixData::deserialize(d)?;
        let system = data.system.resolve().map_err(D::Error::custom)?;
        SystemMatrix::new(system, data.size, from_pairs(&data.coeffs)).map_err(D::Error::custom)
    }
}

/// Smallest eigenvalue of a realization, reported on either side of a
/// level-positivity verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub min_eigenvalue: f64,
    pub tolerance: f64,
}

/// Unit vector `v` with `v* realize(x) v = min_eigenvalue < −tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenWitness {
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub vector: ComplexMatrix,
}

/// Membership of `x` in the concrete cone `M_k(S)^+`.
pub fn level_positive(x: &SystemMatrix, tol: f64) -> Result<ConeVerdict<EigenReport, EigenWitness>> {
    let z = x.realize();
    let defect = z.hermitian_defect();
    if defect > tol.max(1e-12) {
        return Err(Error::NotHermitian(defect));
    }
    let (values, vectors) = z.hermitian_eigen();
    let min_eigenvalue = values.first().copied().unwrap_or(0.0);
    if min_eigenvalue >= -tol {
        Ok(ConeVerdict::Member(EigenReport {
            min_eigenvalue,
            tolerance: tol,
        }))
    } else {
        Ok(ConeVerdict::NonMember(EigenWitness {
            min_eigenvalue,
            tolerance: tol,
            vector: vectors.block(0, 0, vectors.rows(), 1),
        }))
    }
}

/// A linear functional on a system, given by its values `f(b_a)`.
#[derive(Debug, Clone)]
pub struct DualFunctional {
    pub system: SystemRef,
    pub values: Vec<Complex64>,
}

impl DualFunctional {
    /// `f(x)` for `x = Σ c_a b_a`.
    pub fn apply(&self, coeffs: &[Complex64]) -> Complex64 {
        self.values.iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }

    /// The dual basis functional `δ_a` (`δ_a(b_c) = δ_ac`).
    pub fn dual_basis_element(system: SystemRef, a: usize) -> Self {
        let mut values = vec![ZERO; system.dim()];
        values[a] = ONE;
        Self { system, values }
    }
}

/// Normalized trace `b ↦ tr(b)/d`, used as the order unit of the dual.
pub fn dual_unit(system: &SystemRef) -> DualFunctional {
    let d = system.ambient_dim() as f64;
    DualFunctional {
        system: system.clone(),
        values: system.basis().iter().map(|b| b.trace() / d).collect(),
    }
}

/// An element of `M_k(S^d)`, value `F_ij(b_a)` stored at `(i*k + j)*m + a`.
#[derive(Debug, Clone)]
pub struct DualSystemMatrix {
    system: SystemRef,
    size: usize,
    values: Vec<Complex64>,
}

impl DualSystemMatrix {
    pub fn new(system: SystemRef, size: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != size * size * system.dim() {
            return Err(Error::SizeMismatch(format!(
                "{} values for a {size}x{size} dual matrix over a system of dimension {}",
                values.len(),
                system.dim()
            )));
        }
        Ok(Self {
            system,
            size,
            values,
        })
    }

    /// Matrix with `F_ij(b_a) = blocks[a][(i,j)]`.
    pub fn from_blocks(system: SystemRef, blocks: &[ComplexMatrix]) -> Result<Self> {
        let m = system.dim();
        if blocks.len() != m {
            return Err(Error::SizeMismatch(format!("{} blocks for dimension {m}", blocks.len())));
        }
        let k = blocks[0].rows();
        let mut values = vec![ZERO; k * k * m];
        for (a, b) in blocks.iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    values[(i * k + j) * m + a] = b[(i, j)];
                }
            }
        }
        Self::new(system, k, values)
    }

    pub fn from_functional(f: &DualFunctional) -> Self {
        Self {
            system: f.system.clone(),
            size: 1,
            values: f.values.clone(),
        }
    }

    pub fn system(&self) -> &SystemRef {
        &self.system
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `[F_ij(b_a)]_ij`, the image of `b_a` under the associated map.
    pub fn block(&self, a: usize) -> ComplexMatrix {
        let (k, m) = (self.size, self.system.dim());
        ComplexMatrix::from_fn(k, k, |i, j| self.values[(i * k + j) * m + a])
    }

    pub fn blocks(&self) -> Vec<ComplexMatrix> {
        (0..self.system.dim()).map(|a| self.block(a)).collect()
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.blocks()
            .iter()
            .map(ComplexMatrix::hermitian_defect)
            .fold(0.0, f64::max)
    }
}

/// PSD `C ∈ M_d ⊗ M_k` (`d` outer) whose map `Φ(X)_ij = tr(C (Xᵀ ⊗ E_ji))`
/// reproduces `F` on the basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiCertificate {
    pub choi: ComplexMatrix,
    pub max_residual: f64,
    pub min_eigenvalue: f64,
}

/// `Φ(x)` for a Choi matrix `c ∈ M_d ⊗ M_k`.
pub fn choi_apply(c: &ComplexMatrix, d: usize, x: &ComplexMatrix) -> ComplexMatrix {
    let k = c.rows() / d;
    let mut out = ComplexMatrix::zeros(k, k);
    for p in 0..d {
        for q in 0..d {
            let xpq = x[(p, q)];
            if xpq != ZERO {
                out = &out + &c.block(p * k, q * k, k, k).scale_c(xpq);
            }
        }
    }
    out
}

impl ChoiCertificate {
    /// Recomputes the residual against `F` and the smallest eigenvalue.
    pub fn check(&self, f: &DualSystemMatrix) -> (f64, f64) {
        let sys = f.system();
        let d = sys.ambient_dim();
        let residual = sys
            .basis()
            .iter()
            .enumerate()
            .map(|(a, b)| (&choi_apply(&self.choi, d, b) - &f.block(a)).max_abs())
            .fold(0.0, f64::max);
        (residual, self.choi.min_eigenvalue())
    }
}

/// Hermitian `K_a` with `Σ_a b_aᵀ ⊗ K_a ⪰ 0` and `Σ_a Re tr(F(b_a) K_a) < 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualWitness {
    pub blocks: Vec<ComplexMatrix>,
    pub pairing: f64,
    pub min_eigenvalue: f64,
}

impl DualWitness {
    pub fn operator(&self, system: &OperatorSystem) -> ComplexMatrix {
        let d = system.ambient_dim();
        let k = self.blocks.first().map_or(1, |b| b.rows());
        let mut out = ComplexMatrix::zeros(d * k, d * k);
        for (b, kb) in system.basis().iter().zip(&self.blocks) {
            out = &out + &kron(&b.transpose(), kb);
        }
        out
    }

    /// Recomputes `(pairing, min eigenvalue of the operator)`.
    pub fn check(&self, f: &DualSystemMatrix) -> (f64, f64) {
        let pairing = self
            .blocks
            .iter()
            .enumerate()
            .map(|(a, kb)| f.block(a).hs_dot(kb))
            .sum();
        (pairing, self.operator(f.system()).min_eigenvalue())
    }
}

/// Conic problem whose feasible points are Choi matrices of CP maps
/// `Φ: M_d → M_k` with `Φ(b_a) = F(b_a)`.
fn choi_problem(f: &DualSystemMatrix) -> ConicProblem {
    let sys = f.system();
    let (d, k) = (sys.ambient_dim(), f.size());
    let mut p = ConicProblem::new(vec![d * k]);
    let herm_k = hermitian_matrix_basis(k);
    for (a, b) in sys.basis().iter().enumerate() {
        let fa = f.block(a).hermitian_part();
        let bt = b.transpose();
        for e in &herm_k {
            p.add_constraint(vec![BlockTerm::new(0, kron(&bt, e))], fa.hs_dot(e));
        }
    }
    p
}

/// Membership of `F` in `M_k(S^d)^+`, i.e. complete positivity of the map
/// `S → M_k` it defines, decided through a CP extension to `M_d`.
pub fn dual_cone_membership(
    f: &DualSystemMatrix,
    tol: f64,
) -> Result<ConeVerdict<ChoiCertificate, DualWitness>> {
    let defect = f.hermitian_defect();
    if defect > tol.max(1e-12) {
        return Err(Error::NotHermitian(defect));
    }
    let feas_tol = tol.max(1e-9);
    let problem = choi_problem(f);
    let sol = solver::solve(
        &problem,
        SolverSettings {
            feas_tol,
            ..Default::default()
        },
    )?;
    match sol.status {
        SolveStatus::Feasible | SolveStatus::Optimal => {
            let mut cert = ChoiCertificate {
                choi: sol.block_values[0].clone(),
                max_residual: 0.0,
                min_eigenvalue: 0.0,
            };
            let (res, eig) = cert.check(f);
            cert.max_residual = res;
            cert.min_eigenvalue = eig;
            if res <= feas_tol && eig >= -feas_tol {
                return Ok(ConeVerdict::Member(cert));
            }
            Ok(ConeVerdict::Unknown(Diagnostics {
                best_residual: Some(res),
                ..Diagnostics::new("Choi certificate failed re-verification")
            }))
        }
        SolveStatus::Infeasible => {
            let ray = sol.farkas.as_ref().map(|c| c.multipliers.clone()).unwrap_or_default();
            let herm_k = hermitian_matrix_basis(f.size());
            let per = herm_k.len();
            let blocks: Vec<ComplexMatrix> = (0..f.system().dim())
                .map(|a| {
                    let mut kb = ComplexMatrix::zeros(f.size(), f.size());
                    for (r, e) in herm_k.iter().enumerate() {
                        kb = &kb + &e.scale(ray[a * per + r]);
                    }
                    kb
                })
                .collect();
            let mut w = DualWitness {
                blocks,
                pairing: 0.0,
                min_eigenvalue: 0.0,
            };
            let (pairing, eig) = w.check(f);
            w.pairing = pairing;
            w.min_eigenvalue = eig;
            if pairing < -feas_tol && eig >= -feas_tol * pairing.abs() {
                Ok(ConeVerdict::NonMember(w))
            } else {
                Ok(ConeVerdict::Unknown(Diagnostics::new(
                    "dual witness failed re-verification",
                )))
            }
        }
        SolveStatus::Indeterminate => Ok(ConeVerdict::Unknown(Diagnostics {
            best_residual: Some(sol.max_constraint_residual),
            ..Diagnostics::new("solver returned Indeterminate")
        })),
    }
}
