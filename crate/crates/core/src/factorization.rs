//! Factoring the map `û: S^d → T` of a positive tensor through matrix
//! algebras, and the nuclearity test built on it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{canonical_shuffle, kron, operator_norm, ComplexMatrix, ONE, ZERO};
use crate::opsys::{
    check_same, choi_apply, DualFunctional, DualSystemMatrix, SystemElement, SystemMatrix,
    SystemRef,
};
use crate::tensor::seesaw::{matrix_unit_start, Seesaw, Side, Start};
use crate::tensor::{
    max_cone_membership, MaxConeCertificate, MaxConeOptions, MaxConeVerdict, MaxConeWitness,
    TensorElement,
};
use crate::verdict::{ConeVerdict, Diagnostics};

/// `û(f) = Σ_a f(s_a) Σ_b c_ab t_b`, stored as the `m_T × m_S` matrix `cᵀ`.
#[derive(Debug, Clone)]
pub struct HatMap {
    pub source: SystemRef,
    pub target: SystemRef,
    pub matrix: ComplexMatrix,
}

impl HatMap {
    /// `û(f)` as an element of `T`.
    pub fn apply(&self, f: &DualFunctional) -> Result<SystemElement> {
        check_same(&f.system, &self.source, "functional")?;
        let coeffs = (0..self.target.dim())
            .map(|b| {
                (0..self.source.dim())
                    .map(|a| self.matrix[(b, a)] * f.values[a])
                    .sum()
            })
            .collect();
        SystemElement::new(self.target.clone(), coeffs)
    }
}

pub fn hat(u: &TensorElement) -> Result<HatMap> {
    if u.level() != 1 {
        return Err(Error::SizeMismatch("hat map of a level-one element".into()));
    }
    Ok(HatMap {
        source: u.left().clone(),
        target: u.right().clone(),
        matrix: u.coefficient_matrix(0, 0).transpose(),
    })
}

/// Trace-orthogonal basis of `T` with `y_1 = 1` and every `‖y_i‖ = 1`.
#[derive(Debug, Clone)]
pub struct TripleNormContext {
    system: SystemRef,
    basis: Vec<ComplexMatrix>,
    /// Coefficients of `y_i` in the stored basis, row `i`.
    change: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl TripleNormContext {
    pub fn new(system: &SystemRef) -> Result<Self> {
        let m = system.dim();
        let mut basis: Vec<ComplexMatrix> = Vec::with_capacity(m);
        let mut change = DMatrix::<f64>::zeros(m, m);
        // Gram-Schmidt in the trace inner product; the stored basis already
        // starts with the identity
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        for (a, b) in system.basis().iter().enumerate() {
            let mut v = b.clone();
            let mut coeff = vec![0.0; m];
            coeff[a] = 1.0;
            for (y, c) in basis.iter().zip(&rows) {
                let t = v.hs_dot(y) / y.hs_dot(y);
                v = &v - &y.scale(t);
                for (ci, yi) in coeff.iter_mut().zip(c) {
                    *ci -= t * yi;
                }
            }
            let norm = operator_norm(&v);
            if norm < 1e-12 {
                return Err(Error::InvalidSystem("degenerate basis".into()));
            }
            basis.push(v.scale(1.0 / norm));
            rows.push(coeff.iter().map(|c| c / norm).collect());
        }
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                change[(i, j)] = *v;
            }
        }
        let inverse = change
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidSystem("singular change of basis".into()))?;
        Ok(Self {
            system: system.clone(),
            basis,
            change,
            inverse,
        })
    }

    pub fn system(&self) -> &SystemRef {
        &self.system
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// Coefficients of `y_i` over the stored basis of `T`.
    pub fn y_coefficients(&self, i: usize) -> Vec<Complex64> {
        self.change.row(i).iter().map(|v| Complex64::new(*v, 0.0)).collect()
    }

    /// The `S`-coefficients of `x_i` in `u = Σ x_i ⊗ y_i`, column `i`.
    pub fn expand(&self, u: &TensorElement) -> Result<ComplexMatrix> {
        if u.level() != 1 {
            return Err(Error::SizeMismatch("expansion of a level-one element".into()));
        }
        check_same(u.right(), &self.system, "context")?;
        let c = u.coefficient_matrix(0, 0);
        let inv = ComplexMatrix::from_fn(self.inverse.nrows(), self.inverse.ncols(), |i, j| {
            Complex64::new(self.inverse[(i, j)], 0.0)
        });
        Ok(&c * &inv)
    }
}

/// `|||u||| = Σ_i ‖x_i‖` for `u = Σ x_i ⊗ y_i`.
pub fn triple_norm(u: &TensorElement, ctx: &TripleNormContext) -> Result<f64> {
    let x = ctx.expand(u)?;
    Ok((0..x.cols())
        .map(|i| {
            let coeffs: Vec<Complex64> = (0..x.rows()).map(|a| x[(a, i)]).collect();
            operator_norm(&u.left().combine(&coeffs))
        })
        .sum())
}

/// Closed-form certificate for `|||u|||(1⊗1) + u` from the blocks
/// `[[‖x_i‖, x_i], [x_i, ‖x_i‖]]` and `[[1, y_i], [y_i, 1]]`.
///
/// Each pair's Schur product is compressed by `[1, 1]/√2`, so the left
/// factor is halved.
pub fn perturbation_certificate(u: &TensorElement, ctx: &TripleNormContext) -> Result<MaxConeCertificate> {
    let x = ctx.expand(u)?;
    let scale = 1.0 + x.max_abs();
    let defect = (0..x.rows())
        .flat_map(|a| (0..x.cols()).map(move |i| (a, i)))
        .map(|(a, i)| x[(a, i)].im.abs())
        .fold(0.0, f64::max);
    if defect > 1e-9 * scale {
        return Err(Error::NotSelfAdjoint(defect));
    }
    let (s, t) = (u.left().clone(), u.right().clone());
    let m = t.dim();
    let mut p = SystemMatrix::zeros(s.clone(), 2 * m);
    let mut q = SystemMatrix::zeros(t.clone(), 2 * m);
    let mut total = 0.0;
    for i in 0..m {
        let xi: Vec<Complex64> = (0..s.dim()).map(|a| Complex64::new(x[(a, i)].re, 0.0)).collect();
        let norm = operator_norm(&s.combine(&xi));
        total += norm;
        let (r, c) = (2 * i, 2 * i + 1);
        p.set(r, r, 0, Complex64::new(norm / 2.0, 0.0));
        p.set(c, c, 0, Complex64::new(norm / 2.0, 0.0));
        for (a, v) in xi.iter().enumerate() {
            p.set(r, c, a, v * 0.5);
            p.set(c, r, a, v * 0.5);
        }
        q.set(r, r, 0, ONE);
        q.set(c, c, 0, ONE);
        for (b, v) in ctx.y_coefficients(i).into_iter().enumerate() {
            q.set(r, c, b, v);
            q.set(c, r, b, v);
        }
    }
    MaxConeCertificate::build(u, p, q, total)
}

/// Norm constants `c ≤ C` with `c·sup ≤ |||·||| ≤ C·sup` on `S ⊗ T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstants {
    pub lower: f64,
    pub upper: f64,
}

/// `|tr(z y_i)| ≤ d_T ‖z‖` and `‖y_i‖_F ≥ 1` bound the `y`-coefficients; the
/// dual basis trace norms bound the `s`-coefficients.
pub fn norm_constants(s: &SystemRef, ctx: &TripleNormContext) -> NormConstants {
    let dt = ctx.system.ambient_dim() as f64;
    let mt = ctx.system.dim() as f64;
    let sum_s: f64 = s.basis().iter().map(operator_norm).sum();
    let max_trace_norm = s
        .dual_basis()
        .iter()
        .map(|d| d.hermitian_eigenvalues().iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    NormConstants {
        lower: 1.0 / max_trace_norm,
        upper: mt * dt * sum_s,
    }
}

/// `(|||u − w|||, max_a ‖(û − ŵ)(δ_a)‖)`.
pub fn point_norm_gap(u: &TensorElement, w: &TensorElement, ctx: &TripleNormContext) -> Result<(f64, f64)> {
    let diff = u.sub(w)?;
    let triple = triple_norm(&diff, ctx)?;
    Ok((triple, sup_on_dual_basis(&diff)))
}

fn sup_on_dual_basis(u: &TensorElement) -> f64 {
    let c = u.coefficient_matrix(0, 0);
    (0..c.rows())
        .map(|a| {
            let row: Vec<Complex64> = (0..c.cols()).map(|b| c[(a, b)]).collect();
            operator_norm(&u.right().combine(&row))
        })
        .fold(0.0, f64::max)
}

/// CP maps `φ(f) = [f(p_ij)]` into `M_k` and `ψ([a]) = Σ a_ij q_ij` out of it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizationPair {
    pub k: usize,
    pub p: SystemMatrix,
    pub q: SystemMatrix,
    pub epsilon: f64,
    /// Coefficient residual of the certificate the pair came from.
    pub residual: f64,
}

impl FactorizationPair {
    pub fn phi(&self, f: &DualFunctional) -> ComplexMatrix {
        let k = self.k;
        ComplexMatrix::from_fn(k, k, |i, j| f.apply(&self.p.entry(i, j).coeffs))
    }

    /// `ψ(a)` as `T`-coefficients.
    pub fn psi(&self, a: &ComplexMatrix) -> Vec<Complex64> {
        let m = self.q.system().dim();
        let mut out = vec![ZERO; m];
        for i in 0..self.k {
            for j in 0..self.k {
                for (b, o) in out.iter_mut().enumerate() {
                    *o += a[(i, j)] * self.q.get(i, j, b);
                }
            }
        }
        out
    }

    pub fn compose(&self, f: &DualFunctional) -> Vec<Complex64> {
        self.psi(&self.phi(f))
    }

    /// `Σ p_ij ⊗ q_ij`.
    pub fn element(&self) -> Result<TensorElement> {
        MaxConeCertificate {
            k: self.k,
            p: self.p.clone(),
            q: self.q.clone(),
            epsilon: self.epsilon,
            residual: self.residual,
        }
        .element()
    }

    /// `‖ψ(φ(δ_a)) − û(δ_a)‖` for each dual basis functional of `S`.
    pub fn composition_errors(&self, u: &TensorElement) -> Result<Vec<f64>> {
        let h = hat(u)?;
        let s = self.p.system().clone();
        (0..s.dim())
            .map(|a| {
                let f = DualFunctional::dual_basis_element(s.clone(), a);
                let got = self.compose(&f);
                let want = h.apply(&f)?.coeffs;
                let diff: Vec<Complex64> = got.iter().zip(&want).map(|(g, w)| g - w).collect();
                Ok(operator_norm(&self.q.system().combine(&diff)))
            })
            .collect()
    }

    /// `ε·|f(1)|·‖1‖ + C·residual` with `C = Σ_b ‖t_b‖`.
    pub fn error_bounds(&self) -> Vec<f64> {
        let s = self.p.system();
        let t = self.q.system();
        let c: f64 = t.basis().iter().map(operator_norm).sum();
        let unit = s.unit();
        (0..s.dim())
            .map(|a| {
                let f1 = unit.coeffs[a].norm();
                self.epsilon * f1 + c * self.residual
            })
            .collect()
    }
}

/// Factors `û` through `M_k` using a max-cone certificate of `u + ε(1⊗1)`.
pub fn factor_through_matrices(u: &TensorElement, opts: &MaxConeOptions) -> Result<FactorizationPair> {
    match max_cone_membership(u, opts)? {
        ConeVerdict::Member(cert) => Ok(pair_from_certificate(&cert)),
        ConeVerdict::NonMember(w) => Err(Error::NotInMaxCone(format!(
            "witness with pairing {:.3e} at ε = {}",
            w.pairing_value, w.epsilon
        ))),
        ConeVerdict::Unknown(d) => Err(Error::NotInMaxCone(format!("undecided: {}", d.message))),
    }
}

pub fn pair_from_certificate(cert: &MaxConeCertificate) -> FactorizationPair {
    FactorizationPair {
        k: cert.k,
        p: cert.p.clone(),
        q: cert.q.clone(),
        epsilon: cert.epsilon,
        residual: cert.residual,
    }
}

/// Certifies `u + ε'(1⊗1)` with `ε' = |||u − w|||` and `w = Σ p_ij ⊗ q_ij`,
/// joining the pair with the closed-form certificate of `ε'(1⊗1) + (u − w)`.
pub fn reconstruct_membership(
    pair: &FactorizationPair,
    u: &TensorElement,
    ctx: &TripleNormContext,
    tol: f64,
) -> Result<MaxConeVerdict> {
    for (name, x) in [("P", &pair.p), ("Q", &pair.q)] {
        let eig = x.realize().min_eigenvalue();
        if eig < -tol {
            return Err(Error::NotPositive(format!("{name} has eigenvalue {eig:.3e}")));
        }
    }
    let w = pair.element()?;
    let mut diff = u.sub(&w)?;
    // Σ p_ij ⊗ q_ij has real coefficients for Hermitian P, Q; drop rounding
    for a in 0..u.left().dim() {
        for b in 0..u.right().dim() {
            let v = diff.get(0, 0, a, b);
            diff.set(0, 0, a, b, Complex64::new(v.re, 0.0));
        }
    }
    let pert = perturbation_certificate(&diff, ctx)?;
    let cert = MaxConeCertificate::build(
        u,
        pair.p.direct_sum(&pert.p)?,
        pair.q.direct_sum(&pert.q)?,
        pert.epsilon,
    )?;
    Ok(ConeVerdict::Member(cert))
}

/// `(P, Q) ↦ (Q, P)`, a certificate for `swap(u)`.
pub fn swap_certificate(cert: &MaxConeCertificate) -> MaxConeCertificate {
    MaxConeCertificate {
        k: cert.k,
        p: cert.q.clone(),
        q: cert.p.clone(),
        epsilon: cert.epsilon,
        residual: cert.residual,
    }
}

/// `W ↦ (I_n ⊗ U) W (I_n ⊗ U)ᵀ` with `U` the canonical shuffle, a witness
/// for `swap(u)` with the same pairing.
pub fn swap_witness(w: &MaxConeWitness, u: &TensorElement) -> MaxConeWitness {
    let shuffle = kron(
        &ComplexMatrix::identity(u.level()),
        &canonical_shuffle(u.left().ambient_dim(), u.right().ambient_dim()),
    );
    MaxConeWitness {
        w: &(&shuffle * &w.w) * &shuffle.transpose(),
        pairing_value: w.pairing_value,
        epsilon: w.epsilon,
    }
}

/// An approximate factorization of the identity of `T` through `M_k`.
///
/// `φ: T → M_k` is given by a PSD Choi matrix of an extension to `M_d`
/// (`d` outer); `ψ` by `Q ∈ M_k(T)^+`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuclearityCertificate {
    pub k: usize,
    pub epsilon: f64,
    pub choi: ComplexMatrix,
    pub q: SystemMatrix,
    pub residual: f64,
}

/// Re-check of a [`NuclearityCertificate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearityCheck {
    pub choi_min_eigenvalue: f64,
    pub q_min_eigenvalue: f64,
    /// `‖ψ(φ(t_a)) − t_a‖` for each basis element.
    pub composition_errors: Vec<f64>,
}

impl NuclearityCheck {
    pub fn passed(&self, tol: f64, max_error: f64) -> bool {
        self.choi_min_eigenvalue >= -tol
            && self.q_min_eigenvalue >= -tol
            && self.composition_errors.iter().all(|e| *e <= max_error)
    }
}

impl NuclearityCertificate {
    pub fn system(&self) -> &SystemRef {
        self.q.system()
    }

    /// `[p_ij(t_a)] = φ(t_a)`.
    pub fn p(&self) -> Result<DualSystemMatrix> {
        let t = self.system();
        let blocks: Vec<ComplexMatrix> = t
            .basis()
            .iter()
            .map(|b| choi_apply(&self.choi, t.ambient_dim(), b))
            .collect();
        DualSystemMatrix::from_blocks(t.clone(), &blocks)
    }

    pub fn check(&self) -> Result<NuclearityCheck> {
        let t = self.system().clone();
        let d = t.ambient_dim();
        if self.choi.rows() != d * self.k || self.q.size() != self.k {
            return Err(Error::SizeMismatch("certificate sizes disagree".into()));
        }
        let q_blocks = self.q.coefficient_blocks();
        let composition_errors = t
            .basis()
            .iter()
            .enumerate()
            .map(|(a, b)| {
                let pa = choi_apply(&self.choi, d, b);
                let mut coeffs: Vec<Complex64> = q_blocks
                    .iter()
                    .map(|qb| {
                        let mut s = ZERO;
                        for i in 0..self.k {
                            for j in 0..self.k {
                                s += pa[(i, j)] * qb[(i, j)];
                            }
                        }
                        s
                    })
                    .collect();
                coeffs[a] -= ONE;
                operator_norm(&t.combine(&coeffs))
            })
            .collect();
        Ok(NuclearityCheck {
            choi_min_eigenvalue: self.choi.min_eigenvalue(),
            q_min_eigenvalue: self.q.realize().min_eigenvalue(),
            composition_errors,
        })
    }
}

/// Looks for a certificate that `Σ δ_a ⊗ t_a + ε(δ_0 ⊗ 1) ∈ (T^d ⊗ T)^+_max`,
/// the `T^d` side decided through Choi matrices.
///
/// There is no witness family for this query, so failure is `Unknown`.
pub fn nuclearity_test(
    t: &SystemRef,
    opts: &MaxConeOptions,
) -> Result<ConeVerdict<NuclearityCertificate, MaxConeWitness>> {
    let (m, d) = (t.dim(), t.ambient_dim());
    let dual_unit = crate::opsys::dual_unit(t);
    let target = DMatrix::from_fn(m, m, |a, b| {
        let delta = if a == b { 1.0 } else { 0.0 };
        let unit = if b == 0 { opts.eps * dual_unit.values[a].re } else { 0.0 };
        delta + unit
    });
    let right = Side::Concrete(t.clone());
    let structured = vec![Start::FixedQ(matrix_unit_start(&right))];
    let k_max = opts.k_max.unwrap_or(d * d);
    let seesaw = Seesaw {
        left: Side::Dual(t.clone()),
        right,
        target: &target,
        tol: opts.tol,
    };
    let outcome = seesaw.run(structured, k_max, opts.seed);
    let unknown = |message: String, best: f64| {
        ConeVerdict::Unknown(Diagnostics {
            message,
            best_residual: Some(best),
            best_witness_value: None,
            k_max: Some(k_max),
            epsilon: Some(opts.eps),
        })
    };
    let Some(found) = outcome.success else {
        return Ok(unknown(
            format!("no factorization after {} see-saw attempts", outcome.attempts),
            outcome.best_residual,
        ));
    };
    let cert = NuclearityCertificate {
        k: found.p.k,
        epsilon: opts.eps,
        choi: found.p.z,
        q: SystemMatrix::from_blocks(t.clone(), &found.q.blocks)?,
        residual: found.residual,
    };
    let check = cert.check()?;
    // the ε(δ_0 ⊗ 1) term alone moves ψ∘φ(1) by ε
    let allowed = opts.eps + opts.tol * (m as f64) * 10.0;
    if check.passed(opts.tol, allowed) {
        Ok(ConeVerdict::Member(cert))
    } else {
        Ok(unknown(
            format!("factorization failed re-verification: {check:?}"),
            found.residual,
        ))
    }
}
