//! Membership in the ε-shifted maximal cone.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::seesaw::{matrix_unit_start, Seesaw, Side, Start};
use super::{schur_product, TensorElement};
use crate::error::{Error, Result};
use crate::linalg::{all_ones, ComplexMatrix};
use crate::opsys::{check_same, SystemMatrix};
use crate::verdict::{ConeVerdict, Diagnostics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxConeOptions {
    /// Multiple of the unit added before testing.
    pub eps: f64,
    /// Largest see-saw size; `d_S·d_T` when absent.
    pub k_max: Option<usize>,
    pub tol: f64,
    pub seed: u64,
}

impl Default for MaxConeOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            k_max: None,
            tol: 1e-8,
            seed: 0,
        }
    }
}

/// Residual and factor eigenvalues from re-checking a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub residual: f64,
    pub p_min_eigenvalue: f64,
    pub q_min_eigenvalue: f64,
}

impl CertificateCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.residual <= tol && self.p_min_eigenvalue >= -tol && self.q_min_eigenvalue >= -tol
    }
}

/// `u + ε(1⊗1) ≈ Σ_ij p_ij ⊗ q_ij` with `P ∈ M_k(S)^+` and `Q ∈ M_k(T)^+`.
///
/// For a level-`n` element the right system is `M_n(T)` and the identity is
/// checked against the rewritten element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxConeCertificate {
    pub k: usize,
    pub p: SystemMatrix,
    pub q: SystemMatrix,
    pub epsilon: f64,
    pub residual: f64,
}

impl MaxConeCertificate {
    pub fn build(u: &TensorElement, p: SystemMatrix, q: SystemMatrix, epsilon: f64) -> Result<Self> {
        if p.size() != q.size() {
            return Err(Error::SizeMismatch(format!("P is {}, Q is {}", p.size(), q.size())));
        }
        let mut cert = Self {
            k: p.size(),
            p,
            q,
            epsilon,
            residual: 0.0,
        };
        cert.residual = cert.check(u)?.residual;
        Ok(cert)
    }

    /// `Σ_ij p_ij ⊗ q_ij`.
    pub fn element(&self) -> Result<TensorElement> {
        schur_product(&self.p, &self.q)?.compress(&all_ones(self.k).block(0, 0, 1, self.k))
    }

    pub fn check(&self, u: &TensorElement) -> Result<CertificateCheck> {
        let u = u.amplify_right()?;
        check_same(self.p.system(), u.left(), "certificate left system")?;
        check_same(self.q.system(), u.right(), "certificate right system")?;
        let residual = self.element()?.max_distance(&u.plus_unit(self.epsilon));
        Ok(CertificateCheck {
            residual,
            p_min_eigenvalue: self.p.realize().min_eigenvalue(),
            q_min_eigenvalue: self.q.realize().min_eigenvalue(),
        })
    }
}

/// A state `W` on the ambient matrix algebra with
/// `tr(W·realize(u + ε·unit)) < 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxConeWitness {
    pub w: ComplexMatrix,
    pub pairing_value: f64,
    pub epsilon: f64,
}

impl MaxConeWitness {
    /// Recomputed pairing, smallest eigenvalue of `W` and `|tr W − 1|`.
    pub fn check(&self, u: &TensorElement) -> Result<(f64, f64, f64)> {
        let r = u.plus_unit(self.epsilon).realize();
        if r.rows() != self.w.rows() {
            return Err(Error::SizeMismatch(format!(
                "witness of size {} for a realization of size {}",
                self.w.rows(),
                r.rows()
            )));
        }
        let pairing = self.w.trace_product(&r).re;
        Ok((pairing, self.w.min_eigenvalue(), (self.w.trace().re - 1.0).abs()))
    }

    pub fn verifies(&self, u: &TensorElement, tol: f64) -> Result<bool> {
        let (pairing, eig, tr) = self.check(u)?;
        Ok(pairing < -tol && eig >= -tol && tr <= tol.max(1e-12))
    }
}

pub type MaxConeVerdict = ConeVerdict<MaxConeCertificate, MaxConeWitness>;

/// Decides `u + ε(1⊗1) ∈ D_1^max` for a level-one Hermitian `u`.
///
/// A negative eigenvalue of the concrete realization gives a witness; one
/// within `tol` of zero gives `Unknown`. Otherwise the see-saw looks for a
/// certificate, and failing that the verdict is `Unknown`.
pub fn max_cone_membership(u: &TensorElement, opts: &MaxConeOptions) -> Result<MaxConeVerdict> {
    if u.level() != 1 {
        return Err(Error::SizeMismatch(format!(
            "level {} element; use max_cone_membership_level",
            u.level()
        )));
    }
    let defect = u.hermitian_defect();
    if defect > opts.tol.max(1e-12) {
        return Err(Error::NotHermitian(defect));
    }
    let tol = opts.tol;
    let shifted = u.plus_unit(opts.eps);
    let r = shifted.realize();
    let (values, vectors) = r.hermitian_eigen();
    let lambda = values[0];
    if lambda < -tol {
        let v = vectors.block(0, 0, vectors.rows(), 1);
        let w = (&v * &v.adjoint()).hermitian_part();
        let pairing_value = w.trace_product(&r).re;
        return Ok(ConeVerdict::NonMember(MaxConeWitness {
            w,
            pairing_value,
            epsilon: opts.eps,
        }));
    }

    let k_max = opts
        .k_max
        .unwrap_or(u.left().ambient_dim() * u.right().ambient_dim());
    let unknown = |message: String, best: Option<f64>| {
        ConeVerdict::Unknown(Diagnostics {
            message,
            best_residual: best,
            best_witness_value: Some(lambda),
            k_max: Some(k_max),
            epsilon: Some(opts.eps),
        })
    };
    if lambda.abs() <= tol {
        return Ok(unknown(
            format!("realization eigenvalue {lambda:.3e} is within {tol:.1e} of zero"),
            None,
        ));
    }

    let (left, right) = (u.left().clone(), u.right().clone());
    let target = DMatrix::from_fn(left.dim(), right.dim(), |a, b| shifted.get(0, 0, a, b).re);
    let right_side = Side::Concrete(right.clone());
    let left_side = Side::Concrete(left.clone());
    let structured = vec![
        Start::FixedQ(super::seesaw::sketch_start(&right_side, r, left.ambient_dim())),
        Start::FixedQ(matrix_unit_start(&right_side)),
        Start::FixedP(matrix_unit_start(&left_side)),
    ];
    let seesaw = Seesaw {
        left: left_side,
        right: right_side,
        target: &target,
        tol,
    };
    let outcome = seesaw.run(structured, k_max, opts.seed);
    let Some(found) = outcome.success else {
        return Ok(unknown(
            format!(
                "no certificate after {} see-saw attempts; realization eigenvalue {lambda:.3e} gives no witness",
                outcome.attempts
            ),
            Some(outcome.best_residual),
        ));
    };
    let p = SystemMatrix::from_blocks(left, &found.p.blocks)?;
    let q = SystemMatrix::from_blocks(right, &found.q.blocks)?;
    let cert = MaxConeCertificate::build(u, p, q, opts.eps)?;
    let check = cert.check(u)?;
    if check.passed(tol) {
        Ok(ConeVerdict::Member(cert))
    } else {
        Ok(unknown(
            format!("see-saw certificate failed re-verification: {check:?}"),
            Some(check.residual),
        ))
    }
}

/// Decides `U + ε(I_n ⊗ 1 ⊗ 1) ∈ D_n^max` through `M_n(S ⊗ T) ≅ S ⊗ M_n(T)`.
///
/// Certificates are over `(S, M_n(T))`; witnesses are returned in the
/// level-`n` realization.
pub fn max_cone_membership_level(u: &TensorElement, opts: &MaxConeOptions) -> Result<MaxConeVerdict> {
    if u.level() == 1 {
        return max_cone_membership(u, opts);
    }
    let defect = u.hermitian_defect();
    if defect > opts.tol.max(1e-12) {
        return Err(Error::NotHermitian(defect));
    }
    let v = u.amplify_right()?;
    Ok(match max_cone_membership(&v, opts)? {
        ConeVerdict::NonMember(w) => {
            let perm = u.amplification_shuffle();
            let w_level = (&(&perm * &w.w) * &perm.transpose()).hermitian_part();
            let pairing_value = w_level.trace_product(&u.plus_unit(opts.eps).realize()).re;
            ConeVerdict::NonMember(MaxConeWitness {
                w: w_level,
                pairing_value,
                epsilon: w.epsilon,
            })
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::opsys::builtin;
    use crate::tensor::max_entangled;

    #[test]
    fn unit_is_member() {
        let m2 = builtin("Mn:2").unwrap();
        let u = TensorElement::unit(m2.clone(), m2, 1);
        let v = max_cone_membership(&u, &MaxConeOptions::default()).unwrap();
        let cert = v.certificate().expect("member");
        assert!(cert.check(&u).unwrap().passed(1e-8));
    }

    #[test]
    fn negative_unit_has_witness() {
        let c2 = builtin("Cn:2").unwrap();
        let u = TensorElement::unit(c2.clone(), c2, 1).scale(-2.0);
        let opts = MaxConeOptions {
            eps: 1.0,
            ..Default::default()
        };
        let v = max_cone_membership(&u, &opts).unwrap();
        let w = v.witness().expect("non-member");
        // every state pairs to −2 + 1 = −1
        assert!((w.pairing_value + 1.0).abs() < 1e-12);
        let identity_state = ComplexMatrix::identity(4).scale(0.25);
        let check = MaxConeWitness {
            w: identity_state,
            pairing_value: -1.0,
            epsilon: 1.0,
        }
        .check(&u)
        .unwrap();
        assert!((check.0 + 1.0).abs() < 1e-12);
        assert!(w.verifies(&u, 1e-8).unwrap());
    }

    #[test]
    fn max_entangled_member() {
        let m2 = builtin("Mn:2").unwrap();
        let u = max_entangled(&m2).unwrap();
        let opts = MaxConeOptions {
            eps: 1e-3,
            ..Default::default()
        };
        let v = max_cone_membership(&u, &opts).unwrap();
        let cert = v.certificate().expect("member");
        let check = cert.check(&u).unwrap();
        assert!(check.passed(1e-8), "{check:?}");
    }

    #[test]
    fn level_two_diagonal_member() {
        let c2 = builtin("Cn:2").unwrap();
        let mut u = TensorElement::unit(c2.clone(), c2.clone(), 2);
        // second diagonal entry 1⊗1 + z⊗z, positive on the diagonal algebra
        u.set(1, 1, 1, 1, ONE);
        let v = max_cone_membership_level(&u, &MaxConeOptions::default()).unwrap();
        let cert = v.certificate().expect("member");
        assert!(cert.check(&u).unwrap().passed(1e-8));
    }

    #[test]
    fn level_witness_maps_back() {
        let m2 = builtin("Mn:2").unwrap();
        let mut u = TensorElement::zeros(m2.clone(), m2.clone(), 2);
        u.set(0, 1, 0, 0, ONE);
        u.set(1, 0, 0, 0, ONE);
        let v = max_cone_membership_level(&u, &MaxConeOptions::default()).unwrap();
        let w = v.witness().expect("non-member");
        assert!(w.verifies(&u, 1e-8).unwrap());
        assert!((w.pairing_value - (-1.0 + 1e-6)).abs() < 1e-9);
    }

    #[test]
    fn boundary_is_unknown() {
        let c2 = builtin("Cn:2").unwrap();
        // realization diag(1, 0, 0, 1) − ε·I after the shift: smallest eigenvalue 0
        let mut u = TensorElement::unit(c2.clone(), c2, 1).scale(0.5);
        u.set(0, 0, 1, 1, ONE.scale(0.5));
        let u = u.plus_unit(-1e-6);
        let v = max_cone_membership(&u, &MaxConeOptions::default()).unwrap();
        assert!(v.is_unknown(), "{}", v.label());
    }
}
