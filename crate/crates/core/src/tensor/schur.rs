//! Schur tensor products and the two certificate shapes for the maximal
//! cone: `A(P ⊗ Q)A*` (D-form) and `A(P ∘ Q)A*` (S-form).

use serde::{Deserialize, Serialize};

use super::membership::{CertificateCheck, MaxConeCertificate};
use super::TensorElement;
use crate::error::{Error, Result};
use crate::linalg::{all_ones, matrix_units_row, ComplexMatrix, ZERO};
use crate::opsys::{level_positive, SystemMatrix};

/// `X ∘ Y = [x_ij ⊗ y_ij]`.
pub fn schur_product(x: &SystemMatrix, y: &SystemMatrix) -> Result<TensorElement> {
    let n = x.size();
    if y.size() != n {
        return Err(Error::SizeMismatch(format!(
            "Schur product of sizes {n} and {}",
            y.size()
        )));
    }
    let (ms, mt) = (x.system().dim(), y.system().dim());
    let mut u = TensorElement::zeros(x.system().clone(), y.system().clone(), n);
    for i in 0..n {
        for j in 0..n {
            for a in 0..ms {
                let xa = x.get(i, j, a);
                if xa == ZERO {
                    continue;
                }
                for b in 0..mt {
                    u.set(i, j, a, b, xa * y.get(i, j, b));
                }
            }
        }
    }
    Ok(u)
}

/// `X ⊗ Y ∈ M_{nm}(S ⊗ T)`, entry `((i,k),(j,l)) = x_ij ⊗ y_kl`.
pub fn kron_tensor(x: &SystemMatrix, y: &SystemMatrix) -> TensorElement {
    let (n, m) = (x.size(), y.size());
    let (ms, mt) = (x.system().dim(), y.system().dim());
    let mut u = TensorElement::zeros(x.system().clone(), y.system().clone(), n * m);
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    for a in 0..ms {
                        let xa = x.get(i, j, a);
                        if xa == ZERO {
                            continue;
                        }
                        for b in 0..mt {
                            u.set(i * m + k, j * m + l, a, b, xa * y.get(k, l, b));
                        }
                    }
                }
            }
        }
    }
    u
}

/// `ℰ (X ⊗ Y) ℰ*` with `ℰ = [E_11 … E_nn]`; equals `X ∘ Y`.
pub fn compress_kron(x: &SystemMatrix, y: &SystemMatrix) -> Result<TensorElement> {
    let n = x.size();
    if y.size() != n {
        return Err(Error::SizeMismatch(format!(
            "compress_kron of sizes {n} and {}",
            y.size()
        )));
    }
    kron_tensor(x, y).compress(&matrix_units_row(n))
}

/// `A (X ∘ Y) B` with `X`, `Y` of size `k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchurDecomposition {
    pub a: ComplexMatrix,
    pub x: SystemMatrix,
    pub y: SystemMatrix,
    pub b: ComplexMatrix,
}

impl SchurDecomposition {
    pub fn assemble(&self) -> Result<TensorElement> {
        schur_product(&self.x, &self.y)?.sandwich(&self.a, &self.b)
    }
}

/// Splits every entry's coefficient matrix by SVD into elementary layers
/// `x^l_ij ⊗ y^l_ij`, stacks the layers as `X = ⊕ X^l`, `Y = ⊕ Y^l` and
/// returns `A = [I_n … I_n]`, `B = A*`.
pub fn decompose_as_schur(p: &TensorElement) -> Result<SchurDecomposition> {
    let n = p.level();
    let (s, t) = (p.left().clone(), p.right().clone());
    let mut layers_per_entry = Vec::with_capacity(n * n);
    let scale = p.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    for i in 0..n {
        for j in 0..n {
            let c = p.coefficient_matrix(i, j).into_inner();
            let svd = c.svd(true, true);
            let u = svd.u.expect("requested");
            let vt = svd.v_t.expect("requested");
            let mut layers = Vec::new();
            for (r, sigma) in svd.singular_values.iter().enumerate() {
                if *sigma > 1e-15 * scale {
                    let x: Vec<_> = (0..s.dim()).map(|a| u[(a, r)] * *sigma).collect();
                    let y: Vec<_> = (0..t.dim()).map(|b| vt[(r, b)]).collect();
                    layers.push((x, y));
                }
            }
            layers_per_entry.push(layers);
        }
    }
    let depth = layers_per_entry.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let k = n * depth;
    let mut x = SystemMatrix::zeros(s.clone(), k);
    let mut y = SystemMatrix::zeros(t.clone(), k);
    for i in 0..n {
        for j in 0..n {
            for (l, (xv, yv)) in layers_per_entry[i * n + j].iter().enumerate() {
                let (ri, rj) = (l * n + i, l * n + j);
                for (a, v) in xv.iter().enumerate() {
                    x.set(ri, rj, a, *v);
                }
                for (b, v) in yv.iter().enumerate() {
                    y.set(ri, rj, b, *v);
                }
            }
        }
    }
    let a = ComplexMatrix::from_fn(n, k, |r, c| if c % n == r { crate::linalg::ONE } else { ZERO });
    let b = a.adjoint();
    Ok(SchurDecomposition { a, x, y, b })
}

/// Factors `(X ⊗ J_m, J_n ⊗ Y)` whose Schur product is `X ⊗ Y`. Both are
/// positive whenever `X` and `Y` are.
pub fn kron_as_schur(x: &SystemMatrix, y: &SystemMatrix) -> (SystemMatrix, SystemMatrix) {
    (
        x.kron_scalar(&all_ones(y.size())),
        y.scalar_kron(&all_ones(x.size())),
    )
}

/// Certificate `u + ε(I_n ⊗ 1 ⊗ 1) = A (P ∘ Q) A*` with `P ⪰ 0`, `Q ⪰ 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchurCertificate {
    pub a: ComplexMatrix,
    pub p: SystemMatrix,
    pub q: SystemMatrix,
    pub epsilon: f64,
}

impl SchurCertificate {
    pub fn assemble(&self) -> Result<TensorElement> {
        schur_product(&self.p, &self.q)?.compress(&self.a)
    }

    /// Residual against `u + ε·unit` and the smallest eigenvalues of the
    /// realizations of `P` and `Q`.
    pub fn check(&self, u: &TensorElement) -> Result<CertificateCheck> {
        let w = self.assemble()?;
        let residual = w.max_distance(&u.plus_unit(self.epsilon));
        Ok(CertificateCheck {
            residual,
            p_min_eigenvalue: self.p.realize().min_eigenvalue(),
            q_min_eigenvalue: self.q.realize().min_eigenvalue(),
        })
    }

    /// Certificate for the sum: `[A_1 A_2]`, `P_1 ⊕ P_2`, `Q_1 ⊕ Q_2`.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.a.rows() != other.a.rows() {
            return Err(Error::SizeMismatch("certificates of different levels".into()));
        }
        let n = self.a.rows();
        let (k1, k2) = (self.a.cols(), other.a.cols());
        let mut a = ComplexMatrix::zeros(n, k1 + k2);
        a.set_block(0, 0, &self.a);
        a.set_block(0, k1, &other.a);
        Ok(Self {
            a,
            p: self.p.direct_sum(&other.p)?,
            q: self.q.direct_sum(&other.q)?,
            epsilon: self.epsilon + other.epsilon,
        })
    }

    /// Certificate for `t·u`, `t ≥ 0`.
    pub fn scale(&self, t: f64) -> Result<Self> {
        if t < 0.0 {
            return Err(Error::NotPositive(format!("scaling by {t}")));
        }
        Ok(Self {
            a: self.a.scale(t.sqrt()),
            epsilon: self.epsilon * t,
            ..self.clone()
        })
    }

    /// Certificate for `B u B*`; the unit part becomes `ε·BB*`, so this is
    /// exact only for `ε = 0` or isometric `B*`.
    pub fn compress(&self, b: &ComplexMatrix) -> Result<Self> {
        if b.cols() != self.a.rows() {
            return Err(Error::SizeMismatch("compression size".into()));
        }
        Ok(Self {
            a: b * &self.a,
            ..self.clone()
        })
    }

    /// The same element in D-form: `P ∘ Q = ℰ(P ⊗ Q)ℰ*`, so `A' = Aℰ`.
    pub fn to_dform(&self) -> DFormElement {
        DFormElement {
            a: &self.a * &matrix_units_row(self.p.size()),
            p: self.p.clone(),
            q: self.q.clone(),
        }
    }

    pub fn to_max_cone(&self, u: &TensorElement) -> Result<MaxConeCertificate> {
        if self.a.rows() != 1 {
            return Err(Error::SizeMismatch("level-one certificate expected".into()));
        }
        // A(P∘Q)A* = Σ a_i conj(a_j) p_ij ⊗ q_ij = (diag(a) P diag(a)*) ∘ Q
        let diag = ComplexMatrix::from_fn(self.a.cols(), self.a.cols(), |i, j| {
            if i == j {
                self.a[(0, i)]
            } else {
                ZERO
            }
        });
        let p = self.p.compress(&diag)?;
        MaxConeCertificate::build(u, p, self.q.clone(), self.epsilon)
    }
}

/// `A (P ⊗ Q) A*` with `P ∈ M_k(S)^+`, `Q ∈ M_m(T)^+`, `A` of size `n × km`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DFormElement {
    pub a: ComplexMatrix,
    pub p: SystemMatrix,
    pub q: SystemMatrix,
}

impl DFormElement {
    pub fn assemble(&self) -> Result<TensorElement> {
        kron_tensor(&self.p, &self.q).compress(&self.a)
    }

    pub fn check(&self, u: &TensorElement) -> Result<CertificateCheck> {
        let w = self.assemble()?;
        Ok(CertificateCheck {
            residual: w.max_distance(u),
            p_min_eigenvalue: self.p.realize().min_eigenvalue(),
            q_min_eigenvalue: self.q.realize().min_eigenvalue(),
        })
    }

    /// S-form of the same element: `P ⊗ Q = (P ⊗ J_m) ∘ (J_k ⊗ Q)`.
    pub fn to_schur(&self) -> SchurCertificate {
        let (p, q) = kron_as_schur(&self.p, &self.q);
        SchurCertificate {
            a: self.a.clone(),
            p,
            q,
            epsilon: 0.0,
        }
    }
}

/// Normal form `A(P ⊗ Q)A* = Σ p'_ij ⊗ q'_ij` with `P' = diag(A)(P ⊗ J_m)diag(A)*`
/// and `Q' = J_k ⊗ Q`, for a row `A` of length `km`.
pub fn normal_form_level1(
    a: &ComplexMatrix,
    p: &SystemMatrix,
    q: &SystemMatrix,
    tol: f64,
) -> Result<MaxConeCertificate> {
    if a.rows() != 1 || a.cols() != p.size() * q.size() {
        return Err(Error::SizeMismatch(format!(
            "A must be 1x{}, got {}x{}",
            p.size() * q.size(),
            a.rows(),
            a.cols()
        )));
    }
    for (name, x) in [("P", p), ("Q", q)] {
        if !level_positive(x, tol)?.is_member() {
            return Err(Error::NotPositive(format!("{name} is not positive")));
        }
    }
    let d = DFormElement {
        a: a.clone(),
        p: p.clone(),
        q: q.clone(),
    };
    let u = d.assemble()?;
    d.to_schur().to_max_cone(&u)
}
