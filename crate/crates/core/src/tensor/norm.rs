//! The operator-space norm carried by the maximal tensor product.

use serde::{Deserialize, Serialize};

use super::membership::{
    max_cone_membership_level, CertificateCheck, MaxConeCertificate, MaxConeOptions, MaxConeWitness,
};
use super::schur::{SchurCertificate, SchurDecomposition};
use super::TensorElement;
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, ComplexMatrix};
use crate::opsys::SystemMatrix;
use crate::verdict::{ConeVerdict, Diagnostics};

/// `lo ≤ ‖U‖_max ≤ hi`.
///
/// `hi` is infinite (`null` on disk) when no upper bound was certified.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormBracket {
    pub lo: f64,
    #[serde(with = "infinite_as_null")]
    pub hi: f64,
    /// Shift used for every membership test.
    pub epsilon: f64,
    /// Certificate for `norm_block(u, hi − ε)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_certificate: Option<MaxConeCertificate>,
    /// Witness against `norm_block(u, lo − ε)`; absent when `lo` is the concrete norm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_witness: Option<MaxConeWitness>,
    /// Set when an `Unknown` verdict cut the search short.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl NormBracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// `[[r·I_n, U], [U*, r·I_n]]` at level `2n`.
pub fn norm_block(u: &TensorElement, r: f64) -> Result<TensorElement> {
    let n = u.level();
    let (ms, mt) = (u.left().dim(), u.right().dim());
    let adj = u.adjoint();
    let mut out = TensorElement::zeros(u.left().clone(), u.right().clone(), 2 * n);
    for i in 0..n {
        for j in 0..n {
            for a in 0..ms {
                for b in 0..mt {
                    out.set(i, n + j, a, b, u.get(i, j, a, b));
                    out.set(n + i, j, a, b, adj.get(i, j, a, b));
                }
            }
        }
    }
    Ok(out.plus_unit(r))
}

/// Brackets the norm by bisection on `r` in `[[rI, U], [U*, rI]] ∈ D_{2n}^max`.
///
/// The concrete operator norm is a lower bound. A candidate `c` is tested as
/// `r = c − ε` so that the shifted block has `c` on the diagonal. Members
/// lower `hi`, witnesses raise `lo`; an `Unknown` stops the bisection.
pub fn osy_max_norm(u: &TensorElement, tol: f64, opts: &MaxConeOptions) -> Result<NormBracket> {
    if tol <= 0.0 {
        return Err(Error::Malformed("bracket tolerance must be positive".into()));
    }
    let eps = opts.eps.min(tol / 4.0);
    let sub = MaxConeOptions { eps, ..opts.clone() };
    let test = |c: f64| max_cone_membership_level(&norm_block(u, c - eps)?, &sub);

    let mut lo = operator_norm(&u.realize());
    let mut lower_witness = None;
    let mut upper = None;
    let mut diagnostics = None;
    let mut step = tol / 2.0;
    for _ in 0..60 {
        let c = lo + step;
        match test(c)? {
            ConeVerdict::Member(cert) => {
                upper = Some((c, cert));
                break;
            }
            ConeVerdict::NonMember(w) => {
                lo = c;
                lower_witness = Some(w);
            }
            ConeVerdict::Unknown(d) => {
                diagnostics.get_or_insert(d);
            }
        }
        step *= 2.0;
    }
    let Some((mut hi, mut upper_certificate)) = upper else {
        let mut d = diagnostics.unwrap_or_else(|| Diagnostics::new(""));
        d.message = format!("no certified upper bound found: {}", d.message);
        return Ok(NormBracket {
            lo,
            hi: f64::INFINITY,
            epsilon: eps,
            upper_certificate: None,
            lower_witness,
            diagnostics: Some(d),
        });
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match test(mid)? {
            ConeVerdict::Member(cert) => {
                hi = mid;
                upper_certificate = cert;
            }
            ConeVerdict::NonMember(w) => {
                lo = mid;
                lower_witness = Some(w);
            }
            ConeVerdict::Unknown(mut d) => {
                d.message = format!("bisection stopped at {mid}: {}", d.message);
                diagnostics = Some(d);
                break;
            }
        }
    }
    Ok(NormBracket {
        lo,
        hi,
        epsilon: eps,
        upper_certificate: Some(upper_certificate),
        lower_witness,
        diagnostics,
    })
}

/// Outcome of [`schur_contraction_check`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `A (X ∘ Y) B`.
    pub u: TensorElement,
    /// Certificate for `[[I, U], [U*, I]]` at level `2n` with `ε = 0`.
    pub certificate: SchurCertificate,
    pub check: CertificateCheck,
    /// Upper bound on the norm of `U` implied by the certificate.
    pub norm_upper_bound: f64,
    pub passed: bool,
}

fn unit_block(x: &SystemMatrix) -> Result<SystemMatrix> {
    let k = x.size();
    let sys = x.system().clone();
    let mut out = SystemMatrix::zeros(sys.clone(), 2 * k);
    let adj = x.adjoint();
    for i in 0..k {
        for a in 0..sys.dim() {
            for j in 0..k {
                out.set(i, k + j, a, x.get(i, j, a));
                out.set(k + i, j, a, adj.get(i, j, a));
            }
        }
    }
    out.add(&SystemMatrix::unit(sys, 2 * k))
}

/// Certifies `‖A (X ∘ Y) B‖ ≤ 1` for contractions `X`, `Y`, `A`, `B`.
///
/// `[[I, X], [X*, I]] ∘ [[I, Y], [Y*, I]]` compressed by `A ⊕ B*` gives
/// `[[AA*, U], [U*, B*B]]`; adding `(I − AA*) ⊕ (I − B*B)` as a scalar
/// term yields `[[I, U], [U*, I]]` with no solver call.
pub fn schur_contraction_check(dec: &SchurDecomposition, tol: f64) -> Result<ContractionReport> {
    let limit = 1.0 + 1e-12;
    let norms = [
        ("X", operator_norm(&dec.x.realize())),
        ("Y", operator_norm(&dec.y.realize())),
        ("A", operator_norm(&dec.a)),
        ("B", operator_norm(&dec.b)),
    ];
    for (name, v) in norms {
        if v > limit {
            return Err(Error::PreconditionViolated(format!("‖{name}‖ = {v} exceeds 1")));
        }
    }
    let u = dec.assemble()?;
    let n = u.level();
    let k = dec.x.size();

    let mut c = ComplexMatrix::zeros(2 * n, 2 * k);
    c.set_block(0, 0, &dec.a);
    c.set_block(n, k, &dec.b.adjoint());
    let main = SchurCertificate {
        a: c,
        p: unit_block(&dec.x)?,
        q: unit_block(&dec.y)?,
        epsilon: 0.0,
    };
    let id = ComplexMatrix::identity(n);
    let pad = (&id - &(&dec.a * &dec.a.adjoint())).direct_sum(&(&id - &(&dec.b.adjoint() * &dec.b)));
    let pad = SchurCertificate {
        a: pad.hermitian_part().psd_sqrt(),
        p: SystemMatrix::unit(dec.x.system().clone(), 2 * n),
        q: SystemMatrix::unit(dec.y.system().clone(), 2 * n),
        epsilon: 0.0,
    };
    let certificate = main.sum(&pad)?;
    let block = norm_block(&u, 1.0)?;
    let check = certificate.check(&block)?;
    let passed = check.passed(tol);
    Ok(ContractionReport {
        u,
        certificate,
        check,
        norm_upper_bound: 1.0 + check.residual,
        passed,
    })
}
