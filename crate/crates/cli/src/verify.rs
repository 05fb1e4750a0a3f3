//! Re-checks a report with linear algebra alone.
//!
//! Certificates are re-assembled and compared with the stored element,
//! factor eigenvalues recomputed, and witnesses paired against the
//! realization. No conic problem is solved.

use anyhow::Result;
use oscone::factorization::pair_from_certificate;
use oscone::linalg::operator_norm;
use oscone::tensor::{norm_block, schur_product, MaxConeCertificate, MaxConeWitness, TensorElement};
use oscone::ConeVerdict;

use crate::report::{Body, Check};

fn certificate_checks(cert: &MaxConeCertificate, u: &TensorElement, tol: f64, out: &mut Vec<Check>) -> Result<()> {
    let c = cert.check(u)?;
    out.push(Check::at_most("certificate residual", c.residual, tol));
    out.push(Check::at_least("P min eigenvalue", c.p_min_eigenvalue, -tol));
    out.push(Check::at_least("Q min eigenvalue", c.q_min_eigenvalue, -tol));
    Ok(())
}

fn witness_checks(w: &MaxConeWitness, u: &TensorElement, tol: f64, out: &mut Vec<Check>) -> Result<()> {
    let (pairing, eig, trace_gap) = w.check(u)?;
    out.push(Check::below("witness pairing", pairing, -tol));
    out.push(Check::at_least("witness min eigenvalue", eig, -tol));
    out.push(Check::at_most("witness |tr W - 1|", trace_gap, tol.max(1e-12)));
    out.push(Check::at_most(
        "recorded pairing drift",
        (pairing - w.pairing_value).abs(),
        tol.max(1e-12),
    ));
    Ok(())
}

/// Checks for `body` at tolerance `tol`. An `Unknown` verdict carries
/// nothing to check and yields no lines.
pub fn checks(body: &Body, tol: f64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    match body {
        Body::System { system } => {
            let built = system.build()?;
            out.push(Check::at_least("basis size", built.dim() as f64, 1.0));
        }
        Body::Realization { element, realization } => {
            let diff = (&element.realize() - realization).max_abs();
            out.push(Check::at_most("realization difference", diff, tol));
        }
        Body::Schur { x, y, product } => {
            let diff = schur_product(x, y)?.max_distance(product);
            out.push(Check::at_most("product difference", diff, tol));
        }
        Body::MinMembership { element, verdict } => match verdict {
            ConeVerdict::Member(_) => {
                let eig = element.realize().min_eigenvalue();
                out.push(Check::at_least("realization min eigenvalue", eig, -tol));
            }
            ConeVerdict::NonMember(w) => {
                let v = &w.vector;
                let norm_gap = (v.frobenius_norm() - 1.0).abs();
                let value = (&(&v.adjoint() * &element.realize()) * v)[(0, 0)].re;
                out.push(Check::at_most("witness vector |norm - 1|", norm_gap, tol.max(1e-12)));
                out.push(Check::below("v* R v", value, -tol));
            }
            ConeVerdict::Unknown(_) => {}
        },
        Body::MaxMembership { element, verdict } => match verdict {
            ConeVerdict::Member(c) => certificate_checks(c, element, tol, &mut out)?,
            ConeVerdict::NonMember(w) => witness_checks(w, element, tol, &mut out)?,
            ConeVerdict::Unknown(_) => {}
        },
        Body::Norm { element, bracket } => {
            out.push(Check::at_least("hi - lo", bracket.hi - bracket.lo, 0.0));
            let eps = bracket.epsilon;
            if let Some(c) = &bracket.upper_certificate {
                certificate_checks(c, &norm_block(element, bracket.hi - eps)?, tol, &mut out)?;
            }
            match &bracket.lower_witness {
                Some(w) => witness_checks(w, &norm_block(element, bracket.lo - eps)?, tol, &mut out)?,
                None => {
                    let concrete = operator_norm(&element.realize());
                    out.push(Check::at_most("lo - concrete norm", bracket.lo - concrete, tol));
                }
            }
        }
        Body::Factorization { element, verdict } => match verdict {
            ConeVerdict::Member(f) => {
                certificate_checks(&f.certificate, element, tol, &mut out)?;
                let pair = pair_from_certificate(&f.certificate);
                let errors = pair.composition_errors(element)?;
                let bounds = pair.error_bounds();
                out.push(Check::at_most(
                    "recorded composition errors drift",
                    errors
                        .iter()
                        .zip(&f.composition_error_on_dual_basis)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max),
                    tol.max(1e-12),
                ));
                let recorded = errors.len() == f.composition_error_on_dual_basis.len();
                out.push(Check::at_least("recorded error count matches", recorded as u8 as f64, 1.0));
                for (a, (e, b)) in errors.iter().zip(&bounds).enumerate() {
                    out.push(Check::at_most(format!("composition error {a}"), *e, b + tol));
                }
            }
            ConeVerdict::NonMember(w) => witness_checks(w, element, tol, &mut out)?,
            ConeVerdict::Unknown(_) => {}
        },
        Body::Nuclearity {
            allowed_error,
            verdict,
            ..
        } => {
            if let ConeVerdict::Member(c) = verdict {
                let r = c.check()?;
                out.push(Check::at_least("Choi min eigenvalue", r.choi_min_eigenvalue, -tol));
                out.push(Check::at_least("Q min eigenvalue", r.q_min_eigenvalue, -tol));
                for (a, e) in r.composition_errors.iter().enumerate() {
                    out.push(Check::at_most(format!("composition error {a}"), *e, *allowed_error));
                }
            }
        }
        Body::Verification { .. } => {}
    }
    Ok(out)
}
