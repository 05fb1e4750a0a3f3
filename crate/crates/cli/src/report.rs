//! Report documents and the commands that produce them.

use anyhow::Result;
use oscone::factorization::{nuclearity_test, pair_from_certificate, NuclearityCertificate};
use oscone::linalg::ComplexMatrix;
use oscone::opsys::{SystemFile, SystemMatrix, SystemSpec};
use oscone::tensor::{
    max_cone_membership, max_cone_membership_level, min_cone_membership, osy_max_norm, schur_product, MaxConeCertificate,
    MaxConeOptions, MaxConeVerdict, MaxConeWitness, MinConeReport, MinConeWitness, NormBracket,
    TensorElement,
};
use oscone::ConeVerdict;
use serde::{Deserialize, Serialize};

use crate::input::InputDigest;

/// Exit status for a definitive answer.
pub const EXIT_OK: i32 = 0;
/// Exit status for an error or a failed verification.
pub const EXIT_ERROR: i32 = 1;
/// Exit status when the answer is `Unknown`.
pub const EXIT_UNKNOWN: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub eps: f64,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    pub seed: u64,
    /// Target bracket width for `norm`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl Parameters {
    pub fn cone_options(&self) -> MaxConeOptions {
        MaxConeOptions {
            eps: self.eps,
            k_max: self.k_max,
            tol: self.tol,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub parameters: Parameters,
    /// `Member`, `NonMember`, `Unknown`, `Computed`, `Verified` or `Rejected`.
    pub outcome: String,
    pub result: Body,
    pub wall_time_seconds: f64,
}

impl Report {
    pub fn new(command: &str, inputs: Vec<InputDigest>, parameters: Parameters, result: Body) -> Self {
        Self {
            toolkit: "oscone".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs,
            parameters,
            outcome: result.outcome().into(),
            result,
            wall_time_seconds: 0.0,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.outcome.as_str() {
            "Unknown" => EXIT_UNKNOWN,
            "Rejected" => EXIT_ERROR,
            _ => EXIT_OK,
        }
    }
}

/// `ψ∘φ ≈ û` obtained from a max-cone certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Factorization {
    pub k: usize,
    pub epsilon: f64,
    pub composition_error_on_dual_basis: Vec<f64>,
    /// `ε·|f(1)| + (Σ‖t_b‖)·residual` per dual basis functional.
    pub error_bounds: Vec<f64>,
    pub certificate: MaxConeCertificate,
}

/// One line of a verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    /// `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }

    /// `value ≥ limit`.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value >= limit,
        }
    }

    /// `value < limit`.
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value < limit,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    System {
        system: SystemFile,
    },
    Realization {
        element: TensorElement,
        realization: ComplexMatrix,
    },
    Schur {
        x: SystemMatrix,
        y: SystemMatrix,
        product: TensorElement,
    },
    MinMembership {
        element: TensorElement,
        verdict: ConeVerdict<MinConeReport, MinConeWitness>,
    },
    MaxMembership {
        element: TensorElement,
        verdict: MaxConeVerdict,
    },
    Norm {
        element: TensorElement,
        bracket: NormBracket,
    },
    Factorization {
        element: TensorElement,
        verdict: ConeVerdict<Factorization, MaxConeWitness>,
    },
    Nuclearity {
        system: SystemSpec,
        /// Largest accepted `‖ψ(φ(t_a)) − t_a‖`.
        allowed_error: f64,
        verdict: ConeVerdict<NuclearityCertificate, MaxConeWitness>,
    },
    Verification {
        /// Digest of the report that was checked.
        report: InputDigest,
        checks: Vec<Check>,
        passed: bool,
    },
}

impl Body {
    pub fn outcome(&self) -> &'static str {
        match self {
            Self::MinMembership { verdict, .. } => verdict.label(),
            Self::MaxMembership { verdict, .. } => verdict.label(),
            Self::Factorization { verdict, .. } => verdict.label(),
            Self::Nuclearity { verdict, .. } => verdict.label(),
            Self::Norm { bracket, .. } => {
                if bracket.diagnostics.is_some() || !bracket.hi.is_finite() {
                    "Unknown"
                } else {
                    "Computed"
                }
            }
            Self::Verification { passed: true, .. } => "Verified",
            Self::Verification { passed: false, .. } => "Rejected",
            _ => "Computed",
        }
    }
}

pub fn realization(element: TensorElement) -> Body {
    let realization = element.realize();
    Body::Realization { element, realization }
}

pub fn schur(x: SystemMatrix, y: SystemMatrix) -> Result<Body> {
    let product = schur_product(&x, &y)?;
    Ok(Body::Schur { x, y, product })
}

pub fn min_membership(element: TensorElement, params: &Parameters) -> Result<Body> {
    let verdict = min_cone_membership(&element, params.tol)?;
    Ok(Body::MinMembership { element, verdict })
}

pub fn max_membership(element: TensorElement, params: &Parameters) -> Result<Body> {
    let verdict = max_cone_membership_level(&element, &params.cone_options())?;
    Ok(Body::MaxMembership { element, verdict })
}

pub fn norm(element: TensorElement, params: &Parameters) -> Result<Body> {
    let width = params.width.unwrap_or(DEFAULT_WIDTH);
    let bracket = osy_max_norm(&element, width, &params.cone_options())?;
    Ok(Body::Norm { element, bracket })
}

pub const DEFAULT_WIDTH: f64 = 1e-3;

pub fn factorize(element: TensorElement, params: &Parameters) -> Result<Body> {
    let verdict = match max_cone_membership(&element, &params.cone_options())? {
        ConeVerdict::Member(certificate) => {
            let pair = pair_from_certificate(&certificate);
            ConeVerdict::Member(Factorization {
                k: certificate.k,
                epsilon: certificate.epsilon,
                composition_error_on_dual_basis: pair.composition_errors(&element)?,
                error_bounds: pair.error_bounds(),
                certificate,
            })
        }
        ConeVerdict::NonMember(w) => ConeVerdict::NonMember(w),
        ConeVerdict::Unknown(d) => ConeVerdict::Unknown(d),
    };
    Ok(Body::Factorization { element, verdict })
}

/// Error allowance matching the acceptance rule inside `nuclearity_test`.
pub fn nuclearity_allowance(params: &Parameters, m: usize) -> f64 {
    params.eps + params.tol * (m as f64) * 10.0
}

pub fn nuclearity(system: oscone::opsys::SystemRef, params: &Parameters) -> Result<Body> {
    let verdict = nuclearity_test(&system, &params.cone_options())?;
    Ok(Body::Nuclearity {
        system: SystemSpec::of(&system),
        allowed_error: nuclearity_allowance(params, system.dim()),
        verdict,
    })
}
