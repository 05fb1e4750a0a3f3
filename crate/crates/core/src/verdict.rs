//! The three-way result of every cone-membership query.

use serde::{Deserialize, Serialize};

/// What was tried when no verdict could be certified.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_witness_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl Diagnostics {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "data")]
pub enum ConeVerdict<C, W> {
    Member(C),
    NonMember(W),
    Unknown(Diagnostics),
}

impl<C, W> ConeVerdict<C, W> {
    pub fn is_member(&self) -> bool {
        matches!(self, Self::Member(_))
    }

    pub fn is_non_member(&self) -> bool {
        matches!(self, Self::NonMember(_))
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Self::Unknown(_))
    }

    pub fn certificate(&self) -> Option<&C> {
        match self {
            Self::Member(c) => Some(c),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<&W> {
        match self {
            Self::NonMember(w) => Some(w),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Member(_) => "Member",
            Self::NonMember(_) => "NonMember",
            Self::Unknown(_) => "Unknown",
        }
    }
}
