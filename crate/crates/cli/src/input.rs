//! Loading inputs given as file paths, inline JSON or built-in names.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use oscone::linalg::ComplexMatrix;
use oscone::opsys::{builtin, make_system, SystemFile, SystemRef};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Where an input came from and the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub source: String,
    pub sha256: String,
}

pub struct Input {
    pub text: String,
    pub digest: InputDigest,
}

impl Input {
    /// Inline JSON when `arg` starts with `{` or `[`, otherwise a file.
    pub fn load(arg: &str) -> Result<Self> {
        let trimmed = arg.trim_start();
        let (source, text) = if trimmed.starts_with('{') || trimmed.starts_with('[') {
            ("<inline>".to_string(), arg.to_string())
        } else {
            let text = std::fs::read_to_string(Path::new(arg))
                .with_context(|| format!("cannot read `{arg}`"))?;
            (arg.to_string(), text)
        };
        Ok(Self::from_text(source, text))
    }

    pub fn from_text(source: String, text: String) -> Self {
        let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
        Self {
            text,
            digest: InputDigest { source, sha256 },
        }
    }

    /// Parses the text, reporting line and column on failure.
    pub fn parse<T: DeserializeOwned>(&self, what: &str) -> Result<T> {
        serde_json::from_str(&self.text).map_err(|e| {
            anyhow!(
                "{}:{}:{}: invalid {what}: {e}",
                self.digest.source,
                e.line(),
                e.column()
            )
        })
    }
}

/// Generators for a new system.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefineSpec {
    pub name: String,
    pub ambient_dim: usize,
    pub generators: Vec<ComplexMatrix>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SystemInput {
    File(SystemFile),
    Define(DefineSpec),
}

/// A system from a built-in name, a system file or a generator spec.
pub fn load_system(arg: &str) -> Result<(SystemRef, InputDigest)> {
    if let Ok(sys) = builtin(arg) {
        let input = Input::from_text(format!("builtin:{arg}"), arg.to_string());
        return Ok((sys, input.digest));
    }
    let input = Input::load(arg)?;
    let sys = match input.parse::<SystemInput>("system (expected a system file or a generator spec)")? {
        SystemInput::File(f) => f.build()?,
        SystemInput::Define(d) => make_system(d.ambient_dim, &d.generators, &d.name)?,
    };
    Ok((sys, input.digest))
}
