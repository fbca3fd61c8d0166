//! Self-describing JSON policy files.
//!
//! Floats are written in shortest round-trip form, so a policy read back is
//! bitwise identical to the one written.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsa::FsaPolicy;
use crate::sim::Domain;
use crate::skfsa::SkFsaPolicy;

pub const POLICY_FORMAT: &str = "fsa-search-policy";
pub const POLICY_VERSION: u32 = 1;

/// A joint controller of either representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JointPolicy {
    Fsa { robots: Vec<FsaPolicy> },
    SkFsa { lambda: f64, robots: Vec<SkFsaPolicy> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PolicyFile {
    format: String,
    version: u32,
    policy: JointPolicy,
}

impl JointPolicy {
    pub fn n_robots(&self) -> usize {
        match self {
            JointPolicy::Fsa { robots } => robots.len(),
            JointPolicy::SkFsa { robots, .. } => robots.len(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PolicyFile {
            format: POLICY_FORMAT.into(),
            version: POLICY_VERSION,
            policy: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile =
            serde_json::from_str(text).map_err(|e| Error::IncompatiblePolicy(format!("malformed policy file: {e}")))?;
        if file.format != POLICY_FORMAT {
            return Err(Error::IncompatiblePolicy(format!(
                "unknown format tag `{}`",
                file.format
            )));
        }
        if file.version != POLICY_VERSION {
            return Err(Error::IncompatiblePolicy(format!(
                "unsupported policy version {} (expected {POLICY_VERSION})",
                file.version
            )));
        }
        match &file.policy {
            JointPolicy::Fsa { robots } => robots.iter().try_for_each(FsaPolicy::validate)?,
            JointPolicy::SkFsa { robots, .. } => robots.iter().try_for_each(SkFsaPolicy::validate)?,
        }
        Ok(file.policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        JointPolicy::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks robot count, macro-action sets and observation dimension.
    pub fn check_compatible<D: Domain + ?Sized>(&self, domain: &D) -> Result<()> {
        let n = domain.num_robots();
        if self.n_robots() != n {
            return Err(Error::IncompatiblePolicy(format!(
                "policy has {} robots, domain has {n}",
                self.n_robots()
            )));
        }
        let mismatch = |r: usize, got: usize| {
            Error::IncompatiblePolicy(format!(
                "robot {r} has {got} macro-actions, domain offers {}",
                domain.num_macro_actions(r)
            ))
        };
        match self {
            JointPolicy::Fsa { robots } => {
                for (r, p) in robots.iter().enumerate() {
                    if p.n_mas() != domain.num_macro_actions(r) {
                        return Err(mismatch(r, p.n_mas()));
                    }
                    if p.grid().dim() != domain.obs_dim() {
                        return Err(Error::IncompatiblePolicy(format!(
                            "policy observations have dimension {}, domain emits {}",
                            p.grid().dim(),
                            domain.obs_dim()
                        )));
                    }
                }
            }
            JointPolicy::SkFsa { robots, .. } => {
                for (r, p) in robots.iter().enumerate() {
                    if p.n_mas() != domain.num_macro_actions(r) {
                        return Err(mismatch(r, p.n_mas()));
                    }
                    if let Some(dim) = p.obs_dim() {
                        if dim != domain.obs_dim() {
                            return Err(Error::IncompatiblePolicy(format!(
                                "kernel basis has dimension {dim}, domain emits {}",
                                domain.obs_dim()
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
