//! Declarative run configuration (TOML) and its merge with command-line
//! flags. On conflict the config file wins and a warning is emitted.

use pairbounds::data::DataSchema;
use pairbounds::inference::{InferenceConfig, InferenceMethod, KappaRule};
use pairbounds::program::{Allocation, Estimand, Member, PolicyArm};
use pairbounds::restrictions::Restriction;
use pairbounds::simulate::Dgp;
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub data: Option<DataSection>,
    pub estimand: Option<EstimandSection>,
    #[serde(default)]
    pub restrictions: Vec<Restriction>,
    pub inference: Option<InferenceSection>,
    pub simulate: Option<SimulateSection>,
    pub dgp: Option<Dgp>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default = "default_schema")]
    pub schema: DataSchema,
}

fn default_schema() -> DataSchema {
    DataSchema::Wide
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimandSection {
    pub kind: String,
    #[serde(default = "default_member")]
    pub member: u8,
    pub alloc1: Option<[u8; 2]>,
    pub alloc2: Option<[u8; 2]>,
    pub forced: Option<u8>,
    pub offers: Option<[u8; 2]>,
    pub contrast_forced: Option<u8>,
    pub contrast_offers: Option<[u8; 2]>,
}

fn default_member() -> u8 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceSection {
    pub method: Option<InferenceMethod>,
    pub alpha: Option<f64>,
    pub reps: Option<usize>,
    pub kappa_rule: Option<KappaRule>,
    pub e_n_exponent: Option<f64>,
    pub c_n_exponent: Option<f64>,
    pub independent_entries: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub preset: Option<String>,
    pub n: Option<usize>,
}

/// A config error that should surface as a usage problem (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn load(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("config schema error: {e}")))
}

impl EstimandSection {
    pub fn build(&self) -> Result<Estimand, ConfigError> {
        let member = Member::try_from(self.member)
            .map_err(|e| ConfigError(format!("estimand member: {e}")))?;
        let alloc = |v: [u8; 2]| -> Result<Allocation, ConfigError> {
            Allocation::try_from(v).map_err(ConfigError)
        };
        match self.kind.as_str() {
            "ade" => Ok(Estimand::ade(member)),
            "ase" => Ok(Estimand::ase(member)),
            "fixed_allocation" => {
                let alloc1 = alloc(self.alloc1.ok_or(ConfigError(
                    "fixed_allocation needs an alloc1 field".into(),
                ))?)?;
                let alloc2 = self.alloc2.map(alloc).transpose()?;
                Ok(Estimand::FixedAllocation {
                    member,
                    alloc1,
                    alloc2,
                })
            }
            "policy_target" => {
                let forced = self
                    .forced
                    .ok_or(ConfigError("policy_target needs a forced field".into()))?;
                let offers = self
                    .offers
                    .ok_or(ConfigError("policy_target needs an offers field".into()))?;
                if forced > 1 || offers.iter().any(|&b| b > 1) {
                    return Err(ConfigError("policy_target entries must be 0 or 1".into()));
                }
                let arm = PolicyArm {
                    forced: forced == 1,
                    offer_own: offers[0] == 1,
                    offer_partner: offers[1] == 1,
                };
                let contrast = match (self.contrast_forced, self.contrast_offers) {
                    (None, None) => None,
                    (Some(f), Some(o)) => {
                        if f > 1 || o.iter().any(|&b| b > 1) {
                            return Err(ConfigError("contrast entries must be 0 or 1".into()));
                        }
                        Some(PolicyArm {
                            forced: f == 1,
                            offer_own: o[0] == 1,
                            offer_partner: o[1] == 1,
                        })
                    }
                    _ => {
                        return Err(ConfigError(
                            "contrast needs both contrast_forced and contrast_offers".into(),
                        ))
                    }
                };
                Ok(Estimand::PolicyTarget {
                    member,
                    arm,
                    contrast,
                })
            }
            other => Err(ConfigError(format!(
                "unknown estimand kind '{other}' (ade, ase, fixed_allocation, policy_target)"
            ))),
        }
    }
}

impl InferenceSection {
    pub fn apply(&self, base: &mut InferenceConfig) {
        if let Some(m) = self.method {
            base.method = m;
        }
        if let Some(a) = self.alpha {
            base.alpha = a;
        }
        if let Some(r) = self.reps {
            base.reps = r;
        }
        if let Some(k) = self.kappa_rule {
            base.kappa_rule = k;
        }
        if let Some(e) = self.e_n_exponent {
            base.e_n_exponent = e;
        }
        if let Some(c) = self.c_n_exponent {
            base.c_n_exponent = c;
        }
        if let Some(i) = self.independent_entries {
            base.independent_entries = i;
        }
    }
}
