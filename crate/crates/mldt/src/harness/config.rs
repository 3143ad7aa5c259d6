//! Scenario configuration: one TOML file with a list of `[[scenario]]`
//! tables, flat keys, defaults for everything module-specific.

use crate::error::{Error, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    UncodedMldt,
    LdpcMldt,
    RaptorMldt,
    CdmaHw,
    CdmaMseq,
    McdsCdma,
    Bounds,
    Capacity,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::UncodedMldt => "uncoded_mldt",
            ScenarioKind::LdpcMldt => "ldpc_mldt",
            ScenarioKind::RaptorMldt => "raptor_mldt",
            ScenarioKind::CdmaHw => "cdma_hw",
            ScenarioKind::CdmaMseq => "cdma_mseq",
            ScenarioKind::McdsCdma => "mcds_cdma",
            ScenarioKind::Bounds => "bounds",
            ScenarioKind::Capacity => "capacity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Spa,
    Gspa,
    InterSpa,
    /// Collided receiver that ignores the interfering user entirely.
    NoMldt,
}

fn default_p() -> usize {
    1
}
fn default_min_errors() -> u64 {
    200
}
fn default_max_bits() -> u64 {
    10_000_000
}
fn default_blocks() -> usize {
    40
}
fn default_iterations() -> usize {
    10
}
fn default_rounds() -> usize {
    2
}
fn default_samples() -> usize {
    100_000
}
fn default_ldpc_n() -> usize {
    1008
}
fn default_ldpc_m() -> usize {
    504
}
fn default_chips() -> usize {
    16
}
fn default_paths() -> usize {
    1
}
fn default_subcarriers() -> usize {
    16
}
fn default_cp() -> usize {
    4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default = "default_p")]
    pub p_users: usize,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_bits")]
    pub max_bits: u64,
    #[serde(default)]
    pub seed: u64,
    /// Decoder for coded scenarios; defaults per kind.
    #[serde(default)]
    pub decoder: Option<DecoderKind>,
    #[serde(default = "default_ldpc_n")]
    pub ldpc_n: usize,
    #[serde(default = "default_ldpc_m")]
    pub ldpc_m: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Chip length J for the spread scenarios.
    #[serde(default = "default_chips")]
    pub chips: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_subcarriers")]
    pub subcarriers: usize,
    #[serde(default = "default_cp")]
    pub cp_len: usize,
    /// Capacity mode name for kind = capacity.
    #[serde(default)]
    pub capacity_mode: Option<String>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Feedback blocks per SNR point for kind = raptor_mldt.
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default)]
    pub raptor_message_len: Option<usize>,
    #[serde(default)]
    pub raptor_precode_n: Option<usize>,
    #[serde(default)]
    pub ir_chunk: Option<usize>,
    #[serde(default)]
    pub min_rate: Option<f64>,
}

impl Scenario {
    pub fn decoder(&self) -> DecoderKind {
        self.decoder.unwrap_or(match self.kind {
            ScenarioKind::LdpcMldt | ScenarioKind::McdsCdma if self.p_users > 1 => DecoderKind::Gspa,
            _ => DecoderKind::Spa,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::config(format!("scenario '{}': snr_db must be nonempty", self.name)));
        }
        if self.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(format!(
                "scenario '{}': snr_db must be strictly increasing",
                self.name
            )));
        }
        let ber_kind = matches!(
            self.kind,
            ScenarioKind::UncodedMldt
                | ScenarioKind::LdpcMldt
                | ScenarioKind::CdmaHw
                | ScenarioKind::CdmaMseq
                | ScenarioKind::McdsCdma
        );
        if ber_kind && self.min_errors < 100 {
            return Err(Error::config(format!(
                "scenario '{}': min_errors must be at least 100 for BER points",
                self.name
            )));
        }
        let max_p = match self.kind {
            ScenarioKind::McdsCdma | ScenarioKind::UncodedMldt | ScenarioKind::LdpcMldt | ScenarioKind::Bounds => 3,
            ScenarioKind::RaptorMldt => 2,
            ScenarioKind::CdmaHw | ScenarioKind::CdmaMseq => 2,
            ScenarioKind::Capacity => 2,
        };
        if self.p_users == 0 || self.p_users > max_p {
            return Err(Error::config(format!(
                "scenario '{}': p_users must be in 1..={max_p} for kind {}",
                self.name,
                self.kind.name()
            )));
        }
        if self.decoder == Some(DecoderKind::InterSpa) && self.p_users != 2 {
            return Err(Error::config(format!(
                "scenario '{}': inter_spa requires p_users = 2",
                self.name
            )));
        }
        if self.kind == ScenarioKind::Capacity && self.capacity_mode.is_none() {
            return Err(Error::config(format!(
                "scenario '{}': capacity_mode is required for kind capacity",
                self.name
            )));
        }
        if matches!(self.kind, ScenarioKind::CdmaHw) && !self.chips.is_power_of_two() {
            return Err(Error::config(format!(
                "scenario '{}': chips must be a power of two for Hadamard signatures",
                self.name
            )));
        }
        Ok(())
    }

    /// Flat key-value echo for CSV provenance comments.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("name".into(), self.name.clone()),
            ("kind".into(), self.kind.name().into()),
            ("p_users".into(), self.p_users.to_string()),
            (
                "snr_db".into(),
                self.snr_db.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "),
            ),
            ("min_errors".into(), self.min_errors.to_string()),
            ("max_bits".into(), self.max_bits.to_string()),
            ("seed".into(), self.seed.to_string()),
        ];
        match self.kind {
            ScenarioKind::LdpcMldt | ScenarioKind::McdsCdma => {
                out.push(("decoder".into(), format!("{:?}", self.decoder())));
                out.push(("ldpc_n".into(), self.ldpc_n.to_string()));
                out.push(("ldpc_m".into(), self.ldpc_m.to_string()));
                out.push(("iterations".into(), self.iterations.to_string()));
                if self.kind == ScenarioKind::McdsCdma {
                    out.push(("rounds".into(), self.rounds.to_string()));
                    out.push(("subcarriers".into(), self.subcarriers.to_string()));
                    out.push(("cp_len".into(), self.cp_len.to_string()));
                    out.push(("chips".into(), self.chips.to_string()));
                    out.push(("paths".into(), self.paths.to_string()));
                }
            }
            ScenarioKind::CdmaHw | ScenarioKind::CdmaMseq => {
                out.push(("chips".into(), self.chips.to_string()));
                out.push(("paths".into(), self.paths.to_string()));
            }
            ScenarioKind::Capacity => {
                out.push(("capacity_mode".into(), self.capacity_mode.clone().unwrap_or_default()));
                out.push(("samples".into(), self.samples.to_string()));
            }
            ScenarioKind::RaptorMldt => {
                out.push(("blocks".into(), self.blocks.to_string()));
                if let Some(v) = self.raptor_message_len {
                    out.push(("raptor_message_len".into(), v.to_string()));
                }
                if let Some(v) = self.raptor_precode_n {
                    out.push(("raptor_precode_n".into(), v.to_string()));
                }
                if let Some(v) = self.ir_chunk {
                    out.push(("ir_chunk".into(), v.to_string()));
                }
                if let Some(v) = self.min_rate {
                    out.push(("min_rate".into(), v.to_string()));
                }
            }
            _ => {}
        }
        out
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scenario: Vec<Scenario>,
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    let parsed: ConfigFile =
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    if parsed.scenario.is_empty() {
        return Err(Error::config(format!("{}: no [[scenario]] tables found", path.display())));
    }
    for sc in &parsed.scenario {
        sc.validate()?;
    }
    Ok(parsed)
}
