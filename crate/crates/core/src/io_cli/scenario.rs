//! Scenario documents (TOML): loading, validation and canonical output.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::{HarmonicProfile, PathLossModel};
use crate::rach_sim::{SimConfig, StationConfig};
use crate::tdma_noise::{DEFAULT_SAMPLE_RATE_HZ, MIN_SAMPLE_RATE_HZ};
use crate::victim_analysis::{
    default_band_plan, BandPlanEntry, DistanceTable, NcuConfig, ScreeningParams, VictimReceiver,
    DEFAULT_GUARD_MHZ,
};

fn default_max_order() -> u32 {
    3
}
fn default_guard() -> f64 {
    DEFAULT_GUARD_MHZ
}
fn default_sample_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(default = "default_max_order")]
    pub max_harmonic_order: u32,
    #[serde(default = "default_guard")]
    pub guard_mhz: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    /// Attenuation from radiated envelope to detected audio, dB.
    #[serde(default)]
    pub coupling_db: f64,
    /// Burst edge ramp for the envelope, microseconds.
    #[serde(default)]
    pub ramp_us: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            max_harmonic_order: default_max_order(),
            guard_mhz: default_guard(),
            sample_rate_hz: default_sample_rate(),
            coupling_db: 0.0,
            ramp_us: 0.0,
        }
    }
}

impl AnalysisConfig {
    pub fn screening(&self) -> ScreeningParams {
        ScreeningParams {
            max_harmonic_order: self.max_harmonic_order,
            guard_mhz: self.guard_mhz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub path_loss: PathLossModel,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ncu: Option<NcuConfig>,
    /// Conducted harmonic levels; the placeholder profile is used (and flagged) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<HarmonicProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_plan: Option<Vec<BandPlanEntry>>,
    pub stations: Vec<StationConfig>,
    pub victims: Vec<VictimReceiver>,
}

/// What to do with keys the format does not define.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownKeys {
    #[default]
    Reject,
    Warn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn harmonic_profile(&self) -> HarmonicProfile {
        self.harmonics.clone().unwrap_or_default()
    }

    pub fn harmonics_defaulted(&self) -> bool {
        self.harmonics.is_none()
    }

    pub fn band_plan(&self) -> Vec<BandPlanEntry> {
        self.band_plan.clone().unwrap_or_else(default_band_plan)
    }

    pub fn distances(&self) -> DistanceTable {
        self.stations
            .iter()
            .map(|s| (s.id.clone(), s.distances.clone()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate(&self.stations)?;
        self.path_loss.validate()?;
        if let Some(ncu) = &self.ncu {
            ncu.validate()?;
        }
        let a = &self.analysis;
        if a.max_harmonic_order < 1 {
            return Err(Error::config("analysis.max_harmonic_order must be >= 1"));
        }
        if !(a.guard_mhz.is_finite() && a.guard_mhz >= 0.0) {
            return Err(Error::config("analysis.guard_mhz must be >= 0"));
        }
        if !(a.sample_rate_hz.is_finite() && a.sample_rate_hz >= MIN_SAMPLE_RATE_HZ) {
            return Err(Error::config(format!(
                "analysis.sample_rate_hz must be >= {MIN_SAMPLE_RATE_HZ}"
            )));
        }
        if !(a.coupling_db.is_finite() && a.coupling_db >= 0.0) {
            return Err(Error::config("analysis.coupling_db must be >= 0"));
        }
        if !(a.ramp_us.is_finite() && a.ramp_us >= 0.0) {
            return Err(Error::config("analysis.ramp_us must be >= 0"));
        }

        let mut victims = HashSet::new();
        for v in &self.victims {
            if !victims.insert(v.name.as_str()) {
                return Err(Error::config(format!("duplicate victim `{}`", v.name)));
            }
        }
        for s in &self.stations {
            for (victim, d) in &s.distances {
                if !victims.contains(victim.as_str()) {
                    return Err(Error::config(format!(
                        "station `{}` references undeclared victim `{victim}`",
                        s.id
                    )));
                }
                if !(d.is_finite() && *d > 0.0) {
                    return Err(Error::config(format!(
                        "station `{}`: distance to `{victim}` must be > 0 m, got {d}",
                        s.id
                    )));
                }
            }
            if let Some(missing) = self
                .victims
                .iter()
                .find(|v| !s.distances.contains_key(&v.name))
            {
                return Err(Error::config(format!(
                    "station `{}` has no distance to victim `{}`",
                    s.id, missing.name
                )));
            }
        }
        Ok(())
    }

    /// Canonical TOML. `parse_scenario(&s.to_toml()?)` yields an equal scenario.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    match e.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            Error::Parse(format!("line {line}, column {col}: {}", e.message()))
        }
        None => Error::Parse(e.message().to_string()),
    }
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str, unknown: UnknownKeys) -> Result<Loaded> {
    let de = toml::Deserializer::parse(text).map_err(|e| parse_error(text, e))?;
    let mut ignored = Vec::new();
    let scenario: Scenario = serde_ignored::deserialize(de, |path| ignored.push(path.to_string()))
        .map_err(|e| parse_error(text, e))?;
    let warnings: Vec<String> = ignored
        .iter()
        .map(|k| format!("unknown key `{k}`"))
        .collect();
    if unknown == UnknownKeys::Reject && !warnings.is_empty() {
        return Err(Error::config(warnings.join("; ")));
    }
    scenario.validate()?;
    Ok(Loaded { scenario, warnings })
}

pub fn load_scenario(path: impl AsRef<Path>, unknown: UnknownKeys) -> Result<Loaded> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, unknown)
}
