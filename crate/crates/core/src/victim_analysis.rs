//! Avionics receivers: the band plan, band-proximity screening, blocking
//! margins over an emission log, and the NCU camping check.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_engine::TdmaPosition;
use crate::gsm_phy::{DbmPower, FrequencyBand};
use crate::propagation::{
    aggregate_rss, emission_components, received_power, wavelength_m, EmissionComponent,
    HarmonicProfile, PathLossModel,
};
use crate::rach_sim::EmissionEvent;

pub const DEFAULT_GUARD_MHZ: f64 = 5.0;

/// Nominal width given to plan rows that are printed as a single frequency.
pub const POINT_BAND_WIDTH_MHZ: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlanEntry {
    pub name: String,
    pub band: FrequencyBand,
}

impl BandPlanEntry {
    fn new(name: &str, low: f64, high: f64) -> Self {
        BandPlanEntry {
            name: name.to_string(),
            band: FrequencyBand::new(low, high).expect("static band plan row"),
        }
    }
}

/// Main avionics allocations, in MHz.
pub fn default_band_plan() -> Vec<BandPlanEntry> {
    vec![
        BandPlanEntry::new("HF communication", 2.0, 30.0),
        BandPlanEntry::new("VHF communication", 118.0, 136.975),
        BandPlanEntry::new("Marker Beacon", 75.0, 75.0),
        BandPlanEntry::new("VOR", 108.00, 117.95),
        BandPlanEntry::new("Localizer", 108.10, 111.95),
        BandPlanEntry::new("Glideslope", 329.15, 335.0),
        BandPlanEntry::new("DME", 962.0, 1213.0),
        BandPlanEntry::new("GPS", 1575.0, 1575.0 + POINT_BAND_WIDTH_MHZ),
        BandPlanEntry::new("Satellite L-band", 1530.0, 1660.5),
        BandPlanEntry::new("Doppler navigation", 8800.0, 9800.0),
        BandPlanEntry::new("Weather radar", 4000.0, 8000.0),
        BandPlanEntry::new("Radio Altimeter", 4250.0, 4350.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Proximity {
    Clear,
    NearMiss,
    Overlap,
}

impl fmt::Display for Proximity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Proximity::Clear => "CLEAR",
            Proximity::NearMiss => "NEAR_MISS",
            Proximity::Overlap => "OVERLAP",
        })
    }
}

/// Touching or intersecting bands overlap; otherwise a gap up to `guard_mhz` is a near miss.
pub fn overlap_check(emission: FrequencyBand, victim: FrequencyBand, guard_mhz: f64) -> Proximity {
    let gap = (emission.low() - victim.high()).max(victim.low() - emission.high());
    if gap <= 0.0 {
        Proximity::Overlap
    } else if gap <= guard_mhz {
        Proximity::NearMiss
    } else {
        Proximity::Clear
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningRow {
    pub order: u32,
    pub emission_band: FrequencyBand,
    pub level: DbmPower,
    pub victim: String,
    pub victim_band: FrequencyBand,
    pub proximity: Proximity,
}

pub fn screen_band_plan(
    emissions: &[EmissionComponent],
    plan: &[BandPlanEntry],
    guard_mhz: f64,
) -> Vec<ScreeningRow> {
    emissions
        .iter()
        .flat_map(|c| {
            plan.iter().map(move |entry| ScreeningRow {
                order: c.order,
                emission_band: c.band,
                level: c.level,
                victim: entry.name.clone(),
                victim_band: entry.band,
                proximity: overlap_check(c.band, entry.band, guard_mhz),
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct RawVictim {
    name: String,
    band: FrequencyBand,
    sensitivity_dbm: Option<DbmPower>,
    blocking_threshold_dbm: Option<DbmPower>,
    #[serde(default)]
    adjacent_selectivity_db: Option<f64>,
}

/// An avionics receiver. Sensitivity and blocking threshold have no defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVictim")]
pub struct VictimReceiver {
    pub name: String,
    pub band: FrequencyBand,
    #[serde(rename = "sensitivity_dbm")]
    sensitivity: DbmPower,
    #[serde(rename = "blocking_threshold_dbm")]
    blocking_threshold: DbmPower,
    #[serde(
        rename = "adjacent_selectivity_db",
        skip_serializing_if = "Option::is_none"
    )]
    adjacent_selectivity: Option<f64>,
}

impl VictimReceiver {
    pub fn new(
        name: impl Into<String>,
        band: FrequencyBand,
        sensitivity: DbmPower,
        blocking_threshold: DbmPower,
        adjacent_selectivity: Option<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if sensitivity.is_silent() || blocking_threshold.is_silent() {
            return Err(Error::config(format!(
                "victim `{name}`: levels must be finite"
            )));
        }
        if blocking_threshold.value() <= sensitivity.value() {
            return Err(Error::config(format!(
                "victim `{name}`: blocking threshold {blocking_threshold} must exceed sensitivity {sensitivity}"
            )));
        }
        if let Some(s) = adjacent_selectivity {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::config(format!(
                    "victim `{name}`: adjacent selectivity must be >= 0 dB, got {s}"
                )));
            }
        }
        Ok(VictimReceiver {
            name,
            band,
            sensitivity,
            blocking_threshold,
            adjacent_selectivity,
        })
    }

    pub fn sensitivity(&self) -> DbmPower {
        self.sensitivity
    }

    pub fn blocking_threshold(&self) -> DbmPower {
        self.blocking_threshold
    }

    pub fn adjacent_selectivity(&self) -> Option<f64> {
        self.adjacent_selectivity
    }
}

impl TryFrom<RawVictim> for VictimReceiver {
    type Error = Error;

    fn try_from(raw: RawVictim) -> Result<Self> {
        let sens = raw.sensitivity_dbm.ok_or_else(|| {
            Error::config(format!("victim `{}` is missing sensitivity_dbm", raw.name))
        })?;
        let block = raw.blocking_threshold_dbm.ok_or_else(|| {
            Error::config(format!(
                "victim `{}` is missing blocking_threshold_dbm",
                raw.name
            ))
        })?;
        VictimReceiver::new(raw.name, raw.band, sens, block, raw.adjacent_selectivity_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Clear,
    NearMiss,
    Overlap,
    Blocked,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Clear => "CLEAR",
            Verdict::NearMiss => "NEAR_MISS",
            Verdict::Overlap => "OVERLAP",
            Verdict::Blocked => "BLOCKED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VictimExposure {
    pub victim: String,
    /// Peak per-slot aggregate of counted components; silent when nothing was counted.
    pub peak: DbmPower,
    /// Blocking threshold minus peak; `+inf` means no exposure.
    pub margin_db: f64,
    pub worst_slot: Option<TdmaPosition>,
    pub verdict: Verdict,
}

impl VictimExposure {
    pub fn exposed(&self) -> bool {
        self.margin_db.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceReport {
    pub victims: Vec<VictimExposure>,
}

impl InterferenceReport {
    pub fn any_blocked(&self) -> bool {
        self.victims.iter().any(|v| v.verdict == Verdict::Blocked)
    }

    pub fn get(&self, victim: &str) -> Option<&VictimExposure> {
        self.victims.iter().find(|v| v.victim == victim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningParams {
    pub max_harmonic_order: u32,
    pub guard_mhz: f64,
}

impl Default for ScreeningParams {
    fn default() -> Self {
        ScreeningParams {
            max_harmonic_order: 3,
            guard_mhz: DEFAULT_GUARD_MHZ,
        }
    }
}

/// Station → victim → distance in metres.
pub type DistanceTable = BTreeMap<String, BTreeMap<String, f64>>;

/// Per-victim worst-slot interference over an emission log.
///
/// Within each TDMA position the received levels of every component that
/// overlaps or nearly misses the victim band are summed incoherently.
/// Near-miss components are reduced by the victim's adjacent selectivity when given.
pub fn blocking_report(
    log: &[EmissionEvent],
    victims: &[VictimReceiver],
    model: &PathLossModel,
    hp: &HarmonicProfile,
    params: &ScreeningParams,
    distances: &DistanceTable,
) -> Result<InterferenceReport> {
    // Check geometry up front so a bad table fails before any work.
    let mut checked: HashMap<&str, ()> = HashMap::new();
    for e in log {
        if checked.insert(e.source.as_str(), ()).is_some() {
            continue;
        }
        let row = distances.get(&e.source).ok_or_else(|| {
            Error::config(format!("no distances given for station `{}`", e.source))
        })?;
        let lambda = wavelength_m(e.band.center());
        for v in victims {
            let d = *row.get(&v.name).ok_or_else(|| {
                Error::config(format!(
                    "station `{}` has no distance to victim `{}`",
                    e.source, v.name
                ))
            })?;
            if d < lambda {
                return Err(Error::SubWavelength {
                    station: e.source.clone(),
                    victim: v.name.clone(),
                    distance_m: d,
                    wavelength_m: lambda,
                });
            }
        }
    }

    let mut by_slot: BTreeMap<TdmaPosition, Vec<&EmissionEvent>> = BTreeMap::new();
    for e in log {
        by_slot.entry(e.position).or_default().push(e);
    }

    let mut out = Vec::with_capacity(victims.len());
    for v in victims {
        let mut peak = DbmPower::SILENT;
        let mut worst_slot = None;
        let mut worst_proximity = Proximity::Clear;
        for (pos, events) in &by_slot {
            let mut levels = Vec::new();
            for e in events {
                let d = distances[&e.source][&v.name];
                for c in emission_components(e, hp, params.max_harmonic_order)? {
                    let prox = overlap_check(c.band, v.band, params.guard_mhz);
                    worst_proximity = worst_proximity.max(prox);
                    let rx = match prox {
                        Proximity::Clear => continue,
                        Proximity::Overlap => received_power(c.level, model, d, c.band.center())?,
                        Proximity::NearMiss => received_power(c.level, model, d, c.band.center())?
                            .offset(-v.adjacent_selectivity.unwrap_or(0.0)),
                    };
                    levels.push(rx);
                }
            }
            let agg = aggregate_rss(levels);
            if !agg.is_silent() && (peak.is_silent() || agg.value() > peak.value()) {
                peak = agg;
                worst_slot = Some(*pos);
            }
        }
        let margin_db = if peak.is_silent() {
            f64::INFINITY
        } else {
            v.blocking_threshold.value() - peak.value()
        };
        let verdict = if margin_db < 0.0 {
            Verdict::Blocked
        } else {
            match worst_proximity {
                Proximity::Clear => Verdict::Clear,
                Proximity::NearMiss => Verdict::NearMiss,
                Proximity::Overlap => Verdict::Overlap,
            }
        };
        out.push(VictimExposure {
            victim: v.name.clone(),
            peak,
            margin_db,
            worst_slot,
            verdict,
        });
    }
    Ok(InterferenceReport { victims: out })
}

fn default_floor_offset() -> f64 {
    12.0
}
fn default_required_cn() -> f64 {
    9.0
}
fn default_margin() -> f64 {
    3.0
}

/// Onboard noise-floor settings. The floor is referenced to the picocell signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcuConfig {
    pub picocell_signal_dbm: DbmPower,
    #[serde(default = "default_floor_offset")]
    pub floor_offset_db: f64,
    #[serde(default = "default_required_cn")]
    pub required_cn_db: f64,
    #[serde(default = "default_margin")]
    pub margin_db: f64,
    /// Strongest ground base-station signal at the handset; absent means none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_signal_dbm: Option<DbmPower>,
}

impl NcuConfig {
    pub fn new(picocell_signal: DbmPower) -> Self {
        NcuConfig {
            picocell_signal_dbm: picocell_signal,
            floor_offset_db: default_floor_offset(),
            required_cn_db: default_required_cn(),
            margin_db: default_margin(),
            ground_signal_dbm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.picocell_signal_dbm.is_silent() {
            return Err(Error::config("ncu.picocell_signal_dbm must be finite"));
        }
        for (name, v) in [
            ("floor_offset_db", self.floor_offset_db),
            ("required_cn_db", self.required_cn_db),
            ("margin_db", self.margin_db),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("ncu.{name} must be finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CampingVerdict {
    CampingPossible,
    CampingBlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NcuResult {
    pub noise_floor: DbmPower,
    /// Ground carrier over the NCU floor, dB; `-inf` without a ground signal.
    pub ground_cn_db: f64,
    pub verdict: CampingVerdict,
}

pub fn ncu_camping_check(ground_signal: DbmPower, ncu: &NcuConfig) -> NcuResult {
    let noise_floor = ncu.picocell_signal_dbm.offset(-ncu.floor_offset_db);
    let ground_cn_db = ground_signal.value() - noise_floor.value();
    let verdict = if ground_cn_db < ncu.required_cn_db {
        CampingVerdict::CampingBlocked
    } else {
        CampingVerdict::CampingPossible
    };
    NcuResult {
        noise_floor,
        ground_cn_db,
        verdict,
    }
}
