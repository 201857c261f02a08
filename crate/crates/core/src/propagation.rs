//! Free-space link budget, harmonic emission levels, incoherent (RSS) power
//! aggregation and the separation-distance solver.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsm_phy::{dbm_to_mw, harmonic_band, mw_to_dbm, DbmPower, FrequencyBand};
use crate::rach_sim::EmissionEvent;

/// FSPL constant for distance in km and frequency in MHz.
pub const FSPL_CONST_DB: f64 = 32.44;

/// Shortest distance the safe-distance solver considers meaningful.
pub const MIN_SOLVABLE_DISTANCE_M: f64 = 1e-3;

const SPEED_OF_LIGHT_M_PER_US: f64 = 299.792458;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathLossKind {
    #[default]
    FreeSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PathLossModel {
    #[serde(default)]
    pub model: PathLossKind,
    /// Extra cabin loss on top of free space, dB (>= 0).
    #[serde(default)]
    pub excess_loss_db: f64,
    #[serde(default)]
    pub tx_gain_dbi: f64,
    #[serde(default)]
    pub rx_gain_dbi: f64,
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.excess_loss_db.is_finite() && self.excess_loss_db >= 0.0) {
            return Err(Error::config(format!(
                "path_loss.excess_loss_db must be >= 0, got {}",
                self.excess_loss_db
            )));
        }
        if !(self.tx_gain_dbi.is_finite() && self.rx_gain_dbi.is_finite()) {
            return Err(Error::config("path_loss antenna gains must be finite"));
        }
        Ok(())
    }

    /// Net gain applied to every path: antenna gains minus excess loss.
    fn net_gain_db(&self) -> f64 {
        self.tx_gain_dbi + self.rx_gain_dbi - self.excess_loss_db
    }
}

/// Conducted level of each harmonic order (k >= 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HarmonicLevel>", into = "Vec<HarmonicLevel>")]
pub struct HarmonicProfile {
    levels: BTreeMap<u32, DbmPower>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicLevel {
    pub order: u32,
    pub level_dbm: DbmPower,
}

/// Placeholder conducted level for the 2nd and 3rd harmonic until measured data is supplied.
pub const DEFAULT_HARMONIC_DBM: f64 = -30.0;

impl Default for HarmonicProfile {
    fn default() -> Self {
        let mut levels = BTreeMap::new();
        levels.insert(2, DbmPower::new(DEFAULT_HARMONIC_DBM).unwrap());
        levels.insert(3, DbmPower::new(DEFAULT_HARMONIC_DBM).unwrap());
        HarmonicProfile { levels }
    }
}

impl HarmonicProfile {
    pub fn empty() -> Self {
        HarmonicProfile {
            levels: BTreeMap::new(),
        }
    }

    pub fn new(levels: impl IntoIterator<Item = (u32, DbmPower)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (order, level) in levels {
            if order < 2 {
                return Err(Error::config(format!(
                    "harmonic order must be >= 2, got {order}"
                )));
            }
            if level.value() > 30.0 {
                return Err(Error::config(format!(
                    "harmonic {order} level {level} exceeds the 30 dBm fundamental"
                )));
            }
            if map.insert(order, level).is_some() {
                return Err(Error::config(format!(
                    "harmonic order {order} listed twice"
                )));
            }
        }
        Ok(HarmonicProfile { levels: map })
    }

    pub fn level(&self, order: u32) -> Option<DbmPower> {
        self.levels.get(&order).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, DbmPower)> + '_ {
        self.levels.iter().map(|(k, v)| (*k, *v))
    }
}

impl TryFrom<Vec<HarmonicLevel>> for HarmonicProfile {
    type Error = Error;

    fn try_from(v: Vec<HarmonicLevel>) -> Result<Self> {
        HarmonicProfile::new(v.into_iter().map(|h| (h.order, h.level_dbm)))
    }
}

impl From<HarmonicProfile> for Vec<HarmonicLevel> {
    fn from(p: HarmonicProfile) -> Self {
        p.iter()
            .map(|(order, level_dbm)| HarmonicLevel { order, level_dbm })
            .collect()
    }
}

/// One spectral line of an emission: the fundamental (order 1) or a harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmissionComponent {
    pub order: u32,
    pub band: FrequencyBand,
    pub level: DbmPower,
}

pub fn wavelength_m(freq_mhz: f64) -> f64 {
    SPEED_OF_LIGHT_M_PER_US / freq_mhz
}

pub fn fspl(distance_m: f64, freq_mhz: f64) -> Result<f64> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(Error::invalid(format!(
            "distance must be > 0 m, got {distance_m}"
        )));
    }
    if !(freq_mhz.is_finite() && freq_mhz > 0.0) {
        return Err(Error::invalid(format!(
            "frequency must be > 0 MHz, got {freq_mhz}"
        )));
    }
    Ok(FSPL_CONST_DB + 20.0 * (distance_m / 1000.0).log10() + 20.0 * freq_mhz.log10())
}

pub fn received_power(
    tx: DbmPower,
    model: &PathLossModel,
    distance_m: f64,
    freq_mhz: f64,
) -> Result<DbmPower> {
    if tx.is_silent() {
        return Ok(DbmPower::SILENT);
    }
    let loss = fspl(distance_m, freq_mhz)?;
    DbmPower::new(tx.value() + model.net_gain_db() - loss)
}

/// Incoherent sum: powers add linearly, equivalent to root-sum-square of field amplitudes.
pub fn aggregate_rss<I>(levels: I) -> DbmPower
where
    I: IntoIterator<Item = DbmPower>,
{
    let total: f64 = levels.into_iter().map(dbm_to_mw).sum();
    mw_to_dbm(total).expect("sum of non-negative powers")
}

pub fn emission_components(
    e: &EmissionEvent,
    hp: &HarmonicProfile,
    max_order: u32,
) -> Result<Vec<EmissionComponent>> {
    components_of(e.band, e.power, hp, max_order)
}

/// Fundamental plus every profiled harmonic up to `max_order`.
pub fn components_of(
    band: FrequencyBand,
    power: DbmPower,
    hp: &HarmonicProfile,
    max_order: u32,
) -> Result<Vec<EmissionComponent>> {
    if max_order < 1 {
        return Err(Error::invalid("max harmonic order must be >= 1"));
    }
    let mut out = vec![EmissionComponent {
        order: 1,
        band,
        level: power,
    }];
    for (k, level) in hp.iter().filter(|(k, _)| *k <= max_order) {
        out.push(EmissionComponent {
            order: k,
            band: harmonic_band(band, k)?,
            level,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SafeDistance {
    pub distance_m: f64,
    /// False when the sources stay below the threshold at any practical distance.
    pub constrained: bool,
}

fn check_safe_distance_args(n_sources: u32, freq_mhz: f64, threshold: DbmPower) -> Result<()> {
    if n_sources < 1 {
        return Err(Error::invalid("n_sources must be >= 1"));
    }
    if !(freq_mhz.is_finite() && freq_mhz > 0.0) {
        return Err(Error::invalid(format!(
            "frequency must be > 0 MHz, got {freq_mhz}"
        )));
    }
    if threshold.is_silent() {
        return Err(Error::invalid("threshold must be a finite level"));
    }
    Ok(())
}

fn unconstrained() -> SafeDistance {
    SafeDistance {
        distance_m: 0.0,
        constrained: false,
    }
}

/// Minimum separation at which `n_sources` equal emitters aggregate to at most
/// `threshold`, by inverting the free-space formula.
pub fn safe_distance(
    threshold: DbmPower,
    n_sources: u32,
    tx: DbmPower,
    model: &PathLossModel,
    freq_mhz: f64,
) -> Result<SafeDistance> {
    check_safe_distance_args(n_sources, freq_mhz, threshold)?;
    if tx.is_silent() {
        return Ok(unconstrained());
    }
    let required_loss =
        tx.value() + model.net_gain_db() + 10.0 * f64::from(n_sources).log10() - threshold.value();
    if required_loss <= 0.0 {
        return Ok(unconstrained());
    }
    let d_km = 10f64.powf((required_loss - FSPL_CONST_DB - 20.0 * freq_mhz.log10()) / 20.0);
    let d = d_km * 1000.0;
    if d < MIN_SOLVABLE_DISTANCE_M {
        return Ok(unconstrained());
    }
    Ok(SafeDistance {
        distance_m: d,
        constrained: true,
    })
}

/// Same quantity as [`safe_distance`], found by bisection on the forward
/// received-power and aggregation path. Used as a cross-check.
pub fn safe_distance_by_bisection(
    threshold: DbmPower,
    n_sources: u32,
    tx: DbmPower,
    model: &PathLossModel,
    freq_mhz: f64,
) -> Result<SafeDistance> {
    check_safe_distance_args(n_sources, freq_mhz, threshold)?;
    let aggregate_at = |d: f64| -> Result<DbmPower> {
        let p = received_power(tx, model, d, freq_mhz)?;
        Ok(aggregate_rss(std::iter::repeat_n(p, n_sources as usize)))
    };
    let exceeds = |d: f64| -> Result<bool> { Ok(aggregate_at(d)?.value() > threshold.value()) };
    // The far-field formula turns into a gain at millimetre range; a threshold
    // above the radiated total can never be exceeded.
    let radiated = aggregate_rss(std::iter::repeat_n(
        tx.offset(model.net_gain_db()),
        n_sources as usize,
    ));
    if radiated.value() <= threshold.value() || !exceeds(MIN_SOLVABLE_DISTANCE_M)? {
        return Ok(unconstrained());
    }
    let mut lo = MIN_SOLVABLE_DISTANCE_M;
    let mut hi = 1.0;
    while exceeds(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::invalid(
                "safe distance beyond 1e12 m; inputs are unrealistic",
            ));
        }
    }
    // geometric bisection: loss is linear in log(d)
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if exceeds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi < 1e-12 {
            break;
        }
    }
    Ok(SafeDistance {
        distance_m: hi,
        constrained: true,
    })
}
