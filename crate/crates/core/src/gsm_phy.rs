//! GSM1800 (DCS) physical-layer constants and dB/linear power algebra.
//!
//! Every power quantity crosses module boundaries as [`DbmPower`]. Anything that
//! sums power converts to linear milliwatts first.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowest ARFCN printed in the DCS1800 power table.
pub const ARFCN_MIN: u16 = 513;
/// Highest ARFCN printed in the DCS1800 power table.
pub const ARFCN_MAX: u16 = 884;

/// Power-control level TX0..TX15.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PowerLevel(u8);

impl PowerLevel {
    /// Full power, used for every random-access burst.
    pub const TX0: PowerLevel = PowerLevel(0);
    /// Lowest power, commanded by the onboard picocell.
    pub const TX15: PowerLevel = PowerLevel(15);

    pub fn new(index: u8) -> Result<Self> {
        if index > 15 {
            return Err(Error::invalid(format!(
                "power control level must be 0..=15, got {index}"
            )));
        }
        Ok(PowerLevel(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn dbm(self) -> DbmPower {
        power_level_to_dbm(self)
    }

    pub fn all() -> impl Iterator<Item = PowerLevel> {
        (0..=15).map(PowerLevel)
    }
}

impl TryFrom<u8> for PowerLevel {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        PowerLevel::new(value)
    }
}

impl From<PowerLevel> for u8 {
    fn from(level: PowerLevel) -> u8 {
        level.0
    }
}

impl fmt::Display for PowerLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TX{}", self.0)
    }
}

/// Power in dBm. `-inf` is the "silent" sentinel; NaN and `+inf` are rejected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DbmPower(f64);

impl DbmPower {
    pub const SILENT: DbmPower = DbmPower(f64::NEG_INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::invalid(format!(
                "power must be finite or -inf dBm, got {value}"
            )));
        }
        Ok(DbmPower(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_silent(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn to_mw(self) -> f64 {
        dbm_to_mw(self)
    }

    /// Shift by a gain (positive) or loss (negative) in dB. Silence stays silent.
    pub fn offset(self, db: f64) -> DbmPower {
        if self.is_silent() {
            self
        } else {
            DbmPower(self.0 + db)
        }
    }

    /// Finite value, or `None` for silence.
    pub fn finite(self) -> Option<f64> {
        (!self.is_silent()).then_some(self.0)
    }
}

impl TryFrom<f64> for DbmPower {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        DbmPower::new(value)
    }
}

impl From<DbmPower> for f64 {
    fn from(p: DbmPower) -> f64 {
        p.0
    }
}

impl fmt::Display for DbmPower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_silent() {
            write!(f, "silent")
        } else {
            write!(f, "{:.2} dBm", self.0)
        }
    }
}

/// DCS1800 channel number restricted to the 513..=884 range of the power table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct ArfcnChannel(u16);

impl ArfcnChannel {
    pub fn new(number: u16) -> Result<Self> {
        if !(ARFCN_MIN..=ARFCN_MAX).contains(&number) {
            return Err(Error::invalid(format!(
                "ARFCN must be {ARFCN_MIN}..={ARFCN_MAX}, got {number}"
            )));
        }
        Ok(ArfcnChannel(number))
    }

    pub fn number(self) -> u16 {
        self.0
    }

    pub fn uplink_mhz(self) -> f64 {
        arfcn_to_uplink_mhz(self)
    }

    /// The 200 kHz channel occupied around the uplink carrier.
    pub fn uplink_band(self) -> FrequencyBand {
        let f = self.uplink_mhz();
        FrequencyBand {
            low: f - 0.1,
            high: f + 0.1,
        }
    }
}

impl TryFrom<u16> for ArfcnChannel {
    type Error = Error;

    fn try_from(value: u16) -> Result<Self> {
        ArfcnChannel::new(value)
    }
}

impl From<ArfcnChannel> for u16 {
    fn from(ch: ArfcnChannel) -> u16 {
        ch.0
    }
}

#[derive(Deserialize)]
struct RawBand {
    low_mhz: f64,
    high_mhz: f64,
}

/// Closed frequency interval `[low, high]` in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBand")]
pub struct FrequencyBand {
    #[serde(rename = "low_mhz")]
    low: f64,
    #[serde(rename = "high_mhz")]
    high: f64,
}

impl FrequencyBand {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low > 0.0 && low <= high) {
            return Err(Error::invalid(format!(
                "frequency band requires 0 < low <= high, got [{low}, {high}] MHz"
            )));
        }
        Ok(FrequencyBand { low, high })
    }

    /// A nominal band of `width` MHz starting at `start`, for plan rows printed as one frequency.
    pub fn from_start(start: f64, width: f64) -> Result<Self> {
        FrequencyBand::new(start, start + width)
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    pub fn harmonic(&self, order: u32) -> Result<FrequencyBand> {
        harmonic_band(*self, order)
    }
}

impl TryFrom<RawBand> for FrequencyBand {
    type Error = Error;

    fn try_from(raw: RawBand) -> Result<Self> {
        FrequencyBand::new(raw.low_mhz, raw.high_mhz)
    }
}

impl fmt::Display for FrequencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] MHz", self.low, self.high)
    }
}

/// TXn maps to `30 - 2n` dBm.
pub fn power_level_to_dbm(level: PowerLevel) -> DbmPower {
    DbmPower(30.0 - 2.0 * f64::from(level.0))
}

pub fn arfcn_to_uplink_mhz(ch: ArfcnChannel) -> f64 {
    1710.2 + 0.2 * f64::from(ch.0 - 512)
}

/// Whole DCS1800 uplink band spanned by the channel table (channel centres).
pub fn gsm1800_uplink_band() -> FrequencyBand {
    FrequencyBand {
        low: arfcn_to_uplink_mhz(ArfcnChannel(ARFCN_MIN)),
        high: arfcn_to_uplink_mhz(ArfcnChannel(ARFCN_MAX)),
    }
}

pub fn harmonic_band(fund: FrequencyBand, order: u32) -> Result<FrequencyBand> {
    if order < 1 {
        return Err(Error::invalid("harmonic order must be >= 1"));
    }
    let k = f64::from(order);
    Ok(FrequencyBand {
        low: k * fund.low,
        high: k * fund.high,
    })
}

pub fn dbm_to_mw(p: DbmPower) -> f64 {
    if p.is_silent() {
        0.0
    } else {
        10f64.powf(p.0 / 10.0)
    }
}

pub fn mw_to_dbm(mw: f64) -> Result<DbmPower> {
    if mw.is_nan() || mw < 0.0 || mw == f64::INFINITY {
        return Err(Error::invalid(format!(
            "linear power must be finite and >= 0 mW, got {mw}"
        )));
    }
    if mw == 0.0 {
        return Ok(DbmPower::SILENT);
    }
    Ok(DbmPower(10.0 * mw.log10()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn power_table_examples() {
        assert_eq!(power_level_to_dbm(PowerLevel::TX0).value(), 30.0);
        assert_eq!(power_level_to_dbm(PowerLevel::TX15).value(), 0.0);
        assert_eq!(
            power_level_to_dbm(PowerLevel::new(7).unwrap()).value(),
            16.0
        );
    }

    #[test]
    fn power_table_is_two_db_steps() {
        let values: Vec<f64> = PowerLevel::all().map(|l| l.dbm().value()).collect();
        assert_eq!(values.len(), 16);
        for pair in values.windows(2) {
            assert_eq!(pair[0] - pair[1], 2.0);
        }
        let expected: Vec<f64> = (0..=15).rev().map(|i| 2.0 * i as f64).collect();
        assert_eq!(values, expected);
    }

    #[test]
    fn power_level_out_of_range() {
        assert!(PowerLevel::new(16).is_err());
        assert!(serde_json::from_str::<PowerLevel>("16").is_err());
    }

    #[test]
    fn arfcn_examples() {
        assert!(close(
            ArfcnChannel::new(513).unwrap().uplink_mhz(),
            1710.4,
            1e-9
        ));
        assert!(close(
            ArfcnChannel::new(884).unwrap().uplink_mhz(),
            1784.6,
            1e-9
        ));
        assert!(close(
            ArfcnChannel::new(700).unwrap().uplink_mhz(),
            1747.8,
            1e-9
        ));
        assert!(ArfcnChannel::new(512).is_err());
        assert!(ArfcnChannel::new(885).is_err());
    }

    #[test]
    fn arfcn_spacing() {
        for n in ARFCN_MIN..ARFCN_MAX {
            let a = ArfcnChannel::new(n).unwrap().uplink_mhz();
            let b = ArfcnChannel::new(n + 1).unwrap().uplink_mhz();
            assert!(b > a);
            assert!(close(b - a, 0.2, 1e-9));
        }
    }

    #[test]
    fn harmonic_examples() {
        let fund = FrequencyBand::new(1710.4, 1784.6).unwrap();
        assert_eq!(harmonic_band(fund, 1).unwrap(), fund);
        let h3 = harmonic_band(fund, 3).unwrap();
        assert!(close(h3.low(), 5131.2, 1e-9) && close(h3.high(), 5353.8, 1e-9));
        let h2 = harmonic_band(fund, 2).unwrap();
        assert!(close(h2.low(), 3420.8, 1e-9) && close(h2.high(), 3569.2, 1e-9));
        assert!(harmonic_band(fund, 0).is_err());
    }

    #[test]
    fn uplink_band_matches_table_edges() {
        let b = gsm1800_uplink_band();
        assert!(close(b.low(), 1710.4, 1e-9));
        assert!(close(b.high(), 1784.6, 1e-9));
    }

    #[test]
    fn band_validation() {
        assert!(FrequencyBand::new(0.0, 1.0).is_err());
        assert!(FrequencyBand::new(5.0, 4.0).is_err());
        assert!(FrequencyBand::new(75.0, 75.0).is_ok());
    }

    #[test]
    fn dbm_mw_examples() {
        assert_eq!(dbm_to_mw(DbmPower::new(0.0).unwrap()), 1.0);
        assert!(close(dbm_to_mw(DbmPower::new(30.0).unwrap()), 1000.0, 1e-9));
        assert!(close(dbm_to_mw(DbmPower::new(3.0103).unwrap()), 2.0, 1e-4));
        assert!(close(
            mw_to_dbm(2.0).unwrap().value(),
            3.010299956639812,
            1e-12
        ));
        assert!(mw_to_dbm(0.0).unwrap().is_silent());
        assert_eq!(dbm_to_mw(DbmPower::SILENT), 0.0);
        assert!(mw_to_dbm(-1.0).is_err());
    }

    #[test]
    fn dbm_rejects_nan_and_positive_infinity() {
        assert!(DbmPower::new(f64::NAN).is_err());
        assert!(DbmPower::new(f64::INFINITY).is_err());
        assert!(DbmPower::new(f64::NEG_INFINITY).unwrap().is_silent());
    }

    proptest! {
        #[test]
        fn mw_round_trip(exp in -12.0f64..6.0) {
            let m = 10f64.powf(exp);
            let back = dbm_to_mw(mw_to_dbm(m).unwrap());
            prop_assert!(((back - m) / m).abs() <= 1e-12);
        }

        #[test]
        fn harmonic_width_scales(low in 1.0f64..5000.0, width in 0.0f64..500.0, k in 1u32..12) {
            let b = FrequencyBand::new(low, low + width).unwrap();
            let h = harmonic_band(b, k).unwrap();
            prop_assert!((h.width() - f64::from(k) * b.width()).abs() <= 1e-9 * h.high());
        }
    }
}
