//! TDMA clock and the 51-frame uplink control multiframe on timeslot 0.
//!
//! Time is carried as integer nanoseconds. Public helpers that take or return
//! microseconds convert at the boundary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SLOTS_PER_FRAME: u64 = 8;
pub const FRAMES_PER_MULTIFRAME: usize = 51;

/// Default slot length: 15/26 ms truncated to whole nanoseconds.
pub const DEFAULT_SLOT_NS: u64 = 576_923;

/// Absolute (frame, slot) coordinate on the TDMA grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TdmaPosition {
    pub frame: u64,
    slot: u8,
}

impl TdmaPosition {
    pub fn new(frame: u64, slot: u8) -> Result<Self> {
        if u64::from(slot) >= SLOTS_PER_FRAME {
            return Err(Error::invalid(format!(
                "timeslot must be 0..=7, got {slot}"
            )));
        }
        Ok(TdmaPosition { frame, slot })
    }

    pub fn slot(&self) -> u8 {
        self.slot
    }
}

impl fmt::Display for TdmaPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FN{}/TS{}", self.frame, self.slot)
    }
}

/// Logical channel carried on uplink timeslot 0 in one frame of the multiframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelTag {
    /// SDCCH
    Sdcch,
    /// SACCH
    Sacch,
    /// RACH
    Rach,
}

impl ChannelTag {
    pub fn symbol(self) -> char {
        match self {
            ChannelTag::Sdcch => 'D',
            ChannelTag::Sacch => 'H',
            ChannelTag::Rach => 'R',
        }
    }

    fn from_symbol(c: char) -> Option<Self> {
        match c {
            'D' => Some(ChannelTag::Sdcch),
            'H' => Some(ChannelTag::Sacch),
            'R' => Some(ChannelTag::Rach),
            _ => None,
        }
    }
}

/// Frames 0-3 D, 4-5 R, 6-13 H, 14-36 R, 37-44 D, 45-46 R, 47-50 D.
pub const DEFAULT_LAYOUT: &str = "DDDDRRHHHHHHHHRRRRRRRRRRRRRRRRRRRRRRRDDDDDDDDRRDDDD";

/// Timeslot-0 uplink tags for the 51 frames of a control multiframe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MultiframeLayout {
    tags: [ChannelTag; FRAMES_PER_MULTIFRAME],
}

impl MultiframeLayout {
    pub fn tag(&self, frame: u64) -> ChannelTag {
        self.tags[(frame % FRAMES_PER_MULTIFRAME as u64) as usize]
    }

    pub fn tags(&self) -> &[ChannelTag] {
        &self.tags
    }

    pub fn count(&self, tag: ChannelTag) -> usize {
        self.tags.iter().filter(|t| **t == tag).count()
    }

    pub fn rach_per_multiframe(&self) -> usize {
        self.count(ChannelTag::Rach)
    }
}

impl Default for MultiframeLayout {
    fn default() -> Self {
        DEFAULT_LAYOUT
            .parse()
            .expect("default layout is well formed")
    }
}

impl FromStr for MultiframeLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != FRAMES_PER_MULTIFRAME {
            return Err(Error::config(format!(
                "multiframe layout must have exactly {FRAMES_PER_MULTIFRAME} tags, got {}",
                chars.len()
            )));
        }
        let mut tags = [ChannelTag::Sdcch; FRAMES_PER_MULTIFRAME];
        for (i, c) in chars.into_iter().enumerate() {
            tags[i] = ChannelTag::from_symbol(c).ok_or_else(|| {
                Error::config(format!(
                    "multiframe layout tag `{c}` at frame {i} is not one of D, H, R"
                ))
            })?;
        }
        Ok(MultiframeLayout { tags })
    }
}

impl TryFrom<String> for MultiframeLayout {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MultiframeLayout> for String {
    fn from(layout: MultiframeLayout) -> String {
        layout.to_string()
    }
}

impl fmt::Display for MultiframeLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tags {
            write!(f, "{}", t.symbol())?;
        }
        Ok(())
    }
}

/// Slot, frame and multiframe durations. Frame and multiframe are exact integer
/// multiples of the slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimingConstants {
    slot_ns: u64,
}

impl Default for TimingConstants {
    fn default() -> Self {
        TimingConstants {
            slot_ns: DEFAULT_SLOT_NS,
        }
    }
}

impl TimingConstants {
    pub fn from_slot_ns(slot_ns: u64) -> Result<Self> {
        if slot_ns == 0 {
            return Err(Error::invalid("slot duration must be positive"));
        }
        Ok(TimingConstants { slot_ns })
    }

    pub fn from_slot_us(slot_us: f64) -> Result<Self> {
        if !(slot_us.is_finite() && slot_us > 0.0) {
            return Err(Error::invalid(format!(
                "slot duration must be positive, got {slot_us} us"
            )));
        }
        Self::from_slot_ns((slot_us * 1e3).round() as u64)
    }

    pub fn slot_ns(&self) -> u64 {
        self.slot_ns
    }

    pub fn frame_ns(&self) -> u64 {
        SLOTS_PER_FRAME * self.slot_ns
    }

    pub fn multiframe_ns(&self) -> u64 {
        FRAMES_PER_MULTIFRAME as u64 * self.frame_ns()
    }

    pub fn slot_duration_us(&self) -> f64 {
        ns_to_us(self.slot_ns)
    }

    pub fn frame_duration_us(&self) -> f64 {
        ns_to_us(self.frame_ns())
    }

    pub fn multiframe_duration_ms(&self) -> f64 {
        self.multiframe_ns() as f64 * 1e-6
    }

    pub fn position_at_ns(&self, t_ns: u64) -> TdmaPosition {
        let frame = t_ns / self.frame_ns();
        let slot = ((t_ns % self.frame_ns()) / self.slot_ns) as u8;
        TdmaPosition { frame, slot }
    }

    pub fn slot_start_ns(&self, pos: TdmaPosition) -> u64 {
        pos.frame * self.frame_ns() + u64::from(pos.slot) * self.slot_ns
    }
}

pub fn ns_to_us(ns: u64) -> f64 {
    ns as f64 * 1e-3
}

/// Converts microseconds to nanoseconds, rounding down.
pub fn us_to_ns(us: f64) -> Result<u64> {
    if !(us.is_finite() && us >= 0.0) {
        return Err(Error::invalid(format!(
            "time must be finite and >= 0, got {us} us"
        )));
    }
    Ok((us * 1e3).floor() as u64)
}

pub fn is_rach_opportunity(pos: TdmaPosition, layout: &MultiframeLayout) -> bool {
    pos.slot == 0 && layout.tag(pos.frame) == ChannelTag::Rach
}

pub fn position_at(time_us: f64, t: &TimingConstants) -> Result<TdmaPosition> {
    if time_us < 0.0 {
        return Err(Error::invalid(format!(
            "time must be >= 0, got {time_us} us"
        )));
    }
    Ok(t.position_at_ns(us_to_ns(time_us)?))
}

pub fn slot_start(pos: TdmaPosition, t: &TimingConstants) -> f64 {
    ns_to_us(t.slot_start_ns(pos))
}

/// RACH opportunities whose slot start lies in `[t0_ns, t1_ns)`.
pub fn rach_opportunities_in_ns(
    t0_ns: u64,
    t1_ns: u64,
    layout: &MultiframeLayout,
    t: &TimingConstants,
) -> Vec<TdmaPosition> {
    if t1_ns <= t0_ns {
        return Vec::new();
    }
    let frame_ns = t.frame_ns();
    let first = t0_ns.div_ceil(frame_ns);
    (first..)
        .take_while(|f| f * frame_ns < t1_ns)
        .map(|frame| TdmaPosition { frame, slot: 0 })
        .filter(|p| is_rach_opportunity(*p, layout))
        .collect()
}

pub fn rach_opportunities_in(
    t0_us: f64,
    t1_us: f64,
    layout: &MultiframeLayout,
    t: &TimingConstants,
) -> Result<Vec<TdmaPosition>> {
    if t0_us > t1_us {
        return Err(Error::invalid(format!(
            "window start {t0_us} us is after end {t1_us} us"
        )));
    }
    // The open end is rounded up so that a slot starting inside the last fractional ns is kept.
    let t1_ns = (t1_us * 1e3).ceil() as u64;
    Ok(rach_opportunities_in_ns(
        us_to_ns_ceil(t0_us)?,
        t1_ns,
        layout,
        t,
    ))
}

fn us_to_ns_ceil(us: f64) -> Result<u64> {
    if !(us.is_finite() && us >= 0.0) {
        return Err(Error::invalid(format!(
            "time must be finite and >= 0, got {us} us"
        )));
    }
    Ok((us * 1e3).ceil() as u64)
}

/// Iterator over RACH opportunities with frame >= `from_frame`, in time order.
/// Yields nothing if the layout has no RACH frames.
pub fn rach_opportunities_from(
    from_frame: u64,
    layout: &MultiframeLayout,
) -> impl Iterator<Item = TdmaPosition> + '_ {
    let has_rach = layout.rach_per_multiframe() > 0;
    (from_frame..)
        .take_while(move |_| has_rach)
        .map(|frame| TdmaPosition { frame, slot: 0 })
        .filter(move |p| is_rach_opportunity(*p, layout))
}
