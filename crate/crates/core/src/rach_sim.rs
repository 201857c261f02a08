//! Discrete-event simulation of cabin handsets contending on the RACH.
//!
//! A triggered station transmits a full-power access burst in a randomly chosen
//! RACH opportunity, retries with uniform backoff on collision, and after a
//! successful access waits `connection_delay_frames` before transmitting one
//! traffic burst per frame at its picocell-commanded level.
//!
//! Randomness comes from ChaCha8 seeded with `SimConfig::seed`, so a run is a
//! pure function of its inputs on every platform.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_engine::{
    is_rach_opportunity, ns_to_us, rach_opportunities_from, MultiframeLayout, TdmaPosition,
    TimingConstants, DEFAULT_SLOT_NS,
};
use crate::gsm_phy::{gsm1800_uplink_band, ArfcnChannel, DbmPower, FrequencyBand, PowerLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StationState {
    Idle,
    Accessing,
    Connected,
}

/// Why a handset starts a random access. All triggers are identical on air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AccessTrigger {
    Call,
    Emergency,
    Reestablish,
    PageResponse,
    LocationUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EmissionKind {
    RachBurst,
    TrafficBurst,
}

impl fmt::Display for EmissionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmissionKind::RachBurst => "RACH_BURST",
            EmissionKind::TrafficBurst => "TRAFFIC_BURST",
        })
    }
}

fn default_power_level() -> PowerLevel {
    PowerLevel::TX15
}

fn default_rach_power() -> PowerLevel {
    PowerLevel::TX0
}

fn default_traffic_slot() -> u8 {
    1
}

/// Static description of one handset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    pub id: String,
    /// Carrier channel. Without one the station is assumed anywhere in the uplink band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arfcn: Option<ArfcnChannel>,
    #[serde(default = "default_power_level")]
    pub connected_power: PowerLevel,
    /// Level used for access bursts. Handsets use their maximum, TX0.
    #[serde(default = "default_rach_power")]
    pub rach_power: PowerLevel,
    /// Timeslot (1..=7) assigned for traffic once connected.
    #[serde(default = "default_traffic_slot")]
    pub traffic_slot: u8,
    /// Distance in metres to each victim receiver, keyed by victim name.
    #[serde(default)]
    pub distances: BTreeMap<String, f64>,
}

impl StationConfig {
    pub fn new(id: impl Into<String>) -> Self {
        StationConfig {
            id: id.into(),
            arfcn: None,
            connected_power: default_power_level(),
            rach_power: default_rach_power(),
            traffic_slot: default_traffic_slot(),
            distances: BTreeMap::new(),
        }
    }

    pub fn fundamental_band(&self) -> FrequencyBand {
        self.arfcn
            .map(ArfcnChannel::uplink_band)
            .unwrap_or_else(gsm1800_uplink_band)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerEntry {
    pub time_us: f64,
    pub station: String,
    pub trigger: AccessTrigger,
}

fn default_seed() -> u64 {
    1
}
fn default_max_attempts() -> u32 {
    4
}
fn default_backoff_window() -> u32 {
    8
}
fn default_connection_delay() -> u64 {
    51
}
fn default_burst_fraction() -> f64 {
    0.75
}
fn default_slot_ns() -> u64 {
    DEFAULT_SLOT_NS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// Number of upcoming RACH opportunities the backoff draws from.
    #[serde(default = "default_backoff_window")]
    pub backoff_window: u32,
    /// If set, one of several colliding bursts is still decoded.
    #[serde(default)]
    pub capture: bool,
    /// Frames between a successful access and the first traffic burst.
    #[serde(default = "default_connection_delay")]
    pub connection_delay_frames: u64,
    /// Access burst length as a fraction of one timeslot, in (0, 1].
    #[serde(default = "default_burst_fraction")]
    pub rach_burst_fraction: f64,
    /// Frames a connection lasts before the station returns to idle; unset means until the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call_duration_frames: Option<u64>,
    #[serde(default = "default_slot_ns")]
    pub slot_duration_ns: u64,
    #[serde(default)]
    pub layout: MultiframeLayout,
    #[serde(default)]
    pub triggers: Vec<TriggerEntry>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: default_seed(),
            max_attempts: default_max_attempts(),
            backoff_window: default_backoff_window(),
            capture: false,
            connection_delay_frames: default_connection_delay(),
            rach_burst_fraction: default_burst_fraction(),
            call_duration_frames: None,
            slot_duration_ns: default_slot_ns(),
            layout: MultiframeLayout::default(),
            triggers: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn timing(&self) -> Result<TimingConstants> {
        TimingConstants::from_slot_ns(self.slot_duration_ns)
    }

    pub fn validate(&self, stations: &[StationConfig]) -> Result<()> {
        if self.max_attempts < 1 {
            return Err(Error::config("sim.max_attempts must be >= 1"));
        }
        if self.backoff_window < 1 {
            return Err(Error::config("sim.backoff_window must be >= 1"));
        }
        if !(self.rach_burst_fraction > 0.0 && self.rach_burst_fraction <= 1.0) {
            return Err(Error::config(format!(
                "sim.rach_burst_fraction must be in (0, 1], got {}",
                self.rach_burst_fraction
            )));
        }
        if self.slot_duration_ns == 0 {
            return Err(Error::config("sim.slot_duration_ns must be positive"));
        }
        if self.call_duration_frames == Some(0) {
            return Err(Error::config(
                "sim.call_duration_frames must be >= 1 when set",
            ));
        }
        let mut seen = HashMap::new();
        for s in stations {
            if seen.insert(s.id.as_str(), ()).is_some() {
                return Err(Error::config(format!("duplicate station id `{}`", s.id)));
            }
            if !(1..=7).contains(&s.traffic_slot) {
                return Err(Error::config(format!(
                    "station `{}`: traffic_slot must be 1..=7, got {}",
                    s.id, s.traffic_slot
                )));
            }
        }
        for (i, t) in self.triggers.iter().enumerate() {
            if !seen.contains_key(t.station.as_str()) {
                return Err(Error::config(format!(
                    "sim.triggers[{i}] references unknown station `{}`",
                    t.station
                )));
            }
            if !(t.time_us.is_finite() && t.time_us >= 0.0) {
                return Err(Error::config(format!(
                    "sim.triggers[{i}].time_us must be >= 0, got {}",
                    t.time_us
                )));
            }
        }
        if !self.triggers.is_empty() && self.layout.rach_per_multiframe() == 0 {
            return Err(Error::config(
                "sim.layout has no RACH frames but triggers are scheduled",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessAttempt {
    pub station: String,
    pub trigger: AccessTrigger,
    pub scheduled_opportunity: TdmaPosition,
    pub attempt_number: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AttemptOutcome {
    Success,
    Collided,
}

/// One RF burst at the handset antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionEvent {
    pub start_ns: u64,
    pub duration_ns: u64,
    pub position: TdmaPosition,
    pub source: String,
    pub kind: EmissionKind,
    pub power: DbmPower,
    pub band: FrequencyBand,
}

impl EmissionEvent {
    pub fn time_us(&self) -> f64 {
        ns_to_us(self.start_ns)
    }

    pub fn duration_us(&self) -> f64 {
        ns_to_us(self.duration_ns)
    }

    pub fn end_ns(&self) -> u64 {
        self.start_ns + self.duration_ns
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub rach_bursts: u64,
    /// Access bursts at exactly 30 dBm.
    pub full_power_bursts: u64,
    pub traffic_bursts: u64,
    pub max_coincident_rach: usize,
    pub successes: u64,
    pub collided_attempts: u64,
    pub abandoned_accesses: u64,
    /// Triggers that arrived while the station was not idle.
    pub rejected_triggers: u64,
    /// Accesses still in progress when the horizon was reached.
    pub pending_at_horizon: u64,
    /// Trigger-to-connected delay per station, in microseconds.
    pub time_to_connect_us: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub log: Vec<EmissionEvent>,
    pub stats: SimStats,
}

#[derive(Debug, Clone)]
struct StationRuntime {
    state: StationState,
    attempts_used: u32,
    trigger: Option<(AccessTrigger, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // Variant order is the tie-break at equal timestamps.
    CallEnd { station: usize },
    Connect { station: usize },
    Trigger { index: usize },
    Resolve { frame: u64 },
}

/// Mutable simulation state. Use [`run`] for a whole scenario; the methods are
/// exposed for stepping through the access procedure directly.
pub struct Simulator<'a> {
    config: &'a SimConfig,
    stations: &'a [StationConfig],
    timing: TimingConstants,
    index: HashMap<&'a str, usize>,
    runtime: Vec<StationRuntime>,
    rng: ChaCha8Rng,
    pending: BTreeMap<u64, Vec<AccessAttempt>>,
    queue: BinaryHeap<Reverse<(u64, EventKind)>>,
    log: Vec<EmissionEvent>,
    stats: SimStats,
    horizon_ns: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(
        config: &'a SimConfig,
        stations: &'a [StationConfig],
        horizon_us: f64,
    ) -> Result<Self> {
        if !(horizon_us.is_finite() && horizon_us > 0.0) {
            return Err(Error::invalid(format!(
                "horizon must be > 0, got {horizon_us} us"
            )));
        }
        config.validate(stations)?;
        if let Some((i, t)) = config
            .triggers
            .iter()
            .enumerate()
            .find(|(_, t)| t.time_us >= horizon_us)
        {
            return Err(Error::config(format!(
                "sim.triggers[{i}] at {} us is not before the horizon ({horizon_us} us)",
                t.time_us
            )));
        }
        let index = stations
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        let runtime = stations
            .iter()
            .map(|_| StationRuntime {
                state: StationState::Idle,
                attempts_used: 0,
                trigger: None,
            })
            .collect();
        Ok(Simulator {
            config,
            stations,
            timing: config.timing()?,
            index,
            runtime,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            pending: BTreeMap::new(),
            queue: BinaryHeap::new(),
            log: Vec::new(),
            stats: SimStats::default(),
            horizon_ns: (horizon_us * 1e3).ceil() as u64,
        })
    }

    pub fn state(&self, station: &str) -> Option<StationState> {
        self.index.get(station).map(|&i| self.runtime[i].state)
    }

    fn lookup(&self, station: &str) -> Result<usize> {
        self.index
            .get(station)
            .copied()
            .ok_or_else(|| Error::config(format!("unknown station `{station}`")))
    }

    /// Draws one of the next `backoff_window` opportunities starting at `from_frame`.
    fn draw_opportunity(&mut self, from_frame: u64) -> TdmaPosition {
        let window = self.config.backoff_window as usize;
        let pick = self.rng.random_range(0..window);
        rach_opportunities_from(from_frame, &self.config.layout)
            .nth(pick)
            .expect("layout validated to contain RACH frames")
    }

    fn enqueue_attempt(&mut self, attempt: AccessAttempt) {
        let frame = attempt.scheduled_opportunity.frame;
        let slot = self.pending.entry(frame).or_default();
        if slot.is_empty() {
            let at = self.timing.slot_start_ns(attempt.scheduled_opportunity);
            self.queue.push(Reverse((at, EventKind::Resolve { frame })));
        }
        slot.push(attempt);
    }

    /// Starts an access for an idle station at `time_us`.
    pub fn schedule_access(
        &mut self,
        station: &str,
        trigger: AccessTrigger,
        time_us: f64,
    ) -> Result<AccessAttempt> {
        let idx = self.lookup(station)?;
        let t_ns = crate::frame_engine::us_to_ns(time_us)?;
        self.schedule_access_ns(idx, trigger, t_ns)
    }

    fn schedule_access_ns(
        &mut self,
        idx: usize,
        trigger: AccessTrigger,
        t_ns: u64,
    ) -> Result<AccessAttempt> {
        let rt = &self.runtime[idx];
        if rt.state != StationState::Idle {
            return Err(Error::IllegalState(format!(
                "station `{}` is {:?}, access requires Idle",
                self.stations[idx].id, rt.state
            )));
        }
        let first_frame = t_ns.div_ceil(self.timing.frame_ns());
        let opportunity = self.draw_opportunity(first_frame);
        let rt = &mut self.runtime[idx];
        rt.state = StationState::Accessing;
        rt.attempts_used = 1;
        rt.trigger = Some((trigger, t_ns));
        let attempt = AccessAttempt {
            station: self.stations[idx].id.clone(),
            trigger,
            scheduled_opportunity: opportunity,
            attempt_number: 1,
        };
        self.enqueue_attempt(attempt.clone());
        Ok(attempt)
    }

    fn emit(&mut self, idx: usize, pos: TdmaPosition, kind: EmissionKind) {
        let station = &self.stations[idx];
        let (duration_ns, level) = match kind {
            EmissionKind::RachBurst => (
                (self.timing.slot_ns() as f64 * self.config.rach_burst_fraction).floor() as u64,
                station.rach_power,
            ),
            EmissionKind::TrafficBurst => (self.timing.slot_ns(), station.connected_power),
        };
        let power = level.dbm();
        match kind {
            EmissionKind::RachBurst => {
                self.stats.rach_bursts += 1;
                if power.value() == 30.0 {
                    self.stats.full_power_bursts += 1;
                }
            }
            EmissionKind::TrafficBurst => self.stats.traffic_bursts += 1,
        }
        self.log.push(EmissionEvent {
            start_ns: self.timing.slot_start_ns(pos),
            duration_ns,
            position: pos,
            source: station.id.clone(),
            kind,
            power,
            band: station.fundamental_band(),
        });
    }

    fn resolve(&mut self, frame: u64) {
        let Some(mut attempts) = self.pending.remove(&frame) else {
            return;
        };
        attempts.sort_by_key(|a| self.index[a.station.as_str()]);
        let outcomes = resolve_opportunity(&attempts, self.config.capture, &mut self.rng);
        for (attempt, outcome) in attempts.into_iter().zip(outcomes) {
            let idx = self.index[attempt.station.as_str()];
            debug_assert!(is_rach_opportunity(
                attempt.scheduled_opportunity,
                &self.config.layout
            ));
            self.emit(idx, attempt.scheduled_opportunity, EmissionKind::RachBurst);
            match outcome {
                AttemptOutcome::Success => {
                    self.stats.successes += 1;
                    let connect_frame = frame + self.config.connection_delay_frames;
                    let at = connect_frame * self.timing.frame_ns();
                    self.queue
                        .push(Reverse((at, EventKind::Connect { station: idx })));
                }
                AttemptOutcome::Collided => {
                    self.stats.collided_attempts += 1;
                    if self.runtime[idx].attempts_used >= self.config.max_attempts {
                        self.stats.abandoned_accesses += 1;
                        let rt = &mut self.runtime[idx];
                        rt.state = StationState::Idle;
                        rt.attempts_used = 0;
                        rt.trigger = None;
                    } else {
                        let opportunity = self.draw_opportunity(frame + 1);
                        let rt = &mut self.runtime[idx];
                        rt.attempts_used += 1;
                        let retry = AccessAttempt {
                            station: attempt.station,
                            trigger: attempt.trigger,
                            scheduled_opportunity: opportunity,
                            attempt_number: rt.attempts_used,
                        };
                        self.enqueue_attempt(retry);
                    }
                }
            }
        }
    }

    fn connect(&mut self, idx: usize, at_ns: u64) {
        let rt = &mut self.runtime[idx];
        rt.state = StationState::Connected;
        rt.attempts_used = 0;
        if let Some((_, trig_ns)) = rt.trigger.take() {
            self.stats
                .time_to_connect_us
                .entry(self.stations[idx].id.clone())
                .or_default()
                .push(ns_to_us(at_ns - trig_ns));
        }
        let frame_ns = self.timing.frame_ns();
        let first = at_ns / frame_ns;
        let end = match self.config.call_duration_frames {
            Some(d) => {
                self.queue.push(Reverse((
                    (first + d) * frame_ns,
                    EventKind::CallEnd { station: idx },
                )));
                first + d
            }
            None => u64::MAX,
        };
        let slot = self.stations[idx].traffic_slot;
        let mut frame = first;
        while frame < end {
            let pos = TdmaPosition::new(frame, slot).expect("traffic slot validated");
            if self.timing.slot_start_ns(pos) >= self.horizon_ns {
                break;
            }
            self.emit(idx, pos, EmissionKind::TrafficBurst);
            frame += 1;
        }
    }

    /// Runs until the horizon and returns the time-ordered emission log.
    pub fn finish(mut self) -> SimOutput {
        for (i, t) in self.config.triggers.iter().enumerate() {
            let at = (t.time_us * 1e3).floor() as u64;
            self.queue
                .push(Reverse((at, EventKind::Trigger { index: i })));
        }
        while let Some(Reverse((at, kind))) = self.queue.pop() {
            if at >= self.horizon_ns {
                break;
            }
            match kind {
                EventKind::Trigger { index } => {
                    let entry = &self.config.triggers[index];
                    let idx = self.index[entry.station.as_str()];
                    if self.schedule_access_ns(idx, entry.trigger, at).is_err() {
                        self.stats.rejected_triggers += 1;
                    }
                }
                EventKind::Resolve { frame } => self.resolve(frame),
                EventKind::Connect { station } => self.connect(station, at),
                EventKind::CallEnd { station } => {
                    let rt = &mut self.runtime[station];
                    rt.state = StationState::Idle;
                    rt.attempts_used = 0;
                }
            }
        }
        self.stats.pending_at_horizon = self
            .runtime
            .iter()
            .filter(|r| r.state == StationState::Accessing)
            .count() as u64;
        let index = &self.index;
        self.log
            .sort_by_key(|e| (e.start_ns, index[e.source.as_str()]));
        self.stats.max_coincident_rach = max_coincident_rach(&self.log);
        SimOutput {
            log: self.log,
            stats: self.stats,
        }
    }
}

/// Decides the fate of every access burst sharing one opportunity.
///
/// Without capture any overlap destroys all bursts. With capture exactly one
/// uniformly chosen burst survives.
pub fn resolve_opportunity<R: Rng + ?Sized>(
    attempts: &[AccessAttempt],
    capture: bool,
    rng: &mut R,
) -> Vec<AttemptOutcome> {
    match attempts.len() {
        0 => Vec::new(),
        1 => vec![AttemptOutcome::Success],
        n if capture => {
            let winner = rng.random_range(0..n);
            (0..n)
                .map(|i| {
                    if i == winner {
                        AttemptOutcome::Success
                    } else {
                        AttemptOutcome::Collided
                    }
                })
                .collect()
        }
        n => vec![AttemptOutcome::Collided; n],
    }
}

pub fn run(config: &SimConfig, stations: &[StationConfig], horizon_us: f64) -> Result<SimOutput> {
    Ok(Simulator::new(config, stations, horizon_us)?.finish())
}

/// Largest number of access bursts sharing one TDMA position.
pub fn max_coincident_rach(log: &[EmissionEvent]) -> usize {
    let mut counts: HashMap<TdmaPosition, usize> = HashMap::new();
    for e in log.iter().filter(|e| e.kind == EmissionKind::RachBurst) {
        *counts.entry(e.position).or_default() += 1;
    }
    counts.into_values().max().unwrap_or(0)
}
