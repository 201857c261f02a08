//! Full-run orchestration and the report it produces.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame_engine::TdmaPosition;
use crate::gsm_phy::{DbmPower, PowerLevel};
use crate::io_cli::scenario::Scenario;
use crate::propagation::{components_of, safe_distance, EmissionComponent};
use crate::rach_sim::{run, EmissionEvent, SimStats};
use crate::tdma_noise::{
    coupled_audio_estimate, envelope_spectrum, synthesize_envelope, AudioLevelReport,
    EnvelopeTrace, SpectrumResult,
};
use crate::victim_analysis::{
    blocking_report, ncu_camping_check, screen_band_plan, InterferenceReport, NcuResult,
    ScreeningRow, Verdict,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VictimMargin {
    pub victim: String,
    pub peak_dbm: Option<f64>,
    pub blocking_threshold_dbm: f64,
    /// `None` when no emission reached the victim ("no exposure").
    pub margin_db: Option<f64>,
    pub worst_slot: Option<TdmaPosition>,
    pub verdict: Verdict,
    /// Separation that keeps the worst observed number of coincident access
    /// bursts at or below the blocking threshold, for the fundamental.
    pub safe_distance_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NcuSummary {
    pub ground_signal_dbm: Option<f64>,
    pub noise_floor_dbm: f64,
    pub ground_cn_db: Option<f64>,
    pub result: NcuResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub horizon_ms: f64,
    pub layout: String,
    pub harmonics_defaulted: bool,
    pub band_plan_defaulted: bool,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub emissions: SimStats,
    pub margins: Vec<VictimMargin>,
    pub screening: Vec<ScreeningRow>,
    pub ncu: Option<NcuSummary>,
    pub buzz: AudioLevelReport,
    pub provenance: Provenance,
    #[serde(skip)]
    pub log: Vec<EmissionEvent>,
    #[serde(skip)]
    pub interference: InterferenceReport,
    #[serde(skip)]
    pub trace: EnvelopeTrace,
    #[serde(skip)]
    pub spectrum: SpectrumResult,
}

impl RunReport {
    pub fn any_blocked(&self) -> bool {
        self.interference.any_blocked()
    }

    /// Deterministic JSON body; contains no timestamps.
    pub fn body_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn body_sha256(&self) -> Result<String> {
        Ok(sha256_hex(self.body_json()?.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fundamental and harmonic components of every distinct station carrier at its access-burst level.
pub fn potential_emissions(s: &Scenario) -> Result<Vec<EmissionComponent>> {
    let hp = s.harmonic_profile();
    let mut seen: Vec<(crate::gsm_phy::FrequencyBand, DbmPower)> = Vec::new();
    let mut out = Vec::new();
    for st in &s.stations {
        let key = (st.fundamental_band(), st.rach_power.dbm());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        out.extend(components_of(
            key.0,
            key.1,
            &hp,
            s.analysis.max_harmonic_order,
        )?);
    }
    Ok(out)
}

pub fn screening_table(s: &Scenario) -> Result<Vec<ScreeningRow>> {
    Ok(screen_band_plan(
        &potential_emissions(s)?,
        &s.band_plan(),
        s.analysis.guard_mhz,
    ))
}

/// Simulation, envelope and spectrum only.
pub fn run_buzz(
    s: &Scenario,
    horizon_ms: f64,
) -> Result<(
    Vec<EmissionEvent>,
    EnvelopeTrace,
    SpectrumResult,
    AudioLevelReport,
)> {
    let timing = s.sim.timing()?;
    let out = run(&s.sim, &s.stations, horizon_ms * 1e3)?;
    let a = &s.analysis;
    let trace = synthesize_envelope(
        &out.log,
        0.0,
        horizon_ms * 1e-3,
        a.sample_rate_hz,
        a.ramp_us,
    )?;
    let spectrum = envelope_spectrum(&trace, &timing)?;
    let buzz = coupled_audio_estimate(&trace, a.coupling_db, &timing)?;
    Ok((out.log, trace, spectrum, buzz))
}

pub fn run_scenario(s: &Scenario, horizon_ms: f64) -> Result<RunReport> {
    s.validate()?;
    let timing = s.sim.timing()?;
    let horizon_us = horizon_ms * 1e3;
    let sim = run(&s.sim, &s.stations, horizon_us)?;
    let hp = s.harmonic_profile();
    let params = s.analysis.screening();

    let interference = blocking_report(
        &sim.log,
        &s.victims,
        &s.path_loss,
        &hp,
        &params,
        &s.distances(),
    )?;

    let n_coincident = sim.stats.max_coincident_rach.max(1) as u32;
    let fundamental_mhz = s.stations.first().map(|st| st.fundamental_band().center());
    let mut margins = Vec::with_capacity(s.victims.len());
    for (v, exp) in s.victims.iter().zip(&interference.victims) {
        let safe = match fundamental_mhz {
            Some(f) => {
                let d = safe_distance(
                    v.blocking_threshold(),
                    n_coincident,
                    PowerLevel::TX0.dbm(),
                    &s.path_loss,
                    f,
                )?;
                Some(d.distance_m)
            }
            None => None,
        };
        margins.push(VictimMargin {
            victim: exp.victim.clone(),
            peak_dbm: exp.peak.finite(),
            blocking_threshold_dbm: v.blocking_threshold().value(),
            margin_db: exp.margin_db.is_finite().then_some(exp.margin_db),
            worst_slot: exp.worst_slot,
            verdict: exp.verdict,
            safe_distance_m: safe,
        });
    }

    let screening = screening_table(s)?;

    let ncu = s.ncu.as_ref().map(|cfg| {
        let ground = cfg.ground_signal_dbm.unwrap_or(DbmPower::SILENT);
        let result = ncu_camping_check(ground, cfg);
        NcuSummary {
            ground_signal_dbm: ground.finite(),
            noise_floor_dbm: result.noise_floor.value(),
            ground_cn_db: result
                .ground_cn_db
                .is_finite()
                .then_some(result.ground_cn_db),
            result,
        }
    });

    let a = &s.analysis;
    let trace = synthesize_envelope(
        &sim.log,
        0.0,
        horizon_ms * 1e-3,
        a.sample_rate_hz,
        a.ramp_us,
    )?;
    let spectrum = envelope_spectrum(&trace, &timing)?;
    let buzz = coupled_audio_estimate(&trace, a.coupling_db, &timing)?;

    Ok(RunReport {
        emissions: sim.stats,
        margins,
        screening,
        ncu,
        buzz,
        provenance: Provenance {
            seed: s.sim.seed,
            horizon_ms,
            layout: s.sim.layout.to_string(),
            harmonics_defaulted: s.harmonics_defaulted(),
            band_plan_defaulted: s.band_plan.is_none(),
            tool_version: TOOL_VERSION.to_string(),
        },
        log: sim.log,
        interference,
        trace,
        spectrum,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn emissions_csv(log: &[EmissionEvent]) -> String {
    let mut out =
        String::from("time_us,duration_us,station,kind,power_dbm,band_low_mhz,band_high_mhz\n");
    for e in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.time_us(),
            e.duration_us(),
            e.source,
            e.kind,
            e.power.value(),
            e.band.low(),
            e.band.high()
        );
    }
    out
}

pub fn margins_csv(margins: &[VictimMargin]) -> String {
    let mut out = String::from(
        "victim,peak_dbm,blocking_threshold_dbm,margin_db,worst_frame,worst_slot,verdict,safe_distance_m\n",
    );
    for m in margins {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            m.victim,
            opt(m.peak_dbm),
            m.blocking_threshold_dbm,
            m.margin_db
                .map_or_else(|| "no exposure".to_string(), |x| x.to_string()),
            m.worst_slot
                .map_or_else(String::new, |p| p.frame.to_string()),
            m.worst_slot
                .map_or_else(String::new, |p| p.slot().to_string()),
            m.verdict,
            opt(m.safe_distance_m),
        );
    }
    out
}

pub fn screening_csv(rows: &[ScreeningRow]) -> String {
    let mut out = String::from(
        "order,emission_low_mhz,emission_high_mhz,level_dbm,victim,victim_low_mhz,victim_high_mhz,verdict\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.order,
            r.emission_band.low(),
            r.emission_band.high(),
            r.level.value(),
            r.victim,
            r.victim_band.low(),
            r.victim_band.high(),
            r.proximity
        );
    }
    out
}

pub fn spectrum_csv(s: &SpectrumResult) -> String {
    let mut out = String::from("freq_hz,magnitude\n");
    for (k, p) in s.power.iter().enumerate() {
        let _ = writeln!(out, "{},{}", s.freq(k), p);
    }
    out
}

pub fn trace_csv(t: &EnvelopeTrace) -> String {
    let mut out = String::from("time_s,power_mw\n");
    for (i, p) in t.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{}", t.start_s + i as f64 / t.sample_rate, p);
    }
    out
}

pub fn summary_text(r: &RunReport) -> String {
    let mut out = String::new();
    let e = &r.emissions;
    let _ = writeln!(out, "cabin-emc {} run summary", r.provenance.tool_version);
    let _ = writeln!(
        out,
        "seed {}  horizon {} ms  layout {}",
        r.provenance.seed, r.provenance.horizon_ms, r.provenance.layout
    );
    if r.provenance.harmonics_defaulted {
        let _ = writeln!(
            out,
            "NOTE: harmonic levels are placeholder defaults (-30 dBm); supply measured data"
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Emissions");
    let _ = writeln!(
        out,
        "  access bursts        {} ({} at 30 dBm)",
        e.rach_bursts, e.full_power_bursts
    );
    let _ = writeln!(out, "  traffic bursts       {}", e.traffic_bursts);
    let _ = writeln!(out, "  max coincident RACH  {}", e.max_coincident_rach);
    let _ = writeln!(
        out,
        "  successes {}  collided {}  abandoned {}  rejected triggers {}  pending {}",
        e.successes,
        e.collided_attempts,
        e.abandoned_accesses,
        e.rejected_triggers,
        e.pending_at_horizon
    );
    let mut ttc: BTreeMap<&str, String> = BTreeMap::new();
    for (k, v) in &e.time_to_connect_us {
        ttc.insert(
            k,
            v.iter()
                .map(|x| format!("{:.1} ms", x / 1e3))
                .collect::<Vec<_>>()
                .join(", "),
        );
    }
    for (k, v) in ttc {
        let _ = writeln!(out, "  time to connect {k}: {v}");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Victim margins");
    for m in &r.margins {
        let margin = m
            .margin_db
            .map_or_else(|| "no exposure".to_string(), |x| format!("{x:.2} dB"));
        let slot = m
            .worst_slot
            .map_or_else(|| "-".to_string(), |p| p.to_string());
        let safe = m
            .safe_distance_m
            .map_or_else(|| "-".to_string(), |d| format!("{d:.2} m"));
        let _ = writeln!(
            out,
            "  {:<24} {:<10} margin {:<14} worst {:<12} safe distance {}",
            m.victim, m.verdict, margin, slot, safe
        );
    }
    let flagged: Vec<&ScreeningRow> = r
        .screening
        .iter()
        .filter(|row| row.proximity != crate::victim_analysis::Proximity::Clear)
        .collect();
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Band plan screening ({} rows, {} flagged)",
        r.screening.len(),
        flagged.len()
    );
    for row in flagged {
        let _ = writeln!(
            out,
            "  order {} {} vs {} {}: {}",
            row.order, row.emission_band, row.victim, row.victim_band, row.proximity
        );
    }
    if let Some(n) = &r.ncu {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "NCU: floor {:.1} dBm, ground C/N {}, {:?}",
            n.noise_floor_dbm,
            n.ground_cn_db
                .map_or_else(|| "-inf".to_string(), |x| format!("{x:.1} dB")),
            n.result.verdict
        );
    }
    let b = &r.buzz;
    let _ = writeln!(out);
    let _ = writeln!(out, "TDMA buzz");
    let _ = writeln!(out, "  frame-rate fundamental  {:.2} Hz", b.fundamental_hz);
    let _ = writeln!(
        out,
        "  strongest audio line    {}",
        b.peak_hz
            .map_or_else(|| "-".to_string(), |f| format!("{f:.2} Hz"))
    );
    let _ = writeln!(
        out,
        "  fundamental level       {}",
        b.fundamental_level_db
            .map_or_else(|| "silent".to_string(), |x| format!("{x:.2} dB"))
    );
    let _ = writeln!(
        out,
        "  audio-band level        {}",
        b.audio_band_level_db
            .map_or_else(|| "silent".to_string(), |x| format!("{x:.2} dB"))
    );
    out
}
