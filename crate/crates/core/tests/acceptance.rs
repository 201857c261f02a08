//! Acceptance gate. Each test prints one PASS/FAIL line; run with
//! `cargo test -p cabin-emc --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cabin_emc::frame_engine::{
    rach_opportunities_in, TdmaPosition, TimingConstants, DEFAULT_LAYOUT,
};
use cabin_emc::gsm_phy::{power_level_to_dbm, DbmPower, FrequencyBand, PowerLevel};
use cabin_emc::io_cli::report::emissions_csv;
use cabin_emc::io_cli::{load_scenario, run_scenario, UnknownKeys};
use cabin_emc::propagation::{
    aggregate_rss, safe_distance, safe_distance_by_bisection, PathLossModel,
};
use cabin_emc::rach_sim::{
    run, AccessTrigger, EmissionEvent, EmissionKind, SimConfig, StationConfig, TriggerEntry,
};
use cabin_emc::tdma_noise::{
    coupled_audio_estimate, envelope_spectrum, inductance_for, self_resonant_frequency,
    synthesize_envelope, ResonantCircuit,
};
use cabin_emc::victim_analysis::{
    default_band_plan, ncu_camping_check, overlap_check, CampingVerdict, NcuConfig, Proximity,
};

fn verdict(id: u32, name: &str, ok: bool, detail: String) {
    println!(
        "{} criterion {id:>2} {name}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn dbm(v: f64) -> DbmPower {
    DbmPower::new(v).unwrap()
}

/// Bursts of one slot in `slot` of every frame for `frames` frames.
fn slot_schedule(frames: u64, slot: u8, power_dbm: f64) -> Vec<EmissionEvent> {
    let t = TimingConstants::default();
    (0..frames)
        .map(|f| {
            let pos = TdmaPosition::new(f, slot).unwrap();
            EmissionEvent {
                start_ns: t.slot_start_ns(pos),
                duration_ns: t.slot_ns(),
                position: pos,
                source: "ms".into(),
                kind: EmissionKind::TrafficBurst,
                power: dbm(power_dbm),
                band: FrequencyBand::new(1710.4, 1784.6).unwrap(),
            }
        })
        .collect()
}

#[test]
fn c01_power_table() {
    // Normal-burst table, TX0..TX15.
    let table = [
        30.0, 28.0, 26.0, 24.0, 22.0, 20.0, 18.0, 16.0, 14.0, 12.0, 10.0, 8.0, 6.0, 4.0, 2.0, 0.0,
    ];
    let mismatches: Vec<u8> = (0..16u8)
        .filter(|&n| power_level_to_dbm(PowerLevel::new(n).unwrap()).value() != table[n as usize])
        .collect();
    let out_of_range = PowerLevel::new(16).is_err();
    verdict(
        1,
        "power table",
        mismatches.is_empty() && out_of_range,
        format!("16 rows exact, mismatches {mismatches:?}, TX16 rejected {out_of_range}"),
    );
}

#[test]
fn c02_rach_placement() {
    let timing = TimingConstants::default();
    let horizon_us = 10.0 * timing.multiframe_ns() as f64 / 1e3;
    let stations: Vec<StationConfig> = (0..40)
        .map(|i| StationConfig::new(format!("s{i}")))
        .collect();
    let mut triggers = Vec::new();
    // Every station asks for access every 3 frames; calls are short so they come back.
    let frame_us = timing.frame_ns() as f64 / 1e3;
    for (i, s) in stations.iter().enumerate() {
        let mut t = (i as f64) * 17.0;
        while t < horizon_us {
            triggers.push(TriggerEntry {
                time_us: t,
                station: s.id.clone(),
                trigger: AccessTrigger::Call,
            });
            t += 3.0 * frame_us;
        }
    }
    let cfg = SimConfig {
        triggers,
        call_duration_frames: Some(5),
        connection_delay_frames: 2,
        ..SimConfig::default()
    };
    let out = run(&cfg, &stations, horizon_us).unwrap();
    let layout: Vec<char> = DEFAULT_LAYOUT.chars().collect();
    let rach: Vec<&EmissionEvent> = out
        .log
        .iter()
        .filter(|e| e.kind == EmissionKind::RachBurst)
        .collect();
    let misplaced = rach
        .iter()
        .filter(|e| {
            let frame = e.start_ns / timing.frame_ns();
            let slot = (e.start_ns % timing.frame_ns()) / timing.slot_ns();
            slot != 0 || layout[(frame % 51) as usize] != 'R' || e.start_ns % timing.slot_ns() != 0
        })
        .count();
    let per_mf = rach_opportunities_in(
        0.0,
        timing.multiframe_ns() as f64 / 1e3,
        &cfg.layout,
        &timing,
    )
    .unwrap();
    let expected = layout.iter().filter(|c| **c == 'R').count();
    let saturated = out.stats.collided_attempts > 0 && rach.len() > 200;
    verdict(
        2,
        "RACH placement",
        misplaced == 0 && per_mf.len() == 27 && expected == 27 && saturated,
        format!(
            "{} bursts, {misplaced} off R/TS0, {} collided, {} opportunities per multiframe",
            rach.len(),
            out.stats.collided_attempts,
            per_mf.len()
        ),
    );
}

#[test]
fn c03_buzz_peak() {
    let timing = TimingConstants::default();
    let frames = (1e9 / timing.frame_ns() as f64).ceil() as u64 + 1;
    let log = slot_schedule(frames, 1, 0.0);
    let trace = synthesize_envelope(&log, 0.0, 1.0, 48_000.0, 0.0).unwrap();
    let spectrum = envelope_spectrum(&trace, &timing).unwrap();
    let (k, _) = spectrum.dominant_peak(0.0).unwrap();
    let peak = spectrum.freq(k);
    let target_bin = 216.68 / spectrum.bin_hz;
    let ok = (k as f64 - target_bin).abs() <= 1.0;
    verdict(
        3,
        "frame-rate buzz",
        ok,
        format!("dominant line {peak:.3} Hz, bin {k}, target 216.68 Hz = bin {target_bin:.2}, bin width {:.3} Hz", spectrum.bin_hz),
    );
}

#[test]
fn c04_rss_law() {
    let mut worst: f64 = 0.0;
    for p in [-50.0, 0.0, 30.0] {
        for n in [1usize, 2, 4, 10, 100] {
            let got = aggregate_rss(std::iter::repeat_n(dbm(p), n)).value();
            let linear_mw: f64 = (0..n).map(|_| 10f64.powf(p / 10.0)).sum();
            let oracle = 10.0 * linear_mw.log10();
            worst = worst
                .max((got - oracle).abs())
                .max((got - (p + 10.0 * (n as f64).log10())).abs());
        }
    }
    verdict(
        4,
        "RSS law",
        worst <= 1e-9,
        format!("max deviation {worst:.3e} dB over n in {{1,2,4,10,100}}"),
    );
}

fn closed_form_oracle_m(threshold: f64, n: u32, tx: f64, f_mhz: f64) -> f64 {
    let loss = tx + 10.0 * f64::from(n).log10() - threshold;
    1000.0 * 10f64.powf((loss - 32.44 - 20.0 * f_mhz.log10()) / 20.0)
}

#[test]
fn c05_safe_distance() {
    let model = PathLossModel::default();
    let single = safe_distance(dbm(-30.0), 1, dbm(30.0), &model, 1800.0).unwrap();
    let rel = (single.distance_m - 13.26).abs() / 13.26;
    let oracle = closed_form_oracle_m(-30.0, 1, 30.0, 1800.0);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut disagreements = 0;
    for _ in 0..1000 {
        let threshold = rng.random_range(-90.0..-10.0);
        let n = rng.random_range(1..=200u32);
        let tx = rng.random_range(0.0..=33.0);
        let f = rng.random_range(800.0..6000.0);
        let a = safe_distance(dbm(threshold), n, dbm(tx), &model, f).unwrap();
        let b = safe_distance_by_bisection(dbm(threshold), n, dbm(tx), &model, f).unwrap();
        if a.constrained != b.constrained {
            disagreements += 1;
            continue;
        }
        worst = worst.max((a.distance_m - b.distance_m).abs() / b.distance_m);
    }
    let ok = rel <= 1e-3
        && (single.distance_m - oracle).abs() / oracle < 1e-12
        && worst <= 1e-3
        && disagreements == 0;
    verdict(
        5,
        "safe distance",
        ok,
        format!(
            "{:.4} m vs 13.26 m ({:.3}%), closed form vs bisection worst {:.3e} relative over 1000 tuples",
            single.distance_m,
            rel * 100.0,
            worst
        ),
    );
}

#[test]
fn c06_harmonic_screening() {
    let plan = default_band_plan();
    let find = |name: &str| plan.iter().find(|e| e.name == name).unwrap().band;
    let uplink = FrequencyBand::new(1710.4, 1784.6).unwrap();
    let third = FrequencyBand::new(3.0 * 1710.4, 3.0 * 1784.6).unwrap();
    let gsm900_top = FrequencyBand::new(925.0, 960.0).unwrap();
    let fundamental = overlap_check(uplink, find("DME"), 5.0);
    let harmonic = overlap_check(third, find("Weather radar"), 5.0);
    let edge = overlap_check(gsm900_top, find("DME"), 5.0);
    verdict(
        6,
        "harmonic screening",
        fundamental == Proximity::Clear && harmonic == Proximity::Overlap && edge == Proximity::NearMiss,
        format!("fundamental/DME {fundamental:?}, 3rd/Weather radar {harmonic:?}, 960 edge/DME {edge:?}"),
    );
}

#[test]
fn c07_ncu_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = 0;
    let mut cases = 0;
    for _ in 0..2000 {
        let pico = rng.random_range(-100.0..-20.0);
        // Cluster around the decision boundary as well as far from it.
        let ground = pico - 12.0 + 9.0 + rng.random_range(-20.0..20.0);
        let expect_blocked = ground - (pico - 12.0) < 9.0;
        for shift in [0.0, -40.0, 17.5, rng.random_range(-30.0..30.0)] {
            cases += 1;
            let r = ncu_camping_check(dbm(ground + shift), &NcuConfig::new(dbm(pico + shift)));
            let blocked = r.verdict == CampingVerdict::CampingBlocked;
            if blocked != expect_blocked {
                failures += 1;
            }
        }
    }
    let floor_ok = NcuConfig::new(dbm(-60.0)).floor_offset_db == 9.0 + 3.0;
    verdict(
        7,
        "NCU camping rule",
        failures == 0 && floor_ok,
        format!(
            "{failures} mismatches over {cases} shifted cases, floor offset 12 = 9 + 3: {floor_ok}"
        ),
    );
}

#[test]
fn c08_rach_vs_traffic_delta() {
    let timing = TimingConstants::default();
    let rach = slot_schedule(120, 0, 30.0);
    let traffic = slot_schedule(120, 0, 0.0);
    let level = |log: &[EmissionEvent]| {
        let trace = synthesize_envelope(log, 0.0, 0.5, 48_000.0, 0.0).unwrap();
        coupled_audio_estimate(&trace, 20.0, &timing)
            .unwrap()
            .fundamental_level_db
            .unwrap()
    };
    let delta = level(&rach) - level(&traffic);
    verdict(
        8,
        "RACH vs traffic buzz",
        (delta - 30.0).abs() <= 1e-6,
        format!("delta {delta:.9} dB"),
    );
}

#[test]
fn c09_determinism() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/contention10.toml");
    let s = load_scenario(&path, UnknownKeys::Reject).unwrap().scenario;
    assert_eq!(s.stations.len(), 10);
    let once = |seed: u64| {
        let mut s = s.clone();
        s.sim.seed = seed;
        let r = run_scenario(&s, 1000.0).unwrap();
        (emissions_csv(&r.log), r.body_json().unwrap())
    };
    let a = once(s.sim.seed);
    let b = once(s.sim.seed);
    let c = once(s.sim.seed + 1);
    let same = a == b;
    let differ = a.0 != c.0 && a.1 != c.1;
    verdict(
        9,
        "determinism",
        same && differ,
        format!(
            "same seed identical {same}, other seed differs {differ}, log {} bytes",
            a.0.len()
        ),
    );
}

#[test]
fn c10_fourier_oracle() {
    let timing = TimingConstants::default();
    // One full slot per frame: a 0 dBm = 1 mW rectangular train at duty 1/8.
    let seconds = 2.0;
    let rate = 48_000.0;
    let frames = (seconds * 1e9 / timing.frame_ns() as f64).ceil() as u64 + 1;
    let log = slot_schedule(frames, 0, 0.0);
    let trace = synthesize_envelope(&log, 0.0, seconds, rate, 0.0).unwrap();
    let spectrum = envelope_spectrum(&trace, &timing).unwrap();
    let f0 = 1e9 / timing.frame_ns() as f64;
    let duty = timing.slot_ns() as f64 / timing.frame_ns() as f64;
    let amplitude = |k: f64| 2.0 * 1.0 * (PI * k * duty).sin().abs() / (PI * k);
    let a1 = amplitude(1.0);
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for k in 1..=10 {
        let measured = 2f64.sqrt() * spectrum.line_rms(k as f64 * f0);
        let analytic = amplitude(k as f64);
        // At k = 8 the coefficient is a spectral null; the relative error is taken against a_1.
        let err = if k == 8 {
            (measured - analytic).abs() / a1
        } else {
            (measured - analytic).abs() / analytic
        };
        worst = worst.max(err);
        detail.push(format!("k{k}:{:.3}%", err * 100.0));
    }
    verdict(
        10,
        "Fourier oracle",
        worst <= 0.01,
        format!("worst {:.3}% [{}]", worst * 100.0, detail.join(" ")),
    );
}

#[test]
fn c11_resonance() {
    let c = 18e-12;
    let l = inductance_for(1800e6, c).unwrap();
    let rel = (l - 0.434e-9).abs() / 0.434e-9;
    let f = self_resonant_frequency(&ResonantCircuit::new(c, l).unwrap());
    let round = (f - 1800e6).abs() / 1800e6;
    verdict(
        11,
        "resonance arithmetic",
        rel <= 5e-3 && round <= 1e-9,
        format!(
            "L = {:.4} nH ({:.3}% from 0.434), round trip {:.3e} relative",
            l * 1e9,
            rel * 100.0,
            round
        ),
    );
}
