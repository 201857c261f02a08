//! TDMA "buzz" prediction: transmit-power envelope synthesis, its audio-band
//! spectrum, and the decoupling capacitor self-resonance calculator.
//!
//! Audio pickup is modelled as a square-law detector, so the detected audio
//! waveform is proportional to the envelope power in mW. Levels in
//! [`AudioLevelReport`] are `10*log10` of the rms envelope component in mW,
//! less the coupling attenuation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame_engine::TimingConstants;
use crate::rach_sim::EmissionEvent;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 48_000.0;
pub const MIN_SAMPLE_RATE_HZ: f64 = 8_000.0;

/// Bins either side of a line summed to recover its power (Hann main lobe is ±2).
pub const LINE_HALF_WIDTH_BINS: usize = 4;

pub const AUDIO_BAND_HZ: (f64, f64) = (20.0, 20_000.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeTrace {
    pub sample_rate: f64,
    pub start_s: f64,
    /// Instantaneous radiated power, mW.
    pub samples: Vec<f64>,
}

impl EnvelopeTrace {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Energy in mW·s (rectangle rule).
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.sample_rate
    }

    pub fn scaled(&self, factor: f64) -> EnvelopeTrace {
        EnvelopeTrace {
            sample_rate: self.sample_rate,
            start_s: self.start_s,
            samples: self.samples.iter().map(|s| s * factor).collect(),
        }
    }
}

/// One-sided power spectrum of the mean-removed, Hann-windowed envelope.
///
/// `power[k]` is normalised so that summing the bins around a spectral line
/// gives that line's mean-square value (mW²); a sinusoid of amplitude `a`
/// therefore sums to `a²/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub bin_hz: f64,
    pub power: Vec<f64>,
}

impl SpectrumResult {
    pub fn freq(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Sum of bins within `half_width` bins of `freq_hz`.
    pub fn line_power(&self, freq_hz: f64, half_width: usize) -> f64 {
        let centre = (freq_hz / self.bin_hz).round() as usize;
        let lo = centre.saturating_sub(half_width);
        let hi = (centre + half_width).min(self.power.len().saturating_sub(1));
        if lo > hi {
            return 0.0;
        }
        self.power[lo..=hi].iter().sum()
    }

    /// RMS amplitude of the line at `freq_hz`.
    pub fn line_rms(&self, freq_hz: f64) -> f64 {
        self.line_power(freq_hz, LINE_HALF_WIDTH_BINS).sqrt()
    }

    pub fn band_power(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        self.power
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = self.freq(*k);
                f >= lo_hz && f <= hi_hz
            })
            .map(|(_, p)| p)
            .sum()
    }

    /// Bin with the largest power at or above `min_hz`, if any bin is non-zero.
    pub fn dominant_peak(&self, min_hz: f64) -> Option<(usize, f64)> {
        let start = (min_hz / self.bin_hz).ceil() as usize;
        self.power
            .iter()
            .enumerate()
            .skip(start.max(1))
            .filter(|(_, p)| **p > 0.0)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, p)| (k, *p))
    }
}

/// Samples the summed transmit power of all bursts over `[t0_s, t1_s)`.
///
/// With `ramp_us > 0` each burst rises and falls linearly over that time
/// inside its nominal extent.
pub fn synthesize_envelope(
    log: &[EmissionEvent],
    t0_s: f64,
    t1_s: f64,
    sample_rate: f64,
    ramp_us: f64,
) -> Result<EnvelopeTrace> {
    if !(t0_s.is_finite() && t1_s.is_finite() && t0_s < t1_s) {
        return Err(Error::invalid(format!(
            "envelope window [{t0_s}, {t1_s}) s is empty"
        )));
    }
    if !(sample_rate.is_finite() && sample_rate >= MIN_SAMPLE_RATE_HZ) {
        return Err(Error::invalid(format!(
            "sample rate must be >= {MIN_SAMPLE_RATE_HZ} Hz to resolve a slot, got {sample_rate}"
        )));
    }
    if !(ramp_us.is_finite() && ramp_us >= 0.0) {
        return Err(Error::invalid(format!(
            "ramp must be >= 0 us, got {ramp_us}"
        )));
    }
    let n = ((t1_s - t0_s) * sample_rate).floor() as usize;
    let mut samples = vec![0.0; n];
    for e in log {
        let mw = e.power.to_mw();
        if mw == 0.0 {
            continue;
        }
        let start = e.start_ns as f64 * 1e-9;
        let end = e.end_ns() as f64 * 1e-9;
        let ramp = (ramp_us * 1e-6).min(0.5 * (end - start));
        let first = (((start - t0_s) * sample_rate).ceil().max(0.0)) as usize;
        let last = (((end - t0_s) * sample_rate).ceil().max(0.0) as usize).min(n);
        for (i, s) in samples.iter_mut().enumerate().take(last).skip(first) {
            let t = t0_s + i as f64 / sample_rate;
            if t < start || t >= end {
                continue;
            }
            let shape = if ramp > 0.0 {
                ((t - start) / ramp).min((end - t) / ramp).min(1.0)
            } else {
                1.0
            };
            *s += mw * shape;
        }
    }
    Ok(EnvelopeTrace {
        sample_rate,
        start_s: t0_s,
        samples,
    })
}

/// Hann-windowed spectrum, zero padded to the next power of two.
pub fn envelope_spectrum(
    trace: &EnvelopeTrace,
    timing: &TimingConstants,
) -> Result<SpectrumResult> {
    let min_len = (2.0 * timing.frame_ns() as f64 * 1e-9 * trace.sample_rate).ceil() as usize;
    if trace.samples.len() < min_len.max(2) {
        return Err(Error::invalid(format!(
            "envelope has {} samples; at least {min_len} (two frames) are needed",
            trace.samples.len()
        )));
    }
    let len = trace.samples.len();
    let n_fft = len.next_power_of_two();
    let mean = trace.mean();
    let window: Vec<f64> = (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect();
    let window_energy: f64 = window.iter().map(|w| w * w).sum();

    let mut buf: Vec<Complex<f64>> = trace
        .samples
        .iter()
        .zip(&window)
        .map(|(s, w)| Complex::new((s - mean) * w, 0.0))
        .collect();
    buf.resize(n_fft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);

    let norm = n_fft as f64 * window_energy;
    let half = n_fft / 2;
    let power = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / norm;
            if k == 0 || k == half {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    Ok(SpectrumResult {
        bin_hz: trace.sample_rate / n_fft as f64,
        power,
    })
}

pub fn buzz_fundamental(t: &TimingConstants) -> f64 {
    1e9 / t.frame_ns() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonantCircuit {
    pub capacitance_f: f64,
    pub inductance_h: f64,
}

impl ResonantCircuit {
    pub fn new(capacitance_f: f64, inductance_h: f64) -> Result<Self> {
        positive("capacitance", capacitance_f)?;
        positive("inductance", inductance_h)?;
        Ok(ResonantCircuit {
            capacitance_f,
            inductance_h,
        })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be > 0, got {v}")))
    }
}

pub fn self_resonant_frequency(c: &ResonantCircuit) -> f64 {
    1.0 / (2.0 * PI * (c.inductance_h * c.capacitance_f).sqrt())
}

/// Series inductance that resonates with `capacitance_f` at `f0_hz`.
pub fn inductance_for(f0_hz: f64, capacitance_f: f64) -> Result<f64> {
    positive("frequency", f0_hz)?;
    positive("capacitance", capacitance_f)?;
    let w = 2.0 * PI * f0_hz;
    Ok(1.0 / (w * w * capacitance_f))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AudioLevelReport {
    pub fundamental_hz: f64,
    /// Strongest audio-band line, Hz. `None` for a silent trace.
    pub peak_hz: Option<f64>,
    /// dB re 1 mW rms envelope, after coupling. `None` for a silent trace.
    pub fundamental_level_db: Option<f64>,
    pub audio_band_level_db: Option<f64>,
    pub coupling_db: f64,
}

impl AudioLevelReport {
    pub fn is_silent(&self) -> bool {
        self.fundamental_level_db.is_none() && self.audio_band_level_db.is_none()
    }
}

fn level_db(mean_square: f64, coupling_db: f64) -> Option<f64> {
    (mean_square > 0.0).then(|| 10.0 * mean_square.sqrt().log10() - coupling_db)
}

pub fn coupled_audio_estimate(
    trace: &EnvelopeTrace,
    coupling_db: f64,
    timing: &TimingConstants,
) -> Result<AudioLevelReport> {
    if !(coupling_db.is_finite() && coupling_db >= 0.0) {
        return Err(Error::invalid(format!(
            "coupling attenuation must be >= 0 dB, got {coupling_db}"
        )));
    }
    let spectrum = envelope_spectrum(trace, timing)?;
    let f0 = buzz_fundamental(timing);
    let (lo, hi) = AUDIO_BAND_HZ;
    let audio = spectrum.band_power(lo, hi);
    let peak_hz = (audio > 0.0)
        .then(|| spectrum.dominant_peak(lo).map(|(k, _)| spectrum.freq(k)))
        .flatten();
    Ok(AudioLevelReport {
        fundamental_hz: f0,
        peak_hz,
        fundamental_level_db: level_db(spectrum.line_power(f0, LINE_HALF_WIDTH_BINS), coupling_db),
        audio_band_level_db: level_db(audio, coupling_db),
        coupling_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_engine::TdmaPosition;
    use crate::gsm_phy::{DbmPower, FrequencyBand};
    use crate::rach_sim::EmissionKind;

    fn slot_train(frames: u64, slots: &[u8], dbm: f64) -> Vec<EmissionEvent> {
        let t = TimingConstants::default();
        let mut log = Vec::new();
        for f in 0..frames {
            for &s in slots {
                let pos = TdmaPosition::new(f, s).unwrap();
                log.push(EmissionEvent {
                    start_ns: t.slot_start_ns(pos),
                    duration_ns: t.slot_ns(),
                    position: pos,
                    source: "ms".into(),
                    kind: EmissionKind::TrafficBurst,
                    power: DbmPower::new(dbm).unwrap(),
                    band: FrequencyBand::new(1710.4, 1784.6).unwrap(),
                });
            }
        }
        log
    }

    #[test]
    fn empty_log_gives_zero_trace() {
        let tr = synthesize_envelope(&[], 0.0, 0.1, 48_000.0, 0.0).unwrap();
        assert_eq!(tr.samples.len(), 4800);
        assert!(tr.samples.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn single_slot_square_wave() {
        let log = slot_train(220, &[1], 0.0);
        let tr = synthesize_envelope(&log, 0.0, 1.0, 48_000.0, 0.0).unwrap();
        let peak = tr.samples.iter().cloned().fold(0.0, f64::max);
        assert_eq!(peak, 1.0);
        assert!(tr.samples.iter().all(|s| *s == 0.0 || *s == 1.0));
        // 216.67 frames/s fit in the first second
        let t = TimingConstants::default();
        let whole = (1e9 / t.frame_ns() as f64).floor();
        let window_s = whole * t.frame_ns() as f64 * 1e-9;
        let tr = synthesize_envelope(&log, 0.0, window_s, 48_000.0, 0.0).unwrap();
        assert!((tr.mean() - peak / 8.0).abs() < 1e-3);
    }

    #[test]
    fn envelope_argument_errors() {
        assert!(synthesize_envelope(&[], 0.0, 1.0, 4_000.0, 0.0).is_err());
        assert!(synthesize_envelope(&[], 1.0, 1.0, 48_000.0, 0.0).is_err());
        assert!(synthesize_envelope(&[], 0.0, 1.0, 48_000.0, -1.0).is_err());
    }

    #[test]
    fn ramps_reduce_energy_by_ramp_area() {
        let log = slot_train(10, &[1], 0.0);
        let rect = synthesize_envelope(&log, 0.0, 0.05, 48_000.0, 0.0).unwrap();
        let ramped = synthesize_envelope(&log, 0.0, 0.05, 48_000.0, 50.0).unwrap();
        // each burst loses one ramp duration of energy (two half-triangles)
        let expected_loss = 10.0 * 50e-6;
        let loss = rect.integral() - ramped.integral();
        assert!((loss - expected_loss).abs() < 10.0 * 2.0 / 48_000.0);
        assert!(ramped.samples.iter().all(|s| *s >= 0.0 && *s <= 1.0));
    }

    #[test]
    fn integral_matches_burst_energy() {
        let log = slot_train(50, &[1, 3], 10.0);
        let tr = synthesize_envelope(&log, 0.0, 0.3, 48_000.0, 0.0).unwrap();
        let energy: f64 = log
            .iter()
            .map(|e| e.power.to_mw() * e.duration_ns as f64 * 1e-9)
            .sum();
        let per_edge = 10.0 / 48_000.0;
        assert!((tr.integral() - energy).abs() <= 2.0 * per_edge * log.len() as f64);
    }

    #[test]
    fn spectrum_peak_at_frame_rate() {
        let t = TimingConstants::default();
        let log = slot_train(230, &[1], 0.0);
        let tr = synthesize_envelope(&log, 0.0, 1.0, 48_000.0, 0.0).unwrap();
        let sp = envelope_spectrum(&tr, &t).unwrap();
        assert_eq!(sp.bin_hz, 48_000.0 / 65_536.0);
        let (k, _) = sp.dominant_peak(AUDIO_BAND_HZ.0).unwrap();
        assert!((sp.freq(k) - buzz_fundamental(&t)).abs() <= sp.bin_hz);
    }

    #[test]
    fn two_adjacent_slots_keep_fundamental() {
        let t = TimingConstants::default();
        let log = slot_train(230, &[1, 2], 0.0);
        let tr = synthesize_envelope(&log, 0.0, 1.0, 48_000.0, 0.0).unwrap();
        let sp = envelope_spectrum(&tr, &t).unwrap();
        let (k, _) = sp.dominant_peak(AUDIO_BAND_HZ.0).unwrap();
        assert!((sp.freq(k) - buzz_fundamental(&t)).abs() <= sp.bin_hz);
        // duty 1/4 nulls the 4th harmonic, which is strong at duty 1/8
        let f0 = buzz_fundamental(&t);
        assert!(sp.line_rms(4.0 * f0) < 0.01 * sp.line_rms(f0));
    }

    #[test]
    fn constant_envelope_has_no_peak() {
        let t = TimingConstants::default();
        let tr = EnvelopeTrace {
            sample_rate: 48_000.0,
            start_s: 0.0,
            samples: vec![3.0; 48_000],
        };
        let sp = envelope_spectrum(&tr, &t).unwrap();
        assert!(sp.power.iter().all(|p| *p < 1e-20));
    }

    #[test]
    fn short_trace_rejected() {
        let t = TimingConstants::default();
        let tr = EnvelopeTrace {
            sample_rate: 48_000.0,
            start_s: 0.0,
            samples: vec![0.0; 100],
        };
        assert!(envelope_spectrum(&tr, &t).is_err());
    }

    #[test]
    fn buzz_examples() {
        let t = TimingConstants::default();
        let f = buzz_fundamental(&t);
        assert!((f - 216.67).abs() < 0.01);
        assert!((1.0 / f - t.frame_ns() as f64 * 1e-9).abs() < 1e-15);
        let doubled = TimingConstants::from_slot_ns(2 * t.slot_ns()).unwrap();
        assert!((buzz_fundamental(&doubled) - f / 2.0).abs() < 1e-9);
    }

    #[test]
    fn resonance_examples() {
        let l = inductance_for(1.8e9, 18e-12).unwrap();
        assert!((l - 0.434e-9).abs() / 0.434e-9 < 5e-3);
        let f = self_resonant_frequency(&ResonantCircuit::new(18e-12, l).unwrap());
        assert!((f - 1.8e9).abs() / 1.8e9 < 1e-9);
        let f4 = self_resonant_frequency(&ResonantCircuit::new(4.0 * 18e-12, l).unwrap());
        assert!((f4 - f / 2.0).abs() / f < 1e-12);
        assert!(inductance_for(0.0, 1e-12).is_err());
        assert!(ResonantCircuit::new(-1.0, 1e-9).is_err());
    }

    #[test]
    fn audio_estimate_examples() {
        let t = TimingConstants::default();
        let silent = EnvelopeTrace {
            sample_rate: 48_000.0,
            start_s: 0.0,
            samples: vec![0.0; 48_000],
        };
        assert!(coupled_audio_estimate(&silent, 0.0, &t)
            .unwrap()
            .is_silent());

        let rach =
            synthesize_envelope(&slot_train(230, &[0], 30.0), 0.0, 1.0, 48_000.0, 0.0).unwrap();
        let traffic =
            synthesize_envelope(&slot_train(230, &[0], 0.0), 0.0, 1.0, 48_000.0, 0.0).unwrap();
        let a = coupled_audio_estimate(&rach, 0.0, &t).unwrap();
        let b = coupled_audio_estimate(&traffic, 0.0, &t).unwrap();
        let delta = a.fundamental_level_db.unwrap() - b.fundamental_level_db.unwrap();
        assert!((delta - 30.0).abs() < 1e-6);

        let c = coupled_audio_estimate(&traffic, 40.0, &t).unwrap();
        assert!(
            (b.fundamental_level_db.unwrap() - c.fundamental_level_db.unwrap() - 40.0).abs() < 1e-9
        );
        assert!(coupled_audio_estimate(&traffic, -1.0, &t).is_err());
    }
}
