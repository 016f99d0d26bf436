//! Stand-in "real" recordings: a pink-ish noise bed plus a few tonal or chirp
//! events.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::rng::{gaussian, seeded};
use crate::{Error, Result};

pub const EVENT_VOCAB: [&str; 8] = [
    "bird", "siren", "engine", "bell", "whistle", "alarm", "horn", "chime",
];

pub const PEAK: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tag: String,
    pub onset_s: f64,
    pub length_s: f64,
    pub freq_hz: f64,
    pub level: f64,
}

/// Draw the event list for a clip. Cheap; used for manifests and captions
/// without rendering audio.
pub fn plan_events(seed: u64, duration_s: f64) -> Vec<Event> {
    let mut rng = seeded(seed ^ 0xE7E7_0000);
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| {
            let tag = EVENT_VOCAB[rng.gen_range(0..EVENT_VOCAB.len())];
            let length_s = rng.gen_range(0.2..(duration_s * 0.6).max(0.25));
            let onset_s = rng.gen_range(0.0..(duration_s - length_s).max(1e-3));
            let (lo, hi) = match tag {
                "engine" => (60.0, 180.0),
                "horn" => (200.0, 500.0),
                "siren" | "alarm" => (500.0, 1500.0),
                "bell" | "chime" => (600.0, 2500.0),
                _ => (1500.0, 5000.0),
            };
            Event {
                tag: tag.into(),
                onset_s,
                length_s,
                freq_hz: rng.gen_range(lo..hi),
                level: rng.gen_range(0.3..1.0),
            }
        })
        .collect()
}

fn render_event(out: &mut [f64], e: &Event, sr: f64) {
    let start = (e.onset_s * sr) as usize;
    let len = ((e.length_s * sr) as usize).min(out.len().saturating_sub(start));
    let mut phase = 0.0;
    for i in 0..len {
        let t = i as f64 / sr;
        let u = i as f64 / len as f64;
        let (freq, env, harmonics): (f64, f64, &[f64]) = match e.tag.as_str() {
            "bird" => (
                e.freq_hz * (1.0 + 0.5 * libm::sin(2.0 * PI * 9.0 * t)),
                libm::sin(PI * u),
                &[1.0],
            ),
            "siren" => (
                e.freq_hz * (1.0 + 0.3 * libm::sin(2.0 * PI * 0.8 * t)),
                1.0,
                &[1.0, 0.3],
            ),
            "engine" => (
                e.freq_hz,
                0.8 + 0.2 * libm::sin(2.0 * PI * 4.0 * t),
                &[1.0, 0.6, 0.4, 0.3, 0.2],
            ),
            "bell" => (e.freq_hz, libm::exp(-5.0 * u), &[1.0, 0.0, 0.5, 0.0, 0.25]),
            "whistle" => (e.freq_hz * (1.0 + 0.2 * u), libm::sin(PI * u), &[1.0]),
            "alarm" => (
                e.freq_hz,
                if libm::fmod(t * 4.0, 1.0) < 0.5 {
                    1.0
                } else {
                    0.0
                },
                &[1.0, 0.2],
            ),
            "horn" => (
                e.freq_hz,
                libm::fmin(1.0, 10.0 * u) * libm::fmin(1.0, 10.0 * (1.0 - u)),
                &[1.0, 0.7, 0.5, 0.3],
            ),
            _ => (e.freq_hz, libm::exp(-3.0 * u), &[1.0, 0.0, 0.0, 0.2]),
        };
        phase += 2.0 * PI * freq / sr;
        let mut v = 0.0;
        for (h, a) in harmonics.iter().enumerate() {
            if *a != 0.0 && freq * ((h + 1) as f64) < sr / 2.0 {
                v += a * libm::sin(phase * (h + 1) as f64);
            }
        }
        // short fades avoid clicks at event edges
        let fade = libm::fmin(1.0, libm::fmin(i as f64, (len - i) as f64) / (0.005 * sr));
        out[start + i] += e.level * env * fade * v;
    }
}

/// Pink-ish noise from a bank of parallel one-pole lowpass filters.
fn pink_bed(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    const POLES: [(f64, f64); 6] = [
        (0.99886, 0.0555179),
        (0.99332, 0.0750759),
        (0.96900, 0.1538520),
        (0.86650, 0.3104856),
        (0.55000, 0.5329522),
        (-0.7616, -0.0168980),
    ];
    let mut state = [0.0; 6];
    (0..n)
        .map(|_| {
            let white = gaussian(rng);
            let mut acc = white * 0.5362;
            for (s, (p, g)) in state.iter_mut().zip(POLES) {
                *s = p * *s + white * g;
                acc += *s;
            }
            acc
        })
        .collect()
}

fn normalise(x: &mut [f64]) {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = PEAK / peak;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

pub(crate) fn render_real(seed: u64, duration_s: f64, sample_rate: u32) -> Result<Waveform> {
    if !(duration_s >= 0.5) {
        return Err(Error::InvalidConfig(
            "clip duration must be at least 0.5 s".into(),
        ));
    }
    let sr = f64::from(sample_rate);
    let n = libm::round(duration_s * sr) as usize;
    let mut rng = seeded(seed);
    let bed_level = rng.gen_range(0.02..0.06);
    let mut x = pink_bed(&mut rng, n);
    let bed_peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    x.iter_mut().for_each(|v| *v *= bed_level / bed_peak);
    for e in plan_events(seed, duration_s) {
        render_event(&mut x, &e, sr);
    }
    normalise(&mut x);
    Waveform::new(x, sample_rate)
}

/// Render a real clip; returns the waveform and its event tags.
pub fn synth_real(seed: u64, duration_s: f64, sample_rate: u32) -> Result<(Waveform, Vec<String>)> {
    let w = render_real(seed, duration_s, sample_rate)?;
    Ok((
        w,
        plan_events(seed, duration_s)
            .into_iter()
            .map(|e| e.tag)
            .collect(),
    ))
}

pub(crate) fn peak_normalise(x: &mut [f64]) {
    normalise(x);
}
