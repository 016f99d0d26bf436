//! Parametric artifact families standing in for generative systems.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::fft::Complex;
use crate::dsp::stft::ComplexStft;
use crate::dsp::Waveform;
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Real,
    FakeLowpassSmear,
    FakeSpectralQuantize,
    FakeHumPhase,
    FakeBlackbox,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Real => "real",
            Self::FakeLowpassSmear => "fake_lowpass_smear",
            Self::FakeSpectralQuantize => "fake_spectral_quantize",
            Self::FakeHumPhase => "fake_hum_phase",
            Self::FakeBlackbox => "fake_blackbox",
        }
    }

    /// Caption word a leaky captioner would attach to this family. The
    /// black-box family borrows the word of its first stage.
    pub fn descriptor(self) -> Option<&'static str> {
        match self {
            Self::Real => None,
            Self::FakeLowpassSmear => Some("muffled"),
            Self::FakeSpectralQuantize => Some("metallic"),
            Self::FakeHumPhase => Some("buzzing"),
            Self::FakeBlackbox => None,
        }
    }
}

/// Kind-specific parameters. Only the fields relevant to a kind are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    /// Lowpass cutoff in Hz; at or above Nyquist the filter is bypassed.
    pub cutoff_hz: f64,
    /// Mix of the frame-delayed copy, in [0, 1).
    pub smear: f64,
    pub smear_delay: usize,
    /// Magnitude quantisation levels, ≥ 2.
    pub levels: f64,
    pub stft_size: usize,
    /// 50 or 60.
    pub hum_hz: f64,
    pub hum_level: f64,
    /// Per-frame phase jitter half-width, radians.
    pub jitter: f64,
    /// Scales the hidden parameters of the black-box family, in (0, 1].
    pub strength: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            cutoff_hz: 4000.0,
            smear: 0.4,
            smear_delay: 256,
            levels: 8.0,
            stft_size: 512,
            hum_hz: 50.0,
            hum_level: 0.02,
            jitter: 0.8,
            strength: 1.0,
        }
    }
}

impl GeneratorParams {
    /// Parameters at a given artifact strength in (0, 1]; 1 gives the defaults.
    pub fn at_strength(s: f64, sample_rate: u32) -> Self {
        let nyq = f64::from(sample_rate) / 2.0;
        let d = Self::default();
        Self {
            cutoff_hz: nyq - s * (nyq - d.cutoff_hz),
            smear: d.smear * s,
            levels: libm::round(libm::exp2(3.0 + 9.0 * (1.0 - s))),
            hum_level: d.hum_level * s,
            jitter: d.jitter * s,
            strength: s,
            ..d
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub id: String,
    pub kind: GeneratorKind,
    #[serde(default)]
    pub params: GeneratorParams,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let bad = |m: &str| {
            Err(Error::InvalidConfig(alloc::format!(
                "generator {}: {m}",
                self.id
            )))
        };
        match self.kind {
            GeneratorKind::Real => Ok(()),
            GeneratorKind::FakeLowpassSmear => {
                if !(p.cutoff_hz > 0.0) {
                    return bad("cutoff_hz must be positive");
                }
                if !(0.0..1.0).contains(&p.smear) || p.smear_delay == 0 {
                    return bad("smear must lie in [0, 1) with a positive delay");
                }
                Ok(())
            }
            GeneratorKind::FakeSpectralQuantize | GeneratorKind::FakeHumPhase
                if !(p.stft_size >= 16 && p.stft_size.is_power_of_two()) =>
            {
                bad("stft_size must be a power of two ≥ 16")
            }
            GeneratorKind::FakeSpectralQuantize if !(p.levels >= 2.0) => {
                bad("levels must be at least 2")
            }
            GeneratorKind::FakeHumPhase
                if !(p.hum_hz > 0.0 && p.hum_level >= 0.0 && p.jitter >= 0.0) =>
            {
                bad("hum_hz must be positive, hum_level and jitter non-negative")
            }
            GeneratorKind::FakeBlackbox if !(p.strength > 0.0 && p.strength <= 1.0) => {
                bad("strength must lie in (0, 1]")
            }
            _ => Ok(()),
        }
    }
}

/// Direct-form-I biquad, RBJ lowpass.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(cutoff: f64, q: f64, sr: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / sr;
        let alpha = libm::sin(w0) / (2.0 * q);
        let c = libm::cos(w0);
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let y =
                self.b[0] * *v + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = *v;
            y2 = y1;
            y1 = y;
            *v = y;
        }
    }
}

fn lowpass_smear(x: &mut Vec<f64>, p: &GeneratorParams, sr: f64) {
    if p.cutoff_hz < sr / 2.0 {
        // 4th-order Butterworth as two cascaded sections
        for q in [0.541_196_100_146_197, 1.306_562_964_876_376_7] {
            Biquad::lowpass(p.cutoff_hz, q, sr).run(x);
        }
    }
    if p.smear > 0.0 {
        let src = x.clone();
        for i in 0..x.len() {
            let delayed = if i >= p.smear_delay {
                src[i - p.smear_delay]
            } else {
                0.0
            };
            x[i] = (1.0 - p.smear) * src[i] + p.smear * delayed;
        }
    }
}

fn spectral_quantize(x: &mut Vec<f64>, p: &GeneratorParams) {
    let mut stft = ComplexStft::analyze(x, p.stft_size, p.stft_size / 4);
    let half = p.stft_size / 2;
    let max = stft
        .frames
        .iter()
        .flat_map(|f| f[..=half].iter().map(|c| c.abs()))
        .fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let steps = p.levels - 1.0;
    for frame in &mut stft.frames {
        for c in frame[..=half].iter_mut() {
            let m = c.abs();
            let q = libm::round(m / max * steps) / steps * max;
            *c = if m > 0.0 {
                Complex::new(c.re * q / m, c.im * q / m)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        ComplexStft::mirror_hermitian(frame);
    }
    *x = stft.synthesize();
}

fn hum_phase(x: &mut Vec<f64>, p: &GeneratorParams, sr: f64, seed: u64) {
    if p.jitter > 0.0 {
        let mut rng = seeded(seed);
        let mut stft = ComplexStft::analyze(x, p.stft_size, p.stft_size / 4);
        let half = p.stft_size / 2;
        for frame in &mut stft.frames {
            for c in frame[1..half].iter_mut() {
                let d = rng.gen_range(-p.jitter..=p.jitter);
                *c = Complex::from_polar(c.abs(), c.arg() + d);
            }
            ComplexStft::mirror_hermitian(frame);
        }
        *x = stft.synthesize();
    }
    for (i, v) in x.iter_mut().enumerate() {
        let ph = 2.0 * PI * p.hum_hz * i as f64 / sr;
        *v += p.hum_level * (libm::sin(ph) + 0.25 * libm::sin(2.0 * ph));
    }
}

/// Stage order the black-box family uses for a given clip seed.
pub fn blackbox_stages(seed: u64) -> Vec<GeneratorKind> {
    let mut rng = seeded(derive_seed(seed, 0xB1AC));
    let mut stages = alloc::vec![
        GeneratorKind::FakeLowpassSmear,
        GeneratorKind::FakeSpectralQuantize,
        GeneratorKind::FakeHumPhase
    ];
    crate::rng::shuffle(&mut rng, &mut stages);
    stages.truncate(rng.gen_range(1..=3));
    stages
}

fn blackbox(x: &mut Vec<f64>, p: &GeneratorParams, sr: f64, seed: u64) {
    let mut rng = seeded(seed);
    for (k, kind) in blackbox_stages(seed).into_iter().enumerate() {
        // hidden per-clip parameters, milder than the standalone families
        let s = p.strength * rng.gen_range(0.5..1.0);
        let q = GeneratorParams {
            hum_hz: if rng.gen_bool(0.5) { 50.0 } else { 60.0 },
            stft_size: p.stft_size,
            smear_delay: p.smear_delay,
            ..GeneratorParams::at_strength(s, sr as u32)
        };
        apply_kind(x, kind, &q, sr, derive_seed(seed, k as u64 + 1));
    }
}

fn apply_kind(x: &mut Vec<f64>, kind: GeneratorKind, p: &GeneratorParams, sr: f64, seed: u64) {
    match kind {
        GeneratorKind::Real => {}
        GeneratorKind::FakeLowpassSmear => lowpass_smear(x, p, sr),
        GeneratorKind::FakeSpectralQuantize => spectral_quantize(x, p),
        GeneratorKind::FakeHumPhase => hum_phase(x, p, sr, seed),
        GeneratorKind::FakeBlackbox => blackbox(x, p, sr, seed),
    }
}

/// Apply a fake family's artifact to `w`. Output amplitude is not renormalised.
pub fn apply_fake(w: &Waveform, g: &GeneratorSpec, seed: u64) -> Result<Waveform> {
    if g.kind == GeneratorKind::Real {
        return Err(Error::WrongKind("apply_fake needs a fake generator"));
    }
    g.validate()?;
    let mut x = w.samples().to_vec();
    apply_kind(&mut x, g.kind, &g.params, f64::from(w.sample_rate()), seed);
    Waveform::new(x, w.sample_rate())
}
