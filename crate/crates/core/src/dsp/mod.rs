//! Acoustic frontend: waveforms, log-mel spectrograms and raw-waveform patches.

pub mod fft;
pub mod mel;
pub mod stft;

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use fft::{fft_in_place, Complex};

/// Mono PCM audio, samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Logmel,
    Rawpatch,
    External,
}

/// A `rows × cols` real matrix of acoustic features (row = frame).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    origin: Origin,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, origin: Origin) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch(format!(
                "empty feature matrix {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self {
            rows,
            cols,
            values,
            origin,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.cols..(t + 1) * self.cols]
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            window: Window::Hann,
            n_mels: 64,
            fmin: 20.0,
            fmax: 22050.0,
            log_floor: 1e-10,
        }
    }
}

impl StftConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_fft == 0 || !self.n_fft.is_power_of_two() {
            return bad("n_fft must be a positive power of two");
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return bad("hop must be in 1..=n_fft");
        }
        if self.n_mels == 0 || self.n_mels > self.n_fft / 2 + 1 {
            return bad("n_mels must be in 1..=n_fft/2+1");
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return bad("need 0 <= fmin < fmax");
        }
        if self.fmax > f64::from(sample_rate) / 2.0 + 1e-9 {
            return bad("fmax exceeds the Nyquist frequency");
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive");
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.n_fft {
            0
        } else {
            1 + (len - self.n_fft) / self.hop
        }
    }
}

/// Per-frame power spectra `|STFT_t|²`, `frames × (n_fft/2+1)`, Hann window,
/// no centering.
pub fn power_spectrum(w: &Waveform, n_fft: usize, hop: usize) -> Result<Vec<Vec<f64>>> {
    let x = w.samples();
    if x.len() < n_fft {
        return Err(Error::TooShort {
            needed: n_fft,
            got: x.len(),
        });
    }
    let window = stft::hann(n_fft);
    let n_frames = 1 + (x.len() - n_fft) / hop;
    let mut buf = alloc::vec![Complex::default(); n_fft];
    Ok((0..n_frames)
        .map(|t| {
            let frame = &x[t * hop..t * hop + n_fft];
            for (b, (&s, &wv)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
                *b = Complex::new(s * wv, 0.0);
            }
            fft_in_place(&mut buf, false);
            buf[..=n_fft / 2].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect())
}

/// Log-mel spectrogram: `value[t][m] = ln(mel_m(|STFT_t|²) + log_floor)`.
pub fn stft_logmel(w: &Waveform, cfg: &StftConfig) -> Result<FeatureMatrix> {
    cfg.validate(w.sample_rate())?;
    let spectra = power_spectrum(w, cfg.n_fft, cfg.hop)?;
    let n_bins = cfg.n_fft / 2 + 1;
    let fb = mel::filterbank(cfg.n_mels, cfg.n_fft, w.sample_rate(), cfg.fmin, cfg.fmax);
    let mut values = Vec::with_capacity(spectra.len() * cfg.n_mels);
    for power in &spectra {
        for m in 0..cfg.n_mels {
            let weights = &fb[m * n_bins..(m + 1) * n_bins];
            let energy: f64 = weights.iter().zip(power).map(|(a, b)| a * b).sum();
            values.push(libm::log(energy + cfg.log_floor));
        }
    }
    FeatureMatrix::new(spectra.len(), cfg.n_mels, values, Origin::Logmel)
}

/// Strided raw-waveform patches: row `t` is `samples[t*stride .. t*stride+patch]`.
pub fn rawpatch(w: &Waveform, patch: usize, stride: usize) -> Result<FeatureMatrix> {
    if patch == 0 || stride == 0 {
        return Err(Error::InvalidConfig(
            "patch and stride must be positive".into(),
        ));
    }
    let x = w.samples();
    if x.len() < patch {
        return Err(Error::TooShort {
            needed: patch,
            got: x.len(),
        });
    }
    let rows = 1 + (x.len() - patch) / stride;
    let mut values = Vec::with_capacity(rows * patch);
    for t in 0..rows {
        values.extend_from_slice(&x[t * stride..t * stride + patch]);
    }
    FeatureMatrix::new(rows, patch, values, Origin::Rawpatch)
}
