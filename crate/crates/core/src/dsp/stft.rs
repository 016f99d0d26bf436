//! Complex STFT analysis/resynthesis used by the spectral corruptions in
//! [`crate::synth`]. Frames are padded by `n_fft` zeros on both sides so that
//! every sample is covered by the same number of windows.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::fft::{fft_in_place, Complex};

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ComplexStft {
    pub n_fft: usize,
    pub hop: usize,
    pub len: usize,
    pub frames: Vec<Vec<Complex>>,
}

impl ComplexStft {
    pub fn analyze(samples: &[f64], n_fft: usize, hop: usize) -> Self {
        let window = hann(n_fft);
        let mut padded = vec![0.0; samples.len() + 2 * n_fft];
        padded[n_fft..n_fft + samples.len()].copy_from_slice(samples);
        let n_frames = 1 + (padded.len() - n_fft) / hop;
        let frames = (0..n_frames)
            .map(|t| {
                let start = t * hop;
                let mut buf: Vec<Complex> = (0..n_fft)
                    .map(|i| Complex::new(padded[start + i] * window[i], 0.0))
                    .collect();
                fft_in_place(&mut buf, false);
                buf
            })
            .collect();
        Self {
            n_fft,
            hop,
            len: samples.len(),
            frames,
        }
    }

    /// Weighted overlap-add resynthesis (Hann synthesis window, normalised by
    /// the summed squared window).
    pub fn synthesize(&self) -> Vec<f64> {
        let n = self.n_fft;
        let window = hann(n);
        let total = self.len + 2 * n;
        let mut out = vec![0.0; total];
        let mut norm = vec![0.0; total];
        for (t, frame) in self.frames.iter().enumerate() {
            let mut buf = frame.clone();
            fft_in_place(&mut buf, true);
            let start = t * self.hop;
            for i in 0..n {
                if start + i >= total {
                    break;
                }
                out[start + i] += buf[i].re * window[i];
                norm[start + i] += window[i] * window[i];
            }
        }
        (0..self.len)
            .map(|i| {
                let k = i + n;
                if norm[k] > 1e-12 {
                    out[k] / norm[k]
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Keep a real-valued signal: enforce Hermitian symmetry after editing the
    /// lower half of the spectrum (bins `0..=n/2`).
    pub fn mirror_hermitian(frame: &mut [Complex]) {
        let n = frame.len();
        frame[0].im = 0.0;
        frame[n / 2].im = 0.0;
        for k in 1..n / 2 {
            let c = frame[k];
            frame[n - k] = Complex::new(c.re, -c.im);
        }
    }
}
