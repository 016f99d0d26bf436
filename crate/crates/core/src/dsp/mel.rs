use alloc::vec;
use alloc::vec::Vec;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `n_mels × n_bins` row-major, each triangle
/// scaled by `2 / (f_hi - f_lo)` so that it has unit area in Hz.
pub fn filterbank(n_mels: usize, n_fft: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Vec<f64> {
    let n_bins = n_fft / 2 + 1;
    let lo = hz_to_mel(fmin);
    let hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = f64::from(sample_rate) / n_fft as f64;
    let mut fb = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (f_lo, f_c, f_hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (f_hi - f_lo);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > f_lo && f <= f_c {
                (f - f_lo) / (f_c - f_lo)
            } else if f > f_c && f < f_hi {
                (f_hi - f) / (f_hi - f_c)
            } else {
                0.0
            };
            fb[m * n_bins + k] = w * norm;
        }
    }
    fb
}
