//! Ideal temporal band-pass: DFT, zero every bin whose absolute frequency
//! falls outside the band, inverse DFT, real part.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Reusable band-pass filter for series of a fixed length. Bins with
/// `f_lo <= |f| <= f_hi` (Hz) pass; everything else, including DC when
/// `f_lo > 0`, is zeroed.
pub struct TemporalBandpass {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    keep: Vec<bool>,
    len: usize,
}

impl TemporalBandpass {
    pub fn new(len: usize, sample_rate: f64, f_lo: f64, f_hi: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len.max(1));
        let inverse = planner.plan_fft_inverse(len.max(1));
        let keep = (0..len)
            .map(|k| {
                let freq = if k <= len / 2 {
                    k as f64 * sample_rate / len as f64
                } else {
                    (k as f64 - len as f64) * sample_rate / len as f64
                };
                let mag = freq.abs();
                mag >= f_lo && mag <= f_hi
            })
            .collect();
        TemporalBandpass {
            forward,
            inverse,
            keep,
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Filters one series. A single-sample series has no temporal content
    /// and maps to zero.
    pub fn apply(&self, series: &[f64]) -> Vec<f64> {
        assert_eq!(series.len(), self.len, "series length mismatch");
        if self.len < 2 {
            return vec![0.0; self.len];
        }
        let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (v, keep) in buf.iter_mut().zip(&self.keep) {
            if !keep {
                *v = Complex::new(0.0, 0.0);
            }
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }
}

/// One-shot convenience wrapper.
pub fn temporal_bandpass(series: &[f64], sample_rate: f64, f_lo: f64, f_hi: f64) -> Vec<f64> {
    TemporalBandpass::new(series.len(), sample_rate, f_lo, f_hi).apply(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_series_is_killed() {
        let series = vec![4.2; 100];
        let out = temporal_bandpass(&series, 25.0, 0.3, 0.4);
        for v in out {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn single_sample_series_maps_to_zero() {
        assert_eq!(temporal_bandpass(&[7.0], 25.0, 0.3, 0.4), vec![0.0]);
    }

    #[test]
    fn in_band_bin_tone_passes_as_input_minus_mean() {
        // n = 250 at 25 Hz puts bins every 0.1 Hz; 0.3 Hz is bin 3.
        let n = 250;
        let rate = 25.0;
        let f = 0.3;
        let series: Vec<f64> = (0..n)
            .map(|t| 2.0 + 0.7 * (2.0 * PI * f * t as f64 / rate).sin())
            .collect();
        let out = temporal_bandpass(&series, rate, 0.3, 0.4);
        let mean = series.iter().sum::<f64>() / n as f64;
        for (o, s) in out.iter().zip(&series) {
            assert!((o - (s - mean)).abs() < 1e-9, "{o} vs {}", s - mean);
        }
    }

    #[test]
    fn out_of_band_bin_tone_is_rejected() {
        let n = 250;
        let rate = 25.0;
        let f = 1.0; // bin 10, outside [0.3, 0.4]
        let series: Vec<f64> = (0..n)
            .map(|t| 0.9 * (2.0 * PI * f * t as f64 / rate).sin())
            .collect();
        let out = temporal_bandpass(&series, rate, 0.3, 0.4);
        for v in out {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn output_mean_is_zero_when_dc_excluded() {
        let n = 64;
        let series: Vec<f64> = (0..n).map(|t| (t as f64 * 0.37).sin() + 1.5).collect();
        let out = temporal_bandpass(&series, 25.0, 0.3, 0.4);
        let mean = out.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-9);
    }
}
