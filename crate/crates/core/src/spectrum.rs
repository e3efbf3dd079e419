//! FFT helpers shared by band-power labeling and the STFT front end.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Squared DFT magnitudes `|X_k|^2` for bins `0..=n/2` of a real sequence.
pub fn half_spectrum_power(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// One-sided periodogram scaled so that the bins sum to the signal's mean
/// square. Interior bins carry the energy of their negative-frequency mirror.
pub fn one_sided_periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let norm = (n * n) as f64;
    half_spectrum_power(x)
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let mirrored = k != 0 && !(n % 2 == 0 && k == n / 2);
            if mirrored {
                2.0 * p / norm
            } else {
                p / norm
            }
        })
        .collect()
}

/// Frequency in Hz of DFT bin `k` for an `n`-point transform.
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    k as f64 * sample_rate / n as f64
}

/// Index of the largest one-sided periodogram bin, ignoring DC.
pub fn dominant_frequency(x: &[f64], sample_rate: f64) -> f64 {
    let p = one_sided_periodogram(x);
    let k = p
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(k, _)| k);
    bin_frequency(k, x.len(), sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_power(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn fft_matches_direct_dft() {
        for n in [7usize, 16, 33, 128] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
            let fast = half_spectrum_power(&x);
            let slow = naive_power(&x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn periodogram_sums_to_mean_square() {
        for n in [9usize, 100, 500] {
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
            let ms = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
            let total: f64 = one_sided_periodogram(&x).iter().sum();
            assert!((total - ms).abs() < 1e-12 * ms);
        }
    }

    #[test]
    fn dominant_frequency_of_sinusoid() {
        let x: Vec<f64> = (0..500).map(|i| (2.0 * PI * 6.0 * i as f64 / 100.0).sin()).collect();
        assert!((dominant_frequency(&x, 100.0) - 6.0).abs() < 1e-9);
    }
}
