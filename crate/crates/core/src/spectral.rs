//! Spectral tools: windowed periodograms, interpolated peak search,
//! zero-phase band-pass filtering and single-tone least-squares fits.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided power spectrum on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Bin spacing (Hz).
    pub df: f64,
    pub power: Vec<f64>,
    /// Number of signal samples (before zero padding).
    pub samples: usize,
}

impl Periodogram {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.df
    }

    /// Bin range covering `[f_lo, f_hi]`, clamped to the spectrum.
    pub fn bins(&self, f_lo: f64, f_hi: f64) -> std::ops::Range<usize> {
        let lo = (f_lo / self.df).floor().max(0.0) as usize;
        let hi = ((f_hi / self.df).ceil() as usize + 1).min(self.power.len());
        lo.min(hi)..hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Interpolated peak frequency (Hz).
    pub frequency: f64,
    pub power: f64,
    pub bin: usize,
}

pub fn hann(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()).collect()
}

/// Removes the least-squares straight line.
pub fn detrend(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let xm = 0.5 * (n - 1) as f64;
    let ym = signal.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &y) in signal.iter().enumerate() {
        let x = k as f64 - xm;
        sxy += x * (y - ym);
        sxx += x * x;
    }
    let slope = sxy / sxx;
    signal.iter().enumerate().map(|(k, &y)| y - ym - slope * (k as f64 - xm)).collect()
}

/// Hann-windowed periodogram of the detrended signal, zero padded to at
/// least `pad_factor` times the signal length.
pub fn periodogram(signal: &[f64], dt: f64, pad_factor: usize) -> Periodogram {
    let n = signal.len();
    let nfft = (n.max(1) * pad_factor.max(1)).next_power_of_two();
    let w = hann(n);
    let x = detrend(signal);
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .zip(&w)
        .map(|(v, w)| Complex::new(v * w, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let power = buf[..nfft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
    Periodogram { df: 1.0 / (nfft as f64 * dt), power, samples: n }
}

/// Largest local maximum in `[f_lo, f_hi]`, refined by a parabola through
/// the log power of the three surrounding bins.
pub fn find_peak(p: &Periodogram, f_lo: f64, f_hi: f64) -> Option<Peak> {
    let range = p.bins(f_lo, f_hi);
    let bin = range.clone().max_by(|&i, &j| p.power[i].total_cmp(&p.power[j]))?;
    if p.power[bin] <= 0.0 {
        return None;
    }
    let mut frequency = p.frequency(bin);
    if bin > 0 && bin + 1 < p.power.len() {
        let (a, b, c) = (p.power[bin - 1], p.power[bin], p.power[bin + 1]);
        if a > 0.0 && c > 0.0 && b >= a && b >= c {
            let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
            let denom = la - 2.0 * lb + lc;
            if denom < 0.0 {
                let shift = 0.5 * (la - lc) / denom;
                frequency += shift.clamp(-0.5, 0.5) * p.df;
            }
        }
    }
    Some(Peak { frequency, power: p.power[bin], bin })
}

/// Dominant frequency of a sampled signal between `f_lo` and `f_hi` (Hz).
pub fn dominant_frequency(signal: &[f64], dt: f64, f_lo: f64, f_hi: f64) -> Option<f64> {
    find_peak(&periodogram(signal, dt, 8), f_lo, f_hi).map(|p| p.frequency)
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Zero-phase band-pass: even (mirror) extension to suppress edge
/// discontinuities, then an FFT mask with raised-cosine shoulders of width
/// `taper` (Hz) outside `[f_lo, f_hi]`.
pub fn bandpass(signal: &[f64], dt: f64, f_lo: f64, f_hi: f64, taper: f64) -> Vec<f64> {
    let n = signal.len();
    if n < 4 {
        return signal.to_vec();
    }
    let pad = n;
    // mirror: x[pad-1..0], x, x[n-1..0]
    let mut ext = Vec::with_capacity(3 * n);
    ext.extend(signal.iter().rev().take(pad));
    ext.extend_from_slice(signal);
    ext.extend(signal.iter().rev().take(pad));
    let m = ext.len().next_power_of_two();
    let mut buf: Vec<Complex<f64>> =
        ext.iter().map(|&v| Complex::new(v, 0.0)).chain(std::iter::repeat(Complex::new(0.0, 0.0))).take(m).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    let df = 1.0 / (m as f64 * dt);
    let gain = |f: f64| -> f64 {
        if f >= f_lo && f <= f_hi {
            1.0
        } else if taper > 0.0 && f < f_lo && f > f_lo - taper {
            0.5 + 0.5 * (PI * (f_lo - f) / taper).cos()
        } else if taper > 0.0 && f > f_hi && f < f_hi + taper {
            0.5 + 0.5 * (PI * (f - f_hi) / taper).cos()
        } else {
            0.0
        }
    };
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = if k <= m / 2 { k } else { m - k };
        *c *= gain(kk as f64 * df);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    buf[pad..pad + n].iter().map(|c| c.re * scale).collect()
}

/// Result of fitting `c cos(2 pi f t) + s sin(2 pi f t) + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneFit {
    pub frequency: f64,
    pub cos_coeff: f64,
    pub sin_coeff: f64,
    pub offset: f64,
    pub residual: f64,
}

impl ToneFit {
    pub fn amplitude(&self) -> f64 {
        self.cos_coeff.hypot(self.sin_coeff)
    }
}

/// Linear least squares for the tone at fixed frequency; `times` are taken
/// relative to the reference instant chosen by the caller.
pub fn fit_tone_fixed(times: &[f64], signal: &[f64], frequency: f64) -> ToneFit {
    let w = 2.0 * PI * frequency;
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (&t, &y) in times.iter().zip(signal) {
        let (s, c) = (w * t).sin_cos();
        let row = Vector3::new(c, s, 1.0);
        ata += row * row.transpose();
        atb += row * y;
    }
    let coef = ata.try_inverse().map(|inv| inv * atb).unwrap_or_else(Vector3::zeros);
    let residual = times
        .iter()
        .zip(signal)
        .map(|(&t, &y)| {
            let (s, c) = (w * t).sin_cos();
            let r = y - coef[0] * c - coef[1] * s - coef[2];
            r * r
        })
        .sum();
    ToneFit { frequency, cos_coeff: coef[0], sin_coeff: coef[1], offset: coef[2], residual }
}

/// Variable-projection fit: golden-section search on the frequency in
/// `[f_lo, f_hi]` over the residual of [`fit_tone_fixed`].
pub fn fit_tone(times: &[f64], signal: &[f64], f_lo: f64, f_hi: f64) -> ToneFit {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (f_lo, f_hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut r1 = fit_tone_fixed(times, signal, x1).residual;
    let mut r2 = fit_tone_fixed(times, signal, x2).residual;
    for _ in 0..60 {
        if (b - a) <= 1e-9 * f_hi.abs().max(1e-300) {
            break;
        }
        if r1 < r2 {
            b = x2;
            x2 = x1;
            r2 = r1;
            x1 = b - g * (b - a);
            r1 = fit_tone_fixed(times, signal, x1).residual;
        } else {
            a = x1;
            x1 = x2;
            r1 = r2;
            x2 = a + g * (b - a);
            r2 = fit_tone_fixed(times, signal, x2).residual;
        }
    }
    fit_tone_fixed(times, signal, 0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize, dt: f64, f: f64, phase: f64) -> Vec<f64> {
        (0..n).map(|k| (2.0 * PI * f * k as f64 * dt + phase).cos()).collect()
    }

    #[test]
    fn peak_interpolation_is_sub_bin() {
        let dt = 1e-6;
        let x = tone(2000, dt, 12_345.0, 0.3);
        let f = dominant_frequency(&x, dt, 1e3, 1e5).unwrap();
        assert!((f - 12_345.0).abs() < 5.0, "{f}");
    }

    #[test]
    fn bandpass_keeps_in_band_tone() {
        let dt = 1e-6;
        let n = 4000;
        let lo = tone(n, dt, 2e3, 0.0);
        let hi = tone(n, dt, 60e3, 1.0);
        let mix: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + b).collect();
        let y = bandpass(&mix, dt, 50e3, 70e3, 10e3);
        let err = y.iter().zip(&hi).skip(200).take(n - 400).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 0.02, "{err}");
    }

    #[test]
    fn tone_fit_recovers_parameters() {
        let dt = 2e-7;
        let times: Vec<f64> = (0..500).map(|k| k as f64 * dt).collect();
        let y: Vec<f64> = times.iter().map(|t| 0.7 * (2.0 * PI * 26e3 * t + 1.0).cos() + 0.1).collect();
        let fit = fit_tone(&times, &y, 24e3, 28e3);
        assert!((fit.frequency - 26e3).abs() < 1.0);
        assert!((fit.amplitude() - 0.7).abs() < 1e-6);
        assert!((fit.offset - 0.1).abs() < 1e-6);
        let phase = (-fit.sin_coeff).atan2(fit.cos_coeff);
        assert!((phase - 1.0).abs() < 1e-6);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
