//! Power-law (`1/f^α`) charge-noise synthesis and spectral estimation.
//!
//! Traces are synthesised in the frequency domain: every positive-frequency
//! bin receives a complex Gaussian amplitude with variance proportional to
//! `f^-α`, the DC bin is zeroed and the Nyquist bin (even lengths) is drawn
//! real. The inverse transform is normalised to zero mean and unit variance,
//! so the physical scale enters only through the multiplicative amplitude `a`
//! and the conversion `A = c_α·a²`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative half-width of the band used to read a PSD value at a frequency.
const BAND_HALF_WIDTH: f64 = 0.1;

/// Parameters of a synthesised trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Spectral exponent, `S(f) ∝ f^-alpha`.
    pub alpha: f64,
    pub n_samples: usize,
    /// Hz.
    pub sample_rate: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(alpha: f64, n_samples: usize, sample_rate: f64, seed: u64) -> Self {
        Self {
            alpha,
            n_samples,
            sample_rate,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid("noise.alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if self.n_samples < 2 {
            return Err(Error::invalid(
                "noise.n_samples",
                format!("must be >= 2, got {}", self.n_samples),
            ));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::invalid(
                "noise.sample_rate",
                format!("must be > 0, got {}", self.sample_rate),
            ));
        }
        Ok(())
    }

    /// Same spec with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// Sampled charge offset `n_g(t)` in units of 2e.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl NoiseTrace {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("noise trace is empty".into()));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("noise.sample_rate", "must be > 0"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Seconds covered by the trace.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// The charge signal `a·n(t)`.
    pub fn scaled(&self, a: f64) -> NoiseTrace {
        NoiseTrace {
            samples: self.samples.iter().map(|x| a * x).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population variance (normalised by `N`).
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / self.samples.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdMethod {
    Periodogram,
    SegmentAveraged,
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    /// Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    /// Power per Hz in the squared units of the trace.
    pub power: Vec<f64>,
    pub method: PsdMethod,
}

impl PsdEstimate {
    pub fn resolution(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    /// `Σ power · Δf`, the variance carried by the estimate.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution()
    }
}

/// Synthesise a zero-mean, unit-variance `1/f^α` trace (Timmer–König).
pub fn generate_colored_noise(spec: &NoiseSpec) -> Result<NoiseTrace> {
    spec.validate()?;
    let n = spec.n_samples;
    let df = spec.sample_rate / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let amplitude = (k as f64 * df).powf(-0.5 * spec.alpha);
        if n % 2 == 0 && k == half {
            let re: f64 = rng.sample(StandardNormal);
            spectrum[k] = Complex64::new(amplitude * re, 0.0);
        } else {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let bin = Complex64::new(re, im) * (amplitude * FRAC_1_SQRT_2);
            spectrum[k] = bin;
            spectrum[n - k] = bin.conj();
        }
    }

    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    let mut samples: Vec<f64> = spectrum.into_iter().map(|z| z.re).collect();
    normalize_unit_variance(&mut samples)?;
    NoiseTrace::new(samples, spec.sample_rate)
}

fn normalize_unit_variance(samples: &mut [f64]) -> Result<()> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter_mut().for_each(|x| *x -= mean);
    let var = samples.iter().map(|x| x * x).sum::<f64>() / n;
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::InsufficientData("synthesised trace has zero variance".into()));
    }
    let scale = var.sqrt().recip();
    samples.iter_mut().for_each(|x| *x *= scale);
    Ok(())
}

/// One-sided periodogram of the mean-removed trace, normalised so that
/// `Σ power·Δf` equals the sample variance.
pub fn periodogram(trace: &NoiseTrace) -> Result<PsdEstimate> {
    let n = trace.len();
    if n < 2 {
        return Err(Error::InsufficientData("periodogram needs at least 2 samples".into()));
    }
    let mean = trace.mean();
    let mut buf: Vec<Complex64> = trace
        .samples()
        .iter()
        .map(|&x| Complex64::new(x - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let fs = trace.sample_rate();
    let norm = 1.0 / (fs * n as f64);
    let half = n / 2;
    let (frequencies, power) = (0..=half)
        .map(|k| {
            let folded = k != 0 && !(n % 2 == 0 && k == half);
            let p = buf[k].norm_sqr() * norm * if folded { 2.0 } else { 1.0 };
            (k as f64 * fs / n as f64, p)
        })
        .unzip();
    Ok(PsdEstimate {
        frequencies,
        power,
        method: PsdMethod::Periodogram,
    })
}

/// Hann-windowed, 50 % overlapping segment average (Welch).
pub fn segment_averaged(trace: &NoiseTrace, segment_len: usize) -> Result<PsdEstimate> {
    if segment_len < 2 || segment_len > trace.len() {
        return Err(Error::invalid(
            "segment_len",
            format!("must be in [2, {}], got {segment_len}", trace.len()),
        ));
    }
    let fs = trace.sample_rate();
    let window: Vec<f64> = (0..segment_len)
        .map(|i| {
            let x = std::f64::consts::PI * i as f64 / segment_len as f64;
            x.sin().powi(2)
        })
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let hop = (segment_len / 2).max(1);
    let half = segment_len / 2;
    let mut acc = vec![0.0; half + 1];
    let mut segments = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let samples = trace.samples();
    let mut start = 0;
    while start + segment_len <= samples.len() {
        let seg = &samples[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            let folded = k != 0 && !(segment_len % 2 == 0 && k == half);
            *a += buf[k].norm_sqr() * if folded { 2.0 } else { 1.0 };
        }
        segments += 1;
        start += hop;
    }
    let norm = 1.0 / (fs * window_power * segments as f64);
    Ok(PsdEstimate {
        frequencies: (0..=half).map(|k| k as f64 * fs / segment_len as f64).collect(),
        power: acc.into_iter().map(|p| p * norm).collect(),
        method: PsdMethod::SegmentAveraged,
    })
}

/// Mean periodogram over the seeds `base.seed + i`, `i < n_seeds`.
pub fn ensemble_periodogram(base: &NoiseSpec, n_seeds: usize) -> Result<PsdEstimate> {
    if n_seeds == 0 {
        return Err(Error::invalid("n_seeds", "must be >= 1"));
    }
    base.validate()?;
    let sum = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let trace = generate_colored_noise(&base.with_seed(base.seed.wrapping_add(i)))?;
            periodogram(&trace)
        })
        .try_reduce_with(|mut a, b| {
            a.power.iter_mut().zip(&b.power).for_each(|(x, y)| *x += y);
            Ok(a)
        })
        .expect("n_seeds >= 1")?;
    let scale = 1.0 / n_seeds as f64;
    Ok(PsdEstimate {
        power: sum.power.into_iter().map(|p| p * scale).collect(),
        ..sum
    })
}

/// PSD value at `freq` from a local power law over `[0.9·freq, 1.1·freq]`
/// (log-log slope, linear-mean level). Falls back to log interpolation
/// between the two neighbouring bins when the band holds fewer than four
/// bins.
pub fn psd_value_at(psd: &PsdEstimate, freq: f64) -> Result<f64> {
    let positive: Vec<(f64, f64)> = psd
        .frequencies
        .iter()
        .zip(&psd.power)
        .filter(|(f, _)| **f > 0.0)
        .map(|(&f, &p)| (f, p))
        .collect();
    let (f_min, f_max) = match (positive.first(), positive.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::InsufficientData("PSD has no positive frequencies".into())),
    };
    if !(freq >= f_min && freq <= f_max) {
        return Err(Error::FrequencyOutOfRange {
            requested: freq,
            f_min,
            f_max,
        });
    }

    let band: Vec<(f64, f64)> = positive
        .iter()
        .copied()
        .filter(|&(f, p)| {
            f >= freq * (1.0 - BAND_HALF_WIDTH) && f <= freq * (1.0 + BAND_HALF_WIDTH) && p > 0.0
        })
        .collect();
    if band.len() >= 4 {
        let (_, slope) = log_log_fit(&band);
        let level = band.iter().map(|&(f, p)| p * (freq / f).powf(slope)).sum::<f64>() / band.len() as f64;
        return Ok(level);
    }

    let upper = positive.partition_point(|&(f, _)| f < freq);
    if upper < positive.len() && positive[upper].0 == freq {
        return Ok(positive[upper].1);
    }
    let (f0, p0) = positive[upper - 1];
    let (f1, p1) = positive[upper];
    if p0 <= 0.0 || p1 <= 0.0 {
        let w = (freq - f0) / (f1 - f0);
        return Ok(p0 + w * (p1 - p0));
    }
    let w = (freq.ln() - f0.ln()) / (f1.ln() - f0.ln());
    Ok((p0.ln() + w * (p1.ln() - p0.ln())).exp())
}

/// Least-squares line through `(ln f, ln p)`; returns `(intercept, slope)`.
fn log_log_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(f, p)| (sx + f.ln(), sy + p.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(sxx, sxy), &(f, p)| {
        let dx = f.ln() - mx;
        (sxx + dx * dx, sxy + dx * (p.ln() - my))
    });
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Ensemble 1 Hz PSD of unit-variance traces of the given length and rate.
///
/// Members use seeds `0..n_seeds`.
pub fn compute_c_alpha(alpha: f64, n: usize, sample_rate: f64, n_seeds: usize) -> Result<f64> {
    let spec = NoiseSpec::new(alpha, n, sample_rate, 0);
    spec.validate()?;
    let duration = n as f64 / sample_rate;
    let nyquist = 0.5 * sample_rate;
    if duration < 1.0 || nyquist < 1.0 {
        return Err(Error::FrequencyOutOfRange {
            requested: 1.0,
            f_min: 1.0 / duration,
            f_max: nyquist,
        });
    }
    let psd = ensemble_periodogram(&spec, n_seeds)?;
    psd_value_at(&psd, 1.0)
}

/// Physical 1 Hz amplitude `A = c_α·a²` (e²/Hz).
pub fn scale_amplitude(a: f64, c_alpha: f64) -> f64 {
    c_alpha * a * a
}

/// Inverse of [`scale_amplitude`].
pub fn scaling_for_amplitude(amplitude: f64, c_alpha: f64) -> f64 {
    (amplitude / c_alpha).sqrt()
}

/// Power-law exponent `α̂ = -d ln S / d ln f` fitted over `[f_min, f_max]`.
pub fn fit_psd_slope(psd: &PsdEstimate, f_min: f64, f_max: f64) -> Result<f64> {
    let band: Vec<(f64, f64)> = psd
        .frequencies
        .iter()
        .zip(&psd.power)
        .filter(|(f, p)| **f > 0.0 && **f >= f_min && **f <= f_max && **p > 0.0)
        .map(|(&f, &p)| (f, p))
        .collect();
    if band.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} bins in [{f_min}, {f_max}] Hz, need at least 8",
            band.len()
        )));
    }
    Ok(-log_log_fit(&band).1)
}
