use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::CurveSet;

/// One-sided magnitude spectra of each curve along `t_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpectra {
    /// Hz.
    pub frequencies: Vec<f64>,
    /// `magnitudes[curve][bin]`.
    pub magnitudes: Vec<Vec<f64>>,
}

impl CurveSpectra {
    /// Frequency of the largest non-DC bin of one curve.
    pub fn peak_frequency(&self, curve: usize) -> Option<f64> {
        let m = &self.magnitudes[curve];
        (1..m.len())
            .max_by(|&i, &j| m[i].total_cmp(&m[j]))
            .map(|i| self.frequencies[i])
    }
}

/// Spacing of a uniform grid; errors if the grid is not uniform.
pub fn uniform_spacing(t_r: &[f64]) -> Result<f64> {
    if t_r.len() < 2 {
        return Err(Error::GridMismatch("at least 2 grid points are required".into()));
    }
    let dt = (t_r[t_r.len() - 1] - t_r[0]) / (t_r.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::GridMismatch("grid must be increasing".into()));
    }
    for (i, w) in t_r.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(Error::GridMismatch(format!(
                "grid is not uniform: step {} at index {i}, expected {dt}",
                w[1] - w[0]
            )));
        }
    }
    Ok(dt)
}

/// `|DFT|/N` of the mean-subtracted curve over bins `0..=N/2`.
pub fn magnitude_spectrum(planner: &mut FftPlanner<f64>, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = y.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|z| z.norm() / n as f64).collect()
}

/// Magnitude spectrum of every mean-subtracted curve, without windowing.
pub fn curve_ffts(set: &CurveSet) -> Result<CurveSpectra> {
    set.validate()?;
    let dt = uniform_spacing(&set.t_r)?;
    let n = set.n_points();
    let mut planner = FftPlanner::new();
    let magnitudes = set.curves.iter().map(|c| magnitude_spectrum(&mut planner, c)).collect();
    let frequencies = (0..=n / 2).map(|k| k as f64 / (n as f64 * dt)).collect();
    Ok(CurveSpectra {
        frequencies,
        magnitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Transition;
    use std::f64::consts::TAU;

    fn curve_set(f: impl Fn(f64) -> f64) -> CurveSet {
        let t_r: Vec<f64> = (0..101).map(|i| i as f64 * 0.1e-6).collect();
        CurveSet {
            curves: vec![t_r.iter().map(|&t| f(t)).collect()],
            t_r,
            level: Transition::T23,
            omega_r: 750e3,
        }
    }

    #[test]
    fn detuned_curve_peaks_at_detuning() {
        let s = curve_set(|t| 0.5 * (1.0 + (TAU * 750e3 * t).cos()));
        let spec = curve_ffts(&s).unwrap();
        let df = spec.frequencies[1];
        assert!((spec.peak_frequency(0).unwrap() - 750e3).abs() <= df);
    }

    #[test]
    fn beating_curve_has_two_peaks() {
        let (omega, eps) = (750e3, 300e3);
        let s = curve_set(|t| 0.5 * (1.0 + (TAU * omega * t).cos() * (TAU * eps * t).cos()));
        let spec = curve_ffts(&s).unwrap();
        let m = &spec.magnitudes[0];
        let df = spec.frequencies[1];
        let mut peaks: Vec<usize> = (1..m.len() - 1).filter(|&i| m[i] > m[i - 1] && m[i] > m[i + 1]).collect();
        peaks.sort_by(|&i, &j| m[j].total_cmp(&m[i]));
        let mut top: Vec<f64> = peaks[..2].iter().map(|&i| spec.frequencies[i]).collect();
        top.sort_by(f64::total_cmp);
        assert!((top[0] - (omega - eps)).abs() <= df);
        assert!((top[1] - (omega + eps)).abs() <= df);
    }

    #[test]
    fn flat_curve_has_empty_spectrum() {
        let spec = curve_ffts(&curve_set(|_| 0.37)).unwrap();
        assert!(spec.magnitudes[0].iter().all(|m| *m < 1e-15));
    }

    #[test]
    fn non_uniform_grid_is_rejected() {
        let mut s = curve_set(|_| 0.0);
        s.t_r[50] += 0.03e-6;
        assert!(matches!(curve_ffts(&s), Err(Error::GridMismatch(_))));
    }
}
