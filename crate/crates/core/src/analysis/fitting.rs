//! Corrected (envelope) and canonical (decaying sinusoid) `T2*` fits.
//!
//! Both fits run internally in microseconds and megahertz.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::envelope::Envelope;
use super::lsq::{levenberg_marquardt, LmOptions, LmOutcome};
use super::spectrum::{magnitude_spectrum, uniform_spacing};
use crate::error::{Error, Result};

/// Envelope widths at or below this are excluded from the fit.
pub const DEFAULT_NOISE_FLOOR: f64 = 0.02;
/// Decay constants longer than this multiple of the fitted span count as
/// no decay.
pub const MAX_SPAN_RATIO: f64 = 100.0;

const MIN_ENVELOPE_POINTS: usize = 8;
const MIN_CANONICAL_POINTS: usize = 16;
const US: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Decay constant, s.
    pub t2: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Oscillation frequency, Hz (canonical fit only).
    pub frequency: Option<f64>,
    /// rad (canonical fit only).
    pub phase: Option<f64>,
    pub residual_rms: f64,
    /// The decay constant hit the `MAX_SPAN_RATIO × span` bound; `t2` then
    /// holds the bound.
    #[serde(default)]
    pub at_upper_bound: bool,
}

fn exp_decay_eval(t: &[f64], y: &[f64], p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = t.len();
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, 2);
    for i in 0..n {
        let e = (-p[1] * t[i]).exp();
        r[i] = p[0] * e - y[i];
        j[(i, 0)] = e;
        j[(i, 1)] = -p[0] * t[i] * e;
    }
    (r, j)
}

/// Least-squares `(upper − lower)(t) = A·e^{−t/T2*}` over the points whose
/// width exceeds [`DEFAULT_NOISE_FLOOR`].
pub fn fit_envelope_t2(env: &Envelope) -> Result<FitResult> {
    fit_envelope_t2_with_floor(env, DEFAULT_NOISE_FLOOR)
}

pub fn fit_envelope_t2_with_floor(env: &Envelope, noise_floor: f64) -> Result<FitResult> {
    let (t, w): (Vec<f64>, Vec<f64>) = env
        .t_r
        .iter()
        .zip(env.width())
        .filter(|(_, w)| *w > noise_floor)
        .map(|(t, w)| (t * US, w))
        .unzip();
    if t.len() < MIN_ENVELOPE_POINTS {
        return Err(Error::FitFailure(format!(
            "{} envelope points above the noise floor {noise_floor}, at least {MIN_ENVELOPE_POINTS} required",
            t.len()
        )));
    }
    let span = t[t.len() - 1] - t[0];

    // log-linear start
    let n = t.len() as f64;
    let (mt, ml) = (t.iter().sum::<f64>() / n, w.iter().map(|w| w.ln()).sum::<f64>() / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (ti, wi) in t.iter().zip(&w) {
        sxy += (ti - mt) * (wi.ln() - ml);
        sxx += (ti - mt).powi(2);
    }
    let slope = sxy / sxx;
    let k0 = if slope < 0.0 { -slope } else { 1.0 / span };
    let a0 = (ml + k0 * mt).exp();

    let out = levenberg_marquardt(
        |p| exp_decay_eval(&t, &w, p),
        |_| {},
        &[a0, k0],
        &LmOptions::default(),
    );
    let (amp, k) = (out.params[0], out.params[1]);
    if !(k > 0.0) || 1.0 / k > MAX_SPAN_RATIO * span || !out.cost.is_finite() {
        return Err(Error::FitFailure(format!(
            "envelope does not decay: rate {k} /µs over a span of {span} µs"
        )));
    }
    Ok(FitResult {
        t2: 1.0 / k / US,
        amplitude: amp,
        offset: 0.0,
        frequency: None,
        phase: None,
        residual_rms: (out.cost / n).sqrt(),
        at_upper_bound: false,
    })
}

/// Parameters `[c, A, k, f, φ]` of `c + A·e^{−kt}·cos(2πft + φ)`.
fn sinusoid_eval(t: &[f64], y: &[f64], p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = t.len();
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, 5);
    for i in 0..n {
        let e = (-p[2] * t[i]).exp();
        let arg = TAU * p[3] * t[i] + p[4];
        let (s, c) = arg.sin_cos();
        r[i] = p[0] + p[1] * e * c - y[i];
        j[(i, 0)] = 1.0;
        j[(i, 1)] = e * c;
        j[(i, 2)] = -t[i] * p[1] * e * c;
        j[(i, 3)] = -TAU * t[i] * p[1] * e * s;
        j[(i, 4)] = -p[1] * e * s;
    }
    (r, j)
}

/// Peak of the magnitude spectrum refined by parabolic interpolation, in
/// cycles per unit of `t`.
fn spectral_peak(t: &[f64], y: &[f64]) -> f64 {
    let n = y.len();
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    let m = magnitude_spectrum(&mut FftPlanner::new(), y);
    let k = (1..m.len()).max_by(|&i, &j| m[i].total_cmp(&m[j])).unwrap_or(1);
    let mut shift = 0.0;
    if k + 1 < m.len() {
        let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom != 0.0 {
            shift = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    (k as f64 + shift) / (n as f64 * dt)
}

fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Least-squares fit of `y = c + A·e^{−t/T}·cos(2πft + φ)` to an averaged
/// Ramsey curve.
///
/// Starts from the spectral peak of the curve and, if given, from
/// `omega_r_hint` (Hz), each with several decay rates; the lowest-cost
/// converged fit is returned. The amplitude is bounded by twice the data
/// range and the frequency by the grid's Nyquist limit.
pub fn fit_canonical_t2(t_r: &[f64], y: &[f64], omega_r_hint: Option<f64>) -> Result<FitResult> {
    if t_r.len() != y.len() {
        return Err(Error::GridMismatch(format!("{} times for {} values", t_r.len(), y.len())));
    }
    if y.len() < MIN_CANONICAL_POINTS {
        return Err(Error::FitFailure(format!(
            "{} points, at least {MIN_CANONICAL_POINTS} required",
            y.len()
        )));
    }
    uniform_spacing(t_r)?;
    let t: Vec<f64> = t_r.iter().map(|t| t * US).collect();
    let span = t[t.len() - 1] - t[0];
    let n = y.len() as f64;
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let c0 = y.iter().sum::<f64>() / n;
    let a0 = 0.5 * (hi - lo);

    let mut freqs = vec![spectral_peak(&t, y)];
    if let Some(hint) = omega_r_hint {
        freqs.push(hint.abs() / US);
    }
    let amp_max = 2.0 * (hi - lo).max(f64::MIN_POSITIVE);
    let f_max = 0.5 * (n - 1.0) / span;
    let project = |p: &mut [f64]| {
        p[1] = p[1].clamp(-amp_max, amp_max);
        p[2] = p[2].max(0.0);
        p[3] = p[3].clamp(0.0, f_max);
    };
    let mut best: Option<LmOutcome> = None;
    for &f0 in &freqs {
        // phase of the curve's projection onto the trial frequency
        let z: Complex64 = t
            .iter()
            .zip(y)
            .map(|(ti, yi)| (yi - c0) * Complex64::from_polar(1.0, -TAU * f0 * ti))
            .sum();
        let phi0 = z.arg();
        for k0 in [0.1, 1.0, 5.0, 20.0].map(|m| m / span) {
            let out = levenberg_marquardt(
                |p| sinusoid_eval(&t, y, p),
                project,
                &[c0, a0, k0, f0, phi0],
                &LmOptions::default(),
            );
            if !out.cost.is_finite() {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => (out.converged, -out.cost) > (b.converged, -b.cost),
            };
            if better {
                best = Some(out);
            }
        }
    }
    let best = best.ok_or_else(|| Error::FitFailure("no finite fit found".into()))?;
    if !best.converged {
        return Err(Error::FitFailure(format!(
            "no start converged within {} iterations (best cost {:.3e})",
            best.iterations, best.cost
        )));
    }
    let [c, mut amp, k, f, mut phi] = [0, 1, 2, 3, 4].map(|i| best.params[i]);
    if amp < 0.0 {
        amp = -amp;
        phi += PI;
    }
    let bound = MAX_SPAN_RATIO * span;
    let at_upper_bound = k * bound <= 1.0;
    let t2_us = if at_upper_bound { bound } else { 1.0 / k };
    Ok(FitResult {
        t2: t2_us / US,
        amplitude: amp,
        offset: c,
        frequency: Some(f * US),
        phase: Some(wrap_phase(phi)),
        residual_rms: (best.cost / n).sqrt(),
        at_upper_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ramsey_population, LevelParams};

    fn grid(n: usize, tr_max: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * tr_max / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_exponential_envelope() {
        let t = grid(101, 10e-6);
        let tau = 4.3e-6;
        let env = Envelope {
            upper: t.iter().map(|t| 0.5 + 0.5 * (-t / tau).exp()).collect(),
            lower: t.iter().map(|t| 0.5 - 0.5 * (-t / tau).exp()).collect(),
            t_r: t,
        };
        let fit = fit_envelope_t2(&env).unwrap();
        assert!((fit.t2 - tau).abs() <= 1e-6 * tau, "{}", fit.t2);
        assert!((fit.amplitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_envelope_fails() {
        let t = grid(50, 10e-6);
        let env = Envelope {
            upper: vec![0.9; 50],
            lower: vec![0.1; 50],
            t_r: t,
        };
        assert!(matches!(fit_envelope_t2(&env), Err(Error::FitFailure(_))));
    }

    #[test]
    fn too_few_points_above_floor() {
        let t = grid(50, 10e-6);
        let env = Envelope {
            upper: t.iter().map(|t| 0.5 + 0.5 * (-t / 0.2e-6).exp()).collect(),
            lower: vec![0.5; 50],
            t_r: t,
        };
        assert!(matches!(fit_envelope_t2(&env), Err(Error::FitFailure(_))));
    }

    #[test]
    fn canonical_fit_of_model_curve() {
        let p = LevelParams::new(3.6287e9, 0.0, 4.3e-6, 750e3);
        let t = grid(101, 10e-6);
        let y: Vec<f64> = t.iter().map(|&t| ramsey_population(&p, 0.0, t)).collect();
        let fit = fit_canonical_t2(&t, &y, Some(750e3)).unwrap();
        assert!((fit.t2 - 4.3e-6).abs() < 0.01 * 4.3e-6, "{}", fit.t2);
        assert!((fit.frequency.unwrap() - 750e3).abs() < 1.0);
        assert!((fit.offset - 0.5).abs() < 1e-6);
        assert!((fit.amplitude - 0.5).abs() < 1e-6);
        assert!(fit.residual_rms < 1e-8);
        assert!(!fit.at_upper_bound);

        let blind = fit_canonical_t2(&t, &y, None).unwrap();
        assert!((blind.t2 - 4.3e-6).abs() < 0.01 * 4.3e-6);
    }

    #[test]
    fn undamped_cosine_hits_bound() {
        let t = grid(101, 10e-6);
        let y: Vec<f64> = t.iter().map(|&t| 0.5 + 0.5 * (TAU * 750e3 * t).cos()).collect();
        let fit = fit_canonical_t2(&t, &y, None).unwrap();
        assert!(fit.at_upper_bound);
        assert!(fit.t2 > 0.0);
    }

    #[test]
    fn short_curve_is_rejected() {
        let t = grid(10, 1e-6);
        assert!(matches!(fit_canonical_t2(&t, &[0.5; 10], None), Err(Error::FitFailure(_))));
    }

    #[test]
    fn phases_wrap_into_principal_range() {
        for phi in [-7.0, -PI, 0.0, PI, 3.5, 20.0] {
            let w = wrap_phase(phi);
            assert!(w > -PI && w <= PI);
            assert!(((phi - w) / TAU - ((phi - w) / TAU).round()).abs() < 1e-12);
        }
    }
}
