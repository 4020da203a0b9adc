use serde::{Deserialize, Serialize};

use super::envelope::extract_envelope;
use super::spectrum::curve_ffts;
use crate::error::{Error, Result};
use crate::schedule::CurveSet;

/// The three equal-weight mean-squared terms of the fit error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitErrorTerms {
    /// Per-bin sorted curve spectra.
    pub fft: f64,
    /// Upper and lower envelopes, concatenated.
    pub envelope: f64,
    /// Curve averages.
    pub average: f64,
}

impl FitErrorTerms {
    pub fn sum(&self) -> f64 {
        self.fft + self.envelope + self.average
    }

    /// `log10` of the sum; an exact match maps to `f64::MIN`.
    pub fn log10(&self) -> f64 {
        log10_or_min(self.sum())
    }
}

pub(crate) fn log10_or_min(x: f64) -> f64 {
    if x > 0.0 {
        x.log10()
    } else {
        f64::MIN
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// The curve-set features compared by the fit error.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    /// Spectra sorted across curves within each bin, flattened bin-major.
    pub sorted_spectra: Vec<f64>,
    /// Unsmoothed upper then lower envelope.
    pub envelope: Vec<f64>,
    pub average: Vec<f64>,
}

impl MetricSummary {
    pub fn of(set: &CurveSet) -> Result<Self> {
        Ok(Self {
            sorted_spectra: sorted_spectra(set)?,
            envelope: envelope_concat(set)?,
            average: set.average(),
        })
    }

    /// Elementwise mean of equally shaped summaries.
    pub fn mean(summaries: &[MetricSummary]) -> Self {
        let n = summaries.len() as f64;
        let avg = |f: fn(&MetricSummary) -> &Vec<f64>| -> Vec<f64> {
            let mut out = vec![0.0; f(&summaries[0]).len()];
            for s in summaries {
                out.iter_mut().zip(f(s)).for_each(|(o, x)| *o += x);
            }
            out.iter_mut().for_each(|o| *o /= n);
            out
        };
        Self {
            sorted_spectra: avg(|s| &s.sorted_spectra),
            envelope: avg(|s| &s.envelope),
            average: avg(|s| &s.average),
        }
    }
}

/// Spectra sorted across curves within each bin, flattened bin-major.
fn sorted_spectra(set: &CurveSet) -> Result<Vec<f64>> {
    let spectra = curve_ffts(set)?;
    let bins = spectra.frequencies.len();
    let mut out = Vec::with_capacity(bins * set.n_curves());
    for b in 0..bins {
        let mut column: Vec<f64> = spectra.magnitudes.iter().map(|m| m[b]).collect();
        column.sort_by(f64::total_cmp);
        out.extend(column);
    }
    Ok(out)
}

fn envelope_concat(set: &CurveSet) -> Result<Vec<f64>> {
    let env = extract_envelope(set, 1)?;
    Ok(env.upper.into_iter().chain(env.lower).collect())
}

/// Precomputed summary of a data set that simulated sets are scored
/// against.
#[derive(Debug, Clone)]
pub struct MetricReference {
    t_r: Vec<f64>,
    n_curves: usize,
    summary: MetricSummary,
}

impl MetricReference {
    pub fn new(set: &CurveSet) -> Result<Self> {
        Ok(Self {
            t_r: set.t_r.clone(),
            n_curves: set.n_curves(),
            summary: MetricSummary::of(set)?,
        })
    }

    fn check(&self, other: &CurveSet) -> Result<()> {
        if other.n_curves() != self.n_curves {
            return Err(Error::GridMismatch(format!(
                "{} curves against {}",
                other.n_curves(),
                self.n_curves
            )));
        }
        let scale = self.t_r.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if other.t_r.len() != self.t_r.len()
            || other.t_r.iter().zip(&self.t_r).any(|(a, b)| (a - b).abs() > 1e-9 * scale)
        {
            return Err(Error::GridMismatch("t_R grids differ".into()));
        }
        Ok(())
    }

    /// Summary of `simulated` after checking it matches the reference grid.
    pub fn summarize(&self, simulated: &CurveSet) -> Result<MetricSummary> {
        self.check(simulated)?;
        MetricSummary::of(simulated)
    }

    pub fn terms_of(&self, summary: &MetricSummary) -> FitErrorTerms {
        let r = &self.summary;
        FitErrorTerms {
            fft: mse(&r.sorted_spectra, &summary.sorted_spectra),
            envelope: mse(&r.envelope, &summary.envelope),
            average: mse(&r.average, &summary.average),
        }
    }

    pub fn terms(&self, simulated: &CurveSet) -> Result<FitErrorTerms> {
        Ok(self.terms_of(&self.summarize(simulated)?))
    }
}

pub fn fit_error_terms(experimental: &CurveSet, simulated: &CurveSet) -> Result<FitErrorTerms> {
    MetricReference::new(experimental)?.terms(simulated)
}

/// `log10` of the equal-weight sum of the spectrum, envelope and average
/// mean-squared differences.
pub fn fit_error(experimental: &CurveSet, simulated: &CurveSet) -> Result<f64> {
    Ok(fit_error_terms(experimental, simulated)?.log10())
}
