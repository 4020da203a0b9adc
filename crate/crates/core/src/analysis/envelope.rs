use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::CurveSet;

/// Pointwise extremes of an overlay of Ramsey curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// s.
    pub t_r: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl Envelope {
    /// `upper − lower`.
    pub fn width(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }
}

/// Samples per Ramsey detuning period on the grid of `set`, at least 1.
pub fn default_smooth_window(set: &CurveSet) -> usize {
    if set.t_r.len() < 2 || set.omega_r == 0.0 {
        return 1;
    }
    let dt = set.t_r[1] - set.t_r[0];
    ((1.0 / (set.omega_r.abs() * dt)).round() as usize).clamp(1, set.t_r.len())
}

fn moving<F: Fn(f64, f64) -> f64>(x: &[f64], window: usize, pick: F) -> Vec<f64> {
    let half = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(x.len() - 1);
            x[lo..=hi].iter().copied().reduce(&pick).unwrap()
        })
        .collect()
}

/// Maximum and minimum across curves at each `t_R`, each followed by a
/// centred moving maximum (minimum) over `smooth_window` points. Even
/// windows are widened by one; `0` and `1` disable smoothing.
pub fn extract_envelope(set: &CurveSet, smooth_window: usize) -> Result<Envelope> {
    if set.n_curves() < 2 {
        return Err(Error::InsufficientCurves(set.n_curves()));
    }
    set.validate()?;
    let n = set.n_points();
    let mut upper = vec![f64::NEG_INFINITY; n];
    let mut lower = vec![f64::INFINITY; n];
    for curve in &set.curves {
        for i in 0..n {
            upper[i] = upper[i].max(curve[i]);
            lower[i] = lower[i].min(curve[i]);
        }
    }
    if smooth_window > 1 {
        upper = moving(&upper, smooth_window, f64::max);
        lower = moving(&lower, smooth_window, f64::min);
    }
    Ok(Envelope {
        t_r: set.t_r.clone(),
        upper,
        lower,
    })
}
