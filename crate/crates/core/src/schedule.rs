//! Wall-clock measurement protocol and the phenomenological curve simulator.
//!
//! Every single shot gets one sample of the charge trace. Within a curve the
//! shots run point by point (all shots of `t_R[0]`, then `t_R[1]`, ...), and
//! curves of the configured levels are interleaved `01, 12, 23, 01, ...` with
//! no dead time beyond the shot spacing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dispersion, LevelParams, Transition};
use crate::noise::NoiseTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasurementSchedule {
    /// Single-shot repetition rate, Hz.
    pub shot_rate: f64,
    /// Free-evolution points per curve.
    pub n_tr: usize,
    pub shots_per_point: usize,
    /// Curves per level.
    pub n_curves: usize,
    /// Last free-evolution time, s. The grid is uniform on `[0, tr_max]`.
    pub tr_max: f64,
    /// Interleaving order.
    pub levels: Vec<Transition>,
}

impl Default for MeasurementSchedule {
    fn default() -> Self {
        Self {
            shot_rate: 1e3,
            n_tr: 101,
            shots_per_point: 256,
            n_curves: 50,
            tr_max: Transition::T23.default_tr_max(),
            levels: Transition::ALL.to_vec(),
        }
    }
}

/// Identifies one single shot of the acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotId {
    pub level: usize,
    pub curve: usize,
    pub point: usize,
    pub shot: usize,
}

impl MeasurementSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.shot_rate.is_finite() && self.shot_rate > 0.0) {
            return Err(Error::invalid("schedule.shot_rate", "must be > 0"));
        }
        for (name, v) in [
            ("n_tr", self.n_tr),
            ("shots_per_point", self.shots_per_point),
            ("n_curves", self.n_curves),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("schedule.{name}"), "must be >= 1"));
            }
        }
        if !(self.tr_max.is_finite() && self.tr_max > 0.0) {
            return Err(Error::invalid("schedule.tr_max", "must be > 0"));
        }
        if self.levels.is_empty() {
            return Err(Error::invalid("schedule.levels", "must list at least one transition"));
        }
        Ok(())
    }

    pub fn shots_per_curve(&self) -> u64 {
        (self.n_tr * self.shots_per_point) as u64
    }

    /// Seconds needed to acquire one curve.
    pub fn curve_duration(&self) -> f64 {
        self.shots_per_curve() as f64 / self.shot_rate
    }

    /// Curves over all levels.
    pub fn total_curves(&self) -> usize {
        self.n_curves * self.levels.len()
    }

    pub fn total_shots(&self) -> u64 {
        self.total_curves() as u64 * self.shots_per_curve()
    }

    pub fn total_duration(&self) -> f64 {
        self.total_shots() as f64 / self.shot_rate
    }

    /// Uniform free-evolution grid on `[0, tr_max]`.
    pub fn t_r_grid(&self) -> Vec<f64> {
        if self.n_tr == 1 {
            return vec![0.0];
        }
        let step = self.tr_max / (self.n_tr - 1) as f64;
        (0..self.n_tr).map(|i| i as f64 * step).collect()
    }

    pub fn level_index(&self, level: Transition) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .ok_or_else(|| Error::invalid("schedule.levels", format!("level {level} is not scheduled")))
    }

    /// Position of the curve in acquisition order.
    pub fn curve_slot(&self, level: usize, curve: usize) -> u64 {
        (curve * self.levels.len() + level) as u64
    }

    /// Global shot counter, starting from 0.
    pub fn shot_index(&self, id: ShotId) -> u64 {
        self.curve_slot(id.level, id.curve) * self.shots_per_curve()
            + (id.point * self.shots_per_point + id.shot) as u64
    }

    /// Wall-clock time of a shot, s.
    pub fn shot_time(&self, id: ShotId) -> f64 {
        self.shot_index(id) as f64 / self.shot_rate
    }

    /// Every shot of the acquisition in time order.
    pub fn shot_times(&self) -> impl Iterator<Item = (ShotId, f64)> + '_ {
        let n_levels = self.levels.len();
        (0..self.n_curves).flat_map(move |curve| {
            (0..n_levels).flat_map(move |level| {
                (0..self.n_tr).flat_map(move |point| {
                    (0..self.shots_per_point).map(move |shot| {
                        let id = ShotId {
                            level,
                            curve,
                            point,
                            shot,
                        };
                        (id, self.shot_time(id))
                    })
                })
            })
        })
    }

    /// Index of the trace sample read by a shot.
    pub fn sample_index(&self, id: ShotId, sample_rate: f64) -> usize {
        let k = self.shot_index(id);
        if sample_rate == self.shot_rate {
            k as usize
        } else {
            (k as f64 * sample_rate / self.shot_rate + 1e-9).floor() as usize
        }
    }

    /// Samples a trace at `sample_rate` must hold to cover every shot of
    /// `level`.
    pub fn required_samples(&self, level: usize, sample_rate: f64) -> usize {
        let last = ShotId {
            level,
            curve: self.n_curves - 1,
            point: self.n_tr - 1,
            shot: self.shots_per_point - 1,
        };
        self.sample_index(last, sample_rate) + 1
    }

    /// Samples needed to cover the whole acquisition.
    pub fn required_samples_all(&self, sample_rate: f64) -> usize {
        self.required_samples(self.levels.len() - 1, sample_rate)
    }
}

/// `n_curves × n_tr` populations of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    /// Free-evolution times, s.
    pub t_r: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
    pub level: Transition,
    /// Ramsey detuning, Hz.
    pub omega_r: f64,
}

impl CurveSet {
    pub fn n_curves(&self) -> usize {
        self.curves.len()
    }

    pub fn n_points(&self) -> usize {
        self.t_r.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.curves.is_empty() {
            return Err(Error::InsufficientData("curve set holds no curves".into()));
        }
        for (i, c) in self.curves.iter().enumerate() {
            if c.len() != self.t_r.len() {
                return Err(Error::GridMismatch(format!(
                    "curve {i} has {} points, grid has {}",
                    c.len(),
                    self.t_r.len()
                )));
            }
        }
        Ok(())
    }

    pub fn average(&self) -> Vec<f64> {
        average_curves(self)
    }
}

/// Pointwise mean across curves.
pub fn average_curves(set: &CurveSet) -> Vec<f64> {
    let n = set.curves.len() as f64;
    let mut avg = vec![0.0; set.n_points()];
    for curve in &set.curves {
        avg.iter_mut().zip(curve).for_each(|(a, y)| *a += y);
    }
    avg.iter_mut().for_each(|a| *a /= n);
    avg
}

/// Options of the phenomenological simulator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RamseyOptions {
    /// When set, each single shot is a Bernoulli draw with the model
    /// population and the point value is the fraction of excited outcomes.
    pub projection_noise_seed: Option<u64>,
}

/// Simulate `n_curves` Ramsey curves of `level` with the closed-form model.
///
/// Shot `k` reads `n_g = a·noise[k]`, which is held for that shot's free
/// evolution; the shots of each point are averaged.
pub fn simulate_ramsey_set(
    schedule: &MeasurementSchedule,
    noise: &NoiseTrace,
    a: f64,
    params: &LevelParams,
    level: Transition,
    options: &RamseyOptions,
) -> Result<CurveSet> {
    schedule.validate()?;
    params.validate("level")?;
    let level_idx = schedule.level_index(level)?;
    let required = schedule.required_samples(level_idx, noise.sample_rate());
    if noise.len() < required {
        return Err(Error::TraceTooShort {
            required,
            available: noise.len(),
        });
    }

    let t_r = schedule.t_r_grid();
    let samples = noise.samples();
    let fs = noise.sample_rate();
    // e^{-t/T2*}·cos(2πΩt) is shot independent
    let carrier: Vec<f64> = t_r
        .iter()
        .map(|&t| (-t / params.t2_star).exp() * (std::f64::consts::TAU * params.omega_r * t).cos())
        .collect();

    let curves = (0..schedule.n_curves)
        .into_par_iter()
        .map(|curve| {
            let mut rng = options
                .projection_noise_seed
                .map(|s| ChaCha8Rng::seed_from_u64(s ^ schedule.curve_slot(level_idx, curve)));
            (0..schedule.n_tr)
                .map(|point| {
                    let t = t_r[point];
                    let mut acc = 0.0;
                    for shot in 0..schedule.shots_per_point {
                        let id = ShotId {
                            level: level_idx,
                            curve,
                            point,
                            shot,
                        };
                        let n_g = a * samples[schedule.sample_index(id, fs)];
                        let eps = dispersion(params.eps_max, n_g);
                        let p = 0.5 * (1.0 + carrier[point] * (std::f64::consts::TAU * eps * t).cos());
                        acc += match rng.as_mut() {
                            Some(rng) => f64::from(u8::from(rng.random::<f64>() < p)),
                            None => p,
                        };
                    }
                    acc / schedule.shots_per_point as f64
                })
                .collect()
        })
        .collect();

    Ok(CurveSet {
        t_r,
        curves,
        level,
        omega_r: params.omega_r,
    })
}
