//! Run configuration: one JSON document with `schedule`, `levels`, `noise`,
//! `lindblad` and `fit` blocks. Every block and field is optional; missing
//! values take the measured-device defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{log_space, GridSearchConfig, SeedAveraging, SeedMode, DEFAULT_NOISE_FLOOR};
use crate::error::{Error, Result};
use crate::lindblad::{LindbladOptions, QuditParams, Readout};
use crate::model::{LevelParams, Transition};
use crate::schedule::MeasurementSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleBlock {
    pub shot_rate: f64,
    pub n_tr: usize,
    pub shots_per_point: usize,
    pub n_curves: usize,
    /// s. When absent, the probed level's `tr_max` applies.
    pub tr_max: Option<f64>,
    pub levels: Vec<Transition>,
}

impl Default for ScheduleBlock {
    fn default() -> Self {
        let s = MeasurementSchedule::default();
        Self {
            shot_rate: s.shot_rate,
            n_tr: s.n_tr,
            shots_per_point: s.shots_per_point,
            n_curves: s.n_curves,
            tr_max: None,
            levels: s.levels,
        }
    }
}

/// Overrides of one transition's preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelBlock {
    pub f_bar: Option<f64>,
    pub eps_max: Option<f64>,
    pub t2_star: Option<f64>,
    pub omega_r: Option<f64>,
    pub tr_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelsBlock {
    #[serde(rename = "01")]
    pub l01: LevelBlock,
    #[serde(rename = "12")]
    pub l12: LevelBlock,
    #[serde(rename = "23")]
    pub l23: LevelBlock,
}

impl LevelsBlock {
    pub fn get(&self, level: Transition) -> &LevelBlock {
        match level {
            Transition::T01 => &self.l01,
            Transition::T12 => &self.l12,
            Transition::T23 => &self.l23,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBlock {
    pub alpha: f64,
    /// Dimensionless scale. Mutually exclusive with `A`.
    pub a: Option<f64>,
    /// 1 Hz amplitude, e²/Hz. Mutually exclusive with `a`.
    #[serde(rename = "A")]
    pub amplitude: Option<f64>,
    pub seed: u64,
    /// Trace length; defaults to the next power of two covering the
    /// schedule.
    pub n_samples: Option<usize>,
    /// Hz.
    pub sample_rate: f64,
    pub c_alpha_seeds: usize,
}

pub const DEFAULT_AMPLITUDE: f64 = 2.7e-5;

impl Default for NoiseBlock {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            a: None,
            amplitude: None,
            seed: 1,
            n_samples: None,
            sample_rate: 1e3,
            c_alpha_seeds: 20,
        }
    }
}

/// Noise scale as given in the configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseScale {
    Scale(f64),
    Amplitude(f64),
}

impl NoiseBlock {
    pub fn scale(&self) -> NoiseScale {
        match (self.a, self.amplitude) {
            (Some(a), _) => NoiseScale::Scale(a),
            (None, Some(amp)) => NoiseScale::Amplitude(amp),
            (None, None) => NoiseScale::Amplitude(DEFAULT_AMPLITUDE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LindbladBlock {
    pub params: QuditParams,
    /// s.
    pub dt_override: Option<f64>,
    pub readout: Readout,
    /// Shots per point of the model comparison in `export-figs`.
    pub comparison_shots: usize,
}

impl Default for LindbladBlock {
    fn default() -> Self {
        Self {
            params: QuditParams::measured(),
            dt_override: None,
            readout: Readout::default(),
            comparison_shots: 16,
        }
    }
}

impl LindbladBlock {
    pub fn options(&self) -> LindbladOptions {
        LindbladOptions {
            dt_override: self.dt_override,
            readout: self.readout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitBlock {
    pub alpha_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub seed_mode: SeedMode,
    pub seed_averaging: SeedAveraging,
    /// Decades above the minimum bounding the uncertainty region.
    pub uncertainty_level: f64,
    /// Envelope smoothing width in points; defaults to one detuning period.
    pub smooth_window: Option<usize>,
    pub noise_floor: f64,
}

impl Default for FitBlock {
    fn default() -> Self {
        let g = GridSearchConfig::default();
        Self {
            alpha_grid: g.alpha_grid,
            a_grid: log_space(1e-3, 1e2, 51),
            seeds: g.seeds,
            seed_mode: g.seed_mode,
            seed_averaging: g.seed_averaging,
            uncertainty_level: g.uncertainty_level,
            smooth_window: None,
            noise_floor: DEFAULT_NOISE_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: ScheduleBlock,
    pub levels: LevelsBlock,
    pub noise: NoiseBlock,
    pub lindblad: LindbladBlock,
    pub fit: FitBlock,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        if let Some(t) = s.tr_max {
            positive("schedule.tr_max", t)?;
        }
        self.schedule_for(s.levels.first().copied().unwrap_or(Transition::T23))
            .validate()?;
        for level in Transition::ALL {
            let path = format!("levels.{level}");
            self.level_params(level).validate(&path)?;
            if let Some(t) = self.levels.get(level).tr_max {
                positive(&format!("{path}.tr_max"), t)?;
            }
        }

        let n = &self.noise;
        if !(n.alpha.is_finite() && n.alpha >= 0.0) {
            return Err(Error::invalid("noise.alpha", format!("must be finite and >= 0, got {}", n.alpha)));
        }
        if n.a.is_some() && n.amplitude.is_some() {
            return Err(Error::invalid("noise.a", "set exactly one of `a` and `A`"));
        }
        if let Some(a) = n.a {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::invalid("noise.a", format!("must be finite and >= 0, got {a}")));
            }
        }
        if let Some(amp) = n.amplitude {
            positive("noise.A", amp)?;
        }
        positive("noise.sample_rate", n.sample_rate)?;
        if let Some(len) = n.n_samples.filter(|len| *len < 2) {
            return Err(Error::invalid("noise.n_samples", format!("must be >= 2, got {len}")));
        }
        if n.c_alpha_seeds == 0 {
            return Err(Error::invalid("noise.c_alpha_seeds", "must be >= 1"));
        }

        let l = &self.lindblad;
        l.params.validate()?;
        if let Some(dt) = l.dt_override {
            positive("lindblad.dt_override", dt)?;
        }
        if l.comparison_shots == 0 {
            return Err(Error::invalid("lindblad.comparison_shots", "must be >= 1"));
        }

        if !(self.fit.noise_floor >= 0.0) {
            return Err(Error::invalid("fit.noise_floor", "must be >= 0"));
        }
        if self.fit.smooth_window == Some(0) {
            return Err(Error::invalid("fit.smooth_window", "must be >= 1"));
        }
        self.grid_config().validate()
    }

    pub fn level_params(&self, level: Transition) -> LevelParams {
        let p = level.preset();
        let o = self.levels.get(level);
        LevelParams {
            f_bar: o.f_bar.unwrap_or(p.f_bar),
            eps_max: o.eps_max.unwrap_or(p.eps_max),
            t2_star: o.t2_star.unwrap_or(p.t2_star),
            omega_r: o.omega_r.unwrap_or(p.omega_r),
        }
    }

    /// `levels.L.tr_max`, then `schedule.tr_max`, then the level default.
    pub fn tr_max(&self, level: Transition) -> f64 {
        self.levels
            .get(level)
            .tr_max
            .or(self.schedule.tr_max)
            .unwrap_or_else(|| level.default_tr_max())
    }

    /// Acquisition schedule with the free-evolution grid of `level`.
    pub fn schedule_for(&self, level: Transition) -> MeasurementSchedule {
        let s = &self.schedule;
        MeasurementSchedule {
            shot_rate: s.shot_rate,
            n_tr: s.n_tr,
            shots_per_point: s.shots_per_point,
            n_curves: s.n_curves,
            tr_max: self.tr_max(level),
            levels: s.levels.clone(),
        }
    }

    pub fn grid_config(&self) -> GridSearchConfig {
        GridSearchConfig {
            alpha_grid: self.fit.alpha_grid.clone(),
            a_grid: self.fit.a_grid.clone(),
            seeds: self.fit.seeds.clone(),
            seed_mode: self.fit.seed_mode,
            seed_averaging: self.fit.seed_averaging,
            uncertainty_level: self.fit.uncertainty_level,
            sample_rate: self.noise.sample_rate,
            c_alpha_seeds: self.noise.c_alpha_seeds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.schedule_for(Transition::T23), MeasurementSchedule::default());
        assert_eq!(c.level_params(Transition::T12), Transition::T12.preset());
        assert_eq!(c.noise.scale(), NoiseScale::Amplitude(DEFAULT_AMPLITUDE));
    }

    #[test]
    fn partial_overrides() {
        let c = RunConfig::from_json(
            r#"{"levels": {"23": {"omega_r": 700e3, "tr_max": 8e-6}}, "noise": {"a": 0.3}, "schedule": {"tr_max": 30e-6}}"#,
        )
        .unwrap();
        let p = c.level_params(Transition::T23);
        assert_eq!(p.omega_r, 700e3);
        assert_eq!(p.t2_star, 4.3e-6);
        assert_eq!(c.tr_max(Transition::T23), 8e-6);
        assert_eq!(c.tr_max(Transition::T12), 30e-6);
        assert_eq!(c.noise.scale(), NoiseScale::Scale(0.3));
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            (r#"{"noise": {"alpha": -1}}"#, "noise.alpha"),
            (r#"{"noise": {"a": 1, "A": 1e-5}}"#, "noise.a"),
            (r#"{"schedule": {"n_tr": 0}}"#, "schedule.n_tr"),
            (r#"{"levels": {"12": {"t2_star": 0}}}"#, "levels.12.t2_star"),
            (r#"{"fit": {"alpha_grid": []}}"#, "fit.alpha_grid"),
            (r#"{"lindblad": {"dt_override": -1e-9}}"#, "lindblad.dt_override"),
        ];
        for (text, field) in cases {
            match RunConfig::from_json(text) {
                Err(Error::Invalid { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = RunConfig::from_json(r#"{"noise": {"alpha": 1, "aplha": 2}}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn hash_tracks_every_change() {
        let base = RunConfig::default();
        let h0 = base.sha256();
        assert_eq!(h0, RunConfig::from_json(&base.to_json()).unwrap().sha256());
        let mut changed = base.clone();
        changed.noise.seed = 2;
        assert_ne!(changed.sha256(), h0);
        let mut changed = base.clone();
        changed.lindblad.params.gamma1[2] *= 1.0 + 1e-15;
        assert_ne!(changed.sha256(), h0);
        let mut changed = base;
        changed.fit.a_grid.push(1e3);
        assert_ne!(changed.sha256(), h0);
    }
}
