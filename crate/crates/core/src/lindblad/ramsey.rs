use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dynamics::{apply_pulse, dissipator_superop, step_count, DensityMatrix, Rk4Propagator};
use super::params::{build_h0, collapse_ops, FrameSpec, QuditParams};
use crate::error::{Error, Result};
use crate::model::{Parity, Transition};
use crate::noise::NoiseTrace;
use crate::schedule::{CurveSet, MeasurementSchedule, ShotId};

/// How the final state is turned into a population.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// `ρ_{j+1,j+1} / (ρ_jj + ρ_{j+1,j+1})`: excited fraction within the
    /// probed pair, discarding population that relaxed out of it.
    #[default]
    Subspace,
    /// Bare `ρ_{j+1,j+1}`.
    Upper,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LindbladOptions {
    /// Fixed integration step, s. Defaults to
    /// `min(1/(20·max gap), t_R spacing/50)`.
    pub dt_override: Option<f64>,
    pub readout: Readout,
}

/// Worst density-matrix diagnostics seen over a run, measured on each final
/// state before symmetrisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub states_checked: u64,
}

impl Default for InvariantReport {
    fn default() -> Self {
        Self {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            states_checked: 0,
        }
    }
}

impl InvariantReport {
    fn record(&mut self, rho: &DensityMatrix) {
        self.max_trace_error = self.max_trace_error.max(rho.trace_error());
        self.max_hermiticity_error = self.max_hermiticity_error.max(rho.hermiticity_error());
        self.min_eigenvalue = self.min_eigenvalue.min(rho.min_eigenvalue());
        self.states_checked += 1;
    }

    pub fn merge(mut self, other: &InvariantReport) -> Self {
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
        self.states_checked += other.states_checked;
        self
    }
}

#[derive(Debug, Clone)]
pub struct LindbladRun {
    /// Parity-averaged curves.
    pub curves: CurveSet,
    /// Curves for `p = 0` and `p = 1`.
    pub parity_curves: [CurveSet; 2],
    pub invariants: InvariantReport,
    pub dt: f64,
}

/// Integration step used for a schedule and probe.
pub fn default_dt(params: &QuditParams, frame: &FrameSpec, t_r: &[f64]) -> f64 {
    let gap = frame.max_gap(params);
    let mut dt = if gap > 0.0 { 1.0 / (20.0 * gap) } else { f64::INFINITY };
    if t_r.len() > 1 {
        dt = dt.min((t_r[1] - t_r[0]) / 50.0);
    }
    if !dt.is_finite() {
        dt = t_r.last().copied().unwrap_or(0.0).max(1e-9);
    }
    dt
}

/// State after the π ladder `0 → j` and the first π/2 on `(j, j+1)`.
fn prepared_state(transition: Transition) -> DensityMatrix {
    let mut rho = DensityMatrix::ground();
    for t in Transition::ALL.iter().take(transition.lower()) {
        rho = apply_pulse(&rho, *t, PI);
    }
    apply_pulse(&rho, transition, FRAC_PI_2)
}

fn read(rho: &DensityMatrix, transition: Transition, readout: Readout) -> f64 {
    let upper = rho.population(transition.upper());
    match readout {
        Readout::Upper => upper,
        Readout::Subspace => {
            let total = rho.population(transition.lower()) + upper;
            if total > 0.0 {
                upper / total
            } else {
                0.5
            }
        }
    }
}

/// Simulate the Ramsey curves of `transition` with the four-level master
/// equation.
///
/// Every shot freezes `n_g = a·noise[k]`, runs the pulse sequence once per
/// parity and reads the excited population. Shots of a point are averaged
/// per parity and the two parity curve sets are then averaged.
pub fn simulate_lindblad_ramsey(
    schedule: &MeasurementSchedule,
    noise: &NoiseTrace,
    a: f64,
    params: &QuditParams,
    transition: Transition,
    omega_r: f64,
    options: &LindbladOptions,
) -> Result<LindbladRun> {
    schedule.validate()?;
    params.validate()?;
    if !omega_r.is_finite() {
        return Err(Error::invalid("omega_r", "must be finite"));
    }
    let level_idx = schedule.level_index(transition)?;
    let required = schedule.required_samples(level_idx, noise.sample_rate());
    if noise.len() < required {
        return Err(Error::TraceTooShort {
            required,
            available: noise.len(),
        });
    }

    let t_r = schedule.t_r_grid();
    let frame = FrameSpec::rotating(params, transition, omega_r);
    let dt = match options.dt_override {
        Some(dt) if dt > 0.0 && dt.is_finite() => dt,
        Some(dt) => return Err(Error::invalid("lindblad.dt_override", format!("must be > 0, got {dt}"))),
        None => default_dt(params, &frame, &t_r),
    };
    let dissipator = dissipator_superop(&collapse_ops(params)?);
    let start = prepared_state(transition);
    let samples = noise.samples();
    let fs = noise.sample_rate();

    let per_curve: Vec<([Vec<f64>; 2], InvariantReport)> = (0..schedule.n_curves)
        .into_par_iter()
        .map(|curve| {
            let mut report = InvariantReport::default();
            let mut out = [vec![0.0; t_r.len()], vec![0.0; t_r.len()]];
            for (point, &t) in t_r.iter().enumerate() {
                let n_steps = step_count(t, dt);
                let h_dt = if n_steps > 0 { t / n_steps as f64 } else { 0.0 };
                for shot in 0..schedule.shots_per_point {
                    let id = ShotId {
                        level: level_idx,
                        curve,
                        point,
                        shot,
                    };
                    let n_g = a * samples[schedule.sample_index(id, fs)];
                    for (k, parity) in Parity::BOTH.into_iter().enumerate() {
                        let h = build_h0(params, n_g, parity, &frame);
                        let evolved = Rk4Propagator::with_dissipator(&h, &dissipator, h_dt).apply(&start, n_steps)?;
                        let rho = apply_pulse(&evolved, transition, FRAC_PI_2);
                        report.record(&rho);
                        out[k][point] += read(&rho.symmetrized(), transition, options.readout);
                    }
                }
                for series in out.iter_mut() {
                    series[point] /= schedule.shots_per_point as f64;
                }
            }
            Ok((out, report))
        })
        .collect::<Result<_>>()?;

    let mut invariants = InvariantReport::default();
    let mut even = Vec::with_capacity(per_curve.len());
    let mut odd = Vec::with_capacity(per_curve.len());
    for ([e, o], report) in per_curve {
        invariants = invariants.merge(&report);
        even.push(e);
        odd.push(o);
    }
    let averaged = even
        .iter()
        .zip(&odd)
        .map(|(e, o)| e.iter().zip(o).map(|(x, y)| 0.5 * (x + y)).collect())
        .collect();
    let set = |curves| CurveSet {
        t_r: t_r.clone(),
        curves,
        level: transition,
        omega_r,
    };
    Ok(LindbladRun {
        curves: set(averaged),
        parity_curves: [set(even), set(odd)],
        invariants,
        dt,
    })
}
