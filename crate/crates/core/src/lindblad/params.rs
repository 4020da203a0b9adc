use std::f64::consts::TAU;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Parity, Transition};

pub type CMatrix4 = Matrix4<Complex64>;

/// Four-level transmon parameters. Index `m` of each array refers to
/// transition `m → m+1`; `gamma1[m]` is the decay rate of level `m+1` and
/// `gamma2[m]` the squared diagonal entry of the dephasing operator on level
/// `m+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuditParams {
    pub f01: f64,
    pub f12: f64,
    pub f23: f64,
    pub eps01: f64,
    pub eps12: f64,
    pub eps23: f64,
    /// 1/s.
    pub gamma1: [f64; 3],
    /// 1/s.
    pub gamma2: [f64; 3],
}

impl QuditParams {
    /// Measured device: transition frequencies, dispersions and `T1`/`T2`
    /// per transition.
    pub fn measured() -> Self {
        Self::from_coherence_times(
            [4.0108e9, 3.8830e9, 3.6287e9],
            [1.7e3, 62e3, 1.3e6],
            [45e-6, 21e-6, 22e-6],
            [24e-6, 14.5e-6, 4.3e-6],
        )
        .expect("measured coherence times are consistent")
    }

    /// Build rates from relaxation times `t1` (per level 1..3) and total
    /// coherence times `t2` (per transition).
    ///
    /// `γ1` is `1/T1`. The dephasing diagonal is built cumulatively from
    /// level 0 (entry 0) so that the coherence of transition `m` decays at
    /// `½(√γ2,m+1 − √γ2,m)² + ½(Γ_m + Γ_m+1) = 1/T2,m`, where `Γ_k` is the
    /// relaxation rate out of level `k`. Use `f64::INFINITY` for `t1` to
    /// obtain pure dephasing only.
    pub fn from_coherence_times(
        freqs: [f64; 3],
        eps: [f64; 3],
        t1: [f64; 3],
        t2: [f64; 3],
    ) -> Result<Self> {
        let gamma1 = t1.map(|t| 1.0 / t);
        let out_rate = |level: usize| if level == 0 { 0.0 } else { gamma1[level - 1] };
        let mut gamma2 = [0.0; 3];
        let mut sqrt_prev = 0.0;
        for m in 0..3 {
            let pure = 1.0 / t2[m] - 0.5 * (out_rate(m) + out_rate(m + 1));
            if pure < -1e-12 / t2[m] {
                return Err(Error::invalid(
                    format!("lindblad.t2[{m}]"),
                    format!("T2 = {} s exceeds the relaxation limit", t2[m]),
                ));
            }
            let sqrt_next = sqrt_prev + (2.0 * pure.max(0.0)).sqrt();
            gamma2[m] = sqrt_next * sqrt_next;
            sqrt_prev = sqrt_next;
        }
        let params = Self {
            f01: freqs[0],
            f12: freqs[1],
            f23: freqs[2],
            eps01: eps[0],
            eps12: eps[1],
            eps23: eps[2],
            gamma1,
            gamma2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for t in Transition::ALL {
            if !(self.frequency(t) > 0.0 && self.frequency(t).is_finite()) {
                return Err(Error::invalid(format!("lindblad.f{t}"), "must be > 0"));
            }
            if !(self.dispersion_amplitude(t) >= 0.0) {
                return Err(Error::invalid(format!("lindblad.eps{t}"), "must be >= 0"));
            }
        }
        for (name, rates) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if let Some(i) = rates.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
                return Err(Error::invalid(
                    format!("lindblad.{name}[{i}]"),
                    format!("rate must be finite and >= 0, got {}", rates[i]),
                ));
            }
        }
        Ok(())
    }

    pub fn frequency(&self, t: Transition) -> f64 {
        match t {
            Transition::T01 => self.f01,
            Transition::T12 => self.f12,
            Transition::T23 => self.f23,
        }
    }

    pub fn dispersion_amplitude(&self, t: Transition) -> f64 {
        match t {
            Transition::T01 => self.eps01,
            Transition::T12 => self.eps12,
            Transition::T23 => self.eps23,
        }
    }

    pub fn without_dissipation(&self) -> Self {
        Self {
            gamma1: [0.0; 3],
            gamma2: [0.0; 3],
            ..*self
        }
    }

    /// Decay rate of the `(j, k)` coherence due to the dephasing operator
    /// alone, `½(√γ2,j − √γ2,k)²`.
    pub fn pure_dephasing_rate(&self, j: usize, k: usize) -> f64 {
        let d = |level: usize| if level == 0 { 0.0 } else { self.gamma2[level - 1].sqrt() };
        0.5 * (d(j) - d(k)).powi(2)
    }
}

/// `f̃ = f − ε·cos(2π n_g + pπ)` for one transition.
///
/// The sign is opposite to the closed-form model's `f̄ + ε cos(...)`; the two
/// parity branches are averaged, so observables agree.
pub fn modulated_frequency(params: &QuditParams, t: Transition, n_g: f64, parity: Parity) -> f64 {
    params.frequency(t)
        - params.dispersion_amplitude(t) * (TAU * n_g + parity.phase()).cos()
}

/// Reference frequency of each level, Hz. The Hamiltonian is expressed in
/// the frame rotating at these frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub level_freqs: [f64; 4],
}

impl FrameSpec {
    pub fn lab() -> Self {
        Self {
            level_freqs: [0.0; 4],
        }
    }

    /// Frame of the drives used for a Ramsey experiment on `probe`: every
    /// other transition is driven on resonance with its mean frequency, the
    /// probed one at `f − omega_r`.
    pub fn rotating(params: &QuditParams, probe: Transition, omega_r: f64) -> Self {
        let mut level_freqs = [0.0; 4];
        for t in Transition::ALL {
            let drive = if t == probe {
                params.frequency(t) - omega_r
            } else {
                params.frequency(t)
            };
            level_freqs[t.upper()] = level_freqs[t.lower()] + drive;
        }
        Self { level_freqs }
    }

    /// Largest possible `|gap|` (Hz) between adjacent levels in this frame,
    /// over all charge offsets and parities.
    pub fn max_gap(&self, params: &QuditParams) -> f64 {
        Transition::ALL
            .iter()
            .map(|&t| {
                let drive = self.level_freqs[t.upper()] - self.level_freqs[t.lower()];
                (params.frequency(t) - drive).abs() + params.dispersion_amplitude(t)
            })
            .fold(0.0, f64::max)
    }
}

/// Diagonal system Hamiltonian in angular units (rad/s):
/// `2π·diag(0, f̃01, f̃01+f̃12, f̃01+f̃12+f̃23)` minus the frame.
pub fn build_h0(params: &QuditParams, n_g: f64, parity: Parity, frame: &FrameSpec) -> CMatrix4 {
    let mut h = CMatrix4::zeros();
    let mut energy = 0.0;
    for t in Transition::ALL {
        energy += modulated_frequency(params, t, n_g, parity);
        let level = t.upper();
        h[(level, level)] = Complex64::new(TAU * (energy - frame.level_freqs[level]), 0.0);
    }
    h
}

/// Relaxation (`L1`, first superdiagonal `√γ1`) and dephasing (`L2`,
/// diagonal `0, √γ2`) operators.
pub fn collapse_ops(params: &QuditParams) -> Result<[CMatrix4; 2]> {
    params.validate()?;
    let mut l1 = CMatrix4::zeros();
    let mut l2 = CMatrix4::zeros();
    for m in 0..3 {
        l1[(m, m + 1)] = Complex64::new(params.gamma1[m].sqrt(), 0.0);
        l2[(m + 1, m + 1)] = Complex64::new(params.gamma2[m].sqrt(), 0.0);
    }
    Ok([l1, l2])
}
