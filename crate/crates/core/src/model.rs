//! Closed-form charge dispersion and Ramsey population model.
//!
//! All frequencies are ordinary frequencies in Hz; the `2π` is applied inside
//! the trigonometric arguments.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A transmon transition `j → j+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Transition {
    #[serde(rename = "01")]
    T01,
    #[serde(rename = "12")]
    T12,
    #[serde(rename = "23")]
    T23,
}

impl Transition {
    pub const ALL: [Transition; 3] = [Transition::T01, Transition::T12, Transition::T23];

    /// Index of the lower level, `j`.
    pub fn lower(self) -> usize {
        match self {
            Transition::T01 => 0,
            Transition::T12 => 1,
            Transition::T23 => 2,
        }
    }

    pub fn upper(self) -> usize {
        self.lower() + 1
    }

    pub fn label(self) -> &'static str {
        match self {
            Transition::T01 => "01",
            Transition::T12 => "12",
            Transition::T23 => "23",
        }
    }

    /// Measured parameters of the device for this transition.
    pub fn preset(self) -> LevelParams {
        match self {
            Transition::T01 => LevelParams::new(4.0108e9, 1.7e3, 24e-6, 500e3),
            Transition::T12 => LevelParams::new(3.8830e9, 62e3, 14.5e-6, 500e3),
            Transition::T23 => LevelParams::new(3.6287e9, 1.3e6, 4.3e-6, 750e3),
        }
    }

    /// Free-evolution span spanning several beat periods and roughly three
    /// decay constants of the preset.
    pub fn default_tr_max(self) -> f64 {
        match self {
            Transition::T01 => 50e-6,
            Transition::T12 => 40e-6,
            Transition::T23 => 10e-6,
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Transition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "01" => Ok(Transition::T01),
            "12" => Ok(Transition::T12),
            "23" => Ok(Transition::T23),
            other => Err(Error::invalid("level", format!("expected 01, 12 or 23, got `{other}`"))),
        }
    }
}

/// Per-transition physics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    /// Mean transition frequency, Hz.
    pub f_bar: f64,
    /// Maximum charge dispersion, Hz.
    pub eps_max: f64,
    /// Envelope decay constant, s.
    pub t2_star: f64,
    /// Ramsey detuning from the mean transition frequency, Hz.
    pub omega_r: f64,
}

impl LevelParams {
    pub fn new(f_bar: f64, eps_max: f64, t2_star: f64, omega_r: f64) -> Self {
        Self {
            f_bar,
            eps_max,
            t2_star,
            omega_r,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.eps_max.is_finite() && self.eps_max >= 0.0) {
            return Err(Error::invalid(format!("{path}.eps_max"), "must be >= 0"));
        }
        if !(self.t2_star > 0.0) {
            return Err(Error::invalid(format!("{path}.t2_star"), "must be > 0"));
        }
        if !self.omega_r.is_finite() || !self.f_bar.is_finite() {
            return Err(Error::invalid(path, "frequencies must be finite"));
        }
        Ok(())
    }
}

/// Quasiparticle charge parity `p ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];

    pub fn value(self) -> u8 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    /// Phase offset `p·π` added to the charge phase.
    pub fn phase(self) -> f64 {
        f64::from(self.value()) * PI
    }

    pub fn flipped(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Instantaneous dispersion `ε = ε_max·cos(2π n_g)`.
pub fn dispersion(eps_max: f64, n_g: f64) -> f64 {
    eps_max * (TAU * n_g).cos()
}

/// Transition frequency for charge offset `n_g` and parity `p`:
/// `f̄ + ε_max·cos(2π n_g + pπ)`.
pub fn qubit_frequency(f_bar: f64, eps_max: f64, n_g: f64, parity: Parity) -> f64 {
    let charge = dispersion(eps_max, n_g);
    match parity {
        Parity::Even => f_bar + charge,
        Parity::Odd => f_bar - charge,
    }
}

/// Equal-weight mixture of the two parity bands,
/// `½[cos 2π(Ω+ε)t + cos 2π(Ω−ε)t]`, range `[-1, 1]`.
pub fn parity_band_population(omega_r: f64, eps: f64, t_r: f64) -> f64 {
    0.5 * ((TAU * (omega_r + eps) * t_r).cos() + (TAU * (omega_r - eps) * t_r).cos())
}

/// Excited-state probability
/// `½[1 + e^{-t/T2*}·cos(2πΩ t)·cos(2πε t)]`, range `[0, 1]`.
pub fn ramsey_population(params: &LevelParams, eps: f64, t_r: f64) -> f64 {
    let decay = (-t_r / params.t2_star).exp();
    0.5 * (1.0 + decay * (TAU * params.omega_r * t_r).cos() * (TAU * eps * t_r).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion(1.305e6, 0.0), 1.305e6);
        assert_abs_diff_eq!(dispersion(1.305e6, 0.25), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(dispersion(62e3, 0.5), -62e3, epsilon = 1e-9);
    }

    #[test]
    fn qubit_frequency_examples() {
        assert_eq!(qubit_frequency(3.6287e9, 1.305e6, 0.0, Parity::Even), 3.6287e9 + 1.305e6);
        let (f, e, n) = (3.8830e9, 62e3, 0.137);
        let even = qubit_frequency(f, e, n, Parity::Even);
        let odd = qubit_frequency(f, e, n, Parity::Odd);
        assert_abs_diff_eq!(odd, 2.0 * f - even, epsilon = 1e-6);
        assert_eq!(qubit_frequency(f, 0.0, 0.31, Parity::Odd), f);
    }

    #[test]
    fn parity_band_examples() {
        assert_eq!(parity_band_population(7e5, 3e5, 0.0), 1.0);
        assert_abs_diff_eq!(parity_band_population(500e3, 0.0, 1e-6), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn ramsey_population_examples() {
        let p = LevelParams::new(3.6287e9, 0.0, 4.3e-6, 750e3);
        assert_eq!(ramsey_population(&p, 1.3e6, 0.0), 1.0);
        assert_abs_diff_eq!(ramsey_population(&p, 1.3e6, 1.0), 0.5, epsilon = 1e-15);
        // ½[1 + e^{-0.6667/4.3}·cos(π)], evaluated independently with mpmath
        let expected = 0.071_809_008_129_908_44;
        assert_abs_diff_eq!(ramsey_population(&p, 0.0, 2.0 / 3.0 * 1e-6), expected, epsilon = 1e-12);
    }

    #[test]
    fn transition_labels_round_trip() {
        for t in Transition::ALL {
            assert_eq!(t.label().parse::<Transition>().unwrap(), t);
            assert_eq!(t.upper(), t.lower() + 1);
        }
        assert!("34".parse::<Transition>().is_err());
    }

    proptest! {
        #[test]
        fn product_to_sum(omega in -2e6f64..2e6, eps in -2e6f64..2e6, t in 0.0f64..20e-6) {
            let lhs = parity_band_population(omega, eps, t);
            let rhs = (TAU * omega * t).cos() * (TAU * eps * t).cos();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn band_mixture_matches_undamped_model(omega in -2e6f64..2e6, eps in -2e6f64..2e6, t in 0.0f64..20e-6) {
            let p = LevelParams::new(4e9, 0.0, f64::INFINITY, omega);
            let lhs = parity_band_population(omega, eps, t);
            prop_assert!((lhs - (2.0 * ramsey_population(&p, eps, t) - 1.0)).abs() <= 1e-12);
        }

        #[test]
        fn population_is_even_in_eps_and_bounded(
            omega in -2e6f64..2e6, eps in -2e6f64..2e6, t in 0.0f64..50e-6, t2 in 1e-7f64..1e-4,
        ) {
            let p = LevelParams::new(4e9, 0.0, t2, omega);
            let plus = ramsey_population(&p, eps, t);
            prop_assert!((plus - ramsey_population(&p, -eps, t)).abs() <= 1e-15);
            prop_assert!((0.0..=1.0).contains(&plus));
            let band = parity_band_population(omega, eps, t);
            prop_assert!((-1.0..=1.0).contains(&band));
        }

        #[test]
        fn dispersion_is_periodic_in_charge(eps in 0.0f64..2e6, n in -5.0f64..5.0) {
            prop_assert!((dispersion(eps, n) - dispersion(eps, n + 1.0)).abs() <= 1e-9 * eps.max(1.0));
            prop_assert!(dispersion(eps, n).abs() <= eps);
        }
    }
}
