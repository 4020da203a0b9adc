use nalgebra::SMatrix;
use num_complex::Complex64;

use super::params::CMatrix4;
use crate::error::{Error, Result};
use crate::model::Transition;

/// Largest tolerated `|tr ρ − 1|` before a step is rejected.
pub const TRACE_DRIFT_BOUND: f64 = 1e-9;

type Superop = SMatrix<Complex64, 16, 16>;
type StateVec = SMatrix<Complex64, 16, 1>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// 4×4 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(CMatrix4);

impl DensityMatrix {
    /// `|k⟩⟨k|`.
    pub fn basis(k: usize) -> Self {
        let mut m = CMatrix4::zeros();
        m[(k, k)] = ONE;
        Self(m)
    }

    pub fn ground() -> Self {
        Self::basis(0)
    }

    pub fn maximally_mixed() -> Self {
        Self(CMatrix4::identity() * Complex64::new(0.25, 0.0))
    }

    /// Wraps a matrix without checking the density-matrix invariants.
    pub fn from_matrix(m: CMatrix4) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &CMatrix4 {
        &self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn trace_error(&self) -> f64 {
        (self.trace() - ONE).norm()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.symmetrized()
            .0
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn population(&self, k: usize) -> f64 {
        self.0[(k, k)].re
    }

    pub fn coherence(&self, j: usize, k: usize) -> Complex64 {
        self.0[(j, k)]
    }

    /// `(ρ + ρ†)/2`.
    pub fn symmetrized(&self) -> Self {
        Self((self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }
}

/// `−i[H, ρ] + Σ (LρL† − ½{L†L, ρ})`.
pub fn lindblad_rhs(rho: &CMatrix4, h: &CMatrix4, ls: &[CMatrix4]) -> CMatrix4 {
    let mut out = (h * rho - rho * h) * (-I);
    for l in ls {
        let l_dag = l.adjoint();
        let ldl = l_dag * l;
        out += l * rho * l_dag - (ldl * rho + rho * ldl) * Complex64::new(0.5, 0.0);
    }
    out
}

fn check_trace(rho: &DensityMatrix) -> Result<()> {
    let drift = rho.trace_error();
    if drift > TRACE_DRIFT_BOUND {
        return Err(Error::StepTooLarge {
            drift,
            bound: TRACE_DRIFT_BOUND,
        });
    }
    Ok(())
}

/// One classical RK4 step of length `dt` for a constant generator. The
/// result is Hermitian-symmetrised; the trace is never renormalised.
pub fn evolve(rho: &DensityMatrix, h: &CMatrix4, ls: &[CMatrix4], dt: f64) -> Result<DensityMatrix> {
    let r = &rho.0;
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);
    let k1 = lindblad_rhs(r, h, ls);
    let k2 = lindblad_rhs(&(r + k1 * half), h, ls);
    let k3 = lindblad_rhs(&(r + k2 * half), h, ls);
    let k4 = lindblad_rhs(&(r + k3 * full), h, ls);
    let two = Complex64::new(2.0, 0.0);
    let next = r + (k1 + k2 * two + k3 * two + k4) * Complex64::new(dt / 6.0, 0.0);
    let next = DensityMatrix(next).symmetrized();
    check_trace(&next)?;
    Ok(next)
}

fn vectorize(m: &CMatrix4) -> StateVec {
    StateVec::from_fn(|r, _| m[(r / 4, r % 4)])
}

fn unvectorize(v: &StateVec) -> CMatrix4 {
    CMatrix4::from_fn(|j, k| v[4 * j + k])
}

/// Adds `coeff · (A ρ B)` to a row-major vectorised superoperator.
fn add_sandwich(s: &mut Superop, a: &CMatrix4, b: &CMatrix4, coeff: Complex64) {
    for j in 0..4 {
        for m in 0..4 {
            let ajm = a[(j, m)];
            if ajm == ZERO {
                continue;
            }
            for n in 0..4 {
                for k in 0..4 {
                    let bnk = b[(n, k)];
                    if bnk != ZERO {
                        s[(4 * j + k, 4 * m + n)] += coeff * ajm * bnk;
                    }
                }
            }
        }
    }
}

/// Dissipative part of the Lindblad generator as a 16×16 superoperator.
pub fn dissipator_superop(ls: &[CMatrix4]) -> SMatrix<Complex64, 16, 16> {
    let id = CMatrix4::identity();
    let mut s = Superop::zeros();
    for l in ls {
        let l_dag = l.adjoint();
        let ldl = l_dag * l;
        add_sandwich(&mut s, l, &l_dag, ONE);
        add_sandwich(&mut s, &ldl, &id, Complex64::new(-0.5, 0.0));
        add_sandwich(&mut s, &id, &ldl, Complex64::new(-0.5, 0.0));
    }
    s
}

/// The RK4 one-step map of a constant Lindblad generator, held as a 16×16
/// superoperator so that `n` identical steps can be applied by repeated
/// squaring.
#[derive(Debug, Clone)]
pub struct Rk4Propagator {
    step: Superop,
}

impl Rk4Propagator {
    pub fn new(h: &CMatrix4, ls: &[CMatrix4], dt: f64) -> Self {
        Self::with_dissipator(h, &dissipator_superop(ls), dt)
    }

    /// Same as [`Rk4Propagator::new`] with a precomputed dissipator.
    pub fn with_dissipator(h: &CMatrix4, dissipator: &Superop, dt: f64) -> Self {
        let mut g = *dissipator;
        let id = CMatrix4::identity();
        add_sandwich(&mut g, h, &id, -I);
        add_sandwich(&mut g, &id, h, I);
        let x = g * Complex64::new(dt, 0.0);
        let eye = Superop::identity();
        // I + X + X²/2 + X³/6 + X⁴/24 in Horner form
        let mut m = eye + x * Complex64::new(0.25, 0.0);
        m = eye + x * m * Complex64::new(1.0 / 3.0, 0.0);
        m = eye + x * m * Complex64::new(0.5, 0.0);
        m = eye + x * m;
        Self { step: m }
    }

    /// Apply `n_steps` RK4 steps.
    pub fn apply(&self, rho: &DensityMatrix, n_steps: u64) -> Result<DensityMatrix> {
        let mut v = vectorize(&rho.0);
        let mut base = self.step;
        let mut n = n_steps;
        while n > 0 {
            if n & 1 == 1 {
                v = base * v;
            }
            n >>= 1;
            if n > 0 {
                base = base * base;
            }
        }
        let out = DensityMatrix(unvectorize(&v));
        check_trace(&out)?;
        Ok(out)
    }
}

/// Number of equal steps no longer than `max_dt` covering `duration`.
pub fn step_count(duration: f64, max_dt: f64) -> u64 {
    if duration <= 0.0 {
        0
    } else {
        (duration / max_dt).ceil().max(1.0) as u64
    }
}

/// `ρ → UρU†` with `U = exp(−i·angle/2·σx)` on levels `(j, j+1)`.
pub fn apply_pulse(rho: &DensityMatrix, transition: Transition, angle: f64) -> DensityMatrix {
    let (j, k) = (transition.lower(), transition.upper());
    let c = Complex64::new((0.5 * angle).cos(), 0.0);
    let s = Complex64::new(0.0, -(0.5 * angle).sin());
    let mut u = CMatrix4::identity();
    u[(j, j)] = c;
    u[(k, k)] = c;
    u[(j, k)] = s;
    u[(k, j)] = s;
    DensityMatrix(u * rho.0 * u.adjoint())
}

#[cfg(test)]
mod tests {
    use super::super::params::{build_h0, collapse_ops, FrameSpec, QuditParams};
    use super::*;
    use crate::model::Parity;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_state(seed: u64) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix4::from_fn(|_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = a * a.adjoint();
        let tr = m.trace();
        DensityMatrix(m / tr)
    }

    fn diagonal_h() -> CMatrix4 {
        CMatrix4::from_diagonal(&nalgebra::Vector4::new(
            ZERO,
            Complex64::new(1.3e6, 0.0),
            Complex64::new(-2.0e6, 0.0),
            Complex64::new(4.7e6, 0.0),
        ))
    }

    #[test]
    fn mixed_state_is_stationary() {
        let rho = DensityMatrix::maximally_mixed();
        let d = lindblad_rhs(rho.matrix(), &diagonal_h(), &[]);
        assert!(d.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn relaxation_rate_equation() {
        let gamma: f64 = 2.5e4;
        let mut l1 = CMatrix4::zeros();
        l1[(0, 1)] = Complex64::new(gamma.sqrt(), 0.0);
        let d = lindblad_rhs(DensityMatrix::basis(1).matrix(), &CMatrix4::zeros(), &[l1]);
        assert_abs_diff_eq!(d[(0, 0)].re, gamma, epsilon = 1e-9);
        assert_abs_diff_eq!(d[(1, 1)].re, -gamma, epsilon = 1e-9);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let p = QuditParams::measured();
        let ls = collapse_ops(&p).unwrap();
        let h = build_h0(&p, 0.11, Parity::Odd, &FrameSpec::rotating(&p, Transition::T23, 750e3));
        for seed in 0..20 {
            let rho = random_state(seed);
            let d = lindblad_rhs(rho.matrix(), &h, &ls);
            // rates are ~1e5 and the frame gaps ~1e7 rad/s
            assert!(d.trace().norm() <= 1e-13 * 1e7, "trace {}", d.trace().norm());
            assert!(DensityMatrix(d).hermiticity_error() <= 1e-9);
        }
    }

    #[test]
    fn trivial_generator_is_identity() {
        let rho = random_state(3);
        let next = evolve(&rho, &CMatrix4::zeros(), &[], 1e-9).unwrap();
        assert_eq!(next, rho.symmetrized());
        let prop = Rk4Propagator::new(&CMatrix4::zeros(), &[], 1e-9);
        assert_eq!(prop.apply(&rho, 1000).unwrap().matrix(), rho.matrix());
    }

    #[test]
    fn unitary_evolution_rotates_coherence() {
        let h = diagonal_h();
        let mut rho = apply_pulse(&DensityMatrix::basis(2), Transition::T23, FRAC_PI_2);
        let start = rho.coherence(2, 3);
        let dt = 1e-9;
        let steps = 2000;
        for _ in 0..steps {
            rho = evolve(&rho, &h, &[], dt).unwrap();
        }
        for k in 0..4 {
            let p0 = apply_pulse(&DensityMatrix::basis(2), Transition::T23, FRAC_PI_2).population(k);
            assert_abs_diff_eq!(rho.population(k), p0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(rho.coherence(2, 3).norm(), start.norm(), epsilon = 1e-10);
        let gap = h[(2, 2)].re - h[(3, 3)].re;
        let expected = start * Complex64::from_polar(1.0, -gap * dt * steps as f64);
        assert!((rho.coherence(2, 3) - expected).norm() < 1e-8);
    }

    #[test]
    fn dephasing_matches_closed_form() {
        let p = QuditParams::from_coherence_times(
            [4e9, 3.9e9, 3.6e9],
            [0.0; 3],
            [f64::INFINITY; 3],
            [24e-6, 14.5e-6, 4.3e-6],
        )
        .unwrap();
        let [_, l2] = collapse_ops(&p).unwrap();
        let rho0 = random_state(11);
        let dt = 2e-9;
        let steps = 3000;
        let prop = Rk4Propagator::new(&CMatrix4::zeros(), &[l2], dt);
        let rho = prop.apply(&rho0, steps).unwrap();
        let t = dt * steps as f64;
        for j in 0..4 {
            for k in 0..4 {
                let expected = rho0.coherence(j, k).norm() * (-p.pure_dephasing_rate(j, k) * t).exp();
                assert_abs_diff_eq!(rho.coherence(j, k).norm(), expected, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn propagator_matches_stepping() {
        let p = QuditParams::measured();
        let ls = collapse_ops(&p).unwrap();
        let h = build_h0(&p, 0.37, Parity::Even, &FrameSpec::rotating(&p, Transition::T23, 750e3));
        let rho0 = random_state(5);
        let dt = 3e-9;
        let mut stepped = rho0;
        for _ in 0..777 {
            stepped = evolve(&stepped, &h, &ls, dt).unwrap();
        }
        let jumped = Rk4Propagator::new(&h, &ls, dt).apply(&rho0, 777).unwrap();
        let diff = (stepped.matrix() - jumped.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn oversized_step_is_reported() {
        let mut h = CMatrix4::zeros();
        h[(0, 1)] = Complex64::new(1e8, 0.0);
        h[(1, 0)] = Complex64::new(1e8, 0.0);
        let rho = DensityMatrix::basis(1);
        assert!(evolve(&rho, &h, &[], 1e-10).is_ok());
        assert!(matches!(evolve(&rho, &h, &[], 1e-3), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn pulses() {
        let rho = random_state(8);
        assert_eq!(apply_pulse(&rho, Transition::T12, 0.0), rho);
        let flipped = apply_pulse(&DensityMatrix::ground(), Transition::T01, PI);
        assert_abs_diff_eq!(flipped.population(1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(flipped.population(0), 0.0, epsilon = 1e-15);
        let twice = apply_pulse(&apply_pulse(&rho, Transition::T23, FRAC_PI_2), Transition::T23, FRAC_PI_2);
        let once = apply_pulse(&rho, Transition::T23, PI);
        let diff = (twice.matrix() - once.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn state_diagnostics() {
        let rho = random_state(1);
        assert!(rho.trace_error() < 1e-14);
        assert!(rho.hermiticity_error() < 1e-15);
        assert!(rho.min_eigenvalue() > -1e-12);
        assert_abs_diff_eq!(DensityMatrix::basis(2).purity(), 1.0);
        assert_abs_diff_eq!(DensityMatrix::maximally_mixed().purity(), 0.25);
        assert_eq!(step_count(0.0, 1e-9), 0);
        assert_eq!(step_count(1e-6, 3e-9), 334);
    }
}
