//! Four-level density-matrix model of the Ramsey experiment.
//!
//! The Hamiltonian is diagonal with charge-modulated transition frequencies
//! and is written in a frame rotating with the drives, so the probed
//! transition precesses at the Ramsey detuning. Relaxation and dephasing
//! enter through two collapse operators. Pulses are instantaneous rotations.

mod dynamics;
mod params;
mod ramsey;

pub use dynamics::{
    apply_pulse, dissipator_superop, evolve, lindblad_rhs, step_count, DensityMatrix, Rk4Propagator,
    TRACE_DRIFT_BOUND,
};
pub use params::{build_h0, collapse_ops, modulated_frequency, CMatrix4, FrameSpec, QuditParams};
pub use ramsey::{default_dt, simulate_lindblad_ramsey, InvariantReport, LindbladOptions, LindbladRun, Readout};
