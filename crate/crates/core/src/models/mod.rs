//! The two driven systems: a qubit under a rotating, stretching field and the
//! quantum kicked rotor.

mod bessel;
mod qubit;
mod rotor;

pub use bessel::{bessel_j_orders, bessel_j_signed};
pub use qubit::{cyclic_qubit_protocol, qubit_hamiltonian, qubit_protocol, QubitProtocolParams};
pub use rotor::{
    momentum_gibbs_state, rotor_floquet_operator, rotor_free_operator, rotor_kick_operator,
    rotor_run, rotor_tpm_distribution, saturation_statistics, suggested_cutoff, KickKernel,
    KickMethod, MomentumLattice, RotorDiagnostics, RotorOptions, RotorParams, RotorRun,
    SaturationStats,
};
