use std::f64::consts::PI;

use crate::dynamics::DrivingProtocol;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitProtocolParams {
    pub omega_i: f64,
    pub omega_f: f64,
    pub tau: f64,
    pub beta_i: f64,
}

impl QubitProtocolParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_i", self.omega_i),
            ("omega_f", self.omega_f),
            ("tau", self.tau),
            ("beta_i", self.beta_i),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `omega (sigma_x cos phi + sigma_y sin phi)`.
pub fn qubit_hamiltonian(omega: f64, phi: f64) -> CMatrix {
    let zero = C64::new(0.0, 0.0);
    let off = C64::from_polar(omega, -phi);
    CMatrix::from_row_slice(2, 2, &[zero, off, off.conj(), zero])
}

/// Field rotating by a quarter turn, `phi(t) = pi t / (2 tau)`, while its
/// strength moves linearly from `omega_i` to `omega_f`.
pub fn qubit_protocol(params: &QubitProtocolParams) -> Result<DrivingProtocol> {
    params.validate()?;
    let QubitProtocolParams {
        omega_i,
        omega_f,
        tau,
        ..
    } = *params;
    DrivingProtocol::new("qubit", tau, 2, move |t| {
        let s = t / tau;
        qubit_hamiltonian(omega_i * (1.0 - s) + omega_f * s, PI * s / 2.0)
    })
}

/// Closed loop in parameter space: the field swings out by up to a quarter
/// turn and strengthens by `1 + amplitude`, then returns, so `H(tau) = H(0)`.
pub fn cyclic_qubit_protocol(omega_i: f64, amplitude: f64, tau: f64) -> Result<DrivingProtocol> {
    if !(omega_i.is_finite() && omega_i > 0.0 && amplitude.is_finite() && amplitude > -1.0) {
        return Err(Error::Parameter(format!(
            "cyclic protocol needs omega_i > 0 and amplitude > -1, got {omega_i}, {amplitude}"
        )));
    }
    DrivingProtocol::new("qubit-cyclic", tau, 2, move |t| {
        let bump = (PI * t / tau).sin();
        qubit_hamiltonian(omega_i * (1.0 + amplitude * bump), PI / 2.0 * bump)
    })
}
