//! Random driving protocols and the per-process identity checks shared by the
//! fluctuation-check experiment, `cohthermo check` and the acceptance target.

use std::f64::consts::PI;

use cohthermo::dynamics::{propagate_with, DrivingProtocol, StepControl, UnitaryOperator};
use cohthermo::fluctuation::{distribution_from_process, exact_expectations, Expectations, TwoPointDistribution};
use cohthermo::linalg::{CMatrix, GibbsState, C64};
use cohthermo::random::random_hermitian;
use cohthermo::thermo::{ThermalProcess, ThermoReport};
use cohthermo::Result;
use rand::Rng;

/// Step count for ensemble protocols. The identities hold for any unitary, so
/// the integrator only has to be unitary, not converged.
pub const ENSEMBLE_STEPS: StepControl = StepControl::Fixed(64);

#[derive(Clone)]
pub struct RandomProtocol {
    pub protocol: DrivingProtocol,
    pub beta: f64,
}

/// `H(s) = A (1 - s) + B s + C sin(pi s)` with GUE matrices `A, B, C`,
/// `s = t / tau`, random dimension, duration and inverse temperature.
pub fn random_protocol<R: Rng + ?Sized>(
    rng: &mut R,
    dims: (usize, usize),
    betas: (f64, f64),
) -> Result<RandomProtocol> {
    let dim = rng.random_range(dims.0..=dims.1);
    let beta = rng.random_range(betas.0..=betas.1);
    let tau = rng.random_range(0.5..=4.0);
    let a = random_hermitian(dim, rng).matrix().clone();
    let b = random_hermitian(dim, rng).matrix().clone();
    let c = random_hermitian(dim, rng).matrix().clone();
    let protocol = DrivingProtocol::new(format!("random-{dim}"), tau, dim, move |t| {
        let s = t / tau;
        let mix: CMatrix = &a * C64::new(1.0 - s, 0.0) + &b * C64::new(s, 0.0);
        mix + &c * C64::new((PI * s).sin(), 0.0)
    })?;
    Ok(RandomProtocol { protocol, beta })
}

/// Final-time report together with the two-point distribution of the same unitary.
pub struct ProcessResult {
    pub report: ThermoReport,
    pub distribution: TwoPointDistribution,
    pub exact: Expectations,
    pub unitary: UnitaryOperator,
}

pub fn evaluate(protocol: &DrivingProtocol, beta: f64, control: StepControl) -> Result<ProcessResult> {
    let process = ThermalProcess::thermal(&protocol.initial_hamiltonian(), beta)?;
    let unitary = propagate_with(protocol, 0.0, protocol.duration(), control)?.unitary;
    let rho_t = process.rho0.conjugate_by(unitary.matrix())?;
    let h_f = protocol.final_hamiltonian();
    let report = process.report(protocol.duration(), &rho_t, &h_f, true)?;
    let reference = GibbsState::new(&h_f, beta)?;
    let distribution = distribution_from_process(&process.initial, &reference, &unitary)?;
    let exact = exact_expectations(&distribution);
    Ok(ProcessResult {
        report,
        distribution,
        exact,
        unitary,
    })
}

/// NaN counts as a violation.
pub fn exceeds(value: f64, bound: f64) -> bool {
    value.is_nan() || value > bound
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    /// `|S_irr - C - D(dephased || rho_B)|`.
    pub decomposition: f64,
    /// `|beta (<w> - dF) - D(rho_tau || rho_B)|`.
    pub two_path: f64,
    /// Largest `|<exp(-x)> - 1|` over `s, p, c`.
    pub fluctuation: f64,
    /// Largest gap between `<s>, <c>, <p>` and `S_irr, C, D(dephased || rho_B)`.
    pub agreement: f64,
}

impl Residuals {
    pub fn of(report: &ThermoReport, exact: &Expectations) -> Self {
        Self {
            decomposition: report.decomposition_residual(),
            two_path: report.two_path_residual(),
            fluctuation: [exact.exp_neg_s, exact.exp_neg_p, exact.exp_neg_c]
                .iter()
                .map(|v| (v - 1.0).abs())
                .fold(0.0, f64::max),
            agreement: [
                (exact.mean_s - report.s_irr).abs(),
                (exact.mean_c - report.coherence).abs(),
                (exact.mean_p - report.pop_mismatch_b).abs(),
            ]
            .into_iter()
            .fold(0.0, f64::max),
        }
    }

    pub fn max(self, other: Self) -> Self {
        Self {
            decomposition: self.decomposition.max(other.decomposition),
            two_path: self.two_path.max(other.two_path),
            fluctuation: self.fluctuation.max(other.fluctuation),
            agreement: self.agreement.max(other.agreement),
        }
    }

    /// First violated identity, if any. Entropy-valued residuals are taken
    /// relative to `max(1, S_irr)`.
    pub fn violation(&self, s_irr: f64) -> Option<String> {
        let scale = s_irr.abs().max(1.0);
        if exceeds(self.decomposition, 1e-10 * scale) {
            return Some(format!("decomposition residual {:e}", self.decomposition));
        }
        if exceeds(self.two_path, 1e-9 * scale) {
            return Some(format!("two-path residual {:e}", self.two_path));
        }
        if exceeds(self.fluctuation, 1e-10) {
            return Some(format!("fluctuation theorem residual {:e}", self.fluctuation));
        }
        if exceeds(self.agreement, 1e-10 * scale) {
            return Some(format!("stochastic/thermodynamic mismatch {:e}", self.agreement));
        }
        None
    }
}
