//! Work, free energy, irreversible entropy and its split into a coherent part
//! and a population-mismatch part; the non-adiabaticity parameter.

use crate::dynamics::{
    detect_level_crossing, evolve_state, propagate_with, DrivingProtocol, StepControl,
};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    classical_relative_entropy, clamp_entropy, max_abs_diff, populations, shannon_entropy,
    von_neumann_entropy, DensityMatrix, GibbsState, Observable,
};

/// Disagreement tolerated between `beta (<w> - dF)` and `D(rho_t || rho_B)`.
pub const TWO_PATH_TOLERANCE: f64 = 1e-9;
/// Distance from the Gibbs state tolerated for a "thermal" initial state.
pub const THERMAL_START_TOLERANCE: f64 = 1e-9;

/// All scalar functionals at one time `t`. Entropies in nats, energies in
/// units of the Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoReport {
    pub t: f64,
    pub avg_work: f64,
    pub delta_f: f64,
    pub w_irr: f64,
    /// `beta_i <w_irr>`.
    pub s_irr: f64,
    pub coherence: f64,
    /// `D(dephase_t(rho_t) || rho^{beta_i}_{lambda(t)})`.
    pub pop_mismatch_b: f64,
    /// `D(rho_tau || rho_A)`, final time only.
    pub non_adiabaticity: Option<f64>,
    /// `D(dephase_tau(rho_tau) || rho_A)`, final time only.
    pub pop_mismatch_a: Option<f64>,
    /// Second route to `s_irr`: `D(rho_t || rho^{beta_i}_{lambda(t)})`.
    pub s_irr_relative_entropy: f64,
    pub crossing_warning: bool,
}

impl ThermoReport {
    /// `|S_irr - C - pop_B|`.
    pub fn decomposition_residual(&self) -> f64 {
        (self.s_irr - self.coherence - self.pop_mismatch_b).abs()
    }

    /// `|A - C - pop_A|` when the final-time fields are present.
    pub fn adiabatic_residual(&self) -> Option<f64> {
        Some((self.non_adiabaticity? - self.coherence - self.pop_mismatch_a?).abs())
    }

    pub fn two_path_residual(&self) -> f64 {
        (self.s_irr - self.s_irr_relative_entropy).abs()
    }
}

/// `Tr{H_t rho_t} - Tr{H_i rho_0}`.
pub fn average_work(
    rho0: &DensityMatrix,
    h_i: &Observable,
    rho_t: &DensityMatrix,
    h_t: &Observable,
) -> Result<f64> {
    check_dim(rho0.dim(), rho_t.dim())?;
    Ok(h_t.expectation(rho_t)? - h_i.expectation(rho0)?)
}

/// Gibbs state of `h_i` at `beta_i`, after checking that `rho0` is it.
pub fn thermal_start(rho0: &DensityMatrix, h_i: &Observable, beta_i: f64) -> Result<GibbsState> {
    check_dim(h_i.dim(), rho0.dim())?;
    if !(beta_i.is_finite() && beta_i > 0.0) {
        return Err(Error::Parameter(format!(
            "initial inverse temperature must be positive, got {beta_i}"
        )));
    }
    let gibbs = GibbsState::new(h_i, beta_i)?;
    let distance = max_abs_diff(gibbs.density_matrix().matrix(), rho0.matrix());
    if distance > THERMAL_START_TOLERANCE {
        return Err(Error::Precondition(format!(
            "initial state is not the Gibbs state of H(0) at beta_i (max deviation {distance:e})"
        )));
    }
    Ok(gibbs)
}

/// Everything needed to evaluate reports along one process started from a
/// Gibbs state.
#[derive(Debug, Clone)]
pub struct ThermalProcess {
    pub rho0: DensityMatrix,
    pub initial: GibbsState,
    pub initial_energy: f64,
    pub initial_free_energy: f64,
}

impl ThermalProcess {
    pub fn new(rho0: &DensityMatrix, h_i: &Observable, beta_i: f64) -> Result<Self> {
        let initial = thermal_start(rho0, h_i, beta_i)?;
        Ok(Self {
            rho0: rho0.clone(),
            initial_energy: h_i.expectation(rho0)?,
            initial_free_energy: initial.free_energy()?,
            initial,
        })
    }

    /// Starts directly from the Gibbs state of `h_i`.
    pub fn thermal(h_i: &Observable, beta_i: f64) -> Result<Self> {
        let rho0 = GibbsState::new(h_i, beta_i)?.density_matrix();
        Self::new(&rho0, h_i, beta_i)
    }

    pub fn beta(&self) -> f64 {
        self.initial.beta
    }

    /// Report for the state `rho_t` under the instantaneous Hamiltonian `h_t`.
    /// With `is_final`, the non-adiabaticity fields are filled too (the final
    /// Hamiltonian's ascending eigenbasis carries the initial populations).
    pub fn report(
        &self,
        t: f64,
        rho_t: &DensityMatrix,
        h_t: &Observable,
        is_final: bool,
    ) -> Result<ThermoReport> {
        check_dim(self.rho0.dim(), rho_t.dim())?;
        let beta = self.beta();
        let reference = GibbsState::new(h_t, beta)?;
        let basis = reference.basis();

        let avg_work = h_t.expectation(rho_t)? - self.initial_energy;
        let delta_f = reference.free_energy()? - self.initial_free_energy;
        let w_irr = avg_work - delta_f;
        let s_path_work = beta * w_irr;

        let pops = populations(rho_t, &basis)?;
        let s_state = von_neumann_entropy(rho_t);
        let s_diag = shannon_entropy(&pops);
        let cross_b: f64 = pops
            .iter()
            .zip(&reference.log_populations)
            .map(|(p, l)| p * l)
            .sum();

        let s_path_divergence = clamp_entropy(-s_state - cross_b, "D(rho_t || rho_B)")?;
        let coherence = clamp_entropy(s_diag - s_state, "coherence")?;
        let pop_mismatch_b = clamp_entropy(-s_diag - cross_b, "population mismatch (B)")?;
        let s_irr = clamp_entropy(s_path_work, "irreversible entropy")?;

        if (s_irr - s_path_divergence).abs() > TWO_PATH_TOLERANCE {
            return Err(Error::Invariant(format!(
                "irreversible entropy routes disagree at t = {t}: beta*w_irr = {s_irr}, D = {s_path_divergence}"
            )));
        }

        let (non_adiabaticity, pop_mismatch_a) = if is_final {
            let cross_a: f64 = pops
                .iter()
                .zip(&self.initial.log_populations)
                .map(|(p, l)| p * l)
                .sum();
            (
                Some(clamp_entropy(-s_state - cross_a, "non-adiabaticity")?),
                Some(clamp_entropy(-s_diag - cross_a, "population mismatch (A)")?),
            )
        } else {
            (None, None)
        };

        Ok(ThermoReport {
            t,
            avg_work,
            delta_f,
            w_irr,
            s_irr,
            coherence,
            pop_mismatch_b,
            non_adiabaticity,
            pop_mismatch_a,
            s_irr_relative_entropy: s_path_divergence,
            crossing_warning: false,
        })
    }
}

/// Report at time `t` of the process `protocol` started in the Gibbs state
/// `rho0` of `H(0)` at `beta_i`.
pub fn irreversible_report(
    rho0: &DensityMatrix,
    protocol: &DrivingProtocol,
    beta_i: f64,
    t: f64,
    control: StepControl,
) -> Result<ThermoReport> {
    let process = ThermalProcess::new(rho0, &protocol.initial_hamiltonian(), beta_i)?;
    let tau = protocol.duration();
    if !(0.0..=tau).contains(&t) {
        return Err(Error::Parameter(format!("time {t} outside [0, {tau}]")));
    }
    let is_final = t == tau;
    if t == 0.0 {
        return process.report(0.0, rho0, &protocol.initial_hamiltonian(), false);
    }
    let u = propagate_with(protocol, 0.0, t, control)?.unitary;
    let rho_t = rho0.conjugate_by(u.matrix())?;
    process.report(t, &rho_t, &protocol.hamiltonian_at(t)?, is_final)
}

/// Final-time report including `A = D(rho_tau || rho_A)` and its split.
pub fn non_adiabaticity_report(
    rho0: &DensityMatrix,
    protocol: &DrivingProtocol,
    beta_i: f64,
    control: StepControl,
) -> Result<ThermoReport> {
    let mut report = irreversible_report(rho0, protocol, beta_i, protocol.duration(), control)?;
    report.crossing_warning = detect_level_crossing(protocol, 64)?;
    Ok(report)
}

/// Reports at `samples + 1` uniform times along the process.
pub fn trajectory_reports(
    rho0: &DensityMatrix,
    protocol: &DrivingProtocol,
    beta_i: f64,
    samples: usize,
    control: StepControl,
) -> Result<Vec<ThermoReport>> {
    let process = ThermalProcess::new(rho0, &protocol.initial_hamiltonian(), beta_i)?;
    let crossing = detect_level_crossing(protocol, samples.max(64))?;
    let trajectory = evolve_state(rho0, protocol, samples, control)?;
    let last = trajectory.len() - 1;
    trajectory
        .iter()
        .enumerate()
        .map(|(k, point)| {
            let mut r = process.report(point.t, &point.state, &point.hamiltonian, k == last)?;
            r.crossing_warning = crossing && k == last;
            Ok(r)
        })
        .collect()
}

/// `D(rho_A || rho_B)`: the irreversible entropy left after an infinitely slow
/// (transition-less) drive.
pub fn adiabatic_limit_entropy(protocol: &DrivingProtocol, beta_i: f64) -> Result<f64> {
    let initial = GibbsState::new(&protocol.initial_hamiltonian(), beta_i)?;
    let reference = GibbsState::new(&protocol.final_hamiltonian(), beta_i)?;
    classical_relative_entropy(&initial.populations(), &reference.log_populations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{adiabatic_state, transition_matrix};
    use crate::linalg::{relative_entropy, spectral_decompose, thermal_state, Basis};
    use crate::models::{cyclic_qubit_protocol, qubit_protocol, QubitProtocolParams};
    use crate::random::random_hermitian;
    use nalgebra::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig1(tau: f64, beta: f64) -> (DrivingProtocol, DensityMatrix) {
        let p = qubit_protocol(&QubitProtocolParams {
            omega_i: 1.0,
            omega_f: 2.0,
            tau,
            beta_i: beta,
        })
        .unwrap();
        let rho0 = thermal_state(&p.initial_hamiltonian(), beta).unwrap();
        (p, rho0)
    }

    fn random_protocol(d: usize, rng: &mut ChaCha8Rng) -> DrivingProtocol {
        let a = random_hermitian(d, rng).matrix().clone();
        let b = random_hermitian(d, rng).matrix().clone();
        let c = random_hermitian(d, rng).matrix().clone();
        let tau = rng.random_range(0.2..3.0);
        DrivingProtocol::new("random", tau, d, move |t| {
            let s = t / tau;
            let w = Complex::new(1.0 - s, 0.0);
            let v = Complex::new(s, 0.0);
            let bump = Complex::new((std::f64::consts::PI * s).sin(), 0.0);
            &a * w + &b * v + &c * bump
        })
        .unwrap()
    }

    #[test]
    fn no_evolution_no_work() {
        let (p, rho0) = fig1(1.0, 1.0);
        let h = p.initial_hamiltonian();
        assert_eq!(average_work(&rho0, &h, &rho0, &h).unwrap(), 0.0);
    }

    #[test]
    fn sudden_quench_work() {
        let (p, rho0) = fig1(1.0, 1.0);
        let hi = p.initial_hamiltonian();
        let hf = p.final_hamiltonian();
        let w = average_work(&rho0, &hi, &rho0, &hf).unwrap();
        let diff = Observable::new(hf.matrix() - hi.matrix()).unwrap();
        assert!((w - diff.expectation(&rho0).unwrap()).abs() < 1e-15);
    }

    /// Work from eigen-populations and transition probabilities only.
    #[test]
    fn work_matches_population_form() {
        let (p, rho0) = fig1(1.0, 2.0);
        let hi = p.initial_hamiltonian();
        let hf = p.final_hamiltonian();
        let u = propagate_with(&p, 0.0, 1.0, StepControl::default()).unwrap().unitary;
        let rho_t = rho0.conjugate_by(u.matrix()).unwrap();
        let w = average_work(&rho0, &hi, &rho_t, &hf).unwrap();

        let si = spectral_decompose(&hi);
        let sf = spectral_decompose(&hf);
        let p0 = populations(&rho0, &si.basis()).unwrap();
        let tm = transition_matrix(&u, &si.basis(), &sf.basis()).unwrap();
        let pt = tm.push_forward(&p0);
        let oracle: f64 = (0..2)
            .map(|n| pt[n] * sf.eigenvalues[n] - p0[n] * si.eigenvalues[n])
            .sum();
        assert!((w - oracle).abs() < 1e-10);
    }

    #[test]
    fn initial_time_report_is_zero() {
        let (p, rho0) = fig1(1.0, 1.0);
        let r = irreversible_report(&rho0, &p, 1.0, 0.0, StepControl::default()).unwrap();
        for v in [r.avg_work, r.delta_f, r.w_irr, r.s_irr, r.coherence, r.pop_mismatch_b] {
            assert!(v.abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn rejects_non_thermal_start() {
        let (p, _) = fig1(1.0, 1.0);
        let wrong = thermal_state(&p.initial_hamiltonian(), 2.0).unwrap();
        assert!(matches!(
            irreversible_report(&wrong, &p, 1.0, 1.0, StepControl::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn decomposition_holds_on_random_protocols() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let d = rng.random_range(2..=8);
            let beta = rng.random_range(0.1..5.0);
            let p = random_protocol(d, &mut rng);
            let rho0 = thermal_state(&p.initial_hamiltonian(), beta).unwrap();
            let reports = trajectory_reports(&rho0, &p, beta, 4, StepControl::Fixed(40)).unwrap();
            for r in &reports {
                assert!(r.decomposition_residual() < 1e-10, "{r:?}");
                assert!(r.two_path_residual() < 1e-9);
                assert!((r.s_irr - beta * r.w_irr).abs() < 1e-10);
            }
            let last = reports.last().unwrap();
            assert!(last.adiabatic_residual().unwrap() < 1e-10);
        }
    }

    /// Coherence equals the growth of diagonal entropy.
    #[test]
    fn coherence_is_diagonal_entropy_production() {
        let (p, rho0) = fig1(1.0, 2.0);
        let u = propagate_with(&p, 0.0, 1.0, StepControl::default()).unwrap().unitary;
        let rho_t = rho0.conjugate_by(u.matrix()).unwrap();
        let bi = spectral_decompose(&p.initial_hamiltonian()).basis();
        let bf = spectral_decompose(&p.final_hamiltonian()).basis();
        let growth = shannon_entropy(&populations(&rho_t, &bf).unwrap())
            - shannon_entropy(&populations(&rho0, &bi).unwrap());
        let r = non_adiabaticity_report(&rho0, &p, 2.0, StepControl::default()).unwrap();
        assert!((r.coherence - growth).abs() < 1e-10);
    }

    #[test]
    fn non_adiabaticity_matches_relative_entropy_to_adiabatic_state() {
        let (p, rho0) = fig1(2.0, 1.0);
        let r = non_adiabaticity_report(&rho0, &p, 1.0, StepControl::default()).unwrap();
        let u = propagate_with(&p, 0.0, 2.0, StepControl::default()).unwrap().unitary;
        let rho_t = rho0.conjugate_by(u.matrix()).unwrap();
        let rho_a =
            adiabatic_state(&rho0, &p.initial_hamiltonian(), &p.final_hamiltonian()).unwrap();
        let direct = relative_entropy(&rho_t, &rho_a).unwrap();
        assert!((r.non_adiabaticity.unwrap() - direct).abs() < 1e-10);
        assert!(!r.crossing_warning);
    }

    #[test]
    fn sudden_limit_non_adiabaticity() {
        let (p, rho0) = fig1(1e-3, 1.0);
        let r = non_adiabaticity_report(&rho0, &p, 1.0, StepControl::default()).unwrap();
        // rho_tau ~ rho_0; evaluate D(rho_0 || rho_A) directly
        let rho_a =
            adiabatic_state(&rho0, &p.initial_hamiltonian(), &p.final_hamiltonian()).unwrap();
        let direct = relative_entropy(&rho0, &rho_a).unwrap();
        assert!(direct > 0.1);
        assert!((r.non_adiabaticity.unwrap() - direct).abs() < 1e-3);
    }

    #[test]
    fn slow_limit_non_adiabaticity_vanishes() {
        let (p, rho0) = fig1(200.0, 1.0);
        let r = non_adiabaticity_report(&rho0, &p, 1.0, StepControl::default()).unwrap();
        assert!(r.non_adiabaticity.unwrap() < 1e-4);
    }

    #[test]
    fn cyclic_protocol_identities() {
        let p = cyclic_qubit_protocol(1.0, 0.5, 1.5).unwrap();
        let rho0 = thermal_state(&p.initial_hamiltonian(), 1.0).unwrap();
        let r = non_adiabaticity_report(&rho0, &p, 1.0, StepControl::default()).unwrap();
        assert!((r.non_adiabaticity.unwrap() - r.s_irr).abs() < 1e-10);
        assert!(r.delta_f.abs() < 1e-14);
        let rho_a =
            adiabatic_state(&rho0, &p.initial_hamiltonian(), &p.final_hamiltonian()).unwrap();
        assert!(max_abs_diff(rho_a.matrix(), rho0.matrix()) < 1e-10);
    }

    #[test]
    fn coherence_decreases_and_irreversibility_persists() {
        let beta = 1.0;
        let mut coherences = Vec::new();
        let mut last_s_irr = 0.0;
        for tau in [0.5, 2.0, 8.0, 32.0] {
            let (p, rho0) = fig1(tau, beta);
            let r = non_adiabaticity_report(&rho0, &p, beta, StepControl::default()).unwrap();
            coherences.push(r.coherence);
            last_s_irr = r.s_irr;
        }
        assert!(coherences.windows(2).all(|w| w[1] < w[0]), "{coherences:?}");
        let (p, _) = fig1(32.0, beta);
        let limit = adiabatic_limit_entropy(&p, beta).unwrap();
        assert!(limit > 0.0);
        assert!((last_s_irr - limit).abs() < 0.05 * limit);
    }

    #[test]
    fn shape_errors() {
        let (p, _) = fig1(1.0, 1.0);
        let rho3 = DensityMatrix::maximally_mixed(3);
        let h = p.initial_hamiltonian();
        assert!(matches!(
            average_work(&rho3, &h, &rho3, &h),
            Err(Error::Shape { .. })
        ));
        assert!(Basis::computational(2).dim() == 2);
    }
}
