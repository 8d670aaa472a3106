//! Built-in invariant suite behind `cohthermo check`. Small sizes; the
//! acceptance target runs the full-size versions.

use cohthermo::dynamics::{adiabatic_state, StepControl};
use cohthermo::fluctuation::{exact_expectations, sample};
use cohthermo::linalg::{max_abs_diff, unitarity_residual, GibbsState};
use cohthermo::models::{
    cyclic_qubit_protocol, qubit_protocol, rotor_kick_operator, rotor_run, rotor_tpm_distribution,
    KickKernel, KickMethod, MomentumLattice, QubitProtocolParams, RotorOptions, RotorParams,
};
use cohthermo::thermo::irreversible_report;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::ensemble::{evaluate, random_protocol, Residuals, ENSEMBLE_STEPS};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, run: impl FnOnce() -> cohthermo::Result<(bool, String)>) -> CheckResult {
    match run() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn ensemble_identities() -> cohthermo::Result<(bool, String)> {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let protocols = (0..24)
        .map(|_| random_protocol(&mut rng, (2, 8), (0.1, 5.0)))
        .collect::<cohthermo::Result<Vec<_>>>()?;
    let results = protocols
        .par_iter()
        .map(|p| {
            let r = evaluate(&p.protocol, p.beta, ENSEMBLE_STEPS)?;
            let res = Residuals::of(&r.report, &r.exact);
            Ok((res, res.violation(r.report.s_irr)))
        })
        .collect::<cohthermo::Result<Vec<_>>>()?;
    let worst = results
        .iter()
        .fold(Residuals::default(), |acc, (r, _)| acc.max(*r));
    let violation = results.iter().find_map(|(_, v)| v.clone());
    Ok((violation.is_none(), format!("{worst:?}")))
}

fn cyclic_identity() -> cohthermo::Result<(bool, String)> {
    let p = cyclic_qubit_protocol(1.0, 0.7, 3.0)?;
    let gibbs = GibbsState::new(&p.initial_hamiltonian(), 1.0)?;
    let rho0 = gibbs.density_matrix();
    let r = irreversible_report(&rho0, &p, 1.0, p.duration(), StepControl::default())?;
    let gap = (r.non_adiabaticity.unwrap_or(f64::NAN) - r.s_irr).abs();
    let rho_a = adiabatic_state(&rho0, &p.initial_hamiltonian(), &p.final_hamiltonian())?;
    let dist = max_abs_diff(rho_a.matrix(), rho0.matrix());
    Ok((gap < 1e-10 && dist < 1e-10, format!("|A - S_irr| = {gap:e}, |rho_A - rho_0| = {dist:e}")))
}

fn kick_kernels() -> cohthermo::Result<(bool, String)> {
    let n = 128;
    let dense = rotor_kick_operator(9.5, n)?;
    let grid = KickKernel::new(9.5, MomentumLattice::new(n), KickMethod::AngleGrid)?.dense();
    let diff = max_abs_diff(dense.matrix(), &grid);
    let unit = unitarity_residual(dense.matrix());
    Ok((diff < 1e-9 && unit < 1e-9, format!("kernel diff {diff:e}, unitarity {unit:e}")))
}

fn rotor_invariants() -> cohthermo::Result<(bool, String)> {
    let params = RotorParams {
        k: 5.0,
        period: 0.25,
        beta: 5.0,
        cutoff: 64,
        kicks: 500,
    };
    let run = rotor_run(&params, &RotorOptions::default())?;
    let bad = run.diagnostics.iter().find(|d| {
        !(0.0..=1.0).contains(&d.ratio) || d.energy < run.initial_energy - 1e-10
    });
    let dist = rotor_tpm_distribution(5.0, 0.25, 5.0, 64, 20)?;
    let e = exact_expectations(&dist);
    let ft = [e.exp_neg_s, e.exp_neg_p, e.exp_neg_c]
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((
        bad.is_none() && ft < 1e-10,
        format!("first bad kick {:?}, fluctuation residual {ft:e}", bad.map(|d| d.kick)),
    ))
}

fn qubit_monte_carlo() -> cohthermo::Result<(bool, String)> {
    let p = qubit_protocol(&QubitProtocolParams {
        omega_i: 1.0,
        omega_f: 2.0,
        tau: 1.0,
        beta_i: 1.0,
    })?;
    let r = evaluate(&p, 1.0, StepControl::default())?;
    let est = sample(&r.distribution, 100_000, 17)?;
    let z = [
        (est.estimates.exp_neg_s - 1.0) / est.standard_errors.exp_neg_s,
        (est.estimates.exp_neg_p - 1.0) / est.standard_errors.exp_neg_p,
        (est.estimates.exp_neg_c - 1.0) / est.standard_errors.exp_neg_c,
    ];
    let worst = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok((worst < 5.0, format!("largest |z| = {worst:.3}")))
}

pub fn run_checks() -> Vec<CheckResult> {
    vec![
        result("random-protocol identities", ensemble_identities),
        result("cyclic identity", cyclic_identity),
        result("kick kernel agreement", kick_kernels),
        result("rotor invariants", rotor_invariants),
        result("qubit monte carlo", qubit_monte_carlo),
    ]
}
