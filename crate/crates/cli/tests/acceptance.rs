//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::fs;
use std::process::Command;
use std::time::Instant;

use cohthermo::dynamics::{adiabatic_state, StepControl};
use cohthermo::fluctuation::{exact_expectations, sample};
use cohthermo::linalg::{max_abs_diff, unitarity_residual, GibbsState};
use cohthermo::models::{
    cyclic_qubit_protocol, qubit_protocol, rotor_kick_operator, rotor_run, rotor_tpm_distribution,
    saturation_statistics, KickKernel, KickMethod, MomentumLattice, QubitProtocolParams,
    RotorOptions, RotorParams, RotorRun,
};
use cohthermo::thermo::{adiabatic_limit_entropy, irreversible_report, ThermoReport};
use cohthermo_cli::ensemble::{evaluate, random_protocol, ProcessResult, ENSEMBLE_STEPS};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

struct Runner {
    failures: usize,
}

impl Runner {
    fn criterion(&mut self, id: usize, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                self.failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{id}] {name}: {detail} ({secs:.1} s)");
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn core<T>(r: cohthermo::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn ensemble() -> Result<Vec<ProcessResult>, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(20_240_601);
    let protocols = (0..200)
        .map(|_| random_protocol(&mut rng, (2, 16), (0.1, 5.0)))
        .collect::<cohthermo::Result<Vec<_>>>();
    let protocols = core(protocols)?;
    core(
        protocols
            .par_iter()
            .map(|p| evaluate(&p.protocol, p.beta, ENSEMBLE_STEPS))
            .collect(),
    )
}

fn worst(results: &[ProcessResult], f: impl Fn(&ProcessResult) -> f64) -> f64 {
    results.iter().map(f).fold(0.0, f64::max)
}

fn fig1(tau: f64) -> cohthermo::Result<ThermoReport> {
    let p = qubit_protocol(&QubitProtocolParams {
        omega_i: 1.0,
        omega_f: 2.0,
        tau,
        beta_i: 1.0,
    })?;
    let rho0 = GibbsState::new(&p.initial_hamiltonian(), 1.0)?.density_matrix();
    irreversible_report(&rho0, &p, 1.0, tau, StepControl::default())
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn rotor(k: f64, temperature: f64) -> cohthermo::Result<RotorRun> {
    let params = RotorParams {
        k,
        period: 0.25,
        beta: 1.0 / temperature,
        cutoff: 1,
        kicks: 6000,
    };
    rotor_run(&params, &RotorOptions::default())
}

fn main() {
    let mut runner = Runner { failures: 0 };
    let started = Instant::now();
    let ensemble_start = Instant::now();
    let results = ensemble();
    let ensemble_secs = ensemble_start.elapsed().as_secs_f64();

    runner.criterion(1, "exact decomposition on 200 random protocols", || {
        let r = results.as_ref().map_err(Clone::clone)?;
        let w = worst(r, |x| x.report.decomposition_residual());
        verdict(
            w < 1e-10,
            format!("max |S_irr - C - D(dephased||rho_B)| = {w:e}, ensemble built in {ensemble_secs:.1} s"),
        )
    });

    runner.criterion(2, "two-path irreversible work", || {
        let r = results.as_ref().map_err(Clone::clone)?;
        let w = worst(r, |x| x.report.two_path_residual());
        verdict(w < 1e-9, format!("max |beta(<w> - dF) - D(rho_tau||rho_B)| = {w:e}"))
    });

    runner.criterion(3, "integral fluctuation theorems", || {
        let r = results.as_ref().map_err(Clone::clone)?;
        let ft = |e: &cohthermo::fluctuation::Expectations| {
            [e.exp_neg_s, e.exp_neg_p, e.exp_neg_c]
                .iter()
                .map(|v| (v - 1.0).abs())
                .fold(0.0, f64::max)
        };
        let ens = worst(r, |x| ft(&x.exact));
        let qubit = core(qubit_protocol(&QubitProtocolParams {
            omega_i: 1.0,
            omega_f: 2.0,
            tau: 1.0,
            beta_i: 1.0,
        }))?;
        let q = core(evaluate(&qubit, 1.0, StepControl::default()))?;
        let q_ft = ft(&q.exact);
        let rotor_dist = core(rotor_tpm_distribution(9.5, 0.25, 10.0, 64, 20))?;
        let r_ft = ft(&exact_expectations(&rotor_dist));
        let mc = core(sample(&q.distribution, 100_000, 12_345))?;
        let z = [
            (mc.estimates.exp_neg_s - 1.0) / mc.standard_errors.exp_neg_s,
            (mc.estimates.exp_neg_p - 1.0) / mc.standard_errors.exp_neg_p,
            (mc.estimates.exp_neg_c - 1.0) / mc.standard_errors.exp_neg_c,
        ]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
        verdict(
            ens < 1e-10 && q_ft < 1e-10 && r_ft < 1e-10 && z < 5.0,
            format!(
                "exhaustive: ensemble {ens:e}, qubit {q_ft:e}, rotor {r_ft:e}; qubit Monte Carlo max |z| = {z:.2}"
            ),
        )
    });

    runner.criterion(4, "stochastic means equal thermodynamic quantities", || {
        let r = results.as_ref().map_err(Clone::clone)?;
        let s = worst(r, |x| (x.exact.mean_s - x.report.s_irr).abs());
        let c = worst(r, |x| (x.exact.mean_c - x.report.coherence).abs());
        let p = worst(r, |x| (x.exact.mean_p - x.report.pop_mismatch_b).abs());
        verdict(
            s.max(c).max(p) < 1e-10,
            format!("max gaps: <s> {s:e}, <c> {c:e}, <p> {p:e}"),
        )
    });

    runner.criterion(5, "adiabatic scaling of coherence", || {
        let taus = [10.0, 20.0, 40.0, 80.0];
        let reports = core(taus.iter().map(|&t| fig1(t)).collect::<cohthermo::Result<Vec<_>>>())?;
        let cs: Vec<f64> = reports.iter().map(|r| r.coherence).collect();
        let slope = fit_slope(&taus, &cs);
        let ratios: Vec<f64> = reports
            .iter()
            .map(|r| r.pop_mismatch_a.unwrap_or(f64::NAN) / r.non_adiabaticity.unwrap_or(f64::NAN))
            .collect();
        let monotone = ratios.windows(2).all(|w| w[1] < w[0]);
        verdict(
            (slope + 2.0).abs() <= 0.3 && monotone && ratios[3] < 0.05,
            format!(
                "slope {slope:.3}, D(dephased||rho_A)/A = [{}]",
                ratios.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>().join(", ")
            ),
        )
    });

    runner.criterion(6, "long-duration limits", || {
        let short = core(fig1(0.5))?;
        let long = core(fig1(32.0))?;
        let p = core(qubit_protocol(&QubitProtocolParams {
            omega_i: 1.0,
            omega_f: 2.0,
            tau: 32.0,
            beta_i: 1.0,
        }))?;
        let limit = core(adiabatic_limit_entropy(&p, 1.0))?;
        let c_ratio = long.coherence / short.coherence;
        let gap = (long.s_irr - limit).abs() / limit;
        verdict(
            c_ratio < 0.1 && gap < 0.05,
            format!(
                "C(32)/C(0.5) = {c_ratio:.3e}; S_irr(32) = {:.5}, D(rho_A||rho_B) = {limit:.5}, relative gap {gap:.3e}",
                long.s_irr
            ),
        )
    });

    runner.criterion(7, "cyclic identity", || {
        let p = core(cyclic_qubit_protocol(1.0, 0.7, 3.0))?;
        let rho0 = core(GibbsState::new(&p.initial_hamiltonian(), 1.0))?.density_matrix();
        let r = core(irreversible_report(&rho0, &p, 1.0, 3.0, StepControl::default()))?;
        let gap = (r.non_adiabaticity.unwrap_or(f64::NAN) - r.s_irr).abs();
        let rho_a = core(adiabatic_state(&rho0, &p.initial_hamiltonian(), &p.final_hamiltonian()))?;
        let d = max_abs_diff(rho_a.matrix(), rho0.matrix());
        verdict(
            gap < 1e-10 && d < 1e-10,
            format!("|A - S_irr| = {gap:e}, max|rho_A - rho_0| = {d:e}"),
        )
    });

    runner.criterion(8, "rotor kick kernels", || {
        let dense = core(rotor_kick_operator(9.5, 512))?;
        let grid = core(KickKernel::new(9.5, MomentumLattice::new(512), KickMethod::AngleGrid))?.dense();
        let diff = max_abs_diff(dense.matrix(), &grid);
        let unit = unitarity_residual(dense.matrix()).max(unitarity_residual(&grid));
        verdict(
            diff < 1e-9 && unit < 1e-9,
            format!("max elementwise difference {diff:e}, unitarity residual {unit:e}"),
        )
    });

    runner.criterion(9, "rotor saturation and scaling", || {
        let temps = [0.5, 0.2, 0.1];
        let ks = [5.0, 7.0, 9.0, 11.0, 13.0];
        let mut jobs: Vec<(f64, f64)> = temps.iter().map(|&t| (9.5, t)).collect();
        jobs.extend(ks.iter().map(|&k| (k, 0.1)));
        let runs = core(
            jobs.par_iter()
                .map(|&(k, t)| rotor(k, t))
                .collect::<cohthermo::Result<Vec<_>>>(),
        )?;
        if let Some(r) = runs.iter().find(|r| r.truncation_warning) {
            return Err(format!("truncation warning at k = {}", r.params.k));
        }
        let stats = core(
            runs.iter()
                .map(|r| saturation_statistics(&r.diagnostics, 3000, 6000))
                .collect::<cohthermo::Result<Vec<_>>>(),
        )?;

        let cold = &runs[2].diagnostics;
        let first = core(saturation_statistics(cold, 3000, 4500))?;
        let second = core(saturation_statistics(cold, 4501, 6000))?;
        let half_gap = (first.mean_work - second.mean_work).abs();
        let combined = (first.std_work.powi(2) + second.std_work.powi(2)).sqrt();
        let saturated = half_gap < combined;

        let c: Vec<f64> = stats[..3].iter().map(|s| s.mean_c).collect();
        let ratio: Vec<f64> = stats[..3].iter().map(|s| s.mean_ratio).collect();
        let c_up = c.windows(2).all(|w| w[1] > w[0]);
        let ratio_down = ratio.windows(2).all(|w| w[1] < w[0]);
        let work: Vec<f64> = stats[3..].iter().map(|s| s.mean_work).collect();
        let slope = fit_slope(&ks, &work);
        verdict(
            saturated && c_up && ratio_down && (2.0..=6.0).contains(&slope),
            format!(
                "half-window gap {half_gap:.3} vs combined std {combined:.3}; mean C {c:.3?}; mean C/S_irr {ratio:.4?}; work slope {slope:.2} over <w> {work:.1?}"
            ),
        )
    });

    runner.criterion(10, "CLI determinism", || {
        let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
        let cfg = dir.path().join("run.cfg");
        fs::write(
            &cfg,
            "experiment = qubit-sweep\nseed = 42\nsamples = 20000\nqubit.tau = 0.5, 1, 2, 4, 8\nqubit.time_samples = 4\n",
        )
        .map_err(|e| e.to_string())?;
        let mut outputs = Vec::new();
        for (i, workers) in [1, 1, 4].into_iter().enumerate() {
            let out = dir.path().join(format!("out{i}"));
            let run = Command::new(env!("CARGO_BIN_EXE_cohthermo"))
                .args(["run", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .args(["--workers", &workers.to_string()])
                .output()
                .map_err(|e| e.to_string())?;
            if !run.status.success() {
                return Err(format!(
                    "run {i} exited with {}: {}",
                    run.status,
                    String::from_utf8_lossy(&run.stderr)
                ));
            }
            outputs.push(fs::read(out.join("report.csv")).map_err(|e| e.to_string())?);
        }
        verdict(
            outputs[0] == outputs[1] && outputs[1] == outputs[2],
            format!(
                "report.csv ({} bytes) identical across two runs and workers 1 and 4",
                outputs[0].len()
            ),
        )
    });

    println!(
        "{} criteria failed ({:.1} s total)",
        runner.failures,
        started.elapsed().as_secs_f64()
    );
    if runner.failures > 0 {
        std::process::exit(1);
    }
}
