//! Grid expansion, parallel evaluation and output files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cohthermo::dynamics::{detect_level_crossing, evolve_state, DrivingProtocol, StepControl};
use cohthermo::fluctuation::{
    distribution_from_process, exact_expectations, sample, write_histogram_csv, Expectations,
    TwoPointDistribution, RNG_ALGORITHM,
};
use cohthermo::linalg::{GibbsState, Observable, Tolerances};
use cohthermo::models::{
    qubit_protocol, rotor_run, rotor_tpm_distribution, saturation_statistics, suggested_cutoff,
    QubitProtocolParams, RotorOptions, RotorParams,
};
use cohthermo::thermo::{adiabatic_limit_entropy, ThermalProcess, ThermoReport};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, RunConfig};
use crate::ensemble::{exceeds, random_protocol, Residuals, ENSEMBLE_STEPS};
use crate::CliError;

pub const SCHEMA_LINE: &str = "# schema=1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    CrossingWarning,
    TruncationWarning,
    Failed,
}

/// One grid point of any experiment.
#[derive(Clone)]
enum Point {
    Qubit(QubitProtocolParams),
    Rotor {
        k: f64,
        period: f64,
        temperature: f64,
    },
    Process {
        protocol: DrivingProtocol,
        beta: f64,
        control: StepControl,
    },
}

impl Point {
    fn params(&self) -> BTreeMap<&'static str, f64> {
        match self {
            Point::Qubit(p) => BTreeMap::from([
                ("omega_i", p.omega_i),
                ("omega_f", p.omega_f),
                ("beta", p.beta_i),
                ("tau", p.tau),
            ]),
            Point::Rotor {
                k,
                period,
                temperature,
            } => BTreeMap::from([("k", *k), ("period", *period), ("temperature", *temperature)]),
            Point::Process { protocol, beta, .. } => BTreeMap::from([
                ("dim", protocol.dim() as f64),
                ("beta", *beta),
                ("tau", protocol.duration()),
            ]),
        }
    }
}

#[derive(Default)]
struct PointOutput {
    report: Vec<Vec<String>>,
    fluctuation: Vec<Vec<String>>,
    saturation: Option<Vec<String>>,
    histogram: Option<Vec<u8>>,
    status: Option<Status>,
    message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub index: usize,
    pub params: BTreeMap<&'static str, f64>,
    pub status: Status,
    pub wall_clock_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct ToleranceRecord {
    hermitian: f64,
    trace: f64,
    negative_eigenvalue: f64,
    eigenvalue_floor: f64,
    support_weight: f64,
    entropy_floor: f64,
    orthonormal: f64,
    unitary: f64,
    two_path: f64,
    identity_checks: f64,
    rotor_boundary: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'static str,
    pub config: BTreeMap<String, String>,
    pub rng: &'static str,
    pub seed: Option<u64>,
    pub threads: usize,
    tolerances: ToleranceRecord,
    pub files: Vec<String>,
    pub outcome: &'static str,
    pub points: Vec<PointRecord>,
}

/// Shortest round-trip text for a float; scientific notation outside
/// `[1e-4, 1e15)`, `inf` for infinities.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn build_points(config: &RunConfig) -> Result<Vec<Point>, CliError> {
    let mut points = Vec::new();
    match config.experiment {
        Experiment::QubitSweep => {
            let q = &config.qubit;
            for &omega_i in &q.omega_i {
                for &omega_f in &q.omega_f {
                    for &beta_i in &q.beta {
                        for &tau in &q.tau {
                            points.push(Point::Qubit(QubitProtocolParams {
                                omega_i,
                                omega_f,
                                tau,
                                beta_i,
                            }));
                        }
                    }
                }
            }
        }
        Experiment::RotorSweep => {
            let r = &config.rotor;
            for &period in &r.period {
                for &temperature in &r.temperature {
                    for &k in &r.k {
                        points.push(Point::Rotor {
                            k,
                            period,
                            temperature,
                        });
                    }
                }
            }
        }
        Experiment::FluctuationCheck => {
            let f = &config.fluctuation;
            let seed = config.seed.expect("validated");
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            for _ in 0..f.protocols {
                let p = random_protocol(&mut rng, (f.min_dim, f.max_dim), (f.beta_min, f.beta_max))?;
                points.push(Point::Process {
                    protocol: p.protocol,
                    beta: p.beta,
                    control: ENSEMBLE_STEPS,
                });
            }
        }
        Experiment::IdentityDemo => {
            let levels: Vec<f64> = (0..config.identity_dim).map(|n| n as f64).collect();
            let h = Observable::from_real_diagonal(&levels);
            points.push(Point::Process {
                protocol: DrivingProtocol::constant("identity", h, 1.0)?,
                beta: config.identity_beta,
                control: config.step_control,
            });
        }
    }
    Ok(points)
}

const THERMO_COLUMNS: [&str; 13] = [
    "time_index",
    "t",
    "avg_work",
    "delta_f",
    "w_irr",
    "s_irr",
    "coherence",
    "pop_mismatch_b",
    "non_adiabaticity",
    "pop_mismatch_a",
    "s_irr_relative_entropy",
    "adiabatic_limit",
    "crossing_warning",
];

fn report_header(experiment: Experiment) -> Vec<&'static str> {
    let mut h = vec!["point"];
    match experiment {
        Experiment::QubitSweep => {
            h.extend(["omega_i", "omega_f", "beta", "tau"]);
            h.extend(THERMO_COLUMNS);
        }
        Experiment::FluctuationCheck | Experiment::IdentityDemo => {
            h.extend(["dim", "beta", "tau"]);
            h.extend(THERMO_COLUMNS);
        }
        Experiment::RotorSweep => h.extend([
            "k",
            "period",
            "temperature",
            "beta",
            "cutoff",
            "kick",
            "energy",
            "avg_work",
            "coherence",
            "s_irr",
            "ratio",
            "xi_p",
            "mean_momentum",
            "pop_mismatch",
            "boundary_weight",
        ]),
    }
    h
}

const FLUCTUATION_HEADER: [&str; 16] = [
    "point",
    "method",
    "samples",
    "seed",
    "mean_s",
    "mean_p",
    "mean_c",
    "exp_neg_s",
    "exp_neg_p",
    "exp_neg_c",
    "se_mean_s",
    "se_mean_p",
    "se_mean_c",
    "se_exp_neg_s",
    "se_exp_neg_p",
    "se_exp_neg_c",
];

const SATURATION_HEADER: [&str; 19] = [
    "point",
    "k",
    "period",
    "temperature",
    "beta",
    "cutoff",
    "trajectories",
    "truncation_warning",
    "window_start",
    "window_end",
    "samples",
    "mean_c",
    "std_c",
    "mean_ratio",
    "std_ratio",
    "mean_work",
    "std_work",
    "mean_s_irr",
    "xi_p",
];

fn thermo_row(prefix: &[String], index: usize, r: &ThermoReport, limit: f64) -> Vec<String> {
    let mut row = prefix.to_vec();
    row.extend([
        index.to_string(),
        fmt_f64(r.t),
        fmt_f64(r.avg_work),
        fmt_f64(r.delta_f),
        fmt_f64(r.w_irr),
        fmt_f64(r.s_irr),
        fmt_f64(r.coherence),
        fmt_f64(r.pop_mismatch_b),
        opt(r.non_adiabaticity),
        opt(r.pop_mismatch_a),
        fmt_f64(r.s_irr_relative_entropy),
        fmt_f64(limit),
        u8::from(r.crossing_warning).to_string(),
    ]);
    row
}

fn fluctuation_rows(
    point: usize,
    dist: &TwoPointDistribution,
    exact: &Expectations,
    samples: usize,
    seed: Option<u64>,
) -> cohthermo::Result<Vec<Vec<String>>> {
    let mut exact_row = vec![point.to_string(), "exact".into(), "0".into(), String::new()];
    exact_row.extend(exact.as_array().iter().map(|v| fmt_f64(*v)));
    exact_row.extend((0..6).map(|_| "0".to_string()));
    let mut rows = vec![exact_row];
    if samples > 0 {
        let seed = seed.expect("validated").wrapping_add(point as u64);
        let est = sample(dist, samples, seed)?;
        let mut row = vec![
            point.to_string(),
            "sampled".into(),
            samples.to_string(),
            seed.to_string(),
        ];
        row.extend(est.estimates.as_array().iter().map(|v| fmt_f64(*v)));
        row.extend(est.standard_errors.as_array().iter().map(|v| fmt_f64(*v)));
        rows.push(row);
    }
    Ok(rows)
}

/// Thermodynamic rows, distribution and status for a driven process sampled at
/// `samples` uniform times after the start.
#[allow(clippy::too_many_arguments)]
fn process_point(
    index: usize,
    prefix: &[String],
    protocol: &DrivingProtocol,
    beta: f64,
    samples: usize,
    control: StepControl,
    config: &RunConfig,
    out: &mut PointOutput,
) -> cohthermo::Result<()> {
    let h_i = protocol.initial_hamiltonian();
    let process = ThermalProcess::thermal(&h_i, beta)?;
    let trajectory = evolve_state(&process.rho0, protocol, samples, control)?;
    let crossing = detect_level_crossing(protocol, samples.max(64))?;
    let limit = adiabatic_limit_entropy(protocol, beta)?;
    let last = trajectory.len() - 1;
    let mut final_report = None;
    for (j, point) in trajectory.iter().enumerate().skip(1) {
        let mut r = process.report(point.t, &point.state, &point.hamiltonian, j == last)?;
        r.crossing_warning = crossing && j == last;
        out.report.push(thermo_row(prefix, j, &r, limit));
        final_report = Some(r);
    }
    let report = final_report.expect("at least one sample");
    let reference = GibbsState::new(&protocol.final_hamiltonian(), beta)?;
    let dist = distribution_from_process(&process.initial, &reference, &trajectory[last].propagator)?;
    let exact = exact_expectations(&dist);
    out.fluctuation = fluctuation_rows(index, &dist, &exact, config.samples, config.seed)?;
    if config.experiment != Experiment::FluctuationCheck {
        let mut buf = Vec::new();
        writeln!(buf, "{SCHEMA_LINE}").expect("write to memory");
        write_histogram_csv(&dist, &mut buf).expect("write to memory");
        out.histogram = Some(buf);
    }
    let residuals = Residuals::of(&report, &exact);
    if let Some(v) = residuals.violation(report.s_irr) {
        out.status = Some(Status::Failed);
        out.message = Some(v);
    } else if crossing {
        out.status = Some(Status::CrossingWarning);
    }
    Ok(())
}

fn rotor_point(
    index: usize,
    k: f64,
    period: f64,
    temperature: f64,
    config: &RunConfig,
    out: &mut PointOutput,
) -> cohthermo::Result<()> {
    let r = &config.rotor;
    let beta = 1.0 / temperature;
    let params = RotorParams {
        k,
        period,
        beta,
        cutoff: r.cutoff.unwrap_or(1).max(1),
        kicks: r.kicks,
    };
    let options = RotorOptions {
        auto_cutoff: r.cutoff.is_none(),
        max_cutoff: r.max_cutoff,
        ..RotorOptions::default()
    };
    let run = rotor_run(&params, &options)?;
    let prefix = [
        index.to_string(),
        fmt_f64(k),
        fmt_f64(period),
        fmt_f64(temperature),
        fmt_f64(beta),
        run.params.cutoff.to_string(),
    ];
    for d in run.diagnostics.iter().filter(|d| d.kick % r.record_every == 0) {
        let mut row = prefix.to_vec();
        row.extend([
            d.kick.to_string(),
            fmt_f64(d.energy),
            fmt_f64(d.avg_work),
            fmt_f64(d.coherence),
            fmt_f64(d.s_irr),
            fmt_f64(d.ratio),
            fmt_f64(d.xi_p),
            fmt_f64(d.mean_momentum),
            fmt_f64(d.pop_mismatch),
            fmt_f64(d.boundary_weight),
        ]);
        out.report.push(row);
    }
    let stats = saturation_statistics(&run.diagnostics, r.window_start, r.window_end)?;
    let mut row = prefix.to_vec();
    row.extend([
        run.trajectories.to_string(),
        u8::from(run.truncation_warning).to_string(),
        stats.window_start.to_string(),
        stats.window_end.to_string(),
        stats.samples.to_string(),
        fmt_f64(stats.mean_c),
        fmt_f64(stats.std_c),
        fmt_f64(stats.mean_ratio),
        fmt_f64(stats.std_ratio),
        fmt_f64(stats.mean_work),
        fmt_f64(stats.std_work),
        fmt_f64(stats.mean_s_irr),
        fmt_f64(stats.xi_p),
    ]);
    out.saturation = Some(row);

    let tpm_cutoff = r.tpm_cutoff.unwrap_or_else(|| suggested_cutoff(k, beta));
    let dist = rotor_tpm_distribution(k, period, beta, tpm_cutoff, r.tpm_kicks)?;
    let exact = exact_expectations(&dist);
    out.fluctuation = fluctuation_rows(index, &dist, &exact, config.samples, config.seed)?;
    let ft = [exact.exp_neg_s, exact.exp_neg_p, exact.exp_neg_c]
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    if exceeds(ft, 1e-10) {
        out.status = Some(Status::Failed);
        out.message = Some(format!("fluctuation theorem residual {ft:e}"));
    } else if run.truncation_warning {
        out.status = Some(Status::TruncationWarning);
    }
    Ok(())
}

fn evaluate_point(index: usize, point: &Point, config: &RunConfig) -> PointOutput {
    let mut out = PointOutput::default();
    let result = match point {
        Point::Qubit(p) => qubit_protocol(p).and_then(|protocol| {
            let prefix = [p.omega_i, p.omega_f, p.beta_i, p.tau].map(fmt_f64);
            let mut full = vec![index.to_string()];
            full.extend(prefix);
            process_point(
                index,
                &full,
                &protocol,
                p.beta_i,
                config.qubit.time_samples,
                config.step_control,
                config,
                &mut out,
            )
        }),
        Point::Rotor {
            k,
            period,
            temperature,
        } => rotor_point(index, *k, *period, *temperature, config, &mut out),
        Point::Process {
            protocol,
            beta,
            control,
        } => {
            let prefix = vec![
                index.to_string(),
                protocol.dim().to_string(),
                fmt_f64(*beta),
                fmt_f64(protocol.duration()),
            ];
            process_point(index, &prefix, protocol, *beta, 1, *control, config, &mut out)
        }
    };
    if let Err(e) = result {
        out.status = Some(Status::Failed);
        out.message = Some(e.to_string());
    }
    out
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub struct RunSummary {
    pub manifest: RunManifest,
    pub output: PathBuf,
}

/// Runs the configured experiment and writes every output file. Returns
/// `CliError::Invariant` (after writing the manifest) when a point failed.
pub fn run(config: &RunConfig) -> Result<RunSummary, CliError> {
    let points = build_points(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    let threads = pool.current_num_threads();
    let results: Vec<(PointOutput, f64)> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let start = Instant::now();
                let out = evaluate_point(i, p, config);
                (out, start.elapsed().as_secs_f64())
            })
            .collect()
    });

    let dir = &config.output;
    fs::create_dir_all(dir)?;
    let mut files = vec!["report.csv".to_string(), "fluctuation.csv".to_string()];
    write_csv(
        &dir.join("report.csv"),
        &report_header(config.experiment),
        results.iter().flat_map(|(o, _)| o.report.iter().cloned()),
    )?;
    write_csv(
        &dir.join("fluctuation.csv"),
        &FLUCTUATION_HEADER,
        results.iter().flat_map(|(o, _)| o.fluctuation.iter().cloned()),
    )?;
    if config.experiment == Experiment::RotorSweep {
        files.push("saturation.csv".into());
        write_csv(
            &dir.join("saturation.csv"),
            &SATURATION_HEADER,
            results.iter().filter_map(|(o, _)| o.saturation.clone()),
        )?;
    }
    for (i, (o, _)) in results.iter().enumerate() {
        if let Some(h) = &o.histogram {
            let name = format!("histogram_{i}.csv");
            fs::write(dir.join(&name), h)?;
            files.push(name);
        }
    }

    let records: Vec<PointRecord> = points
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(index, (p, (o, secs)))| PointRecord {
            index,
            params: p.params(),
            status: o.status.unwrap_or(Status::Ok),
            wall_clock_seconds: *secs,
            message: o.message.clone(),
        })
        .collect();
    let failed: Vec<usize> = records
        .iter()
        .filter(|r| r.status == Status::Failed)
        .map(|r| r.index)
        .collect();
    files.push("manifest.json".into());
    let t = Tolerances::DEFAULT;
    let manifest = RunManifest {
        schema: 1,
        tool: "cohthermo",
        version: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment.name(),
        config: config.resolved.clone(),
        rng: RNG_ALGORITHM,
        seed: config.seed,
        threads,
        tolerances: ToleranceRecord {
            hermitian: t.hermitian,
            trace: t.trace,
            negative_eigenvalue: t.negative_eigenvalue,
            eigenvalue_floor: t.eigenvalue_floor,
            support_weight: t.support_weight,
            entropy_floor: t.entropy_floor,
            orthonormal: t.orthonormal,
            unitary: t.unitary,
            two_path: cohthermo::thermo::TWO_PATH_TOLERANCE,
            identity_checks: 1e-10,
            rotor_boundary: RotorOptions::default().boundary_tolerance,
        },
        files,
        outcome: if failed.is_empty() { "ok" } else { "invariant-breach" },
        points: records,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json + "\n")?;

    if !failed.is_empty() {
        return Err(CliError::Invariant(format!(
            "{} grid point(s) failed: {failed:?}; see {}",
            failed.len(),
            dir.join("manifest.json").display()
        )));
    }
    Ok(RunSummary {
        manifest,
        output: dir.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1.5), "1.5");
        assert_eq!(fmt_f64(1e-16), "1e-16");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(-2.5e20), "-2.5e20");
        for v in [0.1, 1.0 / 3.0, 6.02e23, 1e-300] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
