//! Two-point energy measurement statistics of the stochastic entropy `s`, its
//! population part `p` and its coherent part `c = s - p`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dynamics::{transition_matrix, TransitionMatrix, UnitaryOperator};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{log_sum_exp, GibbsState};

/// Generator used by [`sample`]; recorded in every output that carries
/// sampled values.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64)";

const MARGINAL_TOLERANCE: f64 = 1e-10;

/// One joint outcome `(n, m)` of the initial and final energy measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub n: usize,
    pub m: usize,
    /// `rho_nn(0) P_{n -> m}`.
    pub prob: f64,
    pub log_prob: f64,
    pub e_i: f64,
    pub e_f: f64,
    pub s: f64,
    pub p: f64,
    /// Always exactly `s - p`.
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    S,
    P,
    C,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::S, Variable::P, Variable::C];

    pub fn name(self) -> &'static str {
        match self {
            Variable::S => "s",
            Variable::P => "p",
            Variable::C => "c",
        }
    }

    fn of(self, o: &Outcome) -> f64 {
        match self {
            Variable::S => o.s,
            Variable::P => o.p,
            Variable::C => o.c,
        }
    }
}

/// Everything [`build_distribution`] needs. Initial populations are passed as
/// logarithms so that Boltzmann weights far below `f64::MIN_POSITIVE` still
/// count in the exponential averages.
#[derive(Debug, Clone, Copy)]
pub struct TpmInputs<'a> {
    pub log_initial_populations: &'a [f64],
    pub transitions: &'a TransitionMatrix,
    pub initial_energies: &'a [f64],
    pub final_energies: &'a [f64],
    pub beta_i: f64,
    pub free_energy_i: f64,
    pub free_energy_b: f64,
    pub rho_final_diag: &'a [f64],
    pub rho_b_diag: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointDistribution {
    outcomes: Vec<Outcome>,
    pub beta_i: f64,
    pub free_energy_i: f64,
    pub free_energy_b: f64,
    pub rho_final_diag: Vec<f64>,
    pub rho_b_diag: Vec<f64>,
}

impl TwoPointDistribution {
    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.prob).sum()
    }

    /// `sum_n prob(n, m)`.
    pub fn final_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rho_final_diag.len()];
        for o in &self.outcomes {
            out[o.m] += o.prob;
        }
        out
    }
}

pub fn build_distribution(inputs: TpmInputs<'_>) -> Result<TwoPointDistribution> {
    let d_i = inputs.log_initial_populations.len();
    let d_f = inputs.final_energies.len();
    check_dim(d_i, inputs.initial_energies.len())?;
    check_dim(d_i, inputs.transitions.dim())?;
    check_dim(d_f, inputs.transitions.dim())?;
    check_dim(d_f, inputs.rho_final_diag.len())?;
    check_dim(d_f, inputs.rho_b_diag.len())?;
    let beta = inputs.beta_i;
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Parameter(format!("beta_i must be positive, got {beta}")));
    }

    let log_reference: Vec<f64> = inputs
        .final_energies
        .iter()
        .map(|e| beta * (inputs.free_energy_b - e))
        .collect();
    let b_total: f64 = inputs.rho_b_diag.iter().sum();
    if (b_total - 1.0).abs() > MARGINAL_TOLERANCE {
        return Err(Error::Consistency(format!(
            "reference populations sum to {b_total}"
        )));
    }
    for (m, (&given, &log_b)) in inputs.rho_b_diag.iter().zip(&log_reference).enumerate() {
        if (given - log_b.exp()).abs() > MARGINAL_TOLERANCE {
            return Err(Error::Consistency(format!(
                "reference population {m} is {given}, Gibbs weight is {}",
                log_b.exp()
            )));
        }
    }

    // log rho_mm(tau) = logsumexp_n (log p_n + log P_{n->m})
    let log_marginal: Vec<f64> = (0..d_f)
        .map(|m| {
            let terms: Vec<f64> = (0..d_i)
                .map(|n| inputs.log_initial_populations[n] + inputs.transitions.get(n, m).ln())
                .collect();
            log_sum_exp(&terms)
        })
        .collect();
    for (m, (&given, &lm)) in inputs.rho_final_diag.iter().zip(&log_marginal).enumerate() {
        if (given - lm.exp()).abs() > MARGINAL_TOLERANCE {
            return Err(Error::Consistency(format!(
                "final population {m} is {given}, transition marginal gives {}",
                lm.exp()
            )));
        }
    }

    let df = inputs.free_energy_b - inputs.free_energy_i;
    let mut outcomes = Vec::new();
    for n in 0..d_i {
        let log_p0 = inputs.log_initial_populations[n];
        if !log_p0.is_finite() {
            continue;
        }
        for m in 0..d_f {
            let transition = inputs.transitions.get(n, m);
            if transition <= 0.0 {
                continue;
            }
            let log_prob = log_p0 + transition.ln();
            let e_i = inputs.initial_energies[n];
            let e_f = inputs.final_energies[m];
            let s = beta * ((e_f - e_i) - df);
            let p = log_marginal[m] - log_reference[m];
            outcomes.push(Outcome {
                n,
                m,
                prob: log_prob.exp(),
                log_prob,
                e_i,
                e_f,
                s,
                p,
                c: s - p,
            });
        }
    }
    let dist = TwoPointDistribution {
        outcomes,
        beta_i: beta,
        free_energy_i: inputs.free_energy_i,
        free_energy_b: inputs.free_energy_b,
        rho_final_diag: inputs.rho_final_diag.to_vec(),
        rho_b_diag: inputs.rho_b_diag.to_vec(),
    };
    let total = dist.total_probability();
    if (total - 1.0).abs() > MARGINAL_TOLERANCE {
        return Err(Error::Consistency(format!("outcome probabilities sum to {total}")));
    }
    Ok(dist)
}

/// Distribution for `U` acting on the Gibbs state `initial`, measured against
/// the eigenbasis of the final Hamiltonian whose Gibbs state is `reference`.
pub fn distribution_from_process(
    initial: &GibbsState,
    reference: &GibbsState,
    u: &UnitaryOperator,
) -> Result<TwoPointDistribution> {
    if initial.beta != reference.beta {
        return Err(Error::Consistency(
            "initial and reference states must share beta_i".into(),
        ));
    }
    let transitions = transition_matrix(u, &initial.basis(), &reference.basis())?;
    let rho_final = transitions.push_forward(&initial.populations());
    build_distribution(TpmInputs {
        log_initial_populations: &initial.log_populations,
        transitions: &transitions,
        initial_energies: &initial.spectrum.eigenvalues,
        final_energies: &reference.spectrum.eigenvalues,
        beta_i: initial.beta,
        free_energy_i: initial.free_energy()?,
        free_energy_b: reference.free_energy()?,
        rho_final_diag: &rho_final,
        rho_b_diag: &reference.populations(),
    })
}

/// Means and exponential averages of `s`, `p`, `c`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Expectations {
    pub mean_s: f64,
    pub mean_p: f64,
    pub mean_c: f64,
    pub exp_neg_s: f64,
    pub exp_neg_p: f64,
    pub exp_neg_c: f64,
}

impl Expectations {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.mean_s,
            self.mean_p,
            self.mean_c,
            self.exp_neg_s,
            self.exp_neg_p,
            self.exp_neg_c,
        ]
    }

    pub const FIELD_NAMES: [&'static str; 6] = [
        "mean_s",
        "mean_p",
        "mean_c",
        "exp_neg_s",
        "exp_neg_p",
        "exp_neg_c",
    ];
}

/// Exhaustive weighted sums over every outcome. Exponential averages are
/// accumulated as `exp(log_prob - alpha)` so outcomes whose probability
/// underflows still contribute.
pub fn exact_expectations(dist: &TwoPointDistribution) -> Expectations {
    let mut e = Expectations::default();
    for o in &dist.outcomes {
        e.mean_s += o.prob * o.s;
        e.mean_p += o.prob * o.p;
        e.mean_c += o.prob * o.c;
        e.exp_neg_s += (o.log_prob - o.s).exp();
        e.exp_neg_p += (o.log_prob - o.p).exp();
        e.exp_neg_c += (o.log_prob - o.c).exp();
    }
    e
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEstimates {
    pub n_samples: usize,
    pub seed: u64,
    pub rng: &'static str,
    pub estimates: Expectations,
    pub standard_errors: Expectations,
}

/// I.i.d. draws of outcomes by inversion of the cumulative distribution.
/// Deterministic in `seed`.
pub fn sample(dist: &TwoPointDistribution, n_samples: usize, seed: u64) -> Result<SampleEstimates> {
    if n_samples == 0 {
        return Err(Error::Parameter("n_samples must be >= 1".into()));
    }
    let outcomes = &dist.outcomes;
    let cdf: Vec<f64> = outcomes
        .iter()
        .scan(0.0, |acc, o| {
            *acc += o.prob;
            Some(*acc)
        })
        .collect();
    let total = *cdf.last().ok_or_else(|| Error::Parameter("empty distribution".into()))?;
    let mut counts = vec![0usize; outcomes.len()];
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        let u = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|&c| c <= u).min(outcomes.len() - 1);
        counts[idx] += 1;
    }

    let values = |o: &Outcome| [o.s, o.p, o.c, (-o.s).exp(), (-o.p).exp(), (-o.c).exp()];
    let n = n_samples as f64;
    let mut mean = [0.0; 6];
    for (o, &k) in outcomes.iter().zip(&counts) {
        if k > 0 {
            for (acc, v) in mean.iter_mut().zip(values(o)) {
                *acc += k as f64 * v;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; 6];
    for (o, &k) in outcomes.iter().zip(&counts) {
        if k > 0 {
            for ((acc, v), m) in var.iter_mut().zip(values(o)).zip(mean) {
                *acc += k as f64 * (v - m) * (v - m);
            }
        }
    }
    let se = var.map(|v| if n_samples > 1 { (v / (n - 1.0) / n).sqrt() } else { 0.0 });
    let pack = |a: [f64; 6]| Expectations {
        mean_s: a[0],
        mean_p: a[1],
        mean_c: a[2],
        exp_neg_s: a[3],
        exp_neg_p: a[4],
        exp_neg_c: a[5],
    };
    Ok(SampleEstimates {
        n_samples,
        seed,
        rng: RNG_ALGORITHM,
        estimates: pack(mean),
        standard_errors: pack(se),
    })
}

/// Probability mass function of one variable; equal values (to 1e-12
/// relative) are merged, output sorted by value.
pub fn histogram(dist: &TwoPointDistribution, variable: Variable) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = dist
        .outcomes
        .iter()
        .map(|o| (variable.of(o), o.prob))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (v, p) in pairs {
        match merged.last_mut() {
            Some((last, acc)) if (v - *last).abs() <= 1e-12 * last.abs().max(1.0) => *acc += p,
            _ => merged.push((v, p)),
        }
    }
    merged
}

/// CSV with columns `variable,value,probability` for `s`, `p` and `c`.
pub fn write_histogram_csv<W: Write>(dist: &TwoPointDistribution, mut out: W) -> std::io::Result<()> {
    writeln!(out, "variable,value,probability")?;
    for var in Variable::ALL {
        for (v, p) in histogram(dist, var) {
            writeln!(out, "{},{v},{p}", var.name())?;
        }
    }
    Ok(())
}
