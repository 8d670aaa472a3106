//! Quantum kicked rotor `U = exp(-i p^2 T / 2) exp(-i k cos theta)` on a
//! truncated momentum lattice `n = -N..=N` with periodic wrap-around.
//!
//! The thermal initial state is diagonal in momentum, so a run evolves one
//! pure trajectory per occupied momentum eigenstate and assembles the mixture
//! from Gibbs weights.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::bessel::bessel_j_orders;
use crate::dynamics::UnitaryOperator;
use crate::error::{Error, Result};
use crate::fluctuation::{distribution_from_process, TwoPointDistribution};
use crate::linalg::{
    clamp_entropy, log_sum_exp, shannon_entropy, CMatrix, GibbsState, SpectralDecomposition, C64,
};

/// Bessel coefficients below this are dropped from the kick band.
const BESSEL_NEGLIGIBLE: f64 = 1e-18;
/// Largest Bessel tail norm (orders beyond the cutoff) accepted for a kick.
const KICK_TAIL_TOLERANCE: f64 = 1e-10;
/// Thermal weight allowed beyond the lattice edge.
const THERMAL_TAIL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentumLattice {
    pub cutoff: usize,
}

impl MomentumLattice {
    pub fn new(cutoff: usize) -> Self {
        Self { cutoff }
    }

    pub fn dim(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn momentum(&self, index: usize) -> i64 {
        index as i64 - self.cutoff as i64
    }

    pub fn momenta(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.dim()).map(|i| self.momentum(i))
    }

    /// Wraps a momentum difference into `-N..=N`.
    fn wrap(&self, nu: i64) -> i64 {
        let m = self.dim() as i64;
        (nu + self.cutoff as i64).rem_euclid(m) - self.cutoff as i64
    }
}

/// `(-i)^nu`.
fn minus_i_pow(nu: i64) -> C64 {
    match nu.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// Kick coefficients `c_nu = (-i)^nu J_nu(k)` for `|nu| <= band`, index
/// `nu + band`, after checking that the orders beyond the cutoff are negligible.
fn kick_coefficients(k: f64, lattice: MomentumLattice) -> Result<(Vec<C64>, usize)> {
    if !k.is_finite() {
        return Err(Error::Parameter(format!("kick strength must be finite, got {k}")));
    }
    let n = lattice.cutoff;
    let orders = n.max(k.abs().ceil() as usize + 60) + 40;
    let j = bessel_j_orders(k, orders);
    let tail: f64 = 2.0 * j[n + 1..].iter().map(|v| v * v).sum::<f64>();
    if tail.sqrt() > KICK_TAIL_TOLERANCE {
        return Err(Error::Truncation(format!(
            "cutoff {n} too small for kick strength {k}: Bessel tail {:e}",
            tail.sqrt()
        )));
    }
    let mut band = 0;
    for (nu, v) in j.iter().enumerate().take(n + 1) {
        if v.abs() >= BESSEL_NEGLIGIBLE {
            band = nu;
        }
    }
    let coeffs = (-(band as i64)..=band as i64)
        .map(|nu| {
            let jv = j[nu.unsigned_abs() as usize];
            let signed = if nu < 0 && nu % 2 != 0 { -jv } else { jv };
            minus_i_pow(nu) * signed
        })
        .collect();
    Ok((coeffs, band))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KickMethod {
    /// Banded circular convolution with Bessel coefficients.
    BesselToeplitz,
    /// Discrete Fourier pair to the `2N + 1` point angle grid, pointwise
    /// multiplication by `exp(-i k cos theta)`, and back.
    AngleGrid,
}

impl KickMethod {
    pub fn name(self) -> &'static str {
        match self {
            KickMethod::BesselToeplitz => "bessel-toeplitz",
            KickMethod::AngleGrid => "angle-grid",
        }
    }
}

#[derive(Clone)]
enum KernelImpl {
    Identity,
    Banded {
        coeffs: Vec<C64>,
        band: usize,
    },
    Grid {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        phases: Vec<C64>,
    },
}

/// Applies `exp(-i k cos theta)` to momentum-space vectors.
#[derive(Clone)]
pub struct KickKernel {
    lattice: MomentumLattice,
    method: KickMethod,
    inner: KernelImpl,
}

impl std::fmt::Debug for KickKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KickKernel")
            .field("lattice", &self.lattice)
            .field("method", &self.method)
            .finish_non_exhaustive()
    }
}

impl KickKernel {
    pub fn new(k: f64, lattice: MomentumLattice, method: KickMethod) -> Result<Self> {
        if lattice.cutoff == 0 {
            return Err(Error::Parameter("momentum cutoff must be >= 1".into()));
        }
        let (coeffs, band) = kick_coefficients(k, lattice)?;
        let inner = if k == 0.0 {
            KernelImpl::Identity
        } else {
            match method {
                KickMethod::BesselToeplitz => KernelImpl::Banded { coeffs, band },
                KickMethod::AngleGrid => {
                    let m = lattice.dim();
                    let mut planner = FftPlanner::new();
                    let phases = (0..m)
                        .map(|l| {
                            let theta = 2.0 * std::f64::consts::PI * l as f64 / m as f64;
                            C64::from_polar(1.0, -k * theta.cos())
                        })
                        .collect();
                    KernelImpl::Grid {
                        forward: planner.plan_fft_forward(m),
                        inverse: planner.plan_fft_inverse(m),
                        phases,
                    }
                }
            }
        };
        Ok(Self {
            lattice,
            method,
            inner,
        })
    }

    pub fn method(&self) -> KickMethod {
        self.method
    }

    pub fn lattice(&self) -> MomentumLattice {
        self.lattice
    }

    pub fn scratch_len(&self) -> usize {
        match &self.inner {
            KernelImpl::Identity => 0,
            KernelImpl::Banded { .. } => self.lattice.dim(),
            KernelImpl::Grid {
                forward, inverse, ..
            } => forward
                .get_inplace_scratch_len()
                .max(inverse.get_inplace_scratch_len()),
        }
    }

    pub fn apply(&self, psi: &mut [C64], scratch: &mut Vec<C64>) {
        debug_assert_eq!(psi.len(), self.lattice.dim());
        let need = self.scratch_len();
        if scratch.len() < need {
            scratch.resize(need, C64::new(0.0, 0.0));
        }
        match &self.inner {
            KernelImpl::Identity => {}
            KernelImpl::Banded { coeffs, band } => {
                let m = psi.len();
                let band = *band as isize;
                let out = &mut scratch[..m];
                for (i, slot) in out.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for nu in -band..=band {
                        let j = (i as isize - nu).rem_euclid(m as isize) as usize;
                        acc += coeffs[(nu + band) as usize] * psi[j];
                    }
                    *slot = acc;
                }
                psi.copy_from_slice(out);
            }
            KernelImpl::Grid {
                forward,
                inverse,
                phases,
            } => {
                inverse.process_with_scratch(psi, &mut scratch[..need]);
                for (z, ph) in psi.iter_mut().zip(phases) {
                    *z *= ph;
                }
                forward.process_with_scratch(psi, &mut scratch[..need]);
                let norm = 1.0 / psi.len() as f64;
                psi.iter_mut().for_each(|z| *z *= norm);
            }
        }
    }

    /// Dense matrix of the kernel, column by column.
    pub fn dense(&self) -> CMatrix {
        let m = self.lattice.dim();
        let mut out = CMatrix::zeros(m, m);
        let mut scratch = Vec::new();
        let mut col = vec![C64::new(0.0, 0.0); m];
        for j in 0..m {
            col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            col[j] = C64::new(1.0, 0.0);
            self.apply(&mut col, &mut scratch);
            for (i, z) in col.iter().enumerate() {
                out[(i, j)] = *z;
            }
        }
        out
    }
}

/// `<n| exp(-i k cos theta) |m> = (-i)^(n-m) J_(n-m)(k)`, with `n - m` wrapped
/// onto the periodic lattice.
pub fn rotor_kick_operator(k: f64, cutoff: usize) -> Result<UnitaryOperator> {
    if cutoff == 0 {
        return Err(Error::Parameter("momentum cutoff must be >= 1".into()));
    }
    let lattice = MomentumLattice::new(cutoff);
    let (coeffs, band) = kick_coefficients(k, lattice)?;
    let m = lattice.dim();
    let matrix = CMatrix::from_fn(m, m, |i, j| {
        let nu = lattice.wrap(i as i64 - j as i64);
        if nu.unsigned_abs() as usize <= band {
            coeffs[(nu + band as i64) as usize]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(UnitaryOperator::from_trusted(matrix))
}

fn free_phases(period: f64, lattice: MomentumLattice) -> Vec<C64> {
    lattice
        .momenta()
        .map(|n| C64::from_polar(1.0, -((n * n) as f64) * period / 2.0))
        .collect()
}

/// Diagonal `exp(-i n^2 T / 2)`.
pub fn rotor_free_operator(period: f64, cutoff: usize) -> UnitaryOperator {
    let lattice = MomentumLattice::new(cutoff);
    let phases = free_phases(period, lattice);
    let m = lattice.dim();
    UnitaryOperator::from_trusted(CMatrix::from_fn(m, m, |i, j| {
        if i == j {
            phases[i]
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// One period: kick, then free rotation.
pub fn rotor_floquet_operator(k: f64, period: f64, cutoff: usize) -> Result<UnitaryOperator> {
    let kick = rotor_kick_operator(k, cutoff)?;
    Ok(kick.then(&rotor_free_operator(period, cutoff)))
}

fn momentum_log_weights(beta: f64, lattice: MomentumLattice) -> (Vec<f64>, f64) {
    let exponents: Vec<f64> = lattice
        .momenta()
        .map(|n| -beta * (n * n) as f64 / 2.0)
        .collect();
    let log_z = log_sum_exp(&exponents);
    (exponents.iter().map(|x| x - log_z).collect(), log_z)
}

/// Gibbs state of `p^2 / 2` in the momentum basis. Levels are listed in
/// ascending energy `0, -1, +1, -2, +2, ...`; each eigenvector is a momentum
/// eigenstate, which fixes the dephasing basis inside the `+-n` doublets.
pub fn momentum_gibbs_state(beta: f64, cutoff: usize) -> Result<GibbsState> {
    let lattice = MomentumLattice::new(cutoff);
    let mut order: Vec<i64> = lattice.momenta().collect();
    order.sort_by_key(|&n| (n.abs(), n));
    let m = lattice.dim();
    let mut vectors = CMatrix::zeros(m, m);
    for (col, &n) in order.iter().enumerate() {
        vectors[((n + cutoff as i64) as usize, col)] = C64::new(1.0, 0.0);
    }
    let spectrum = SpectralDecomposition {
        eigenvalues: order.iter().map(|&n| (n * n) as f64 / 2.0).collect(),
        eigenvectors: vectors,
    };
    GibbsState::from_spectrum(spectrum, beta)
}

/// Exact two-point measurement statistics of `kicks` periods on a dense lattice.
pub fn rotor_tpm_distribution(
    k: f64,
    period: f64,
    beta: f64,
    cutoff: usize,
    kicks: usize,
) -> Result<TwoPointDistribution> {
    let floquet = rotor_floquet_operator(k, period, cutoff)?;
    let mut power = UnitaryOperator::identity(floquet.dim());
    let mut base = floquet;
    let mut e = kicks;
    while e > 0 {
        if e & 1 == 1 {
            power = power.then(&base);
        }
        base = base.then(&base);
        e >>= 1;
    }
    let gibbs = momentum_gibbs_state(beta, cutoff)?;
    distribution_from_process(&gibbs, &gibbs, &power)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorParams {
    pub k: f64,
    /// Kick period `T`.
    pub period: f64,
    pub beta: f64,
    /// Momentum cutoff `N`.
    pub cutoff: usize,
    pub kicks: usize,
}

impl RotorParams {
    pub fn validate(&self) -> Result<()> {
        if !self.k.is_finite() {
            return Err(Error::Parameter(format!("k must be finite, got {}", self.k)));
        }
        if !(self.period.is_finite() && self.period >= 0.0) {
            return Err(Error::Parameter(format!(
                "period must be >= 0, got {}",
                self.period
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Parameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.cutoff == 0 || self.kicks == 0 {
            return Err(Error::Parameter("cutoff and kicks must be >= 1".into()));
        }
        let tail = thermal_tail(self.beta, self.cutoff);
        if tail >= THERMAL_TAIL_TOLERANCE {
            return Err(Error::Parameter(format!(
                "cutoff {} leaves thermal weight {tail:e} outside the lattice",
                self.cutoff
            )));
        }
        Ok(())
    }
}

/// Gibbs weight of `|n| > cutoff` in the untruncated rotor.
fn thermal_tail(beta: f64, cutoff: usize) -> f64 {
    let weight = |n: usize| (-beta * (n * n) as f64 / 2.0).exp();
    let mut inside = 1.0;
    for n in 1..=cutoff {
        inside += 2.0 * weight(n);
    }
    let mut outside = 0.0;
    let mut n = cutoff + 1;
    loop {
        let w = 2.0 * weight(n);
        outside += w;
        if w < 1e-30 * outside.max(1e-300) || w == 0.0 {
            break;
        }
        n += 1;
    }
    outside / (inside + outside)
}

/// Starting cutoff: room for the thermal distribution and the kick band,
/// rounded up to a power of two.
pub fn suggested_cutoff(k: f64, beta: f64) -> usize {
    let mut thermal = 1;
    while thermal_tail(beta, thermal) >= THERMAL_TAIL_TOLERANCE {
        thermal += 1;
    }
    let orders = k.abs().ceil() as usize + 80;
    let j = bessel_j_orders(k, orders);
    let mut band = 1;
    for (nu, v) in j.iter().enumerate() {
        if v.abs() >= BESSEL_NEGLIGIBLE {
            band = nu;
        }
    }
    (2 * thermal).max(2 * band).max(32).next_power_of_two()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorOptions {
    pub method: KickMethod,
    /// Probability allowed in the outer tenth of the lattice.
    pub boundary_tolerance: f64,
    /// Double the cutoff and restart whenever the boundary tolerance is breached.
    pub auto_cutoff: bool,
    pub max_cutoff: usize,
    /// Initial momentum states lighter than this are not evolved.
    pub weight_floor: f64,
}

impl Default for RotorOptions {
    fn default() -> Self {
        Self {
            method: KickMethod::AngleGrid,
            boundary_tolerance: 1e-8,
            auto_cutoff: true,
            max_cutoff: 8192,
            weight_floor: 1e-14,
        }
    }
}

/// Per-kick record. Energies in units of `p^2 / 2`, entropies in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorDiagnostics {
    pub kick: usize,
    /// `<p^2 / 2>`.
    pub energy: f64,
    /// `<w> = energy - initial energy`; also the irreversible work, since the
    /// Hamiltonian is periodic.
    pub avg_work: f64,
    pub coherence: f64,
    pub s_irr: f64,
    /// `C / S_irr`, zero while `S_irr` vanishes.
    pub ratio: f64,
    /// Momentum standard deviation.
    pub xi_p: f64,
    pub mean_momentum: f64,
    pub pop_mismatch: f64,
    pub boundary_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotorRun {
    /// Parameters actually used (cutoff after auto-selection).
    pub params: RotorParams,
    pub method: KickMethod,
    pub initial_energy: f64,
    pub initial_entropy: f64,
    pub trajectories: usize,
    pub truncation_warning: bool,
    pub max_boundary_weight: f64,
    pub diagnostics: Vec<RotorDiagnostics>,
}

/// Runs `params.kicks` periods. With `auto_cutoff`, the starting cutoff is
/// `max(params.cutoff, suggested_cutoff)` and doubles on boundary breaches.
pub fn rotor_run(params: &RotorParams, options: &RotorOptions) -> Result<RotorRun> {
    let mut current = *params;
    if options.auto_cutoff && params.k.is_finite() && params.beta > 0.0 {
        current.cutoff = current
            .cutoff
            .max(suggested_cutoff(params.k, params.beta))
            .min(options.max_cutoff.max(params.cutoff));
    }
    current.validate()?;
    loop {
        let can_grow = options.auto_cutoff && current.cutoff * 2 <= options.max_cutoff;
        match simulate(&current, options, can_grow)? {
            Some(run) => return Ok(run),
            None => current.cutoff *= 2,
        }
    }
}

/// `None` when `abort_on_breach` and the boundary tolerance was exceeded.
fn simulate(
    params: &RotorParams,
    options: &RotorOptions,
    abort_on_breach: bool,
) -> Result<Option<RotorRun>> {
    let lattice = MomentumLattice::new(params.cutoff);
    let dim = lattice.dim();
    let kernel = KickKernel::new(params.k, lattice, options.method)?;
    let free = free_phases(params.period, lattice);
    let beta = params.beta;
    let (log_rho0, _) = momentum_log_weights(beta, lattice);
    let momenta: Vec<f64> = lattice.momenta().map(|n| n as f64).collect();
    let half_sq: Vec<f64> = momenta.iter().map(|n| n * n / 2.0).collect();

    let occupied: Vec<usize> = (0..dim)
        .filter(|&i| log_rho0[i].exp() > options.weight_floor)
        .collect();
    let raw: Vec<f64> = occupied.iter().map(|&i| log_rho0[i].exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mut states: Vec<Vec<C64>> = occupied
        .iter()
        .map(|&i| {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[i] = C64::new(1.0, 0.0);
            v
        })
        .collect();

    let initial_energy: f64 = occupied
        .iter()
        .zip(&weights)
        .map(|(&i, w)| w * half_sq[i])
        .sum();
    // Unitary evolution preserves the orthonormality of the trajectories, so
    // the mixture keeps the spectrum `weights` (checked at the end).
    let initial_entropy = shannon_entropy(&weights);

    let edge = params.cutoff - (params.cutoff / 10).max(1);
    let in_band: Vec<bool> = lattice
        .momenta()
        .map(|n| n.unsigned_abs() as usize > edge)
        .collect();

    let mut probs = vec![0.0; dim];
    let mut diagnostics = Vec::with_capacity(params.kicks);
    let mut max_boundary: f64 = 0.0;
    let mut breached = false;
    for kick in 1..=params.kicks {
        states.par_iter_mut().for_each_init(Vec::new, |scratch, psi| {
            kernel.apply(psi, scratch);
            for (z, f) in psi.iter_mut().zip(&free) {
                *z *= f;
            }
        });

        probs.iter_mut().for_each(|p| *p = 0.0);
        for (w, psi) in weights.iter().zip(&states) {
            for (p, z) in probs.iter_mut().zip(psi) {
                *p += w * z.norm_sqr();
            }
        }

        let mut energy = 0.0;
        let mut mean = 0.0;
        let mut boundary = 0.0;
        let mut cross = 0.0;
        for i in 0..dim {
            energy += probs[i] * half_sq[i];
            mean += probs[i] * momenta[i];
            cross += probs[i] * log_rho0[i];
            if in_band[i] {
                boundary += probs[i];
            }
        }
        max_boundary = max_boundary.max(boundary);
        if boundary > options.boundary_tolerance {
            if abort_on_breach {
                return Ok(None);
            }
            breached = true;
        }

        let s_diag = shannon_entropy(&probs);
        let avg_work = energy - initial_energy;
        let s_irr = clamp_entropy(beta * avg_work, "rotor irreversible entropy")?;
        let coherence = clamp_entropy(s_diag - initial_entropy, "rotor coherence")?;
        let pop_mismatch = clamp_entropy(-s_diag - cross, "rotor population mismatch")?;
        let residual = (s_irr - coherence - pop_mismatch).abs();
        if residual > 1e-9 * s_irr.max(1.0) {
            return Err(Error::Invariant(format!(
                "rotor decomposition residual {residual:e} at kick {kick}"
            )));
        }
        let ratio = if s_irr > 1e-12 {
            (coherence / s_irr).min(1.0)
        } else {
            0.0
        };
        diagnostics.push(RotorDiagnostics {
            kick,
            energy,
            avg_work,
            coherence,
            s_irr,
            ratio,
            xi_p: (2.0 * energy - mean * mean).max(0.0).sqrt(),
            mean_momentum: mean,
            pop_mismatch,
            boundary_weight: boundary,
        });
    }

    let gram_error = gram_deviation(&states);
    if gram_error > 1e-9 {
        return Err(Error::Invariant(format!(
            "rotor trajectories lost orthonormality: {gram_error:e}"
        )));
    }

    Ok(Some(RotorRun {
        params: *params,
        method: options.method,
        initial_energy,
        initial_entropy,
        trajectories: states.len(),
        truncation_warning: breached,
        max_boundary_weight: max_boundary,
        diagnostics,
    }))
}

fn gram_deviation(states: &[Vec<C64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, psi) in states.iter().enumerate() {
        for (b, phi) in states.iter().enumerate().skip(a) {
            let dot: C64 = psi.iter().zip(phi).map(|(x, y)| x.conj() * y).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Long-time averages over kicks `window_start..=window_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationStats {
    pub window_start: usize,
    pub window_end: usize,
    pub samples: usize,
    pub mean_c: f64,
    pub std_c: f64,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub mean_work: f64,
    pub std_work: f64,
    pub mean_s_irr: f64,
    /// Standard deviation of the window-averaged momentum distribution.
    pub xi_p: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn saturation_statistics(
    diags: &[RotorDiagnostics],
    window_start: usize,
    window_end: usize,
) -> Result<SaturationStats> {
    let last = diags.last().map(|d| d.kick).unwrap_or(0);
    if window_start == 0 || window_start > window_end || window_end > last {
        return Err(Error::Parameter(format!(
            "window [{window_start}, {window_end}] outside run of {last} kicks"
        )));
    }
    let window: Vec<&RotorDiagnostics> = diags
        .iter()
        .filter(|d| d.kick >= window_start && d.kick <= window_end)
        .collect();
    if window.len() < 100 {
        return Err(Error::Parameter(format!(
            "window holds {} kicks, need at least 100",
            window.len()
        )));
    }
    let (mean_c, std_c) = mean_std(window.iter().map(|d| d.coherence));
    let (mean_ratio, std_ratio) = mean_std(window.iter().map(|d| d.ratio));
    let (mean_work, std_work) = mean_std(window.iter().map(|d| d.avg_work));
    let (mean_s_irr, _) = mean_std(window.iter().map(|d| d.s_irr));
    // moments of the averaged distribution are averages of the moments
    let (second, _) = mean_std(window.iter().map(|d| 2.0 * d.energy));
    let (first, _) = mean_std(window.iter().map(|d| d.mean_momentum));
    Ok(SaturationStats {
        window_start,
        window_end,
        samples: window.len(),
        mean_c,
        std_c,
        mean_ratio,
        std_ratio,
        mean_work,
        std_work,
        mean_s_irr,
        xi_p: (second - first * first).max(0.0).sqrt(),
    })
}
