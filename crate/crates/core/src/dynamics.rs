//! Driving protocols, midpoint propagators, transition matrices and the
//! adiabatic reference state.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    hermitian_eigen, max_abs_diff, populations, spectral_decompose, unitarity_residual, Basis,
    CMatrix, DensityMatrix, Observable, Tolerances, C64,
};

type HamiltonianFn = dyn Fn(f64) -> CMatrix + Send + Sync;

/// Schedule `t -> H[lambda(t)]` on `[0, duration]`.
#[derive(Clone)]
pub struct DrivingProtocol {
    label: String,
    duration: f64,
    dim: usize,
    generator: Arc<HamiltonianFn>,
}

impl fmt::Debug for DrivingProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DrivingProtocol")
            .field("label", &self.label)
            .field("duration", &self.duration)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl DrivingProtocol {
    /// `generator` must be pure: it is called concurrently and repeatedly.
    pub fn new<F>(label: impl Into<String>, duration: f64, dim: usize, generator: F) -> Result<Self>
    where
        F: Fn(f64) -> CMatrix + Send + Sync + 'static,
    {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::Parameter(format!(
                "protocol duration must be positive, got {duration}"
            )));
        }
        if dim == 0 {
            return Err(Error::Parameter("protocol dimension must be positive".into()));
        }
        let protocol = Self {
            label: label.into(),
            duration,
            dim,
            generator: Arc::new(generator),
        };
        protocol.hamiltonian_at(0.0)?;
        protocol.hamiltonian_at(duration)?;
        Ok(protocol)
    }

    /// Time-independent Hamiltonian held for `duration`.
    pub fn constant(label: impl Into<String>, h: Observable, duration: f64) -> Result<Self> {
        let dim = h.dim();
        let m = h.matrix().clone();
        Self::new(label, duration, dim, move |_| m.clone())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian_at(&self, t: f64) -> Result<Observable> {
        let slack = 1e-12 * self.duration;
        if !(t >= -slack && t <= self.duration + slack) {
            return Err(Error::Parameter(format!(
                "time {t} outside protocol interval [0, {}]",
                self.duration
            )));
        }
        let h = (self.generator)(t.clamp(0.0, self.duration));
        check_dim(self.dim, h.nrows())?;
        Observable::new(h)
    }

    pub fn initial_hamiltonian(&self) -> Observable {
        self.hamiltonian_at(0.0).expect("validated at construction")
    }

    pub fn final_hamiltonian(&self) -> Observable {
        self.hamiltonian_at(self.duration)
            .expect("validated at construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: CMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidUnitary("matrix must be square".into()));
        }
        let residual = unitarity_residual(&matrix);
        if residual > Tolerances::DEFAULT.unitary {
            return Err(Error::InvalidUnitary(format!(
                "|U^dagger U - I| = {residual:e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `later * self`: apply `self` first.
    pub fn then(&self, later: &UnitaryOperator) -> UnitaryOperator {
        UnitaryOperator {
            matrix: &later.matrix * &self.matrix,
        }
    }

    pub fn residual(&self) -> f64 {
        unitarity_residual(&self.matrix)
    }
}

/// Number of midpoint substeps per propagated interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    Fixed(usize),
    /// Doubles the step count until `max |U_N - U_2N| < tolerance` or
    /// `max_steps` is reached.
    Adaptive {
        initial_steps: usize,
        tolerance: f64,
        max_steps: usize,
    },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Adaptive {
            initial_steps: 16,
            tolerance: 1e-9,
            max_steps: 1 << 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub unitary: UnitaryOperator,
    pub steps: usize,
    /// False when adaptive doubling hit `max_steps` first.
    pub converged: bool,
}

fn check_interval(protocol: &DrivingProtocol, t0: f64, t1: f64) -> Result<()> {
    let tau = protocol.duration();
    let slack = 1e-12 * tau;
    if !(t0 >= 0.0 && t0 < t1 && t1 <= tau + slack) {
        return Err(Error::Parameter(format!(
            "invalid interval [{t0}, {t1}] for protocol of duration {tau}"
        )));
    }
    Ok(())
}

fn midpoint_product(protocol: &DrivingProtocol, t0: f64, t1: f64, steps: usize) -> Result<CMatrix> {
    let dt = (t1 - t0) / steps as f64;
    let mut u = CMatrix::identity(protocol.dim(), protocol.dim());
    for j in 0..steps {
        let t_mid = t0 + (j as f64 + 0.5) * dt;
        let factor = spectral_decompose(&protocol.hamiltonian_at(t_mid)?).propagator(dt);
        u = factor * u;
    }
    Ok(nearest_unitary(&u))
}

/// Polar factor `M (M^dagger M)^{-1/2}`. Removes the roundoff drift that long
/// products of exponentials accumulate; the correction is of the size of that
/// drift.
pub fn nearest_unitary(m: &CMatrix) -> CMatrix {
    let gram = m.adjoint() * m;
    let (values, vectors) = hermitian_eigen(&gram);
    let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|v| C64::new(1.0 / v.sqrt(), 0.0)),
    ));
    m * (&vectors * inv_sqrt * vectors.adjoint())
}

/// `U = prod_j exp(-i H(t_j + dt/2) dt)`, latest factor leftmost.
pub fn propagate(
    protocol: &DrivingProtocol,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<UnitaryOperator> {
    check_interval(protocol, t0, t1)?;
    if steps == 0 {
        return Err(Error::Parameter("steps must be >= 1".into()));
    }
    Ok(UnitaryOperator::from_trusted(midpoint_product(
        protocol, t0, t1, steps,
    )?))
}

pub fn propagate_with(
    protocol: &DrivingProtocol,
    t0: f64,
    t1: f64,
    control: StepControl,
) -> Result<Propagation> {
    match control {
        StepControl::Fixed(steps) => Ok(Propagation {
            unitary: propagate(protocol, t0, t1, steps)?,
            steps,
            converged: true,
        }),
        StepControl::Adaptive {
            initial_steps,
            tolerance,
            max_steps,
        } => {
            check_interval(protocol, t0, t1)?;
            if initial_steps == 0 || max_steps < initial_steps || tolerance.is_nan() || tolerance <= 0.0 {
                return Err(Error::Parameter(format!(
                    "invalid adaptive settings: initial {initial_steps}, max {max_steps}, tol {tolerance}"
                )));
            }
            let mut steps = initial_steps;
            let mut coarse = midpoint_product(protocol, t0, t1, steps)?;
            loop {
                let fine = midpoint_product(protocol, t0, t1, steps * 2)?;
                let err = max_abs_diff(&coarse, &fine);
                steps *= 2;
                if err < tolerance || steps >= max_steps {
                    return Ok(Propagation {
                        unitary: UnitaryOperator::from_trusted(fine),
                        steps,
                        converged: err < tolerance,
                    });
                }
                coarse = fine;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: DensityMatrix,
    pub hamiltonian: Observable,
    /// Cumulative `U_{t,0}`.
    pub propagator: UnitaryOperator,
}

/// `rho_t = U_{t,0} rho_0 U_{t,0}^dagger` at `samples + 1` uniform times
/// `0, tau/samples, ..., tau`.
pub fn evolve_state(
    rho0: &DensityMatrix,
    protocol: &DrivingProtocol,
    samples: usize,
    control: StepControl,
) -> Result<Vec<TrajectoryPoint>> {
    check_dim(protocol.dim(), rho0.dim())?;
    if samples == 0 {
        return Err(Error::Parameter("samples must be >= 1".into()));
    }
    let tau = protocol.duration();
    let mut out = Vec::with_capacity(samples + 1);
    let mut u = UnitaryOperator::identity(protocol.dim());
    out.push(TrajectoryPoint {
        t: 0.0,
        state: rho0.clone(),
        hamiltonian: protocol.initial_hamiltonian(),
        propagator: u.clone(),
    });
    for k in 0..samples {
        let t0 = tau * k as f64 / samples as f64;
        let t1 = if k + 1 == samples {
            tau
        } else {
            tau * (k + 1) as f64 / samples as f64
        };
        let step = propagate_with(protocol, t0, t1, control)?;
        u = u.then(&step.unitary);
        out.push(TrajectoryPoint {
            t: t1,
            state: rho0.conjugate_by(u.matrix())?,
            hamiltonian: protocol.hamiltonian_at(t1)?,
            propagator: u.clone(),
        });
    }
    Ok(out)
}

/// `P[m][n] = P_{m -> n} = |<n_f| U |m_i>|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub(crate) entries: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `P_{from -> to}`.
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[(from, to)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Max deviation of any row or column sum from one.
    pub fn stochasticity_residual(&self) -> f64 {
        let rows = self
            .entries
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max);
        let cols = self
            .entries
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max);
        rows.max(cols)
    }

    /// Final populations `sum_m p_m P_{m -> n}`.
    pub fn push_forward(&self, initial: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|n| (0..self.dim()).map(|m| initial[m] * self.get(m, n)).sum())
            .collect()
    }
}

pub fn transition_matrix(
    u: &UnitaryOperator,
    basis_i: &Basis,
    basis_f: &Basis,
) -> Result<TransitionMatrix> {
    check_dim(u.dim(), basis_i.dim())?;
    check_dim(u.dim(), basis_f.dim())?;
    // amplitudes[(n, m)] = <n_f| U |m_i>
    let amplitudes = basis_f.vectors().adjoint() * u.matrix() * basis_i.vectors();
    let d = u.dim();
    Ok(TransitionMatrix {
        entries: DMatrix::from_fn(d, d, |m, n| amplitudes[(n, m)].norm_sqr()),
    })
}

/// Transition-less image of a state diagonal in the eigenbasis of `h_i`: the
/// n-th initial population (ascending energy) lands on the n-th eigenvector
/// of `h_f`.
pub fn adiabatic_state(
    rho0: &DensityMatrix,
    h_i: &Observable,
    h_f: &Observable,
) -> Result<DensityMatrix> {
    check_dim(rho0.dim(), h_i.dim())?;
    check_dim(rho0.dim(), h_f.dim())?;
    let basis_i = spectral_decompose(h_i).basis();
    let rotated = basis_i.vectors().adjoint() * rho0.matrix() * basis_i.vectors();
    let d = rho0.dim();
    let mut off = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                off = off.max(rotated[(i, j)].norm());
            }
        }
    }
    if off > 1e-10 {
        return Err(Error::Precondition(format!(
            "initial state has coherence {off:e} in the initial energy basis"
        )));
    }
    let pops = populations(rho0, &basis_i)?;
    let basis_f = spectral_decompose(h_f).basis();
    let mut m = CMatrix::zeros(d, d);
    for (n, &p) in pops.iter().enumerate() {
        let v = basis_f.vectors().column(n);
        m += v * v.adjoint() * crate::linalg::C64::new(p, 0.0);
    }
    Ok(DensityMatrix::from_trusted(m))
}

/// True when the instantaneous spectrum has a gap below `1e-9` at any of
/// `samples + 1` uniform times (the adiabatic level ordering is then ambiguous).
pub fn detect_level_crossing(protocol: &DrivingProtocol, samples: usize) -> Result<bool> {
    let samples = samples.max(1);
    for k in 0..=samples {
        let t = protocol.duration() * k as f64 / samples as f64;
        if spectral_decompose(&protocol.hamiltonian_at(t)?).min_gap() < 1e-9 {
            return Ok(true);
        }
    }
    Ok(false)
}
