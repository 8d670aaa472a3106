//! Dense complex Hermitian linear algebra: states, observables, spectral
//! decompositions, Gibbs states, entropies, dephasing and coherence.
//!
//! Units are `hbar = k_B = 1`; every entropy is in nats.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Numerical tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max elementwise `|A - A^dagger|` accepted for Hermitian inputs.
    pub hermitian: f64,
    /// Max `|Tr rho - 1|`.
    pub trace: f64,
    /// Most negative eigenvalue tolerated in a density matrix.
    pub negative_eigenvalue: f64,
    /// Eigenvalues below this contribute nothing to `x ln x`.
    pub eigenvalue_floor: f64,
    /// rho-weight on a null direction of sigma that makes `D(rho||sigma)` infinite.
    pub support_weight: f64,
    /// Entropy-like values in `[-entropy_floor, 0)` are rounded to zero.
    pub entropy_floor: f64,
    /// Orthonormality of eigenvector and basis columns.
    pub orthonormal: f64,
    /// Unitarity of multi-step propagators.
    pub unitary: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermitian: 1e-12,
        trace: 1e-12,
        negative_eigenvalue: 1e-10,
        eigenvalue_floor: 1e-14,
        support_weight: 1e-12,
        entropy_floor: 1e-11,
        orthonormal: 1e-10,
        unitary: 1e-9,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

const TOL: Tolerances = Tolerances::DEFAULT;

/// Largest elementwise modulus of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn require_square(m: &CMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Parameter(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Max elementwise deviation of `U^dagger U` from the identity.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &CMatrix::identity(n, n))
}

/// Commutator `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Hermitian observable (energy units).
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
}

impl Observable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        require_square(&matrix, "observable")?;
        let residual = hermiticity_residual(&matrix);
        if residual > TOL.hermitian {
            return Err(Error::InvalidObservable(format!(
                "not Hermitian: max |H - H^dagger| = {residual:e}"
            )));
        }
        Ok(Self {
            matrix: symmetrize(&matrix),
        })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let matrix = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { matrix }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `Tr{H rho}`.
    pub fn expectation(&self, rho: &DensityMatrix) -> Result<f64> {
        check_dim(self.dim(), rho.dim())?;
        Ok(trace_product(&self.matrix, rho.matrix()).re)
    }
}

/// `Tr{A B}` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        require_square(&matrix, "density matrix")?;
        let residual = hermiticity_residual(&matrix);
        if residual > TOL.hermitian {
            return Err(Error::InvalidState(format!(
                "not Hermitian: max |rho - rho^dagger| = {residual:e}"
            )));
        }
        let matrix = symmetrize(&matrix);
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > TOL.trace {
            return Err(Error::InvalidState(format!("trace is {trace}, expected 1")));
        }
        let (values, _) = hermitian_eigen(&matrix);
        if values[0] < -TOL.negative_eigenvalue {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:e}",
                values[0]
            )));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix produced by a trusted computation (unitary conjugation,
    /// spectral assembly); only re-symmetrizes rounding noise.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self {
            matrix: symmetrize(&matrix),
        }
    }

    /// `|psi><psi|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if psi.is_empty() || norm2 == 0.0 || !norm2.is_finite() {
            return Err(Error::InvalidState("pure state needs a nonzero vector".into()));
        }
        let scale = 1.0 / norm2;
        let d = psi.len();
        let matrix = CMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() * scale);
        Ok(Self::from_trusted(matrix))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let w = 1.0 / dim as f64;
        Self {
            matrix: CMatrix::identity(dim, dim).scale(w),
        }
    }

    /// `sum_n p_n |v_n><v_n|` over the columns of `basis`.
    pub fn from_populations(populations: &[f64], basis: &Basis) -> Result<Self> {
        check_dim(basis.dim(), populations.len())?;
        if populations.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidState("populations must be non-negative".into()));
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > TOL.trace {
            return Err(Error::InvalidState(format!("populations sum to {total}")));
        }
        Ok(Self::from_trusted(assemble(basis.vectors(), populations)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        check_dim(self.dim(), u.nrows())?;
        Ok(Self::from_trusted(u * &self.matrix * u.adjoint()))
    }
}

/// `V diag(w) V^dagger`.
fn assemble(vectors: &CMatrix, weights: &[f64]) -> CMatrix {
    let mut scaled = vectors.clone();
    for (j, &w) in weights.iter().enumerate() {
        scaled.column_mut(j).scale_mut(w);
    }
    scaled * vectors.adjoint()
}

/// Ordered orthonormal basis stored as the columns of a unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    vectors: CMatrix,
}

impl Basis {
    pub fn new(vectors: CMatrix) -> Result<Self> {
        require_square(&vectors, "basis")?;
        let residual = unitarity_residual(&vectors);
        if residual > TOL.orthonormal {
            return Err(Error::Parameter(format!(
                "basis vectors not orthonormal: residual {residual:e}"
            )));
        }
        Ok(Self { vectors })
    }

    pub fn computational(dim: usize) -> Self {
        Self {
            vectors: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }
}

/// Ascending eigenvalues with orthonormal, phase-fixed eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn basis(&self) -> Basis {
        Basis {
            vectors: self.eigenvectors.clone(),
        }
    }

    pub fn reconstruct(&self) -> CMatrix {
        assemble(&self.eigenvectors, &self.eigenvalues)
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            let phase = C64::from_polar(1.0, -e * t);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// Smallest gap between consecutive eigenvalues (infinite for d = 1).
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues ascending; in each
/// eigenvector the first entry of largest modulus is made real and non-negative.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let peak = col.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        let pivot = col
            .iter()
            .find(|z| z.norm() >= peak * (1.0 - 1e-12))
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for (i, z) in col.iter().enumerate() {
            vectors[(i, dst)] = z * phase;
        }
    }
    (values, vectors)
}

pub fn spectral_decompose(h: &Observable) -> SpectralDecomposition {
    let (eigenvalues, eigenvectors) = hermitian_eigen(h.matrix());
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// `ln sum_i exp(x_i)` with max-shift.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Gibbs state `exp(-beta H) / Z` kept in spectral form so that logarithms of
/// tiny populations stay exact.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub spectrum: SpectralDecomposition,
    pub beta: f64,
    /// `ln Z`.
    pub log_partition: f64,
    /// `ln p_n = -beta e_n - ln Z`, in the order of `spectrum`.
    pub log_populations: Vec<f64>,
}

impl GibbsState {
    pub fn new(h: &Observable, beta: f64) -> Result<Self> {
        Self::from_spectrum(spectral_decompose(h), beta)
    }

    pub fn from_spectrum(spectrum: SpectralDecomposition, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Parameter(format!(
                "inverse temperature must be finite and >= 0, got {beta}"
            )));
        }
        let exponents: Vec<f64> = spectrum.eigenvalues.iter().map(|e| -beta * e).collect();
        let log_partition = log_sum_exp(&exponents);
        let log_populations = exponents.iter().map(|x| x - log_partition).collect();
        Ok(Self {
            spectrum,
            beta,
            log_partition,
            log_populations,
        })
    }

    pub fn populations(&self) -> Vec<f64> {
        self.log_populations.iter().map(|l| l.exp()).collect()
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        DensityMatrix::from_trusted(assemble(
            &self.spectrum.eigenvectors,
            &self.populations(),
        ))
    }

    /// `F = -ln Z / beta`; requires `beta > 0`.
    pub fn free_energy(&self) -> Result<f64> {
        if self.beta <= 0.0 {
            return Err(Error::Parameter(
                "free energy needs a strictly positive inverse temperature".into(),
            ));
        }
        Ok(-self.log_partition / self.beta)
    }

    pub fn basis(&self) -> Basis {
        self.spectrum.basis()
    }

    /// Mean energy `sum_n p_n e_n`.
    pub fn energy(&self) -> f64 {
        self.log_populations
            .iter()
            .zip(&self.spectrum.eigenvalues)
            .map(|(l, e)| l.exp() * e)
            .sum()
    }
}

pub fn thermal_state(h: &Observable, beta: f64) -> Result<DensityMatrix> {
    Ok(GibbsState::new(h, beta)?.density_matrix())
}

pub fn free_energy(h: &Observable, beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Parameter(format!(
            "free energy needs finite beta > 0, got {beta}"
        )));
    }
    GibbsState::new(h, beta)?.free_energy()
}

/// Rounds values in `[-floor, 0)` up to zero, rejects anything more negative.
pub fn clamp_entropy(value: f64, what: &str) -> Result<f64> {
    if value >= 0.0 || value.is_nan() {
        if value.is_nan() {
            return Err(Error::Invariant(format!("{what} is NaN")));
        }
        Ok(value)
    } else if value >= -TOL.entropy_floor {
        Ok(0.0)
    } else {
        Err(Error::Invariant(format!("{what} is negative: {value:e}")))
    }
}

/// `-sum p ln p`, with `0 ln 0 := 0` below the eigenvalue floor.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > TOL.eigenvalue_floor)
        .map(|&x| -x * x.ln())
        .sum()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(&rho.eigenvalues()).max(0.0)
}

/// `D(rho || sigma) = -S(rho) - Tr{rho ln sigma}`; `+inf` when rho has weight
/// outside the support of sigma.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dim(rho.dim(), sigma.dim())?;
    let (mu, b) = hermitian_eigen(sigma.matrix());
    // <b_j| rho |b_j>
    let rotated = b.adjoint() * rho.matrix() * &b;
    let mut cross = 0.0;
    for (j, &m) in mu.iter().enumerate() {
        let weight = rotated[(j, j)].re;
        if m < TOL.eigenvalue_floor {
            if weight > TOL.support_weight {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += weight * m.ln();
    }
    clamp_entropy(-von_neumann_entropy(rho) - cross, "relative entropy")
}

/// `D(rho || sigma)` for `sigma = sum_n exp(log_weights[n]) |n><n|` diagonal in
/// `basis`. Works in log space so arbitrarily small weights are exact.
pub fn relative_entropy_to_diagonal(
    rho: &DensityMatrix,
    basis: &Basis,
    log_weights: &[f64],
) -> Result<f64> {
    check_dim(rho.dim(), basis.dim())?;
    check_dim(rho.dim(), log_weights.len())?;
    let pops = populations(rho, basis)?;
    let cross = cross_term(&pops, log_weights);
    if cross.is_infinite() {
        return Ok(f64::INFINITY);
    }
    clamp_entropy(-von_neumann_entropy(rho) - cross, "relative entropy")
}

/// `sum_n p_n ln q_n`, `-inf` when p carries weight where `q = 0`.
fn cross_term(p: &[f64], log_q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pn, &lq) in p.iter().zip(log_q) {
        if lq == f64::NEG_INFINITY {
            if pn > TOL.support_weight {
                return f64::NEG_INFINITY;
            }
            continue;
        }
        acc += pn * lq;
    }
    acc
}

/// Classical Kullback-Leibler divergence `sum p (ln p - ln q)`, with `q` given
/// by its logarithms.
pub fn classical_relative_entropy(p: &[f64], log_q: &[f64]) -> Result<f64> {
    check_dim(p.len(), log_q.len())?;
    let cross = cross_term(p, log_q);
    if cross.is_infinite() {
        return Ok(f64::INFINITY);
    }
    clamp_entropy(-shannon_entropy(p) - cross, "population relative entropy")
}

/// Diagonal of rho in the given basis, `<n| rho |n>`.
pub fn populations(rho: &DensityMatrix, basis: &Basis) -> Result<Vec<f64>> {
    check_dim(rho.dim(), basis.dim())?;
    let v = basis.vectors();
    let rv = rho.matrix() * v;
    Ok((0..v.ncols())
        .map(|n| v.column(n).dotc(&rv.column(n)).re)
        .collect())
}

/// Dephasing map: keeps the populations in `basis`, drops every coherence.
pub fn dephase(rho: &DensityMatrix, basis: &Basis) -> Result<DensityMatrix> {
    let pops = populations(rho, basis)?;
    Ok(DensityMatrix::from_trusted(assemble(basis.vectors(), &pops)))
}

/// Relative entropy of coherence `S(dephase(rho)) - S(rho)`.
pub fn coherence(rho: &DensityMatrix, basis: &Basis) -> Result<f64> {
    let pops = populations(rho, basis)?;
    clamp_entropy(
        shannon_entropy(&pops) - von_neumann_entropy(rho),
        "coherence",
    )
}

/// Trace norm `sum |eig(A)|` of a Hermitian matrix.
pub fn trace_norm(a: &CMatrix) -> f64 {
    hermitian_eigen(&symmetrize(a)).0.iter().map(|x| x.abs()).sum()
}
