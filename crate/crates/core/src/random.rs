//! Random matrix ensembles used by property tests, the invariant suite and
//! the random-protocol experiments.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{spectral_decompose, CMatrix, DensityMatrix, Observable, C64};

fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Gaussian unitary ensemble scaled so the spectrum stays O(1) in the dimension.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Observable {
    let a = ginibre(dim, rng);
    let h = (&a + a.adjoint()).scale(0.5 / (dim as f64).sqrt());
    Observable::new(h).expect("symmetrized matrix is Hermitian")
}

/// Full-rank state `G G^dagger / Tr` from a Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.unscale(tr)).expect("Ginibre state is a valid density matrix")
}

/// `exp(-i H)` for a random Hermitian `H` stretched over a few radians.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let h = random_hermitian(dim, rng);
    spectral_decompose(&h).propagator(std::f64::consts::PI)
}
