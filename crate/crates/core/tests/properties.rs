use cohthermo::dynamics::{adiabatic_state, UnitaryOperator};
use cohthermo::fluctuation::{distribution_from_process, exact_expectations};
use cohthermo::linalg::{
    coherence, dephase, relative_entropy, spectral_decompose, von_neumann_entropy, GibbsState,
};
use cohthermo::random::{random_density_matrix, random_hermitian, random_unitary};
use cohthermo::thermo::ThermalProcess;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_and_fluctuation_identities(seed in any::<u64>(), dim in 2usize..=10, beta in 0.1f64..5.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let h_i = random_hermitian(dim, &mut rng);
        let h_f = random_hermitian(dim, &mut rng);
        let u = UnitaryOperator::new(random_unitary(dim, &mut rng)).unwrap();
        let process = ThermalProcess::thermal(&h_i, beta).unwrap();
        let rho_t = process.rho0.conjugate_by(u.matrix()).unwrap();
        let r = process.report(1.0, &rho_t, &h_f, true).unwrap();
        prop_assert!(r.decomposition_residual() < 1e-10);
        prop_assert!(r.two_path_residual() < 1e-9);
        prop_assert!(r.adiabatic_residual().unwrap() < 1e-10);
        prop_assert!(r.coherence >= 0.0 && r.pop_mismatch_b >= 0.0);

        let reference = GibbsState::new(&h_f, beta).unwrap();
        let dist = distribution_from_process(&process.initial, &reference, &u).unwrap();
        let e = exact_expectations(&dist);
        for v in [e.exp_neg_s, e.exp_neg_p, e.exp_neg_c] {
            prop_assert!((v - 1.0).abs() < 1e-10);
        }
        prop_assert!((e.mean_s - r.s_irr).abs() < 1e-10);
        prop_assert!((e.mean_c - r.coherence).abs() < 1e-10);
        prop_assert!((e.mean_p - r.pop_mismatch_b).abs() < 1e-10);

        let rho_a = adiabatic_state(&process.rho0, &h_i, &h_f).unwrap();
        let direct = relative_entropy(&rho_t, &rho_a).unwrap();
        prop_assert!((direct - r.non_adiabaticity.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn coherence_is_entropy_gap_and_nonnegative(seed in any::<u64>(), dim in 2usize..=8) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let rho = random_density_matrix(dim, &mut rng);
        let basis = spectral_decompose(&random_hermitian(dim, &mut rng)).basis();
        let c = coherence(&rho, &basis).unwrap();
        let gap = von_neumann_entropy(&dephase(&rho, &basis).unwrap()) - von_neumann_entropy(&rho);
        prop_assert!(c >= 0.0);
        prop_assert!((c - gap.max(0.0)).abs() < 1e-10);
    }
}
