mod common;

use common::*;
use dimcert::optim::{minimize, povm_from_factors, psd_state_from_factor, FnObjective};
use dimcert::qmat::{
    binary_entropy, born_statistics, concurrence, density_from_bloch, eigvalsh4, kron,
    min_eigenvalue, zero_marginal_spectrum, Mat2, Mat4, C64,
};
use dimcert::stats::{generate, FamilySpec, ProbTable};
use dimcert::{OptimOptions, Povm};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn unit_vector() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z).normalize())
}

fn dichotomic() -> impl Strategy<Value = Povm> {
    (0.0..=1.0f64, 0.0..=1.0f64, unit_vector()).prop_map(|(eta, u, n)| {
        let gamma = 0.5 * eta + u * (1.0 - eta);
        Povm::dichotomic(gamma, eta, &n).unwrap()
    })
}

fn complex2() -> impl Strategy<Value = Mat2> {
    proptest::array::uniform8(-1.0..1.0f64)
        .prop_map(|v| Mat2::from_fn(|r, c| C64::new(v[2 * (2 * r + c)], v[2 * (2 * r + c) + 1])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn concurrence_is_local_unitary_invariant(seed in any::<u64>(), rank in 1usize..=4) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, rank);
        let u = kron(&random_unitary2(&mut r), &random_unitary2(&mut r));
        let rotated = u * rho * u.adjoint();
        let (c0, c1) = (concurrence(&rho).unwrap(), concurrence(&rotated).unwrap());
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c0));
        prop_assert!((c0 - c1).abs() < 1e-8, "{} vs {}", c0, c1);
    }

    #[test]
    fn product_states_have_zero_concurrence(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pure = |r: &mut _| {
            let u = random_unitary2(r);
            let v = u.column(0);
            v * v.adjoint()
        };
        let rho = kron(&pure(&mut r), &pure(&mut r));
        prop_assert!(concurrence(&rho).unwrap() < 1e-7);
    }

    #[test]
    fn zero_marginal_spectrum_matches_eigendecomposition(t in proptest::array::uniform9(-1.0..1.0f64)) {
        let t = Matrix3::from_row_slice(&t);
        let direct = eigvalsh4(&density_from_bloch(&Vector3::zeros(), &Vector3::zeros(), &t));
        let closed = zero_marginal_spectrum(&t);
        for i in 0..4 {
            prop_assert!((direct[i] - closed[i]).abs() < 1e-12, "{} vs {}", direct, closed);
        }
    }

    #[test]
    fn born_statistics_are_normalized(seed in any::<u64>(), pa in dichotomic(), pb in dichotomic(), qa in dichotomic()) {
        let rho = random_state(&mut rng(seed), 4);
        let p = born_statistics(&rho, &[pa, qa], &[pb]).unwrap();
        for x in 0..2 {
            let total: f64 = p.as_slice()[x * 4..x * 4 + 4].iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.as_slice()[x * 4..x * 4 + 4].iter().all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn psd_state_from_factor_is_a_state(v in proptest::collection::vec(-1.0..1.0f64, 32)) {
        let f = Mat4::from_fn(|r, c| C64::new(v[2 * (4 * r + c)], v[2 * (4 * r + c) + 1]));
        prop_assume!(f.norm() > 1e-6);
        let rho = psd_state_from_factor(&f).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(min_eigenvalue(&rho) > -1e-12);
    }

    #[test]
    fn povm_from_factors_is_complete_or_rejected(fs in proptest::collection::vec(complex2(), 2..=4)) {
        if let Ok(p) = povm_from_factors(&fs) {
            let sum: Mat2 = p.elements().iter().sum();
            prop_assert!((sum - Mat2::identity()).iter().all(|z| z.norm() < 1e-12));
            prop_assert!(Povm::new(p.elements().to_vec()).is_ok());
        }
    }

    #[test]
    fn binary_entropy_is_symmetric_and_bounded(p in 0.0..=1.0f64) {
        let h = binary_entropy(p);
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!((h - binary_entropy(1.0 - p)).abs() < 1e-12);
    }

    #[test]
    fn table_json_round_trip_is_exact(w in 0.0..=1.0f64, eps in 0.05..=1.0f64) {
        for spec in [FamilySpec::chsh(w), FamilySpec::noisy_bb84(w, eps, eps)] {
            let p = generate(&spec).unwrap();
            let back: ProbTable = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
            prop_assert_eq!(back.max_abs_diff(&p), 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn minimizer_is_deterministic_and_prefix_monotone(seed in any::<u64>(), a in -1.5..1.5f64) {
        let obj = FnObjective {
            f: move |x: &[f64]| (3.0 * x[0]).sin() + (5.0 * x[1] - a).cos() + 0.1 * x[0] * x[1],
            bounds: vec![(-2.0, 2.0); 2],
        };
        let opts = OptimOptions::default().with_seed(seed).with_max_evals(200).with_threads(1);
        let first = minimize(&obj, &opts.clone().with_starts(4));
        let again = minimize(&obj, &opts.clone().with_starts(4));
        prop_assert_eq!(first.f_best.to_bits(), again.f_best.to_bits());
        let more = minimize(&obj, &opts.with_starts(8));
        prop_assert!(more.f_best <= first.f_best);
    }
}
