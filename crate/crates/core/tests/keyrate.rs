use dimcert::qkd::{
    certified_keyrate, holevo, key_fraction, noisy_bb84_keyrate, sixstate_attack, NoisyBb84Params,
    NO_CLICK_CAVEAT,
};
use dimcert::qmat::binary_entropy;
use dimcert::stats::{generate, Family, FamilySpec};
use dimcert::OptimOptions;

fn opts(starts: usize) -> OptimOptions {
    OptimOptions::default().with_starts(starts).with_seed(11)
}

fn bb84_rate(q: f64) -> f64 {
    1.0 - 2.0 * binary_entropy(q)
}

#[test]
fn certified_rates_equal_the_bb84_formula() {
    for family in [Family::Bb84, Family::SixState] {
        for q in [0.02, 0.07] {
            let res = certified_keyrate(family, 1.0 - 2.0 * q, &opts(8)).unwrap();
            assert!(
                (res.r - bb84_rate(q)).abs() <= 1e-3,
                "{family} Q = {q}: {}",
                res.r
            );
            assert!((res.q - q).abs() < 1e-12);
            assert!(res.feasible);
            let recomputed = 1.0 - binary_entropy(res.q) - res.holevo;
            assert!((res.r_raw - recomputed).abs() <= 1e-10);
            let chi = holevo(&res.model.state.density(), &res.model.povms_a[0]).unwrap();
            assert!((chi - res.holevo).abs() <= 1e-10);
        }
    }
}

#[test]
fn explicit_sixstate_attack_is_optimal_for_bb84_rate() {
    for w in [0.7, 0.9] {
        let model = sixstate_attack(w).unwrap();
        let p = generate(&FamilySpec::six_state(w)).unwrap();
        assert!(model.residual(&p).unwrap() <= 1e-12);
        let q = (1.0 - w) / 2.0;
        assert!((key_fraction(&model, q).unwrap() - bb84_rate(q)).abs() <= 1e-9);
    }
}

#[test]
fn perfect_detectors_reduce_noisy_rate_to_bb84() {
    let res = noisy_bb84_keyrate(0.9, 1.0, &opts(2)).unwrap();
    assert!((res.r - bb84_rate(0.05)).abs() <= 1e-3, "{}", res.r);
    assert_eq!(res.caveat, Some(NO_CLICK_CAVEAT));
    let params = res.noisy_params.expect("attack parameters are reported");
    let (pa, pb) = params.povms().unwrap();
    assert_eq!((pa.len(), pb.len()), (2, 2));
}

#[test]
fn noisy_rate_is_deterministic() {
    let a = noisy_bb84_keyrate(1.0, 0.95, &opts(2).with_threads(1)).unwrap();
    let b = noisy_bb84_keyrate(1.0, 0.95, &opts(2).with_threads(0)).unwrap();
    assert_eq!(a.r_raw.to_bits(), b.r_raw.to_bits());
    assert!(a.r > 1e-3);
    let expected_q = 0.95 * (1.0 - 0.95);
    assert!((a.q - expected_q).abs() < 1e-12);
}

#[test]
fn honest_noisy_parameters_reproduce_the_protocol() {
    let (w, eps) = (0.9, 0.8);
    let p = generate(&FamilySpec::noisy_bb84_binarized(w, eps, eps)).unwrap();
    let params = NoisyBb84Params::honest(w, eps);
    let state = params.state(&p).unwrap();
    let (pa, pb) = params.povms().unwrap();
    let model = dimcert::certify::Model {
        state,
        povms_a: pa,
        povms_b: pb,
    };
    assert!(model.residual(&p).unwrap() <= 1e-12);
}

#[test]
fn invalid_efficiencies_are_rejected() {
    assert!(noisy_bb84_keyrate(1.0, 0.0, &opts(1)).is_err());
    assert!(noisy_bb84_keyrate(1.0, 1.2, &opts(1)).is_err());
}
