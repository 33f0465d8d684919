mod common;

use common::{choi_of, random_bell, random_channel, rng};
use proptest::prelude::*;
use qkd_ratelab::oneway::{ChannelInput, Direction};
use qkd_ratelab::twoway::{
    advantage_distillation_rate, branch_values, comparison_rates, coset_mixture, coset_mixture_eigendecomposition,
    coset_spectrum_residual, derive_two_way_state, optimize_block_functions, pauli_closed_form, rate_twoway,
    BlockFunctions,
};
use qkd_ratelab::{make_channel, ChannelSpec, ChoiOperator, Protocol};
use rand::Rng;

fn choi(spec: ChannelSpec) -> ChoiOperator {
    choi_of(&make_channel(&spec).unwrap())
}

fn ad() -> BlockFunctions {
    BlockFunctions::advantage_distillation()
}

#[test]
fn identity_rates() {
    let input = ChannelInput::Choi(ChoiOperator::identity());
    for protocol in [Protocol::SixState, Protocol::Bb84] {
        let r = rate_twoway(&input, protocol, Direction::Direct, ad()).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-9);
    }
    let c = comparison_rates(&input, Protocol::SixState).unwrap();
    assert!((c.vollbrecht.unwrap() - 1.0).abs() < 1e-12 && (c.gohari - 1.0).abs() < 1e-12);
}

#[test]
fn depolarizing_matches_closed_form() {
    let p = qkd_ratelab::BellDistribution::depolarizing(0.1).unwrap();
    let r =
        rate_twoway(&ChannelInput::Choi(choi_of(&p.to_stokes())), Protocol::SixState, Direction::Direct, ad()).unwrap();
    assert!((r.raw - pauli_closed_form(&p).unwrap()).abs() < 1e-9);
}

#[test]
fn block_search_bell_diagonal() {
    let input = ChannelInput::Choi(choi(ChannelSpec::Depolarizing { e: 0.1 }));
    let s = optimize_block_functions(&input, Protocol::SixState, Direction::Direct).unwrap();
    assert!(s.ties.contains(&ad()), "best {} ties {:?}", s.best, s.ties);
    assert_eq!(s.table.len(), 256);
    let ad_rate = s.table.iter().find(|(f, _)| *f == ad()).unwrap().1;
    assert!((ad_rate - s.result.raw).abs() < 1e-12);
}

#[test]
fn block_search_amplitude_damping() {
    let input = ChannelInput::Choi(choi(ChannelSpec::AmplitudeDamping { p: 0.2 }));
    for d in [Direction::Direct, Direction::Reverse] {
        let s = optimize_block_functions(&input, Protocol::SixState, d).unwrap();
        assert!(s.ties.contains(&BlockFunctions::bob_keeps()), "{d}: best {} ties {:?}", s.best, s.ties);
    }
}

#[test]
fn block_search_identity() {
    let s =
        optimize_block_functions(&ChannelInput::Choi(ChoiOperator::identity()), Protocol::SixState, Direction::Direct)
            .unwrap();
    assert!((s.result.raw - 1.0).abs() < 1e-9);
    let keep_both = BlockFunctions::new([0; 4], [0; 4]).unwrap();
    assert!(s.ties.contains(&keep_both) && s.ties.contains(&ad()));
}

#[test]
fn coset_trivial_code_is_pure() {
    let p = qkd_ratelab::BellDistribution::new(0.7, 0.1, 0.15, 0.05).unwrap();
    let spec = coset_mixture_eigendecomposition(&[], 3, 0b101, 0b010, &p).unwrap();
    assert_eq!(spec.values.len(), 1);
    assert!((spec.values[0] - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bell_direct_equals_reverse(seed in any::<u64>()) {
        let p = random_bell(&mut rng(seed));
        let input = ChannelInput::Choi(choi_of(&p.to_stokes()));
        let d = rate_twoway(&input, Protocol::SixState, Direction::Direct, ad()).unwrap().raw;
        let r = rate_twoway(&input, Protocol::SixState, Direction::Reverse, ad()).unwrap().raw;
        prop_assert!((d - r).abs() < 1e-9);
    }

    #[test]
    fn rewriting_identity(seed in any::<u64>(), table in 0usize..256) {
        let rho = random_channel(&mut rng(seed));
        let f = BlockFunctions::all()[table];
        let s = derive_two_way_state(&rho, f);
        prop_assert!((s.ccq().total_weight() - 1.0).abs() < 1e-10);
        let b = branch_values(&s, Direction::Direct);
        let first = (s.h(&["U1"], &["W1"], true) - s.h(&["U1"], &["Y1", "Y2"], false)).max(0.0);
        let rest = s.h(&["U2", "V2"], &["U1", "W1"], true)
            - s.h(&["U2"], &["W1", "Y1", "Y2"], false)
            - s.h(&["V2"], &["W1", "X1", "X2"], false);
        prop_assert!((0.5 * b[0].max(b[1]) - 0.5 * (first + rest)).abs() < 1e-9);
    }

    #[test]
    fn two_way_dominates_advantage_distillation(seed in any::<u64>()) {
        let rho = random_channel(&mut rng(seed));
        let r = rate_twoway(&ChannelInput::Choi(rho.clone()), Protocol::SixState, Direction::Direct, ad()).unwrap();
        prop_assert!(r.raw >= advantage_distillation_rate(&rho) - 1e-9);
    }

    #[test]
    fn coset_spectrum_matches_dense(seed in any::<u64>(), m in 1usize..=4) {
        let mut r = rng(seed);
        let p = random_bell(&mut r);
        let gens: Vec<u32> = (0..r.random_range(0..=m)).map(|_| r.random_range(1..1u32 << m)).collect();
        let a = r.random_range(0..1u32 << m);
        let k = r.random_range(0..1u32 << m);
        let spec = coset_mixture_eigendecomposition(&gens, m, a, k, &p).unwrap();
        let mix = coset_mixture(&gens, m, a, k, &p).unwrap();
        prop_assert!(coset_spectrum_residual(&spec, &mix) < 1e-9);
        prop_assert!((spec.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
