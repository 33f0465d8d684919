mod common;

use common::{choi_of, random_bell, random_channel, random_unital, rng};
use proptest::prelude::*;
use qkd_ratelab::channel::{choi_to_stokes, SliceKind};
use qkd_ratelab::oneway::{
    eve_ambiguity, rate, reconciliation_cost, strict_improvement_check, unital_bb84_bound, ChannelInput, Direction,
    Estimation, Improvement, Preprocessing, RateQuery,
};
use qkd_ratelab::quantum::{h, von_neumann_entropy};
use qkd_ratelab::{make_channel, Basis, ChannelSpec, ChoiOperator, Omega, ParameterSlice, Protocol, StokesParams};
use rand::Rng;

fn choi(spec: ChannelSpec) -> ChoiOperator {
    choi_of(&make_channel(&spec).unwrap())
}

fn raw(q: RateQuery) -> f64 {
    rate(&q).unwrap().raw
}

#[test]
fn eve_ambiguity_examples() {
    assert!((eve_ambiguity(&ChoiOperator::identity(), Direction::Direct, Basis::Z) - 1.0).abs() < 1e-12);
    let flat = choi(ChannelSpec::Depolarizing { e: 0.5 });
    assert!(eve_ambiguity(&flat, Direction::Direct, Basis::Z).abs() < 1e-12);
    let p = 0.2;
    let ad = eve_ambiguity(&choi(ChannelSpec::AmplitudeDamping { p }), Direction::Direct, Basis::Z);
    assert!((ad - (1.0 + 0.5 * h(p) - h(p / 2.0))).abs() < 1e-9);
    assert!((ad - 0.891968).abs() < 1e-6);
}

#[test]
fn amplitude_damping_rates() {
    let rho = choi(ChannelSpec::AmplitudeDamping { p: 0.2 });
    let r = rate(&RateQuery::choi(&rho, Protocol::SixState).direction(Direction::Reverse)).unwrap();
    assert!((r.rate - 0.531004).abs() < 1e-6);
    let half = choi(ChannelSpec::AmplitudeDamping { p: 0.5 });
    let r = rate(&RateQuery::choi(&half, Protocol::SixState)).unwrap();
    assert!(r.raw.abs() < 1e-12 && r.rate < 1e-12);
    let bb84 = rate(&RateQuery::choi(&rho, Protocol::Bb84).direction(Direction::Reverse)).unwrap();
    assert!((bb84.rate - 0.531004).abs() < 1e-6);
}

#[test]
fn conventional_examples() {
    let dep = choi(ChannelSpec::Depolarizing { e: 0.1 });
    let six = raw(RateQuery::choi(&dep, Protocol::SixState).estimation(Estimation::Conventional));
    assert!((six - 0.152416).abs() < 1e-6);
    let s = StokesParams::diagonal([0.9, 0.9, 0.8]);
    let bb = raw(RateQuery::new(ChannelInput::Slice(ParameterSlice::Upsilon([0.9, 0.9])), Protocol::Bb84)
        .estimation(Estimation::Conventional));
    assert!((bb - 0.427206).abs() < 1e-6);
    assert!(
        (raw(RateQuery::choi(&choi_of(&s), Protocol::Bb84).estimation(Estimation::Conventional)) - bb).abs() < 1e-12
    );
    for theta in [0.2, 0.5, 1.0] {
        let rot = choi(ChannelSpec::Rotation { theta });
        let conv = raw(RateQuery::choi(&rot, Protocol::Bb84).estimation(Estimation::Conventional));
        assert!((conv - (1.0 - 2.0 * h((theta / 2.0f64).sin().powi(2)))).abs() < 1e-9);
    }
}

#[test]
fn strict_improvement_examples() {
    let check = |spec: ChannelSpec| {
        let s = make_channel(&spec).unwrap();
        strict_improvement_check(&ParameterSlice::of(SliceKind::Bb84Omega, &s)).unwrap().class
    };
    assert_eq!(check(ChannelSpec::Depolarizing { e: 0.1 }), Improvement::Equal);
    let pauli = qkd_ratelab::BellDistribution::new(0.8, 0.1, 0.06, 0.04).unwrap();
    assert_eq!(check(ChannelSpec::Pauli(pauli)), Improvement::Equal);
    assert_eq!(
        check(ChannelSpec::RotatedDepolarizing { e: 0.05, angle: std::f64::consts::FRAC_PI_4 }),
        Improvement::Strict
    );
    assert_eq!(check(ChannelSpec::AmplitudeDamping { p: 0.3 }), Improvement::Strict);
}

#[test]
fn noisy_preprocessing_helps() {
    let rho = choi(ChannelSpec::Depolarizing { e: 0.12 });
    let q = RateQuery::choi(&rho, Protocol::SixState).estimation(Estimation::Conventional);
    let plain = rate(&q.clone()).unwrap();
    let best = rate(&q.clone().preprocessing(Preprocessing::Optimize)).unwrap();
    assert!(best.raw >= plain.raw - 1e-12);
    assert!(best.optimal_q.is_some());
    assert!(rate(&q.preprocessing(Preprocessing::Fixed(0.7))).is_err());
}

#[test]
fn y_basis_needs_six_state() {
    let q = RateQuery::choi(&ChoiOperator::identity(), Protocol::Bb84).key_basis(Basis::Y);
    assert!(rate(&q).is_err());
}

fn omega_of(rho: &ChoiOperator) -> Omega {
    Omega::from_stokes(&choi_to_stokes(rho))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn proposed_dominates_conventional(seed in any::<u64>()) {
        let rho = random_channel(&mut rng(seed));
        for protocol in [Protocol::Bb84, Protocol::SixState] {
            for d in [Direction::Direct, Direction::Reverse] {
                let q = RateQuery::choi(&rho, protocol).direction(d);
                prop_assert!(raw(q.clone()) >= raw(q.estimation(Estimation::Conventional)) - 1e-8);
            }
        }
    }

    #[test]
    fn conventional_direct_equals_reverse(seed in any::<u64>()) {
        let rho = random_channel(&mut rng(seed));
        for protocol in [Protocol::Bb84, Protocol::SixState] {
            let q = RateQuery::choi(&rho, protocol).estimation(Estimation::Conventional);
            prop_assert!((raw(q.clone()) - raw(q.direction(Direction::Reverse))).abs() < 1e-9);
        }
    }

    #[test]
    fn rates_bounded(seed in any::<u64>()) {
        let rho = random_channel(&mut rng(seed));
        for b in Basis::ALL {
            for d in [Direction::Direct, Direction::Reverse] {
                let r = rate(&RateQuery::choi(&rho, Protocol::SixState).direction(d).key_basis(b)).unwrap();
                prop_assert!(r.rate <= 1.0 + 1e-12 && r.rate >= 0.0);
                prop_assert!((r.reconciliation_cost - reconciliation_cost(&rho, d, b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unital_six_state_ambiguity(seed in any::<u64>()) {
        let rho = random_unital(&mut rng(seed));
        let s = choi_to_stokes(&rho);
        let vn = von_neumann_entropy(rho.operator()).unwrap();
        let col = (s.r[0][0].powi(2) + s.r[1][0].powi(2) + s.r[2][0].powi(2)).sqrt();
        let row = (s.r[0][0].powi(2) + s.r[0][1].powi(2) + s.r[0][2].powi(2)).sqrt();
        let direct = 1.0 - vn + h((1.0 + col) / 2.0);
        let reverse = 1.0 - vn + h((1.0 + row) / 2.0);
        prop_assert!((eve_ambiguity(&rho, Direction::Direct, Basis::Z) - direct).abs() < 1e-9);
        prop_assert!((eve_ambiguity(&rho, Direction::Reverse, Basis::Z) - reverse).abs() < 1e-9);
    }

    #[test]
    fn bb84_unital_closed_form(seed in any::<u64>()) {
        let rho = random_unital(&mut rng(seed));
        let omega = omega_of(&rho);
        for d in [Direction::Direct, Direction::Reverse] {
            let r = rate(&RateQuery::new(ChannelInput::Slice(ParameterSlice::Omega(omega)), Protocol::Bb84).direction(d)).unwrap();
            let bound = unital_bb84_bound(&omega, d, Basis::Z).unwrap();
            prop_assert!((r.eve_ambiguity - bound).abs() < 1e-6, "{} vs {}", r.eve_ambiguity, bound);
            prop_assert!(r.unital_gap.unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn bb84_reduced_family_is_worst(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_channel(&mut r);
        let omega = omega_of(&rho);
        let reduced = rate(&RateQuery::new(ChannelInput::Slice(ParameterSlice::Omega(omega)), Protocol::Bb84)).unwrap();
        // Hit-and-run over the free coordinates, started at the true channel.
        let free = [(0, 2), (1, 2), (2, 0), (2, 1), (2, 2)];
        let mut cur = choi_to_stokes(&rho);
        for _ in 0..150 {
            let dir: Vec<f64> = (0..6).map(|_| common::normal(&mut r)).collect();
            let at = |t: f64| {
                let mut s = cur;
                for (k, &(b, a)) in free.iter().enumerate() {
                    s.r[b][a] += t * dir[k];
                }
                s.t[2] += t * dir[5];
                s
            };
            let reach = |sign: f64| {
                let (mut lo, mut hi) = (0.0, 4.0);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if at(sign * mid).min_choi_eigenvalue() >= 0.0 { lo = mid } else { hi = mid }
                }
                sign * lo
            };
            let (lo, hi) = (reach(-1.0), reach(1.0));
            cur = at(lo + (hi - lo) * r.random::<f64>());
            let amb = eve_ambiguity(&choi_of(&cur), Direction::Direct, Basis::Z);
            prop_assert!(amb >= reduced.eve_ambiguity - 1e-6, "{} < {}", amb, reduced.eve_ambiguity);
        }
    }

    #[test]
    fn pauli_six_state_symmetric(seed in any::<u64>()) {
        let p = random_bell(&mut rng(seed));
        let rho = choi_of(&p.to_stokes());
        let q = RateQuery::choi(&rho, Protocol::SixState);
        prop_assert!((raw(q.clone()) - raw(q.direction(Direction::Reverse))).abs() < 1e-9);
    }
}
