mod common;

use common::{choi_of, random_density, rng};
use proptest::prelude::*;
use qkd_ratelab::postprocessing::{
    finite_key_length, min_entropy_decode, nu_one_way, one_way_ir, secrecy_audit, syndrome, toeplitz_apply,
    toeplitz_collision_max, two_way_ir, universal_ir_error, z_basis_pairs, AuditState, FiniteKeyParams, KeyMode,
    LinearCode, ToeplitzHash, TwoWayCodes, TWO_WAY_PUBLIC_REGISTERS,
};
use qkd_ratelab::quantum::{shannon, CMatrix};
use qkd_ratelab::twoway::BlockFunctions;
use qkd_ratelab::{make_channel, ChannelSpec, Error};
use rand::Rng;

fn bits(s: &str) -> Vec<u8> {
    s.bytes().map(|c| c - b'0').collect()
}

fn bsc(q: f64) -> [f64; 4] {
    [(1.0 - q) / 2.0, q / 2.0, q / 2.0, (1.0 - q) / 2.0]
}

#[test]
fn decoder_prefers_low_type_entropy() {
    // Kernel {000, 011}.
    let code: LinearCode = "3 2\n100\n011\n".parse().unwrap();
    let t = syndrome(&code, &bits("000")).unwrap();
    assert_eq!(min_entropy_decode(&code, &t, &[0, 0, 1]).unwrap(), bits("000"));
    let t = syndrome(&code, &bits("001")).unwrap();
    assert_eq!(min_entropy_decode(&code, &t, &[0, 0, 1]).unwrap(), bits("001"));
}

#[test]
fn decoder_budget() {
    let code = LinearCode::random(30, 2, &mut rng(0)).unwrap();
    let t = syndrome(&code, &[0; 30]).unwrap();
    assert!(matches!(min_entropy_decode(&code, &t, &[0; 30]), Err(Error::BudgetExceeded(_))));
}

#[test]
fn invertible_code_is_exact() {
    let mut r = rng(1);
    for _ in 0..50 {
        let code = LinearCode::random(12, 12, &mut r).unwrap();
        let x: Vec<u8> = (0..12).map(|_| r.random_range(0..2)).collect();
        let y: Vec<u8> = (0..12).map(|_| r.random_range(0..2)).collect();
        assert_eq!(one_way_ir(&x, &y, &code).unwrap().x_hat, x);
    }
}

#[test]
fn universal_error_decreases_with_syndrome_length() {
    let grid: Vec<[f64; 4]> = [0.03, 0.04, 0.05, 0.06, 0.07].map(bsc).to_vec();
    let n = 16;
    let errs: Vec<f64> = [10, 12, 14].iter().map(|&k| universal_ir_error(&grid, n, k, 400, 5).unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
    assert!(errs[2] < 0.05, "{errs:?}");
}

#[test]
fn noiseless_two_way() {
    let mut r = rng(2);
    let n = 6;
    let codes = TwoWayCodes {
        m1: LinearCode::random(n, n, &mut r).unwrap(),
        ma2: LinearCode::random(n, n, &mut r).unwrap(),
        mb2: LinearCode::random(n, 1, &mut r).unwrap(),
    };
    let x: Vec<u8> = (0..2 * n).map(|_| r.random_range(0..2)).collect();
    let out = two_way_ir(&x, &x, &codes, BlockFunctions::advantage_distillation()).unwrap();
    assert!(out.success);
    assert!(out.transcript.w1_hat.iter().all(|b| *b == 0));
    assert_eq!(TWO_WAY_PUBLIC_REGISTERS, ["W1", "T1", "TA2", "TB2", "F"]);
}

#[test]
fn toeplitz_is_universal() {
    for n in 1..=6 {
        for l in 1..=n {
            let c = toeplitz_collision_max(n, l).unwrap();
            assert!(c <= 2f64.powi(-(l as i32)) + 1e-12, "n={n} l={l}: {c}");
        }
    }
}

#[test]
fn zero_seed_hashes_to_zero() {
    let hsh = ToeplitzHash::new(5, 3, vec![0; ToeplitzHash::seed_bits(5, 3)]).unwrap();
    assert_eq!(toeplitz_apply(&hsh, &bits("10111")).unwrap(), vec![0; 3]);
}

#[test]
fn skewed_pairs_need_shorter_syndromes() {
    for i in 1..10 {
        let p = i as f64 / 10.0;
        let pxy = z_basis_pairs(&choi_of(&make_channel(&ChannelSpec::AmplitudeDamping { p }).unwrap()));
        let h_xy = shannon(&pxy);
        let h_y = shannon(&[pxy[0] + pxy[2], pxy[1] + pxy[3]]);
        let h_w = shannon(&[pxy[0] + pxy[3], pxy[1] + pxy[2]]);
        assert!(h_xy - h_y < h_w, "p={p}");
    }
}

#[test]
fn finite_key_example() {
    let params = FiniteKeyParams { n: 1_000_000, m: 1_000_000, eps: 1e-9, delta: 1e-9, alpha: 0.01, eta: 0.01 };
    let r = finite_key_length(&params, &KeyMode::OneWay { h: 0.9, k: 300_000 }).unwrap();
    let n = 1e6;
    let nu = 5.0 * ((3e9f64).log2() / n).sqrt() + 2.0 * (1.5e9f64).log2() / n;
    let expect = (n * (0.9 - 0.01 - 0.3 - nu)).floor();
    assert!((r.nu - nu).abs() < 1e-15);
    assert_eq!(r.length, expect as u64);
    assert!(!r.aborted);
    let abort = finite_key_length(&params, &KeyMode::OneWay { h: 0.3, k: 300_000 }).unwrap();
    assert!(abort.aborted && abort.length == 0);
}

#[test]
fn finite_key_limit() {
    let (h, kn) = (0.8, 0.25);
    let mut last = f64::INFINITY;
    for n in [1e4, 1e6, 1e8, 1e10] {
        let params = FiniteKeyParams { n: n as u64, m: n as u64, eps: 1e-6, delta: 1e-6, alpha: 0.01, eta: 0.0 };
        let r = finite_key_length(&params, &KeyMode::OneWay { h, k: (kn * n) as u64 }).unwrap();
        let gap = (h - kn) - r.length as f64 / n;
        assert!(gap > 0.0 && gap < last);
        last = gap;
    }
    assert!(last < 1e-3);
    assert!(nu_one_way(1 << 40, 1e-6) < nu_one_way(1 << 20, 1e-6));
}

#[test]
fn audit_examples() {
    let n = 4;
    let uniform = AuditState::Classical { n, e_size: 1, p: vec![1.0 / 16.0; 16] };
    let full = secrecy_audit(&uniform, n).unwrap();
    assert!((full.bound - 1.0).abs() < 1e-12 && full.holds());
    let empty = secrecy_audit(&uniform, 0).unwrap();
    assert_eq!(empty.distance, 0.0);
    // X uniform on four values determined by two hidden bits Eve does not see.
    let mut p = vec![0.0; 16];
    for x in [0b0000, 0b0101, 0b1010, 0b1111] {
        p[x] = 0.25;
    }
    let s = AuditState::Classical { n, e_size: 1, p };
    let r = secrecy_audit(&s, 1).unwrap();
    assert!((r.min_entropy - 2.0).abs() < 1e-12);
    assert!(r.distance <= 2f64.powf(-0.5) && r.holds());
}

#[test]
fn quantum_audit_certifies_min_entropy() {
    let mut r = rng(3);
    let ops: Vec<CMatrix> = (0..8).map(|_| random_density(&mut r, 2).scale(1.0 / 8.0)).collect();
    let s = AuditState::Quantum { n: 3, ops };
    let rep = secrecy_audit(&s, 2).unwrap();
    assert!(rep.exhaustive && rep.holds());
    assert!(rep.min_entropy <= 3.0 + 1e-12 && rep.min_entropy > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn syndrome_is_linear(seed in any::<u64>(), n in 1usize..=24, kf in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let code = LinearCode::random(n, (kf * n as f64) as usize, &mut r).unwrap();
        let x: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let y: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let xy: Vec<u8> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        let (sx, sy, sxy) = (syndrome(&code, &x).unwrap(), syndrome(&code, &y).unwrap(), syndrome(&code, &xy).unwrap());
        let sum: Vec<u8> = sx.bits.iter().zip(&sy.bits).map(|(a, b)| a ^ b).collect();
        prop_assert_eq!(sxy.bits, sum);
        let back: LinearCode = code.to_string().parse().unwrap();
        prop_assert_eq!(back, code);
    }

    #[test]
    fn toeplitz_is_linear(seed in any::<u64>(), n in 1usize..=16, lf in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let l = 1 + (lf * (n - 1) as f64) as usize;
        let hsh = ToeplitzHash::new(n, l, (0..ToeplitzHash::seed_bits(n, l)).map(|_| r.random_range(0..2)).collect()).unwrap();
        let x: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let y: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let xy: Vec<u8> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        let sum: Vec<u8> = toeplitz_apply(&hsh, &x).unwrap().iter().zip(toeplitz_apply(&hsh, &y).unwrap()).map(|(a, b)| a ^ b).collect();
        prop_assert_eq!(toeplitz_apply(&hsh, &xy).unwrap(), sum);
    }

    #[test]
    fn decoding_recovers_side_string_in_coset(seed in any::<u64>(), n in 2usize..=14) {
        // When y itself lies in the coset, no member has lower type entropy than y.
        let mut r = rng(seed);
        let code = LinearCode::random(n, n / 2, &mut r).unwrap();
        let x: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let t = syndrome(&code, &x).unwrap();
        let side: Vec<usize> = x.iter().map(|&b| b as usize).collect();
        let got = min_entropy_decode(&code, &t, &side).unwrap();
        let score = |v: &[u8]| {
            let mut c = [0.0f64; 4];
            v.iter().zip(&side).for_each(|(a, b)| c[2 * *a as usize + b] += 1.0 / n as f64);
            shannon(&c)
        };
        prop_assert!(score(&got) <= score(&x) + 1e-12);
    }
}
