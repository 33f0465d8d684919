#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qkd_ratelab::channel::choi_to_stokes;
use qkd_ratelab::quantum::DenseOperator;
use qkd_ratelab::{BellDistribution, ChoiOperator, StokesParams};
use rand::Rng;

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Choi operator of a channel with a Haar-like random Stinespring isometry
/// onto Bob and an environment of dimension `env`.
pub fn random_channel_env<R: Rng>(rng: &mut R, env: usize) -> ChoiOperator {
    let g = DMatrix::from_fn(2 * env, 2, |_, _| Complex64::new(normal(rng), normal(rng)));
    let v = g.qr().q();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::<Complex64>::zeros(4, 4);
    // Row `b * env + e` of the isometry is Bob's output `b` with environment `e`.
    for e in 0..env {
        let psi = nalgebra::DVector::from_fn(4, |i, _| v[((i & 1) * env + e, i >> 1)] * s);
        m += &psi * psi.adjoint();
    }
    ChoiOperator::new(DenseOperator::from_matrix(m).expect("hermitian")).expect("valid channel")
}

pub fn random_channel<R: Rng>(rng: &mut R) -> ChoiOperator {
    let env = rng.random_range(1..=4);
    random_channel_env(rng, env)
}

pub fn random_stokes<R: Rng>(rng: &mut R) -> StokesParams {
    choi_to_stokes(&random_channel(rng))
}

/// Dirichlet(1,1,1,1) Bell distribution.
pub fn random_bell<R: Rng>(rng: &mut R) -> BellDistribution {
    let w: Vec<f64> = (0..4).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    BellDistribution::new(w[0] / s, w[1] / s, w[2] / s, w[3] / s).expect("normalized")
}

/// Bell distribution concentrated near the identity, so that rates are positive.
pub fn random_low_noise_bell<R: Rng>(rng: &mut R) -> BellDistribution {
    let noise = 0.3 * rng.random::<f64>();
    let b = random_bell(rng).as_array();
    let q = [1.0 - noise + noise * b[0], noise * b[1], noise * b[2], noise * b[3]];
    BellDistribution::new(q[0], q[1], q[2], q[3]).expect("normalized")
}

pub fn choi_of(s: &StokesParams) -> ChoiOperator {
    qkd_ratelab::stokes_to_choi(s).expect("valid channel")
}

pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize) -> qkd_ratelab::quantum::CMatrix {
    let g = qkd_ratelab::quantum::CMatrix::from_fn(d, d, |_, _| Complex64::new(normal(rng), normal(rng)));
    (&g + g.adjoint()).scale(0.5)
}

/// Density matrix `G G† / Tr` with a Gaussian `d × rank` factor `G`.
pub fn random_density_rank<R: Rng>(rng: &mut R, d: usize, rank: usize) -> qkd_ratelab::quantum::CMatrix {
    let g = qkd_ratelab::quantum::CMatrix::from_fn(d, rank, |_, _| Complex64::new(normal(rng), normal(rng)));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale(tr)
}

pub fn random_density<R: Rng>(rng: &mut R, d: usize) -> qkd_ratelab::quantum::CMatrix {
    random_density_rank(rng, d, d)
}

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Random mixture of up to four random unitaries.
pub fn random_unital<R: Rng>(rng: &mut R) -> ChoiOperator {
    let terms = rng.random_range(1..=4);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let w: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = w.iter().sum();
    let mut m = DMatrix::<Complex64>::zeros(4, 4);
    for wi in w {
        let g = DMatrix::from_fn(2, 2, |_, _| Complex64::new(normal(rng), normal(rng)));
        let u = g.qr().q();
        let psi = nalgebra::DVector::from_fn(4, |i, _| u[(i & 1, i >> 1)] * s);
        m += (&psi * psi.adjoint()).scale(wi / total);
    }
    ChoiOperator::new(DenseOperator::from_matrix(m).expect("hermitian")).expect("valid channel")
}
