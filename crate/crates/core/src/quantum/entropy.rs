use super::operator::{hermitian_eigen, hermitian_eigenvalues, CMatrix, DenseOperator, PSD_TOL, RANK_CUTOFF};
use crate::error::{domain, Error, Result};

/// `-x log2 x` with the `0 log 0 = 0` convention; negative inputs count as 0.
#[inline]
pub(crate) fn eta(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Binary entropy, rejecting arguments outside [0, 1].
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("binary entropy argument {p} outside [0,1]"));
    }
    Ok(h(p))
}

/// Binary entropy with the argument clamped into [0, 1].
#[inline]
pub fn h(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    eta(p) + eta(1.0 - p)
}

/// Shannon entropy of an unchecked weight vector (no renormalization).
pub fn shannon(p: &[f64]) -> f64 {
    p.iter().map(|&x| eta(x)).sum()
}

/// A probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return domain("distribution has a negative or non-finite entry");
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > PSD_TOL {
            return domain(format!("distribution sums to {s}"));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

pub fn shannon_entropy(d: &Distribution) -> f64 {
    shannon(d.probs())
}

/// Von Neumann entropy of a density operator.
pub fn von_neumann_entropy(rho: &DenseOperator) -> Result<f64> {
    rho.validate_density()?;
    Ok(unnormalized_entropy(rho.matrix()))
}

/// `-Σ λ log λ` over the eigenvalues of a PSD matrix of any trace.
pub fn unnormalized_entropy(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).into_iter().map(eta).sum()
}

/// Result of a min-entropy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinEntropy {
    Finite(f64),
    /// `rho_AB` is not supported on the support of `id ⊗ sigma_B`.
    Undefined,
}

impl MinEntropy {
    pub fn value(self) -> Option<f64> {
        match self {
            MinEntropy::Finite(v) => Some(v),
            MinEntropy::Undefined => None,
        }
    }
}

/// `H_min(rho_AB | sigma_B)`: `-log2` of the smallest `λ` with `λ id⊗σ − ρ ≥ 0`.
pub fn min_entropy(rho_ab: &DenseOperator, sigma_b: &DenseOperator, dim_a: usize) -> Result<MinEntropy> {
    let db = sigma_b.dim();
    if dim_a * db != rho_ab.dim() {
        return Err(Error::Dimension(format!("{dim_a} x {db} does not match operator dim {}", rho_ab.dim())));
    }
    let s = DenseOperator::identity(dim_a).kron(sigma_b);
    let spec = hermitian_eigen(s.matrix());
    let n = s.dim();
    let support: Vec<usize> = (0..n).filter(|&i| spec.values[i] > RANK_CUTOFF).collect();
    // Component of rho outside supp(S) must vanish.
    let mut proj_out = CMatrix::identity(n, n);
    for &i in &support {
        let v = spec.vectors.column(i);
        proj_out -= v * v.adjoint();
    }
    let leak = (&proj_out * rho_ab.matrix() * &proj_out).trace().re;
    if leak > PSD_TOL {
        return Ok(MinEntropy::Undefined);
    }
    // S^{-1/2} rho S^{-1/2} on the support.
    let k = support.len();
    let mut w = CMatrix::zeros(n, k);
    for (c, &i) in support.iter().enumerate() {
        let f = 1.0 / spec.values[i].sqrt();
        w.set_column(c, &spec.vectors.column(i).scale(f));
    }
    let reduced = w.adjoint() * rho_ab.matrix() * &w;
    let lam = hermitian_eigenvalues(&reduced).last().copied().unwrap_or(0.0);
    if lam <= 0.0 {
        return Ok(MinEntropy::Undefined);
    }
    Ok(MinEntropy::Finite(-lam.log2()))
}

/// `log2 rank(rho)`.
pub fn max_entropy_rank(rho: &DenseOperator) -> f64 {
    let r = rho.eigenvalues().into_iter().filter(|&v| v > RANK_CUTOFF).count();
    (r.max(1) as f64).log2()
}

/// Lower bound on the smooth min-entropy rate of an i.i.d. classical-quantum state.
pub fn smooth_min_entropy_product_bound(hxb: f64, hb: f64, hmax_x: f64, n: u64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("smoothing parameter {eps} outside (0,1)"));
    }
    if n == 0 {
        return domain("block length must be positive");
    }
    let delta = (2.0 * hmax_x + 3.0) * ((2.0 / eps).log2() / n as f64).sqrt();
    Ok(hxb - hb - delta)
}

/// Trace norm `Tr|ρ − σ|`.
pub fn trace_distance(rho: &DenseOperator, sigma: &DenseOperator) -> Result<f64> {
    let d = rho.sub(sigma)?;
    Ok(hermitian_eigenvalues(d.matrix()).iter().map(|v| v.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::operator::CVector;
    use num_complex::Complex64;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert!((binary_entropy(0.25).unwrap() - 0.811278).abs() < 1e-6);
        assert!(binary_entropy(1.2).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn shannon_values() {
        let d = |v: Vec<f64>| shannon_entropy(&Distribution::new(v).unwrap());
        assert_eq!(d(vec![1.0, 0.0, 0.0, 0.0]), 0.0);
        assert!((d(vec![0.25; 4]) - 2.0).abs() < 1e-15);
        assert!((d(vec![0.85, 0.05, 0.05, 0.05]) - 0.847584).abs() < 1e-6);
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn von_neumann_values() {
        assert!((von_neumann_entropy(&DenseOperator::maximally_mixed(2)).unwrap() - 1.0).abs() < 1e-14);
        let v = CVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        assert!(von_neumann_entropy(&DenseOperator::projector(&v)).unwrap().abs() < 1e-12);
        // Bloch vector of length 0.6 along x.
        let rho = DenseOperator::from_rows(
            2,
            &[Complex64::new(0.5, 0.0), Complex64::new(0.3, 0.0), Complex64::new(0.3, 0.0), Complex64::new(0.5, 0.0)],
        )
        .unwrap();
        assert!((von_neumann_entropy(&rho).unwrap() - 0.721928).abs() < 1e-6);
        assert!(von_neumann_entropy(&DenseOperator::diagonal(&[1.5, -0.5])).is_err());
    }

    #[test]
    fn min_entropy_values() {
        let one = DenseOperator::identity(1);
        let m = min_entropy(&DenseOperator::maximally_mixed(2), &one, 2).unwrap();
        assert!((m.value().unwrap() - 1.0).abs() < 1e-12);
        let m = min_entropy(&DenseOperator::diagonal(&[1.0, 0.0]), &one, 2).unwrap();
        assert!(m.value().unwrap().abs() < 1e-12);
        // Uniform classical XB on four outcomes.
        let rho = DenseOperator::maximally_mixed(4);
        let sigma = DenseOperator::maximally_mixed(2);
        let m = min_entropy(&rho, &sigma, 2).unwrap();
        assert!((m.value().unwrap() - 1.0).abs() < 1e-12);
        // Support condition fails.
        let m = min_entropy(&DenseOperator::maximally_mixed(4), &DenseOperator::diagonal(&[1.0, 0.0]), 2).unwrap();
        assert_eq!(m, MinEntropy::Undefined);
    }

    #[test]
    fn min_entropy_grid_search_oracle() {
        // Classical XB: P(x,b) uniform, sigma = marginal. Scan λ on a 1e-4 grid.
        let rho = DenseOperator::maximally_mixed(4);
        let sigma = DenseOperator::maximally_mixed(2);
        let s = DenseOperator::identity(2).kron(&sigma);
        let mut lam = 0.0;
        while lam <= 2.0 {
            let d = s.scaled(lam).sub(&rho).unwrap();
            if d.eigh().min() >= -1e-12 {
                break;
            }
            lam += 1e-4;
        }
        let m = min_entropy(&rho, &sigma, 2).unwrap().value().unwrap();
        assert!((-lam.log2() - m).abs() < 1e-3);
    }

    #[test]
    fn max_entropy_values() {
        assert_eq!(max_entropy_rank(&DenseOperator::diagonal(&[1.0, 0.0])), 0.0);
        assert_eq!(max_entropy_rank(&DenseOperator::maximally_mixed(2)), 1.0);
        let r = max_entropy_rank(&DenseOperator::diagonal(&[0.5, 0.25, 0.25, 0.0]));
        assert!((r - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn product_bound() {
        let b = smooth_min_entropy_product_bound(1.5, 0.5, 1.0, 1_000_000, 1e-9).unwrap();
        let delta = 5.0 * ((2e9f64).log2() / 1e6).sqrt();
        assert!((b - (1.0 - delta)).abs() < 1e-12);
        let big = smooth_min_entropy_product_bound(1.5, 0.5, 1.0, u64::MAX, 1e-9).unwrap();
        assert!((big - 1.0).abs() < 1e-6);
        let small = smooth_min_entropy_product_bound(1.5, 0.5, 1.0, 1000, 1e-9).unwrap();
        assert!(small < b);
        assert!(smooth_min_entropy_product_bound(1.0, 0.0, 1.0, 10, 1.5).is_err());
    }

    #[test]
    fn trace_distance_values() {
        let a = DenseOperator::diagonal(&[0.6, 0.4]);
        let b = DenseOperator::maximally_mixed(2);
        assert!((trace_distance(&a, &b).unwrap() - 0.2).abs() < 1e-14);
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        let p = DenseOperator::diagonal(&[1.0, 0.0]);
        let q = DenseOperator::diagonal(&[0.0, 1.0]);
        assert!((trace_distance(&p, &q).unwrap() - 2.0).abs() < 1e-14);
        assert!(trace_distance(&p, &DenseOperator::identity(3)).is_err());
    }
}
