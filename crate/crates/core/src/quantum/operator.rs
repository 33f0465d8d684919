use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigenvalues below this count as zero when computing ranks and purifications.
pub const RANK_CUTOFF: f64 = 1e-12;
/// Most negative eigenvalue tolerated by density-operator validation.
pub const PSD_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-12;

/// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// A square complex matrix, usually Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    mat: CMatrix,
}

impl DenseOperator {
    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "operator must be square and non-empty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { mat })
    }

    /// Row-major construction.
    pub fn from_rows(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!("expected {} entries, got {}", dim * dim, entries.len())));
        }
        Self::from_matrix(CMatrix::from_row_slice(dim, dim, entries))
    }

    pub(crate) fn wrap(mat: CMatrix) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::wrap(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::wrap(CMatrix::identity(dim, dim))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::wrap(CMatrix::identity(dim, dim).unscale(dim as f64))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)));
        Self::wrap(CMatrix::from_diagonal(&d))
    }

    /// `|v><v|` without normalizing `v`.
    pub fn projector(v: &CVector) -> Self {
        Self::wrap(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn scaled(&self, f: f64) -> Self {
        Self::wrap(self.mat.scale(f))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self::wrap(&self.mat + &other.mat))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self::wrap(&self.mat - &other.mat))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::wrap(self.mat.kronecker(&other.mat))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (i..n).all(|j| (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm() <= tol))
    }

    /// Eigen-decomposition of the Hermitian part `(M + M†)/2`.
    pub fn eigh(&self) -> Spectrum {
        hermitian_eigen(&self.mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.mat).values
    }

    /// Checks Hermiticity, positivity and unit trace.
    pub fn validate_density(&self) -> Result<()> {
        if !self.is_hermitian(HERMITIAN_TOL.max(1e-12 * self.mat.norm())) {
            return Err(Error::Domain("operator is not Hermitian".into()));
        }
        let min = self.eigh().min();
        if min < -PSD_TOL {
            return Err(Error::Domain(format!("operator is not PSD (eigenvalue {min:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > PSD_TOL {
            return Err(Error::Domain(format!("trace {tr} differs from 1")));
        }
        Ok(())
    }
}

fn same_dim(a: &DenseOperator, b: &DenseOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

pub(crate) fn hermitian_eigen(m: &CMatrix) -> Spectrum {
    let n = m.nrows();
    if n == 1 {
        return Spectrum { values: vec![m[(0, 0)].re], vectors: CMatrix::identity(1, 1) };
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Spectrum { values, vectors }
}

/// Eigenvalues only, ascending.
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    if n == 1 {
        return vec![m[(0, 0)].re];
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let mut v: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Traces out every subsystem not listed in `keep`. Subsystems in `keep`
/// stay in their original order.
pub fn partial_trace(op: &DenseOperator, dims: &[usize], keep: &[usize]) -> Result<DenseOperator> {
    let total: usize = dims.iter().product();
    if total != op.dim() {
        return Err(Error::Dimension(format!("subsystem dims multiply to {total}, operator has dim {}", op.dim())));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::Dimension(format!("no subsystem {bad}")));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();
    let kdims: Vec<usize> = keep_sorted.iter().map(|&i| dims[i]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let kd: usize = kdims.iter().product();
    let td: usize = tdims.iter().product();

    let compose = |kidx: usize, tidx: usize| -> usize {
        let mut digits = vec![0usize; dims.len()];
        let mut r = kidx;
        for (pos, &s) in keep_sorted.iter().enumerate().rev() {
            digits[s] = r % kdims[pos];
            r /= kdims[pos];
        }
        let mut r = tidx;
        for (pos, &s) in traced.iter().enumerate().rev() {
            digits[s] = r % tdims[pos];
            r /= tdims[pos];
        }
        digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
    };

    let mut out = CMatrix::zeros(kd, kd);
    for i in 0..kd {
        for j in 0..kd {
            let mut s = Complex64::new(0.0, 0.0);
            for t in 0..td {
                s += op.mat[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = s;
        }
    }
    Ok(DenseOperator::wrap(out))
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let n2 = amplitudes.norm_squared();
        if (n2 - 1.0).abs() > PSD_TOL {
            return Err(Error::Domain(format!("state has squared norm {n2}")));
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn density(&self) -> DenseOperator {
        DenseOperator::projector(&self.amplitudes)
    }
}

/// Purification of `rho` on `rho.dim() * rank`, system first, environment second.
///
/// Returns the state together with the environment dimension.
pub fn purify(rho: &DenseOperator) -> (PureState, usize) {
    let spec = rho.eigh();
    let kept: Vec<usize> = (0..spec.values.len()).filter(|&i| spec.values[i] > RANK_CUTOFF).collect();
    let r = kept.len().max(1);
    let d = rho.dim();
    let mut amp = CVector::zeros(d * r);
    let norm: f64 = kept.iter().map(|&i| spec.values[i]).sum();
    for (e, &i) in kept.iter().enumerate() {
        let w = (spec.values[i] / norm).sqrt();
        for s in 0..d {
            amp[s * r + e] = spec.vectors[(s, i)] * w;
        }
    }
    (PureState { amplitudes: amp }, r)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn bell() -> DenseOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = CVector::from_vec(vec![c(s), c(0.0), c(0.0), c(s)]);
        DenseOperator::projector(&v)
    }

    #[test]
    fn trace_out_half_of_bell_pair() {
        let r = partial_trace(&bell(), &[2, 2], &[0]).unwrap();
        assert!((r.matrix() - DenseOperator::maximally_mixed(2).matrix()).norm() < 1e-14);
    }

    #[test]
    fn trace_out_product_factor() {
        let a = DenseOperator::diagonal(&[0.3, 0.7]);
        let b = DenseOperator::diagonal(&[0.1, 0.2, 0.7]);
        let ab = a.kron(&b);
        let ra = partial_trace(&ab, &[2, 3], &[0]).unwrap();
        let rb = partial_trace(&ab, &[2, 3], &[1]).unwrap();
        assert!((ra.matrix() - a.matrix()).norm() < 1e-14);
        assert!((rb.matrix() - b.matrix()).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        assert!(partial_trace(&bell(), &[2, 3], &[0]).is_err());
    }

    #[test]
    fn purify_pure_state_has_trivial_environment() {
        let (psi, r) = purify(&bell());
        assert_eq!(r, 1);
        assert_eq!(psi.dim(), 4);
        assert!((psi.density().matrix() - bell().matrix()).norm() < 1e-12);
    }

    #[test]
    fn purify_maximally_mixed_qubit() {
        let (psi, r) = purify(&DenseOperator::maximally_mixed(2));
        assert_eq!(r, 2);
        let red = partial_trace(&psi.density(), &[2, 2], &[0]).unwrap();
        assert!((red.matrix() - DenseOperator::maximally_mixed(2).matrix()).norm() < 1e-12);
        let env = partial_trace(&psi.density(), &[2, 2], &[1]).unwrap();
        assert!((env.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_validation() {
        assert!(bell().validate_density().is_ok());
        assert!(DenseOperator::diagonal(&[1.1, -0.1]).validate_density().is_err());
        assert!(DenseOperator::diagonal(&[0.5, 0.4]).validate_density().is_err());
        let mut m = CMatrix::identity(2, 2).scale(0.5);
        m[(0, 1)] = Complex64::new(0.0, 0.2);
        assert!(DenseOperator::wrap(m).validate_density().is_err());
    }

    #[test]
    fn eigen_sorted_ascending() {
        let s = DenseOperator::diagonal(&[0.5, -1.0, 2.0]).eigh();
        assert_eq!(s.values, vec![-1.0, 0.5, 2.0]);
    }
}
