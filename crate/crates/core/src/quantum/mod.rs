//! Dense linear algebra on small Hilbert spaces and the entropy functionals.

mod ccq;
mod entropy;
mod operator;

pub use ccq::{CcqState, Register};
pub use entropy::{
    binary_entropy, h, max_entropy_rank, min_entropy, shannon, shannon_entropy, smooth_min_entropy_product_bound,
    trace_distance, unnormalized_entropy, von_neumann_entropy, Distribution, MinEntropy,
};
pub use operator::{
    kron_vec, partial_trace, purify, CMatrix, CVector, DenseOperator, PureState, Spectrum, PSD_TOL, RANK_CUTOFF,
};
