//! Channel representations, the built-in channel families and measurement statistics.

mod bell;
mod measure;
mod slice;
mod stokes;
mod zoo;

pub use bell::BellDistribution;
pub use measure::{
    degrade, eve_vectors, joint_distribution, outcome_alphabet, sample_distribution, DegradedSymbol, Protocol,
    SampleOutcome,
};
pub use slice::{
    bell_ryy_interval, candidate_set_bounds, CandidateSet, Omega, ParameterSlice, SliceKind, SliceRegion,
    FEASIBILITY_TOL,
};
pub use stokes::{choi_to_stokes, stokes_to_choi, Basis, ChoiOperator, StokesParams, CHOI_PSD_TOL};
pub use zoo::{make_channel, ChannelSpec};
