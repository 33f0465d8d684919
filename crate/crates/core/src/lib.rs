//! Secret-key rate analysis for qubit QKD protocols.
//!
//! Channels are handled through their Stokes parameters `(R, t)` and the
//! normalized Choi operator. All entropies are in bits.

// Negated comparisons such as `!(x > 0.0)` are used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod oneway;
pub mod optimize;
pub mod postprocessing;
pub mod quantum;
pub mod tomography;
pub mod twoway;

pub use channel::{
    make_channel, stokes_to_choi, Basis, BellDistribution, ChannelSpec, ChoiOperator, Omega, ParameterSlice, Protocol,
    StokesParams,
};
pub use error::{Error, Result};
