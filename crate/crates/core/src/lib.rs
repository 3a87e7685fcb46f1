//! Pseudodifferential operators on the circle: formal symbols, their
//! quantization on a truncated Fourier basis, ζ-regularized traces, the
//! Schwinger cocycle and the group of order-zero Fourier integral operators.

pub mod cocycle;
pub mod error;
pub mod fiogroup;
pub mod hurwitz;
pub mod operator;
pub mod quantize;
pub mod sampling;
pub mod symbol;
pub mod trigpoly;
pub mod zetatrace;

pub use cocycle::{cocycle_identity_check, schwinger, CocycleValue, EpsilonConvention, EpsilonSpec};
pub use error::{Error, Result};
pub use fiogroup::{
    exactness_check, fio_inverse, fio_multiply, holonomy_section, phase_projection, pseudolocality_witness, Diffeo,
    FIOElement,
};
pub use operator::Operator;
pub use quantize::{diffeo_matrix, realize, FiniteRankKernel, ModeGrid, OpMatrix, Sector};
pub use symbol::{
    builtin, compose, commutator, parity_class, split_minus, split_plus, wodzicki_res, Builtin, FormalSymbol, Parity,
};
pub use trigpoly::{Block, TrigPoly};
pub use zetatrace::{kv_trace, tr_q, zeta_laurent, LaurentAtZero, Weight};
