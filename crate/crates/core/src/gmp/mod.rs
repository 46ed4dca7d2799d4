//! Cycle-free factor-graph LMMSE equalizer.
//!
//! The state `x̄_k = [x_{k-J}; ...; x_k]` evolves as `x̄_{k+1} = G x̄_k +
//! F x_{k+1}` and is observed through `y_k = H̄ x̄_k + n_k`. Forward messages
//! travel in moment form, backward messages in dual form, and the two are
//! combined once every `L` steps to read off per-symbol posteriors.

mod equalizer;
mod message;
mod rules;

pub use equalizer::{
    backward_pass, combine, combine_and_extract, equalize, forward_pass, PosteriorBlock,
    StateSpace, VARIANCE_FLOOR,
};
pub use message::{
    hermitian_error, hermitian_inverse, min_eigenvalue, symmetrize, Dual, GaussianMessage, Moments,
};
pub use rules::{
    affine_bwd, affine_fwd, composite_backward, composite_forward, equality_combine, sum_bwd,
    sum_fwd,
};
