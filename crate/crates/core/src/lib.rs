//! Random arc coverings of the circle with non-uniformly distributed centers.

// Parameter checks are written as !(x > 0.0) so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arcset;
pub mod cantor;
pub mod circle;
pub mod classify;
pub mod cli;
pub mod density;
pub mod energy;
pub mod kernels;
pub mod montecarlo;
pub mod seq;
