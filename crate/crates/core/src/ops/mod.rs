//! Differentiable layer vocabulary and the tape that records it.

pub mod conv;
pub mod gradcheck;
pub mod layers;
pub mod mask;
pub mod param;
pub mod spectral;
pub mod tape;

pub use gradcheck::{grad_check, GradEntry, GradReport};
pub use mask::ModeMask;
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{Tape, Var};
