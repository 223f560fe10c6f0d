//! Numerical kernels for the weak closure of `u_t = (σ(u_x))_x` with a
//! non-monotone flux: monotone sets, convex envelopes, space-time fields,
//! the relaxation energy, negative-norm residuals and laminate sequences.

pub mod energy;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod flux;
pub mod hulls;
pub mod interval;
pub mod residual;

pub use error::{Error, Result};
pub use flux::{gamma_interval, monotone_set, FluxKind, FluxModel, Window};
pub use interval::IntervalSet;
