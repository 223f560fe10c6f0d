//! Convex envelopes of the flux residual and the sets read off them.

pub mod envelope;
pub mod io;
pub mod lambda;
pub mod legendre;

pub use envelope::{
    convex_envelope, convex_envelope_with, fingerprint, g_eval, reconvexify, residual_surface, sigma_interval,
    sigma_interval_with_tol, z_interval, DualSpec, EnvelopeMeta, EnvelopeTable, SurfaceTable,
};
pub use io::{cached_envelope, read_envelope_bin, write_envelope_bin, write_envelope_csv, write_sets_csv, SetKind, SetRow};
pub use lambda::{g_lambda_upper, LaminateCertificate, LaminateSearch};
pub use legendre::{biconjugate, conjugate, legendre_conjugate_1d, lower_hull, Conjugate};
