//! Truncated matrix-valued reproducing kernels and their unitary
//! invariants.
//!
//! A kernel here is a finite double power series
//! `K(μ, λ) = Σ A_{m,q} μ^m λ̄^q` with matrix coefficients, Hermitian
//! (`A_{m,q} = A_{q,m}*`) and positive as a block Gram matrix. Such data is
//! the local model for a classical family of Hilbert-space operators, and
//! everything this crate computes — curvature, normal forms, commutants,
//! equivalence witnesses — is an invariant or a certificate attached to
//! that model.
//!
//! The main entry points:
//!
//! * [`kernel::KernelSeries`] — the series itself: evaluation, congruence
//!   by holomorphic gauges, direct sums, validity checks.
//! * [`geometry`] — the induced metric, connection, curvature, covariant
//!   derivatives, and curvature-based invariants.
//! * [`normalize`] — the unique gauge that puts a kernel in normalized
//!   form (`K(μ, 0) ≡ I`), reducing gauge freedom to one constant unitary.
//! * [`commutant`] — commutant algebras of finite matrix families and a
//!   seeded, self-verifying block decomposition into irreducibles.
//! * [`equivalence`] — the full decision procedure for unitary
//!   equivalence, with explicit witnesses, plus intertwiner anatomy.
//! * [`zoo`] — weighted-shift kernels (Szegő, Bergman, and friends), jet
//!   constructions, and seeded random generators used throughout the
//!   tests.
//! * [`json`] — the serialization format shared with the CLI.
//!
//! Decisions are never inferred from intermediate successes alone: every
//! "yes" comes with a witness that has been re-substituted into the
//! defining equation and measured against explicit tolerances
//! ([`tol::Tolerances`]).

pub mod biseries;
pub mod commutant;
pub mod equivalence;
pub mod error;
pub mod geometry;
pub mod holo;
pub mod json;
pub mod kernel;
pub mod matrix;
pub mod normalize;
pub mod tol;
pub mod zoo;

pub use error::{Error, Result};
pub use kernel::KernelSeries;
pub use tol::Tolerances;
