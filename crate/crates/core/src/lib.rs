//! Numerical verification of enhanced dissipation and Taylor dispersion for
//! passive scalars advected by shear flows `u = (v(y), 0)`.
//!
//! After a Fourier transform in the streamwise variable the mode `k` obeys
//! `g_t + H g = 0` with
//!
//! ```text
//! H = -nu d^2/dy^2 + i k (v(y) - lambda)
//! ```
//!
//! and the decay of `e^{-tH}` is controlled by the pseudospectral abscissa
//! `Psi(H) = inf_lambda sigma_min(H - i k lambda)`. The modules follow the
//! pipeline: shear [`profiles`], thickened level sets and cutoffs
//! ([`levelset`]), the discretized [`operator`], the [`resolvent`] scan,
//! time evolution ([`semigroup`]), parameter [`sweep`]s with power-law fits,
//! the separable 2D check ([`tensor`]) and the command-line driver ([`cli`]).

pub mod cli;
pub mod config;
pub mod error;
pub mod levelset;
pub mod operator;
pub mod par;
pub mod profiles;
pub mod report;
pub mod resolvent;
pub mod rng;
pub mod semigroup;
pub mod sweep;
pub mod tensor;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};
