//! Reversible Bernstein diffusions for two Neumann heat problems.
//!
//! This crate constructs, simulates, and statistically verifies the class of
//! reversible diffusions whose endpoint law has density
//! `mu(x, y) = phi(x) g(y, T; x, 0) psi(y)` with respect to the geometry
//! measure, where `g` is the Neumann Green function of the heat semigroup
//! `d/dt = (1/2) Laplacian - V` on one of two state spaces:
//!
//! * **Interval**: `[0, 1]` with reflecting (Neumann) ends; cosine
//!   eigenbasis `cos(pi n x)`, eigenvalues `pi^2 n^2 / 2`.
//! * **DiskRadial**: the radius `r in [0, 1]` of the planar unit disk,
//!   restricted to radially symmetric data; Bessel eigenbasis
//!   `J0(sqrt(mu_n) r)` over the Neumann eigenvalues `mu_n` (squares of the
//!   roots of `J1`), eigenvalues `mu_n / 2`.
//!
//! The structure built on top of the Green function is the usual bridge
//! (h-transform) package: the endpoint measure, the pinned transition density
//! `p = g g / g`, the forward Markov kernel `m* = g* v_psi / v_psi`, the
//! backward kernel `m = g u_phi / u_phi`, the single-time occupation density
//! `rho = u_phi v_psi`, and the two log-gradient drifts `b* = d/dx ln v_psi`
//! and `b = -d/dx ln u_phi` driving the forward and backward Ito equations of
//! the same process.
//!
//! # Module map
//!
//! * [`special_functions`]: self-contained `J0`/`J1` evaluation on
//!   `[0, 250]` to ~1e-13 absolute accuracy and the disk's Neumann
//!   eigenvalues by bracketing + bisection + Newton polish.
//! * [`quadrature`]: composite Simpson rules shared by every mass and
//!   moment integral in the crate.
//! * [`spectral_core`]: eigenmode tables, spectral expansions of endpoint
//!   data, and the Green function in spectral and method-of-images form,
//!   under an explicit [`spectral_core::TruncationPolicy`].
//! * [`bernstein_model`]: the assembled model with its normalization,
//!   kernels, occupation and marginal densities, drifts, and
//!   constant-potential handling.
//! * [`sde_engine`]: reflected Euler simulation (forward and backward),
//!   exact kernel stepping, endpoint sampling, Girsanov path weights, and
//!   deterministic parallel ensembles.
//! * [`feynman_kac`]: Monte Carlo estimators of `u_phi` and `v_psi` over
//!   driftless reflected paths, with mandatory standard errors.
//! * [`verify_harness`]: quadrature identities and statistical hypothesis
//!   tests (chi-square / KS at the 1% level) turning the model's defining
//!   properties into executable checks, plus negative controls.
//! * [`config`]: flat `key=value` model configuration with named presets.
//!
//! # Conventions
//!
//! All states live in `[0, 1]`. The geometry measure is `dx` on the interval
//! and `2 pi r dr` (the radial reduction of planar area) on the disk; every
//! kernel exposed by [`bernstein_model`] has unit mass with respect to it.
//! Time runs in `[0, T]`. Randomness is always drawn from a counter-style
//! generator seeded per path, so parallel and serial runs produce identical
//! bytes.

pub mod bernstein_model;
pub mod config;
mod error;
pub mod feynman_kac;
pub mod quadrature;
pub mod sde_engine;
pub mod special_functions;
pub mod spectral_core;
pub mod verify_harness;

pub use error::{Error, Result};
