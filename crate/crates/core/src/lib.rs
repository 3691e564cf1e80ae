//! Event-driven simulation and scaling analysis of piecewise deterministic
//! Monte Carlo samplers (Zig-Zag and Bouncy Particle) on anisotropic Gaussian
//! and Student-t targets.
//!
//! The toolkit is organised around a small set of building blocks:
//!
//! * [`model`] — anisotropic Gaussian targets `N(0, Σ)` with
//!   `Σ = Uᵀ(Λ)²U`, `Λ = diag(Λ_K, εΛ_L)`, their reparametrisation
//!   `y = Λ⁻¹Ux`, and the structural matrix `Θ_L` driving fast-component
//!   jump rates; Student-t targets sharing the same scale matrix.
//! * [`event_clock`] — exact first-arrival sampling for inhomogeneous
//!   Poisson processes with piecewise-linear rate `(a + γt)₊`, plus a
//!   generic thinning loop for rates without a closed-form inverse.
//! * [`zigzag`] / [`bps`] — the two samplers as event-driven loops, exact
//!   for Gaussian targets and thinned for Student-t.
//! * [`limits`] — closed-form small-ε limit objects: the diffusion
//!   coefficient `Ω(θ)` of the slow coordinate, the Ornstein–Uhlenbeck
//!   reference process, the two-dimensional fluid ODE with its conserved
//!   quantity, the averaged reflection functional `c(α, β)`, and expected
//!   jump-count formulas.
//! * [`analysis`] — trajectory post-processing: grid discretisation,
//!   quadratic-variation and batch-means estimators, log-log regression,
//!   stationarity diagnostics.
//! * [`runner`] / [`config`] — reproducible, replica-parallel experiment
//!   drivers behind the `pdmp-aniso` command-line interface.
//!
//! All simulations are deterministic given `(master seed, config)`; replica
//! `i` draws from an independent stream derived via [`seed::replica_rng`].

pub mod analysis;
pub mod bps;
pub mod config;
pub mod error;
pub mod event_clock;
pub mod limits;
pub mod model;
pub mod runner;
pub mod seed;
pub mod special;
pub mod trajectory;
pub mod zigzag;

pub use error::Error;
