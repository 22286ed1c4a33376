//! Numerical toolkit for the time-dependent Hartree-Fock-Bogoliubov (HFB)
//! equations of a Bose gas on a periodic torus.
//!
//! The state of the gas is the quasifree triple (φ, γ, σ): condensate wave
//! function, one-body density matrix and pairing kernel. The crate covers
//!
//! * spectral discretization of the torus [−L, L]^d ([`grid`]);
//! * the quasifree data model, positivity/admissibility checks of the
//!   generalized density matrix Γ = [[γ, σ], [σ̄, 1+γ̄]], and Wick
//!   correlation functions ([`states`]);
//! * the mean-field operators b[γ], k(σ), h(γ) for grid-sampled and contact
//!   pair interactions ([`meanfield`]);
//! * RK4 / split-step integration of the HFB equations with conservation
//!   and structure diagnostics ([`dynamics`]);
//! * particle number, energy and the Hamiltonian-structure functional with
//!   its gradient identities ([`observables`]);
//! * symplectomorphism algebra, the constructive diagonalization flow for
//!   Γ, evolution of diagonalizing maps, and quasiparticle modes
//!   ([`symplectic`]);
//! * the self-consistent Gibbs fixed point, critical density and
//!   Bose-Einstein condensation diagnostics ([`gibbs`]);
//! * a versioned binary snapshot format for states ([`snapshot`]).
//!
//! Conventions: units with ℏ²/2m = 1 (dispersion |k|²), torus volume
//! |Λ| = (2L)^d, integrals as Δx^d-weighted sums, Fourier pair
//! f̂(k) = ∫f e^{−ikx}dx with f = |Λ|^{−1}Σ_k f̂ e^{ikx}.

pub mod error;
pub mod gibbs;
pub mod grid;
pub mod linalg;
pub mod meanfield;
pub mod dynamics;
pub mod observables;
pub mod snapshot;
pub mod states;
pub mod symplectic;

pub use error::{HfbError, Result};
