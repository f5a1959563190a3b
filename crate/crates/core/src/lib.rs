//! Thermalization of a single spin coupled to a small (N-spin) dephased bath.
//!
//! The setup is a register of N bath spins plus one system spin, coupled by
//! energy-conserving exchange interactions V_ij = ξ_ij (σᵢ⁻σⱼ⁺ + σᵢ⁺σⱼ⁻),
//! with per-spin dephasing at rate α applied to the bath. Strong dephasing
//! turns the small bath into a Markovian heat source; this crate provides
//!
//! - [`register`]: spin operators, coupling-graph families, initial states;
//! - [`lindblad`]: exact propagation of the joint density matrix;
//! - [`reduced`]: closed-form and low-order ODE models of the reduced dynamics;
//! - [`trajectory`]: Monte-Carlo unraveling of dephasing as random projective
//!   σᶻ measurements;
//! - [`analysis`]: decay-rate fits, the γ_z/γ_x enhancement, asymptotic
//!   system-bath correlations, and recurrence detection.
//!
//! Conventions (fixed throughout and in all file formats): half-spin operators
//! with σᶻ = diag(1/2, −1/2), so polarizations lie in [−1/2, 1/2]; tensor
//! ordering is site-major with the system spin last; basis index bit 0 means
//! spin up. Everything is simulated in the interaction picture (the level
//! splitting h₀ commutes with V and enters only through thermal preparation).

// Force linking of the system OpenBLAS used by both ndarray and ndarray-linalg.
extern crate openblas_src;

pub mod analysis;
mod error;
pub mod linalg;
pub mod lindblad;
pub mod reduced;
pub mod register;
pub mod series;
pub mod trajectory;

pub use error::{Error, Result};

/// Complex scalar used for all operators and states.
pub type C64 = num_complex::Complex64;
