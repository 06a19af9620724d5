//! Torus discretization, local multipliers and the floor-function machinery.

pub mod cutoffs;
pub mod dft;
pub mod fejer;
pub mod poisson;
pub mod sobolev;
pub mod spectrum;
pub mod torus;

pub use cutoffs::SmoothCutoff;
pub use fejer::{fejer_decompose, FejerDecomposition};
pub use poisson::{poisson_bilinear, PoissonCheck};
pub use sobolev::{omega_prime, shift_approx_check, sobolev_h12_check, sobolev_tail_check};
pub use spectrum::{extract_net, large_spectrum, omega, psi_delta, sample_bound_check};
pub use torus::{MultiplierKind, MultiplierMeta, MultiplierSample, TorusGrid};
