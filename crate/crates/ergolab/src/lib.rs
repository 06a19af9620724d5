//! Desk-scale laboratory for bilinear ergodic averages along `floor(alpha n)`.
//!
//! Every module works on finite windows of the integers (or a cyclic group
//! `Z_N`) and on an equispaced discretization of the torus.  Inequalities
//! with unspecified constants are checked by measuring a ratio and comparing
//! it against a frozen constant, see [`calibrate`].

pub mod averages;
pub mod calibrate;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod forest;
pub mod fourier;
pub mod grids;
pub mod params;
pub mod rng;
pub mod signals;

pub use error::{Error, Result};
pub use params::Params;
pub use signals::Signal;

pub use num_complex::Complex64;
