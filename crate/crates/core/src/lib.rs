//! Synthetic aperture imaging through randomly heterogeneous media.
//!
//! The crate simulates frequency-domain backscatter data with the random
//! travel-time model, forms SAR, CINT, two-point CINT and HCINT images,
//! estimates the modulus of the reflectivity's Fourier transform from the
//! HCINT spectrum and reconstructs the reflectivity by positivity
//! constrained error-reduction phase retrieval. A Monte Carlo harness
//! checks the speckle statistics and resolution laws against closed forms
//! in [`theory`].

pub mod error;
pub mod forward;
pub mod harness;
pub mod imaging;
pub mod io;
pub mod medium;
pub mod rng;
pub mod scene;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use num_complex::Complex64;
