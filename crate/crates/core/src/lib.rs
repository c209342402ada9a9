//! Pseudo-differential calculus on sampled phase space.
//!
//! Functions on `R^n`, `R^2n` and `R^4n` are stored as [`SampledField`]s on
//! uniform grids. The modules provide, bottom-up:
//!
//! * [`symplectic`]: symplectic forms `omega(z,z') = z . Omega^{-1} z'`, Darboux
//!   factors `Omega = f J f^T` and capacities of ellipsoids.
//! * [`grid`]: grids, quadrature, plain/symplectic/deformed Fourier transforms,
//!   linear substitutions and the `PSWC` array format.
//! * [`ops`]: Heisenberg-Weyl, Grossmann-Royer and deformed phase-space
//!   translations, plus a generator-based metaplectic action.
//! * [`weyl`]: Weyl quantization, phase-space ("Bopp") operators, symbol
//!   extraction and the twisted product.
//! * [`wavepacket`]: cross-Wigner and wavepacket transforms, adjoints,
//!   projectors and orthonormal bases of `L^2(R^2n)`.
//! * [`spectral`]: Hermitian eigensolves, spectrum transfer and Shubin-class
//!   diagnostics.
//! * [`modspace`]: modulation-space norms, the Sjostrand symbol norm and the
//!   concentration certificate.

pub mod error;
mod fft;
pub mod grid;
pub mod modspace;
pub mod ops;
pub mod spectral;
pub mod symplectic;
pub mod wavepacket;
pub mod weyl;

pub use error::{Error, Result};
pub use grid::{GridSpec, SampledField};
pub use num_complex::Complex64;
pub use symplectic::{DarbouxFactor, SymplecticForm, WignerEllipsoid};
