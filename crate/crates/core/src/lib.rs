//! Numerical tools for the three-wave quadratic derivative Schrodinger system
//!
//! ```text
//! (i d_t + alpha Lap) u = -(div w) v
//! (i d_t + beta  Lap) v = -(div conj(w)) u
//! (i d_t + gamma Lap) w = grad(u . conj(v))
//! ```
//!
//! on the torus `T^d`, in the amplitude convention `f(x) = sum a(xi) exp(i xi.x)`.

pub mod diophantine;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod lattice_verify;
pub mod pde_solver;
pub mod planewave_ode;
mod quad;
pub mod resonance;
pub mod spectral_field;

pub use error::{Error, Result};
