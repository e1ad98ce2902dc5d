//! Spectral multipliers of the simple random walk on `Z^n`.

mod error;
mod fft;
pub mod calculus;
pub mod decay;
pub mod fit;
pub mod lattice;
pub mod multiplier;
pub mod norms;
pub mod restriction;
pub mod space;
mod scalar;

pub use error::{Error, Result};
pub use lattice::{GridSpec, LatticeKernel, Operand, TorusSymbol};
pub use multiplier::{MultiplierFunction, Smoothness, Support};
pub use scalar::Real;

pub type Kernel = LatticeKernel<f64>;
pub type KernelF32 = LatticeKernel<f32>;
pub type Symbol = TorusSymbol<f64>;
pub type Multiplier = MultiplierFunction<f64>;
