//! Two saturable two-level emitters in a one-dimensional waveguide, treated as
//! the mirrors of a nonlinear Fabry-Perot interferometer.
//!
//! All rates are measured in units of a reference decay rate, powers in photons
//! per lifetime, and lengths in photon wavelengths. The crate is organised
//! bottom-up:
//!
//! * [`emitter`]: steady state of a single driven emitter, its reflectance and
//!   reflection phase.
//! * [`cavity`]: coherent amplitude sums between and around the two mirrors.
//! * [`solver`]: self-consistent powers impinging on each emitter.
//! * [`transport`]: directional transmittance, rectification and intracavity
//!   intensity.
//! * [`sweep`] and [`search`]: parameter grids, CSV output and the rectifier
//!   design search.

pub mod cavity;
pub mod cli;
pub mod config;
pub mod emitter;
mod error;
pub mod search;
pub mod solver;
pub mod sweep;
pub mod transport;
pub mod validate;

pub use cavity::{CavityGeometry, ComplexAmplitude, MirrorPair};
pub use emitter::{BlochSteadyState, EmitterParams, EmitterResponse};
pub use error::{Error, Result};
pub use solver::{DeviceConfig, SolverSettings, SteadyStateSolution};
pub use transport::{Direction, IntensityProfile, RectificationResult};
