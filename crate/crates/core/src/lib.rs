//! Pseudo-spectral solver for the two-species Nernst-Planck-Navier-Stokes
//! system on the torus `[0, 2π)²`, driven by Kraichnan-type transport noise.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod noise;
pub mod spectral;

pub use diagnostics::{DecayFit, EnergyRecord, EnsembleStats, FitWindow};
pub use dynamics::{State, SystemParams, Valence};
pub use error::{NpnsError, Result};
pub use integrator::{integrate, Scheme, StepperConfig, TrajectoryError, TrajectoryResult};
pub use noise::{NoiseBasis, NoiseSpec};
pub use spectral::{Grid, SpectralScalar, SpectralVector};
