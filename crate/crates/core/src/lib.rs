//! Forward and inverse solvers for radial helium production-diffusion driven
//! by fractional Brownian motion.
//!
//! The direct problem is solved either by finite differences or through the
//! eigenfunction (mild) representation; the inverse problem recovers the
//! deterministic source `f` and the noise profile `g^2` from final-time
//! ensemble statistics.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod fbm;
pub mod forward;
pub mod functions;
pub mod inverse;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod tridiag;

pub use config::ExperimentConfig;
pub use ensemble::{run_ensemble, EnsembleConfig, EnsembleStats, NoiseSpec, SolverKind};
pub use error::{HeliosError, Result};
pub use experiment::{Command, Experiment};
pub use fbm::{FbmSampler, HurstIndex, PathEnsemble, TimeGrid};
pub use forward::{solve_fd, solve_mild, DiffusionProblem, FdScheme, FieldHistory, MildSolver};
pub use functions::{FunctionSpec, ScalarFn};
pub use inverse::{decay_probe, reconstruct, KernelConfig, KernelTable, Reconstruction};
pub use spectral::{ModalCoefficients, RadialGrid, SpectralBasis};
