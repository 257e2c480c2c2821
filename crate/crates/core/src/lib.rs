//! Matrix-free 2D PET reconstruction with the smoothed higher-order
//! isotropic TV model.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: images and the first/second-order difference operators `B1`, `B2`.
//! * [`linop`]: the operator trait, a sparse system matrix and power iteration.
//! * [`objective`]: Poisson fidelity, SHOITV, proximity operators, `L̂`.
//! * [`simulator`]: phantoms, parallel-beam projector, attenuation, noise.
//! * [`solvers`]: PPGA, APPGA, FPPA, AFPPA and their diagnostics.
//! * [`metrics`]: NOFV, PSNR, NRC, CLP and RE.
//! * [`experiment`]: config-driven pipelines behind the `appga` binary.

pub mod error;
pub mod experiment;
pub mod grid;
pub mod linop;
pub mod metrics;
pub mod objective;
pub mod simulator;
pub mod solvers;

pub use error::{Error, Result};
pub use grid::{FirstOrderField, GroupField, Image, SecondOrderField};
pub use objective::{PoissonData, Problem, RegWeights, SmoothingParams};
