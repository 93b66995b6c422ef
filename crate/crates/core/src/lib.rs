//! Dynamic mixed-membership stochastic blockmodel with monadic and dyadic
//! covariates, fitted by collapsed variational inference.

pub mod error;
pub mod init;
pub mod io;
pub mod model;
pub mod network;
pub mod predict;
pub mod simulate;
pub mod svi;
pub mod vem;

pub use error::{Error, Result};
pub use model::{GlobalStats, Hyperparams, LatentState, ModelSpec, VariationalParams};
pub use network::DynamicNetwork;
pub use vem::{fit_vem, FittedModel, VemConfig};
