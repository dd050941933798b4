//! Proxy-variable selection and causal-effect estimation for linear models
//! with latent confounders.

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod fixtures;
pub mod gin;
pub mod hsic;
pub mod io;
pub mod rank;
pub mod scm;
pub mod selection;

pub use data::{Covariance, Dataset, VarSet};
pub use error::{Error, Result};
