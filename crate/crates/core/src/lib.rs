//! Regularized local projections with functional regressors and instruments,
//! structural functional VARs, Monte Carlo tooling and data ingestion.

pub mod covops;
pub mod error;
pub mod exec;
pub mod fiv;
pub mod flp;
pub mod fsvar;
pub mod hilbert;
pub mod ingest;
pub mod simlab;

pub use error::{Error, ErrorClass, Result};
pub use exec::Execution;
