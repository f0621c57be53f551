//! Template Bayesian networks over relational data, their dependency-network
//! reading, and the tooling around it.

pub mod audit;
pub mod cli;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod ground;
pub mod rdn;
pub mod store;
pub mod template;

pub use error::{Error, Result};
