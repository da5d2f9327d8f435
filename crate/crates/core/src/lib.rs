pub mod adn;
pub mod baselines;
pub mod cli;
pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod projection;
pub mod scenario;
pub mod tsso;
pub mod uc;

pub use error::{Error, Result};
