pub mod bandit;
pub mod error;
pub mod impact;
pub mod io;
pub mod itempair;
pub mod rng;
pub mod simulator;
pub mod traits;

pub use error::{Error, Result};
