pub mod capacity;
pub mod dyadic;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod frackernel;
pub mod quad;
pub mod sampling;
pub mod space;
pub mod subordinator;

pub use error::{Error, Result};
