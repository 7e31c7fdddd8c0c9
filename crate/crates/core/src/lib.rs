pub mod concentration;
pub mod corpus;
pub mod error;
pub mod rng;
pub mod rounding;
pub mod lp;
pub mod multiobj;
pub mod negdep;
pub mod setfn;
pub mod verify;

pub use error::{Error, Result};
