pub mod analysis;
pub mod block;
pub mod classical;
pub mod cli;
pub mod error;
pub mod fgr;
pub mod grid;
pub mod ladder;
pub mod melonic;
pub mod model;
pub mod verify;

pub use error::{Error, Result};
