//! User scheduling for heterogeneous multiuser MIMO downlinks with block
//! diagonalization.
//!
//! The crate is layered bottom-up: [`subspace`] geometry, [`channel`]
//! generation, [`precoding`] and capacity, scheduling [`criteria`], the
//! [`schedulers`] themselves and the Monte Carlo [`harness`].

pub mod channel;
pub mod criteria;
pub mod error;
pub mod harness;
pub mod precoding;
pub mod schedulers;
pub mod subspace;

pub use error::{Error, Result};
