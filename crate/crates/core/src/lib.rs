//! Learning traffic splits over a network that can only be observed through
//! end-to-end delays.
//!
//! [`netsim`] simulates the hidden network, [`traffic`] produces demand,
//! [`env`] turns split decisions into delay observations, [`agents`] learns
//! splits and [`harness`] runs whole experiments.

pub mod agents;
pub mod env;
pub mod error;
pub mod fw;
pub mod harness;
pub mod netsim;
pub mod neural;
pub mod traffic;

pub use error::{Error, ErrorCategory, Result};
